"""Command-line runner: flat config file plus flags in, CSV tables and SVG plots out.

    altchain solve --n_sites 32 --gamma 1 --out results/ --plot
    altchain sweep --config gamma_scan.cfg

Config files hold one ``key = value`` per line; ``#`` starts a comment.  Any
key can also be given as a flag (``--key value``), and flags win over the
file.  ``gamma`` sets ``gamma_left`` and ``gamma_right`` together.

Exit codes: 0 on success, 2 on a config error (the message cites the line or
the flag), 3 on an engine error (the message starts with the engine error code).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import IoFailure, NessError
from .model import ChainSpec, FirstMass

MODES = ("solve", "greens", "asymptotic", "simulate", "strip", "sweep")

PROFILE_HEADER = ["site", "mass", "temperature", "stderr"]
CURRENT_HEADER = ["bond", "current", "stderr"]
SWEEP_HEADER = ["param", "T_odd", "T_even", "J", "acoustic_J", "optical_J"]
BULK_HEADER = ["parity", "T_odd", "T_even", "J", "acoustic_T_odd", "optical_T_odd",
               "acoustic_T_even", "optical_T_even", "acoustic_J", "optical_J"]
STRIP_HEADER = ["layer", "column", "mass", "temperature", "stderr"]
LAYER_HEADER = ["layer", "mean_temperature"]


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


KEYS: dict[str, Callable[[str], object]] = {
    # chain / strip
    "n_sites": int, "mass_a": float, "mass_b": float, "spring_k": float, "pin_k0": float,
    "gamma_left": float, "gamma_right": float, "gamma": float,
    "temp_left": float, "temp_right": float, "first_mass": str,
    "n_layers": int, "width": int, "strip_method": str,
    # simulation
    "dt": float, "n_steps": int, "burn_in": int, "seed": int, "lambda": float,
    "noise_kind": str, "block_size": int, "scheduler": str, "replicas": int,
    # band engine / sweep
    "parity": str, "normalize_units": _parse_bool,
    "sweep_param": str, "sweep_min": float, "sweep_max": float,
    "sweep_points": int, "sweep_engine": str, "workers": int,
    # run
    "mode": str, "out": str, "plot": _parse_bool,
}

CHAIN_FIELDS = [f.name for f in dataclasses.fields(ChainSpec)]
SWEEPABLE = ("mass_a", "mass_b", "spring_k", "pin_k0", "gamma_left", "gamma_right", "gamma",
             "temp_left", "temp_right")


class ConfigError(Exception):
    def __init__(self, where: str, msg: str):
        self.where = where
        super().__init__(f"{where}: {msg}")


@dataclass
class _Raw:
    values: dict = field(default_factory=dict)
    origin: dict = field(default_factory=dict)

    def put(self, key: str, text: str, where: str):
        if key not in KEYS:
            raise ConfigError(where, f"unknown key {key!r}")
        try:
            self.values[key] = KEYS[key](text.strip())
        except ValueError as exc:
            raise ConfigError(where, f"bad value for {key!r}: {exc}") from None
        self.origin[key] = where

    def where(self, key: str) -> str:
        return self.origin.get(key, "config")


def parse_config_text(text: str, source: str = "config", raw: _Raw | None = None) -> _Raw:
    raw = raw or _Raw()
    seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        where = f"{source}:{lineno}"
        if "=" not in body:
            raise ConfigError(where, f"expected 'key = value', got {body!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if not key or not value:
            raise ConfigError(where, f"expected 'key = value', got {body!r}")
        if key in seen:
            raise ConfigError(where, f"duplicate key {key!r} (first set on line {seen[key]})")
        seen[key] = lineno
        raw.put(key, value, where)
    return raw


def _parse_flag_overrides(tokens: list[str], raw: _Raw) -> None:
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigError(f"argument {tok!r}", "expected --key value")
        if "=" in tok:
            key, value = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"flag {tok}", "missing value")
            key, value = tok[2:], tokens[i + 1]
            i += 2
        raw.put(key.replace("-", "_"), value, f"flag --{key}")


# ---------------------------------------------------------------- experiment


@dataclass(frozen=True)
class SweepAxis:
    param: str
    lo: float
    hi: float
    points: int
    engine: str = "asymptotic"

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.points) if self.points > 0 else np.zeros(0)


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    chain: ChainSpec | None = None
    strip: object | None = None
    sim: object | None = None
    sweep: SweepAxis | None = None
    out: Path = Path(".")
    plot: bool = False
    parity: str | None = None
    replicas: int = 1
    workers: int = 1
    strip_method: str = "Lyapunov"
    normalize: bool = False


def _chain_from(raw: _Raw) -> ChainSpec:
    v = raw.values
    kw = {k: v[k] for k in CHAIN_FIELDS if k in v}
    if "gamma" in v:
        for side in ("gamma_left", "gamma_right"):
            if side in v:
                raise ConfigError(raw.where(side), f"{side} conflicts with gamma")
            kw[side] = v["gamma"]
    if "first_mass" in kw:
        try:
            kw["first_mass"] = FirstMass(kw["first_mass"].upper())
        except ValueError:
            raise ConfigError(raw.where("first_mass"), "first_mass must be A or B") from None
    kw.setdefault("n_sites", 32)
    return ChainSpec(**kw)


def _sim_from(raw: _Raw, chain: ChainSpec | None):
    from .langevin import NoiseKind, Scheduler, SimConfig, default_dt

    v = raw.values
    n_steps = v.get("n_steps", 1_000_000)
    kind_map = {k.value.lower(): k for k in NoiseKind}
    kind_text = str(v.get("noise_kind", "None")).lower()
    if kind_text not in kind_map:
        raise ConfigError(raw.where("noise_kind"),
                          f"noise_kind must be one of {[k.value for k in NoiseKind]}")
    try:
        scheduler = Scheduler(str(v.get("scheduler", "bernoulli")).lower())
    except ValueError:
        raise ConfigError(raw.where("scheduler"), "scheduler must be bernoulli or exponential") from None
    dt = v.get("dt")
    if dt is None:
        dt = default_dt(chain) if chain is not None else 0.002
    return SimConfig(
        dt=dt,
        n_steps=n_steps,
        burn_in=v.get("burn_in", n_steps // 10),
        seed=v.get("seed", 0),
        lam=v.get("lambda", 0.0),
        noise_kind=kind_map[kind_text],
        block_size=v.get("block_size"),
        scheduler=scheduler,
    )


def _strip_from(raw: _Raw):
    from .lattice2d import StripSpec

    v = raw.values
    kw = {k: v[k] for k in ("mass_a", "mass_b", "spring_k", "gamma_left", "gamma_right",
                             "temp_left", "temp_right") if k in v}
    if "gamma" in v:
        kw["gamma_left"] = kw["gamma_right"] = v["gamma"]
    return StripSpec(n_layers=v.get("n_layers", 32), width=v.get("width", 4), **kw)


def build_experiment(mode: str | None, raw: _Raw) -> ExperimentConfig:
    v = raw.values
    file_mode = v.get("mode")
    if mode and file_mode and mode != file_mode:
        raise ConfigError(raw.where("mode"), f"mode {file_mode!r} conflicts with subcommand {mode!r}")
    mode = mode or file_mode
    if mode not in MODES:
        raise ConfigError(raw.where("mode") if file_mode else "command line",
                          f"mode must be one of {', '.join(MODES)}")
    parity = v.get("parity")
    if parity is not None and parity not in ("even", "odd"):
        raise ConfigError(raw.where("parity"), "parity must be even or odd")
    chain = _chain_from(raw)
    sweep = None
    if mode == "sweep":
        param = v.get("sweep_param", "gamma")
        if param not in SWEEPABLE:
            raise ConfigError(raw.where("sweep_param"),
                              f"sweep_param must name a real scalar spec field: {', '.join(SWEEPABLE)}")
        engine = v.get("sweep_engine", "asymptotic")
        if engine not in ("asymptotic", "solve", "greens"):
            raise ConfigError(raw.where("sweep_engine"), "sweep_engine must be asymptotic, solve or greens")
        points = v.get("sweep_points", 60)
        if points < 0:
            raise ConfigError(raw.where("sweep_points"), "sweep_points must be >= 0")
        sweep = SweepAxis(param, v.get("sweep_min", 0.05), v.get("sweep_max", 3.0), points, engine)
    strip_method = v.get("strip_method", "Lyapunov")
    if strip_method not in ("Lyapunov", "Simulate"):
        raise ConfigError(raw.where("strip_method"), "strip_method must be Lyapunov or Simulate")
    strip = _strip_from(raw) if mode == "strip" else None
    sim = None
    if mode == "simulate" or (mode == "strip" and strip_method == "Simulate"):
        sim = _sim_from(raw, chain if mode == "simulate" else None)
    return ExperimentConfig(
        mode=mode, chain=chain, strip=strip, sim=sim, sweep=sweep,
        out=Path(v.get("out", ".")), plot=bool(v.get("plot", False)), parity=parity,
        replicas=v.get("replicas", 1), workers=v.get("workers", 1), strip_method=strip_method,
        normalize=bool(v.get("normalize_units", False)),
    )


# ---------------------------------------------------------------- output


def fmt(x) -> str:
    """12 significant digits; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return ""
    return f"{x:.12g}"


def _atomic_write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    _atomic_write(path, buf.getvalue())


def svg_line_plot(series: dict, xlabel: str, ylabel: str, title: str = "",
                  width: int = 640, height: int = 420) -> str:
    """Minimal self-contained SVG line chart; ``series`` maps name -> (x, y)."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    ml, mr, mt, mb = 70, 20, 35, 55
    xs = [np.asarray(x, float) for x, _ in series.values()]
    ys = [np.asarray(y, float) for _, y in series.values()]
    allx = np.concatenate(xs) if xs else np.zeros(0)
    ally = np.concatenate(ys) if ys else np.zeros(0)
    allx, ally = allx[np.isfinite(allx)], ally[np.isfinite(ally)]
    x0, x1 = (allx.min(), allx.max()) if allx.size else (0.0, 1.0)
    y0, y1 = (ally.min(), ally.max()) if ally.size else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = width - ml - mr, height - mt - mb

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + (1 - (y - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in np.linspace(x0, x1, 6):
        out.append(f'<line x1="{px(t):.2f}" y1="{mt + ph}" x2="{px(t):.2f}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{mt + ph + 18}" text-anchor="middle">{t:.4g}</text>')
    for t in np.linspace(y0, y1, 6):
        out.append(f'<line x1="{ml - 5}" y1="{py(t):.2f}" x2="{ml}" y2="{py(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{py(t) + 4:.2f}" text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 12}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text transform="translate(16 {mt + ph / 2}) rotate(-90)" text-anchor="middle">{_esc(ylabel)}</text>')
    if title:
        out.append(f'<text x="{ml + pw / 2}" y="{mt - 12}" text-anchor="middle">{_esc(title)}</text>')
    for k, (name, x, y) in enumerate(zip(series, xs, ys)):
        c = colors[k % len(colors)]
        ok = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        if pts:
            out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
            for a, b in zip(x[ok], y[ok]):
                out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2.5" fill="{c}"/>')
        ly = mt + 14 + 16 * k
        out.append(f'<line x1="{ml + pw - 120}" y1="{ly}" x2="{ml + pw - 100}" y2="{ly}" stroke="{c}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw - 95}" y="{ly + 4}">{_esc(name)}</text>')
    out.append("</svg>\n")
    return "\n".join(out)


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def emit_profile(out: Path, masses, temps, t_err, currents, j_err, plot: bool, title: str) -> None:
    n = len(temps)
    write_csv(out / "profile.csv", PROFILE_HEADER,
              ((i + 1, masses[i], temps[i], None if t_err is None else t_err[i]) for i in range(n)))
    write_csv(out / "current.csv", CURRENT_HEADER,
              ((i + 1, currents[i], None if j_err is None else j_err[i]) for i in range(len(currents))))
    if plot:
        site = np.arange(1, n + 1)
        odd = site % 2 == 1
        _atomic_write(out / "plot.svg", svg_line_plot(
            {"odd sites": (site[odd], temps[odd]), "even sites": (site[~odd], temps[~odd])},
            "site i", "temperature T_i", title))


# ---------------------------------------------------------------- modes


def _run_solve(cfg: ExperimentConfig) -> None:
    from .lyapunov import solve_chain

    prof = solve_chain(cfg.chain)
    emit_profile(cfg.out, cfg.chain.masses(), prof.temperatures, None, prof.bond_currents, None,
                 cfg.plot, f"covariance solve, N = {cfg.chain.n_sites}")


def _run_greens(cfg: ExperimentConfig) -> None:
    from .greens import greens_profile

    prof = greens_profile(cfg.chain).profile
    emit_profile(cfg.out, cfg.chain.masses(), prof.temperatures, None, prof.bond_currents, None,
                 cfg.plot, f"frequency integrals, N = {cfg.chain.n_sites}")


def _run_simulate(cfg: ExperimentConfig) -> None:
    from .langevin import run_ness, run_replicas

    if cfg.replicas > 1:
        prof = run_replicas(cfg.chain, cfg.sim, cfg.replicas, cfg.workers)
    else:
        prof = run_ness(cfg.chain, cfg.sim)
    emit_profile(cfg.out, cfg.chain.masses(), prof.temperatures, prof.temp_stderr,
                 prof.bond_currents, prof.current_stderr, cfg.plot,
                 f"simulation, N = {cfg.chain.n_sites}, {cfg.sim.noise_kind.value} noise")


def _run_asymptotic(cfg: ExperimentConfig) -> None:
    from .asymptotic import bulk_for_spec

    r = bulk_for_spec(cfg.chain, cfg.parity, cfg.normalize)
    write_csv(cfg.out / "bulk.csv", BULK_HEADER, [[
        r.parity, r.T_odd, r.T_even, r.J, r.odd_parts.acoustic, r.odd_parts.optical,
        r.even_parts.acoustic, r.even_parts.optical, r.current_parts.acoustic,
        r.current_parts.optical]])


def _run_strip(cfg: ExperimentConfig) -> None:
    from .lattice2d import strip_profile

    spec = cfg.strip
    prof = strip_profile(spec, cfg.strip_method, cfg.sim)
    n, w = spec.n_layers, spec.width
    m = spec.masses().reshape(n, w)
    t = prof.temperatures
    te = prof.temp_stderr
    write_csv(cfg.out / "profile.csv", PROFILE_HEADER,
              ((k + 1, m.ravel()[k], t.ravel()[k], None if te is None else te.ravel()[k])
               for k in range(n * w)))
    write_csv(cfg.out / "strip.csv", STRIP_HEADER,
              ((i + 1, j + 1, m[i, j], t[i, j], None if te is None else te[i, j])
               for i in range(n) for j in range(w)))
    write_csv(cfg.out / "layers.csv", LAYER_HEADER,
              ((i + 1, prof.layer_means[i]) for i in range(n)))
    ce = prof.cut_stderr
    write_csv(cfg.out / "current.csv", CURRENT_HEADER,
              ((i + 1, prof.cut_currents[i], None if ce is None else ce[i])
               for i in range(n - 1)))
    if cfg.plot:
        layer = np.arange(1, n + 1)
        series = {"layer mean": (layer, prof.layer_means)}
        for j in range(min(w, 2)):
            series[f"column {j + 1}"] = (layer, t[:, j])
        _atomic_write(cfg.out / "plot.svg", svg_line_plot(
            series, "layer i", "temperature", f"strip {n} x {w}"))


def sweep_point(chain: ChainSpec, axis: SweepAxis, value: float, parity: str | None,
                normalize: bool = False) -> list:
    """One row of ``sweep.csv``."""
    if axis.param == "gamma":
        spec = chain.replace(gamma_left=value, gamma_right=value)
    else:
        spec = chain.replace(**{axis.param: value})
    if axis.engine == "asymptotic":
        from .asymptotic import bulk_for_spec

        r = bulk_for_spec(spec, parity, normalize)
        return [value, r.T_odd, r.T_even, r.J, r.current_parts.acoustic, r.current_parts.optical]
    from .lyapunov import bulk_sublattice_means, solve_chain

    if axis.engine == "solve":
        prof = solve_chain(spec)
    else:
        from .greens import greens_profile

        prof = greens_profile(spec).profile
    t_odd, t_even = bulk_sublattice_means(prof.temperatures)
    return [value, t_odd, t_even, prof.mean_current, None, None]


def _run_sweep(cfg: ExperimentConfig) -> None:
    axis = cfg.sweep
    values = axis.values()
    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        rows = list(pool.map(
            lambda x: sweep_point(cfg.chain, axis, float(x), cfg.parity, cfg.normalize), values))
    write_csv(cfg.out / "sweep.csv", SWEEP_HEADER, rows)
    if cfg.plot and rows:
        arr = np.array([[np.nan if v is None else v for v in r] for r in rows], dtype=float)
        _atomic_write(cfg.out / "plot.svg", svg_line_plot(
            {"T_odd": (arr[:, 0], arr[:, 1]), "T_even": (arr[:, 0], arr[:, 2])},
            axis.param, "bulk temperature", f"{axis.engine} sweep"))


RUNNERS = {
    "solve": _run_solve,
    "greens": _run_greens,
    "asymptotic": _run_asymptotic,
    "simulate": _run_simulate,
    "strip": _run_strip,
    "sweep": _run_sweep,
}


def run(cfg: ExperimentConfig) -> int:
    """Dispatch to the engine and write outputs; returns the exit status."""
    try:
        RUNNERS[cfg.mode](cfg)
    except NessError as exc:
        _report_engine_error(exc)
        return 3
    return 0


def _report_engine_error(exc: NessError) -> None:
    msg = str(exc)
    if not msg.startswith(exc.code):
        msg = f"{exc.code}: {msg}"
    print(f"error: {msg}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="altchain",
        description="Steady states of harmonic chains with alternating masses.",
        epilog="Any config key may be passed as --key value (e.g. --n_sites 64 --gamma 0.5).",
    )
    p.add_argument("mode", nargs="?", choices=MODES, help="engine to run")
    p.add_argument("--config", type=Path, help="flat 'key = value' config file")
    p.add_argument("--out", help="output directory (default: current directory)")
    p.add_argument("--seed", help="RNG seed for the simulator")
    p.add_argument("--plot", action="store_true", help="also write plot.svg")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    raw = _Raw()
    try:
        if args.config is not None:
            try:
                text = args.config.read_text()
            except OSError as exc:
                raise ConfigError(str(args.config), f"cannot read config: {exc.strerror}") from None
            parse_config_text(text, str(args.config), raw)
        _parse_flag_overrides(extra, raw)
        if args.out is not None:
            raw.put("out", args.out, "flag --out")
        if args.seed is not None:
            raw.put("seed", args.seed, "flag --seed")
        if args.plot:
            raw.put("plot", "true", "flag --plot")
        cfg = build_experiment(args.mode, raw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NessError as exc:
        _report_engine_error(exc)
        return 3
    return run(cfg)


if __name__ == "__main__":
    raise SystemExit(main())
