"""Flat ``key = value`` configuration files, particle files and plan serialization.

Config files hold one ``key = value`` pair per line; ``#`` starts a comment.
Each consumer declares the keys it accepts, and unknown keys are errors.
Floats are written with 17 significant digits so that a dumped plan reads
back bit-identically.
"""

from __future__ import annotations

import math
from dataclasses import fields
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .experiments import SweepSetup
from .geometry import ParticleSystem
from .long_range import LongMode, LongRangePlan
from .mid_range import GridSpec, MidRangePlan
from .params import SelectionOptions, SolverPlan
from .sog import SogDecomposition
from .windows import WindowKind, WindowSpec


class ConfigError(ValueError):
    """Malformed config or particle file; messages carry the source and line number."""


# --- value formatting -------------------------------------------------------------


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def fmt_value(v: Any) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (WindowKind, LongMode)):
        return v.value
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(fmt_value(x) for x in v)
    return str(v)


def _optional(conv: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(text: str) -> Any:
        return None if text.strip().lower() == "none" else conv(text)

    return parse


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(",", " ").split())


Schema = dict[str, Callable[[str], Any]]

SELECTION_KEYS: Schema = {
    "eps": float,
    "c_rat": float,
    "r_c": _optional(float),
    "rc_tuning": float,
    "rc_margin": float,
    "window": WindowKind,
    "long_window": WindowKind,
    "long_mode": _optional(LongMode),
    "P_max": int,
    "Q_max": int,
    "assumption_factor": float,
    "workers": int,
}

PLAN_KEYS: Schema = {
    **SELECTION_KEYS,
    "n": int,
    "box": _floats,
    "b": float,
    "sigma": float,
    "omega": float,
    "M": int,
    "eta": _optional(float),
    "mid_counts": _optional(_ints),
    "mid_support": _optional(_ints),
    "mid_shape": _optional(_floats),
    "lambda_z": _optional(float),
    "delta_z": _optional(float),
    "cheb_degree": _optional(int),
    "long_k_max": _optional(float),
    "long_counts": _optional(_ints),
    "long_support": _optional(_ints),
    "long_shape": _optional(_floats),
    "taylor_order": _optional(int),
}

SWEEP_KEYS: Schema = {
    "n": int,
    "box": _floats,
    "seed": int,
    "b": float,
    "r_c": float,
    "M": _optional(int),
    "eta": float,
    "m": _optional(int),
    "window": WindowKind,
    "support": int,
    "I": int,
    "lambda_z": float,
    "I_long": int,
    "P_cheb": int,
    "Q": int,
    "long_support": int,
    "oracle": str,
}


# --- parsing ------------------------------------------------------------------------


def parse_config(text: str, schema: Schema, source: str = "<config>") -> dict[str, Any]:
    """Parse ``key = value`` lines against ``schema``.

    Raises
    ------
    ConfigError
        On malformed lines, unknown or duplicate keys and unparsable values.
    """
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = _convert(key, value, schema, f"{source}:{lineno}", out)
    return out


def parse_overrides(items: list[str], schema: Schema) -> dict[str, Any]:
    """Parse ``key=value`` command-line overrides."""
    out: dict[str, Any] = {}
    for i, item in enumerate(items, start=1):
        if "=" not in item:
            raise ConfigError(f"--set #{i}: expected key=value, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        out[key] = _convert(key, value, schema, f"--set #{i}", out)
    return out


def _convert(key: str, value: str, schema: Schema, where: str, seen: dict) -> Any:
    if key not in schema:
        raise ConfigError(f"{where}: unknown key {key!r} (known: {', '.join(sorted(schema))})")
    if key in seen:
        raise ConfigError(f"{where}: duplicate key {key!r}")
    try:
        return schema[key](value)
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None


def read_config(path: str | Path, schema: Schema) -> dict[str, Any]:
    p = Path(path)
    return parse_config(p.read_text(), schema, str(p))


def format_config(values: dict[str, Any]) -> str:
    return "".join(f"{k} = {fmt_value(v)}\n" for k, v in values.items())


# --- selection options and sweep setups -------------------------------------------------


def options_from_config(cfg: dict[str, Any]) -> tuple[float | None, SelectionOptions]:
    """Split a selection config into the tolerance and :class:`SelectionOptions`."""
    names = {f.name for f in fields(SelectionOptions)}
    kw = {k: v for k, v in cfg.items() if k in names}
    return cfg.get("eps"), SelectionOptions(**kw)


def setup_from_config(cfg: dict[str, Any]) -> SweepSetup:
    kw = dict(cfg)
    if "box" in kw:
        if len(kw["box"]) != 3:
            raise ConfigError("box needs three lengths")
        kw["box"] = tuple(kw["box"])
    return SweepSetup(**kw)


# --- plans ------------------------------------------------------------------------------


def plan_to_config(plan: SolverPlan) -> dict[str, Any]:
    """Every field needed to rebuild ``plan`` exactly."""
    d = plan.decomp
    o = plan.options
    out: dict[str, Any] = {
        "eps": plan.eps, "n": plan.n, "box": plan.box,
        "c_rat": o.c_rat, "r_c": d.r_c, "rc_tuning": o.rc_tuning, "rc_margin": o.rc_margin,
        "P_max": o.P_max, "Q_max": o.Q_max, "assumption_factor": o.assumption_factor,
        "workers": o.workers,
        "b": d.b, "sigma": d.sigma, "omega": d.omega, "M": d.M, "eta": d.eta,
        "window": o.window, "mid_counts": None, "mid_support": None, "mid_shape": None,
        "lambda_z": None, "delta_z": None,
        "long_mode": None, "long_window": o.long_window, "cheb_degree": None, "long_k_max": None,
        "long_counts": None, "long_support": None, "long_shape": None, "taylor_order": None,
    }
    if plan.mid is not None:
        g, w = plan.mid.grid, plan.mid.window
        out.update(window=w.kind, mid_counts=g.counts, mid_support=w.support, mid_shape=w.shape,
                   lambda_z=g.lambda_z, delta_z=g.delta_z)
    lp = plan.long
    if lp is not None:
        out.update(long_mode=lp.mode, cheb_degree=lp.cheb_degree)
        if lp.mode is LongMode.DIRECT:
            out["long_k_max"] = lp.k_max
        else:
            assert lp.window is not None
            out.update(long_window=lp.window.kind, long_counts=lp.counts, long_support=lp.window.support,
                       long_shape=lp.window.shape, taylor_order=lp.taylor_order)
    return out


def is_plan_config(cfg: dict[str, Any]) -> bool:
    return "b" in cfg


def plan_from_config(cfg: dict[str, Any]) -> SolverPlan:
    """Rebuild a :class:`SolverPlan` written by :func:`plan_to_config`."""
    need = ["eps", "n", "box", "b", "sigma", "omega", "r_c", "M"]
    missing = [k for k in need if cfg.get(k) is None]
    if missing:
        raise ConfigError(f"plan config lacks {', '.join(missing)}")
    box = tuple(float(x) for x in cfg["box"])
    if len(box) != 3:
        raise ConfigError("box needs three lengths")
    _, opts = options_from_config(cfg)
    eta = cfg.get("eta")
    decomp = SogDecomposition(cfg["b"], cfg["sigma"], cfg["omega"], cfg["r_c"], cfg["M"],
                              eta, box[2] if eta is not None else None)
    mid = None
    if cfg.get("mid_counts") is not None:
        counts = tuple(cfg["mid_counts"])
        mesh = tuple(L / I for L, I in zip(box, counts))
        window = WindowSpec(cfg.get("window", WindowKind.KB), tuple(cfg["mid_support"]), mesh,
                            shape=cfg.get("mid_shape"))
        grid = GridSpec(counts, box, cfg["lambda_z"], cfg["delta_z"])
        mid = MidRangePlan(decomp, window, grid, opts.workers)
    long = None
    mode = cfg.get("long_mode")
    if mode is not None:
        P = cfg["cheb_degree"]
        if mode is LongMode.DIRECT:
            long = LongRangePlan(decomp, box, mode, P, k_max=cfg["long_k_max"], workers=opts.workers)
        else:
            counts = tuple(cfg["long_counts"])
            mesh = (box[0] / counts[0], box[1] / counts[1])
            window = WindowSpec(cfg.get("long_window", WindowKind.KB), tuple(cfg["long_support"]), mesh,
                                shape=cfg.get("long_shape"))
            long = LongRangePlan(decomp, box, mode, P, counts=counts, window=window,
                                 taylor_order=cfg.get("taylor_order"), workers=opts.workers)
    return SolverPlan(decomp, box, cfg["eps"], cfg["n"], mid, long, opts)


# --- particle files ----------------------------------------------------------------------


def format_particles(system: ParticleSystem, meta: dict[str, Any] | None = None) -> str:
    """Header ``N Lx Ly Lz`` followed by one ``x y z q`` line per particle.

    ``meta`` entries are written as leading ``# key = value`` comment lines.
    """
    lines = [f"# {k} = {fmt_value(v)}" for k, v in (meta or {}).items()]
    lines.append(" ".join([str(system.n)] + [fmt_float(L) for L in system.box]))
    for (x, y, z), q in zip(system.positions, system.charges):
        lines.append(" ".join(fmt_float(v) for v in (x, y, z, q)))
    return "\n".join(lines) + "\n"


def write_particles(path: str | Path, system: ParticleSystem, meta: dict[str, Any] | None = None) -> None:
    Path(path).write_text(format_particles(system, meta))


def parse_particles(text: str, source: str = "<particles>") -> ParticleSystem:
    """Parse the particle format of :func:`format_particles`; ``#`` lines are comments.

    Raises
    ------
    ConfigError
        With the offending line number for malformed lines or a count mismatch.
    """
    header: tuple[int, tuple[float, float, float]] | None = None
    rows: list[list[float]] = []
    last = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            what = "'N Lx Ly Lz'" if header is None else "'x y z q'"
            raise ConfigError(f"{source}:{lineno}: expected {what}, got {raw.strip()!r}")
        try:
            if header is None:
                n = int(parts[0])
                header = (n, (float(parts[1]), float(parts[2]), float(parts[3])))
                if n < 1:
                    raise ValueError("particle count must be positive")
                continue
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in vals):
            raise ConfigError(f"{source}:{lineno}: non-finite value in {raw.strip()!r}")
        rows.append(vals)
        last = lineno
    if header is None:
        raise ConfigError(f"{source}: missing 'N Lx Ly Lz' header")
    n, box = header
    if len(rows) != n:
        raise ConfigError(f"{source}:{last}: header announces {n} particles, found {len(rows)}")
    arr = np.array(rows)
    return ParticleSystem(arr[:, :3], arr[:, 3], box)


def read_particles(path: str | Path) -> ParticleSystem:
    p = Path(path)
    return parse_particles(p.read_text(), str(p))
