"""Command-line interface: ``sogq2d {gen,params,solve,oracle,sweep,bench}``.

All tables are CSV with a header row, preceded by ``#``-prefixed metadata
lines.  Floats carry 17 significant digits.  The exit code is 0 only if
every requested computation succeeded.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Any, Sequence, TextIO

import numpy as np

from .config import (
    PLAN_KEYS,
    SELECTION_KEYS,
    SWEEP_KEYS,
    ConfigError,
    fmt_float,
    fmt_value,
    format_config,
    format_particles,
    is_plan_config,
    options_from_config,
    parse_overrides,
    plan_from_config,
    plan_to_config,
    read_config,
    read_particles,
    setup_from_config,
)
from .experiments import SweepKind, run_sweep
from .geometry import GeometryError, random_system
from .mid_range import PlanError
from .oracle import OracleError, direct_shell_sum, ewald2d_potentials
from .params import InfeasibleError, SelectionOptions, predict_cost, select_parameters, with_particles
from .sog import PRESETS, DecompositionError
from .solver import compute_components, relative_error, solve

THREADS_ENV = "SOGQ2D_THREADS"


def default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


class _Out:
    """Writes to a file or stdout and closes only what it opened."""

    def __init__(self, path: str | None):
        self.path = path

    def __enter__(self) -> TextIO:
        self.fh = open(self.path, "w") if self.path else sys.stdout
        return self.fh

    def __exit__(self, *exc) -> None:
        if self.path:
            self.fh.close()


def _meta(fh: TextIO, values: dict[str, Any]) -> None:
    for k, v in values.items():
        fh.write(f"# {k} = {fmt_value(v)}\n")


def _load(args, schema) -> dict[str, Any]:
    cfg: dict[str, Any] = read_config(args.config, schema) if getattr(args, "config", None) else {}
    cfg.update(parse_overrides(getattr(args, "set", None) or [], schema))
    return cfg


def _selection(args) -> tuple[float | None, SelectionOptions, dict[str, Any]]:
    cfg = _load(args, PLAN_KEYS)
    cfg.setdefault("workers", args.threads if args.threads else default_workers())
    if getattr(args, "eps", None) is not None:
        cfg["eps"] = args.eps
    if is_plan_config(cfg):
        return cfg.get("eps"), SelectionOptions(), cfg
    unknown = set(cfg) - set(SELECTION_KEYS)
    if unknown:
        raise ConfigError(f"plan keys {sorted(unknown)} need a full plan (missing 'b')")
    eps, opts = options_from_config(cfg)
    return eps, opts, cfg


# --- subcommands ---------------------------------------------------------------


def cmd_gen(args) -> int:
    system = random_system(args.n, args.box, seed=args.seed)
    with _Out(args.output) as fh:
        fh.write(format_particles(system, {"seed": args.seed}))
    return 0


def cmd_presets(args) -> int:
    sys.stdout.write("b,r0,omega,M_energy,energy_error,M_force,force_error\n")
    for p in PRESETS:
        sys.stdout.write(",".join(fmt_value(v) for v in (p.b, p.r0, p.omega, p.M_energy, p.energy_error,
                                                         p.M_force, p.force_error)) + "\n")
    return 0


def cmd_params(args) -> int:
    if args.preset:
        return cmd_presets(args)
    if args.box is None or args.n is None:
        raise ConfigError("params needs --box and --n (or --preset)")
    eps, opts, cfg = _selection(args)
    if is_plan_config(cfg):
        plan = plan_from_config(cfg)
    else:
        if eps is None:
            raise ConfigError("no tolerance given (use --eps or eps = ... in the config)")
        plan = select_parameters(args.n, args.box, eps, opts)
    with _Out(args.output) as fh:
        for k, v in predict_cost(plan).items():
            fh.write(f"# cost.{k} = {fmt_float(v)}\n")
        if plan.free is not None:
            fh.write(f"# predicted.padding_error = {fmt_float(plan.free.padding_error)}\n")
            fh.write(f"# predicted.cheb_error = {fmt_float(plan.free.cheb_error)}\n")
        fh.write(format_config(plan_to_config(plan)))
    return 0


def cmd_solve(args) -> int:
    system = read_particles(args.particles)
    eps, opts, cfg = _selection(args)
    if is_plan_config(cfg):
        plan = plan_from_config(cfg)
        if plan.n != system.n:
            plan = with_particles(plan, system.n)
        result = solve(system, plan=plan)
    else:
        if eps is None:
            raise ConfigError("no tolerance given (use --eps or eps = ... in the config)")
        result = solve(system, eps, options=opts)
    phi = result.potentials
    ref = None
    if args.validate:
        ref = ewald2d_potentials(system)
    t = result.components.timings
    with _Out(args.output) as fh:
        _meta(fh, {"energy": result.energy, "n": system.n})
        for k in ("near", "mid", "long", "total"):
            fh.write(f"# t_{k} = {fmt_float(t[k])}\n")
        fh.write(f"# zeta = {fmt_float(t['long'] / t['total'] if t['total'] > 0 else 0.0)}\n")
        for k, v in plan_to_config(result.plan).items():
            fh.write(f"# plan.{k} = {fmt_value(v)}\n")
        if ref is not None:
            fh.write(f"# eps_r = {fmt_float(relative_error(phi, ref))}\n")
            fh.write("index,potential,reference,abs_error\n")
            for i, (a, r) in enumerate(zip(phi, ref)):
                fh.write(f"{i},{fmt_float(a)},{fmt_float(r)},{fmt_float(abs(a - r))}\n")
        else:
            fh.write("index,potential\n")
            for i, a in enumerate(phi):
                fh.write(f"{i},{fmt_float(a)}\n")
    return 0


def cmd_oracle(args) -> int:
    system = read_particles(args.particles)
    if args.method == "shell":
        res = direct_shell_sum(system, tol=args.tol, max_particles=args.max_particles)
        phi, extra = res.potentials, {"shells": res.shells, "last_change": res.last_change}
    else:
        phi, extra = ewald2d_potentials(system), {}
    with _Out(args.output) as fh:
        _meta(fh, {"method": args.method, "energy": 0.5 * float(system.charges @ phi), **extra})
        fh.write("index,potential\n")
        for i, a in enumerate(phi):
            fh.write(f"{i},{fmt_float(a)}\n")
    return 0


def parse_values(text: str) -> list[float]:
    """``a:b:step`` (inclusive) or a comma-separated list."""
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] == 0:
            raise ConfigError(f"range must be start:stop:step, got {text!r}")
        a, b, h = parts
        n = int(math.floor((b - a) / h + 1e-9)) + 1
        return [a + i * h for i in range(max(n, 0))]
    return [float(v) for v in text.replace(",", " ").split()]


def cmd_sweep(args) -> int:
    cfg = _load(args, SWEEP_KEYS)
    setup = setup_from_config(cfg)
    values = parse_values(args.values)
    res = run_sweep(args.kind, values, setup)
    with _Out(args.output) as fh:
        _meta(fh, {"kind": res.kind.value, **{k: v for k, v in res.meta.items()}})
        for k, v in cfg.items():
            fh.write(f"# setup.{k} = {fmt_value(v)}\n")
        for v, msg in res.failures:
            fh.write(f"# failed {fmt_float(v)}: {msg}\n")
        fh.write(f"{res.kind.value},error,estimate,seconds\n")
        for p in res.points:
            fh.write(f"{fmt_float(p.value)},{fmt_float(p.error)},{fmt_float(p.estimate)},{fmt_float(p.seconds)}\n")
    return 1 if res.failures else 0


def bench_box(base_box, base_n: int, n: int, scale: str) -> tuple[float, float, float]:
    """Box holding ``n`` particles at the density of ``base_n`` in ``base_box``."""
    f = n / base_n
    if scale == "xy":
        g = math.sqrt(f)
        return (base_box[0] * g, base_box[1] * g, base_box[2])
    g = f ** (1.0 / 3.0)
    return tuple(L * g for L in base_box)  # type: ignore[return-value]


def run_bench(ns: Sequence[int], base_box, eps: float, scale: str = "xyz",
              options: SelectionOptions | None = None, seed: int = 0, repeats: int = 1):
    """Per-stage timings for each ``n``; returns rows and the log-log slope of total time."""
    rows = []
    base_n = ns[0]
    for n in ns:
        box = bench_box(base_box, base_n, n, scale)
        system = random_system(n, box, seed=seed)
        plan = select_parameters(n, box, eps, options)
        compute_components(system, plan)  # warm-up (JIT, caches)
        best = None
        for _ in range(repeats):
            t = compute_components(system, plan).timings
            if best is None or t["total"] < best["total"]:
                best = t
        rows.append({"n": n, "box": box, **{f"t_{k}": v for k, v in best.items()},
                     "zeta": best["long"] / best["total"], "I": plan.mid.grid.counts if plan.mid else None,
                     "m": plan.decomp.split_index})
    x = np.log([r["n"] for r in rows])
    y = np.log([r["t_total"] for r in rows])
    slope = float(np.polyfit(x, y, 1)[0]) if len(rows) > 1 else math.nan
    return rows, slope


def cmd_bench(args) -> int:
    _, opts, cfg = _selection(args)
    if is_plan_config(cfg):
        raise ConfigError("bench selects its own plans; pass selection keys only")
    rows, slope = run_bench(args.n, args.box, args.eps, args.scale, opts, args.seed, args.repeats)
    with _Out(args.output) as fh:
        _meta(fh, {"eps": args.eps, "scale": args.scale, "exponent": slope})
        fh.write("n,Lx,Ly,Lz,t_near,t_mid,t_long,t_total,zeta\n")
        for r in rows:
            vals = [r["n"], *r["box"], r["t_near"], r["t_mid"], r["t_long"], r["t_total"], r["zeta"]]
            fh.write(",".join(fmt_value(v) for v in vals) + "\n")
    return 0


# --- entry point ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sogq2d", description="Spectral sum-of-Gaussians solver for quasi-2D Coulomb systems")
    p.add_argument("--threads", type=int, default=None, help=f"worker threads (default ${THREADS_ENV} or all cores)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        sp.add_argument("-o", "--output", help="output file (default stdout)")
        if config:
            sp.add_argument("--config", help="key = value config file")
            sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")

    sp = sub.add_parser("gen", help="random neutral monovalent system")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--box", type=float, nargs=3, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("params", help="select and print a plan")
    sp.add_argument("--box", type=float, nargs=3)
    sp.add_argument("--n", type=int)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--preset", "--presets", dest="preset", action="store_true", help="list the tabulated decompositions")
    common(sp)
    sp.set_defaults(func=cmd_params)

    sp = sub.add_parser("solve", help="potentials and energy of a particle file")
    sp.add_argument("particles")
    sp.add_argument("--eps", type=float)
    sp.add_argument("--validate", action="store_true", help="compare against the Ewald reference")
    sp.add_argument("--deterministic", action="store_true", help="single-threaded, bit-reproducible")
    common(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("oracle", help="reference potentials")
    sp.add_argument("particles")
    sp.add_argument("--method", choices=("ewald", "shell"), default="ewald")
    sp.add_argument("--tol", type=float, default=1e-13)
    sp.add_argument("--max-particles", type=int, default=1000)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("sweep", help="convergence sweep of one parameter")
    sp.add_argument("kind", choices=[k.value for k in SweepKind])
    sp.add_argument("--values", required=True, help="start:stop:step or comma list")
    common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("bench", help="stage timings versus N at fixed density")
    sp.add_argument("--n", type=int, nargs="+", required=True)
    sp.add_argument("--box", type=float, nargs=3, required=True, help="box for the first N")
    sp.add_argument("--eps", type=float, default=1e-6)
    sp.add_argument("--scale", choices=("xyz", "xy"), default="xyz")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--repeats", type=int, default=1)
    common(sp)
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "deterministic", False):
        args.threads = 1
    try:
        return args.func(args)
    except (ConfigError, DecompositionError, GeometryError, InfeasibleError, PlanError, OracleError,
            OSError) as exc:
        print(f"sogq2d {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
