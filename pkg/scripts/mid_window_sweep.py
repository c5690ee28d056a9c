"""Mid-range error against window support and against grid count.

L = 20 cube, 1000 particles, b = 1.1488, r_c = 10, split m = 8.  Each
window's support sweep is fitted to erfc(C sqrt(P)); each grid sweep to
exp(-C I^2).
"""

from dataclasses import replace

from _common import parser, semilogy, write_csv

from sogq2d.experiments import (SweepSetup, converging_part, fit_erfc_rate, fit_gaussian_rate, run_sweep,
                                stage_reference)
from sogq2d.windows import WindowKind

WINDOWS = [(WindowKind.GAUSSIAN, 31, 31), (WindowKind.KB, 21, 21), (WindowKind.ES, 21, 21)]


def main() -> None:
    args = parser(__doc__).parse_args()
    base = SweepSetup()
    system = base.system()
    ref = stage_reference(system, base.decomposition(), "mid")
    rows, sp, si = [], {}, {}
    for kind, P_max, grid_support in WINDOWS:
        r = run_sweep("P_window", list(range(5, P_max + 1, 4 if args.quick else 2)), replace(base, window=kind),
                      system=system, reference=ref)
        k = converging_part(r.errors)
        print(f"{kind.value}: support rate C1 = {fit_erfc_rate(r.values[k], r.errors[k], sqrt=True):.3f}")
        rows += [("support", kind.value, pt.value, pt.error, pt.estimate) for pt in r.points]
        sp[kind.value] = (r.values, r.errors)

        r = run_sweep("I", list(range(16, 50, 8 if args.quick else 4)),
                      replace(base, window=kind, support=grid_support), system=system, reference=ref)
        k = converging_part(r.errors)
        print(f"{kind.value}: grid rate C2 = {fit_gaussian_rate(r.values[k], r.errors[k]):.4f}")
        rows += [("grid", kind.value, pt.value, pt.error, pt.estimate) for pt in r.points]
        si[kind.value] = (r.values, r.errors)
    write_csv(args.out, "mid_window_sweep.csv", ["sweep", "window", "value", "error", "estimate"], rows)
    if args.plot:
        semilogy(args.out, "mid_window_support.png", sp, "window support P")
        semilogy(args.out, "mid_window_grid.png", si, "grid points per dimension I")


if __name__ == "__main__":
    main()
