"""Energy error of the split kernel against M for every tabulated decomposition.

Unit box, r_c = 0.3, 100 random monovalent particles, shell-sum reference.
Prints the fitted geometric base of the converging part and the plateau.
"""

from _common import parser, semilogy, write_csv

from sogq2d.experiments import SweepSetup, converging_part, fit_geometric_base, run_sweep
from sogq2d.sog import PRESETS


def main() -> None:
    args = parser(__doc__).parse_args()
    rows, series = [], {}
    for p in PRESETS:
        step = max(1, p.M_energy // (8 if args.quick else 30))
        Ms = list(range(0, p.M_energy + 1 + 4 * step, step))
        r = run_sweep("M", Ms, SweepSetup(n=100, box=(1.0, 1.0, 1.0), r_c=0.3, b=p.b, oracle="shell"))
        keep = converging_part(r.errors)
        base = fit_geometric_base(r.values[keep], r.errors[keep])
        print(f"b={p.b:.5f}: fitted base {base:.4f}, plateau {r.errors[-1]:.2e} (tabulated {p.energy_error:.2e})")
        rows += [(p.b, int(pt.value), pt.error, pt.estimate) for pt in r.points]
        series[f"b={p.b:.4f}"] = (r.values, r.errors)
    write_csv(args.out, "decomposition_sweep.csv", ["b", "M", "error", "estimate"], rows)
    if args.plot:
        semilogy(args.out, "decomposition_sweep.png", series, "M", "relative energy error")


if __name__ == "__main__":
    main()
