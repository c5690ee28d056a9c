"""Taylor-layer error in thin slabs against the number of terms Q.

L_x = L_y = 100, gamma = L_x / L_z in {100, 500, 1000}, eta = 0.294 so that
every Gaussian is long-range.  The reference is the per-Gaussian FFT path.
"""

from _common import parser, semilogy, write_csv

from sogq2d.experiments import SweepSetup, run_sweep


def main() -> None:
    args = parser(__doc__).parse_args()
    rows, series = [], {}
    for gamma in (100, 500, 1000):
        s = SweepSetup(n=1000, box=(100.0, 100.0, 100.0 / gamma), r_c=5.0, eta=0.294, I_long=64 if args.quick else 128,
                       P_cheb=16, long_support=13)
        r = run_sweep("Q", list(range(1, 11)), s)
        rows += [(gamma, int(pt.value), pt.error, pt.estimate) for pt in r.points]
        series[f"gamma={gamma}"] = (r.values, r.errors)
        print(f"gamma={gamma}: " + " ".join(f"{e:.1e}" for e in r.errors))
    write_csv(args.out, "thin_taylor_sweep.csv", ["gamma", "Q", "error", "bound"], rows)
    if args.plot:
        semilogy(args.out, "thin_taylor_sweep.png", series, "Taylor terms Q")


if __name__ == "__main__":
    main()
