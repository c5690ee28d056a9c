"""Long-range (disk-mode) error against Fourier cutoff and Chebyshev degree.

Same cube system, splits m = 1, 3, 5, 7.  Mode sweeps are fitted to
exp(-C I^2) and degree sweeps to C^-P / sqrt(P!); both rates grow with eta.
"""

from dataclasses import replace

from _common import parser, semilogy, write_csv

from sogq2d.experiments import SweepSetup, converging_part, fit_cheb_rate, fit_gaussian_rate, run_sweep, stage_reference


def main() -> None:
    args = parser(__doc__).parse_args()
    base = replace(SweepSetup(), I_long=48, P_cheb=32)
    system = base.system()
    step = 4 if args.quick else 2
    rows, si, sp = [], {}, {}
    for m in (1, 3, 5, 7):
        s = replace(base, m=m)
        ref = stage_reference(system, s.decomposition(), "long")
        ri = run_sweep("I_long", list(range(2, 40, step)), s, system=system, reference=ref)
        rp = run_sweep("P_cheb", list(range(2, 32, step)), s, system=system, reference=ref)
        eta = ri.meta["eta_eff"]
        ki, kp = converging_part(ri.errors), converging_part(rp.errors)
        print(f"m={m} (eta={eta:.3f}): I rate {fit_gaussian_rate(ri.values[ki], ri.errors[ki]):.4f}, "
              f"P rate {fit_cheb_rate(rp.values[kp], rp.errors[kp]):.3f}")
        rows += [("I_long", m, eta, pt.value, pt.error, pt.estimate) for pt in ri.points]
        rows += [("P", m, eta, pt.value, pt.error, pt.estimate) for pt in rp.points]
        si[f"eta={eta:.3f}"] = (ri.values, ri.errors)
        sp[f"eta={eta:.3f}"] = (rp.values, rp.errors)
    write_csv(args.out, "long_range_sweep.csv", ["sweep", "m", "eta", "value", "error", "estimate"], rows)
    if args.plot:
        semilogy(args.out, "long_range_modes.png", si, "I_long")
        semilogy(args.out, "long_range_cheb.png", sp, "Chebyshev degree P")


if __name__ == "__main__":
    main()
