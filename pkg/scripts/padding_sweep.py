"""Mid-range error against the zero-padding factor for several range splits.

KB window with support 17, I = 64, same cube system as the window sweeps.
Each lambda_z sweep is fitted to erfc(C lambda_z); C should fall as eta grows.
"""

from dataclasses import replace

import numpy as np
from _common import parser, semilogy, write_csv

from sogq2d.experiments import SweepSetup, converging_part, fit_erfc_rate, run_sweep
from sogq2d.windows import WindowKind


def main() -> None:
    args = parser(__doc__).parse_args()
    base = replace(SweepSetup(), window=WindowKind.KB, support=17, I=64)
    system = base.system()
    rows, series = [], {}
    for m in (10, 14, 18, 22):
        s = replace(base, m=m)
        eta = float(s.decomposition().nodes[m]) / s.box[2]
        r = run_sweep("lambda_z", list(np.arange(1.0, 3.01, 0.4 if args.quick else 0.2)), s, system=system)
        k = converging_part(r.errors)
        print(f"m={m} (eta={eta:.2f}): C = {fit_erfc_rate(r.values[k], r.errors[k]):.3f}")
        rows += [(m, eta, pt.value, pt.error, pt.estimate) for pt in r.points]
        series[f"eta={eta:.2f}"] = (r.values, r.errors)
    write_csv(args.out, "padding_sweep.csv", ["m", "eta", "lambda_z", "error", "estimate"], rows)
    if args.plot:
        semilogy(args.out, "padding_sweep.png", series, "zero-padding factor lambda_z")


if __name__ == "__main__":
    main()
