"""Stage timings and total error against N at fixed density.

Cubes at bulk density 0.125 and films of height 0.3 at surface density 1.1.
The error against the Ewald reference is measured up to ``--max-check`` particles.
"""

import math

from _common import parser, write_csv

from sogq2d.cli import run_bench
from sogq2d.geometry import random_system
from sogq2d.oracle import ewald2d_potentials
from sogq2d.solver import relative_error, solve


def main() -> None:
    p = parser(__doc__)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--max-check", type=int, default=3000, help="largest N checked against Ewald2D (cost ~N^2)")
    args = p.parse_args()
    ns = [1000, 4000] if args.quick else [1000, 3000, 10000, 30000, 100000]
    max_check = 1000 if args.quick else args.max_check
    cube = (20.0, 20.0, 20.0)  # 1000 / 20^3 = 0.125
    film = (math.sqrt(1000 / 1.1),) * 2 + (0.3,)
    rows = []
    for name, box, scale in [("cube", cube, "xyz"), ("film", film, "xy")]:
        bench, slope = run_bench(ns, box, args.eps, scale)
        print(f"{name}: time exponent {slope:.3f}")
        for r in bench:
            err = math.nan
            if r["n"] <= max_check:
                system = random_system(r["n"], r["box"], seed=0)
                err = relative_error(solve(system, args.eps).potentials, ewald2d_potentials(system))
            rows.append((name, r["n"], *r["box"], r["t_near"], r["t_mid"], r["t_long"], r["t_total"], r["zeta"], err))
            print(*rows[-1], flush=True)
    write_csv(args.out, "bench.csv",
              ["geometry", "n", "Lx", "Ly", "Lz", "t_near", "t_mid", "t_long", "t_total", "zeta", "error"], rows)


if __name__ == "__main__":
    main()
