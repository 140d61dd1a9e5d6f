"""Minimize the nonlocal Neumann energy on a rectangle and print the run.

The default problem is the quadratic benchmark (p = 2, s = 1/4, unit load);
pass --p-expr for a variable-exponent run, e.g. --p-expr "1.8 + 0.5*x1".
"""

import argparse
import sys

import fraclab as fl


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolution", type=int, nargs=2, default=[16, 16])
    ap.add_argument("--bounds", type=float, nargs=4, default=[0.0, 0.0, 1.0, 1.0],
                    metavar=("X0", "Y0", "X1", "Y1"))
    ap.add_argument("--p-expr", type=str, default="2")
    ap.add_argument("--s", type=float, default=0.25)
    ap.add_argument("--g-expr", type=str, default="1")
    ap.add_argument("--r", type=float, default=6.0)
    ap.add_argument("--tol", type=float, default=1e-8)
    ap.add_argument("--max-iter", type=int, default=5000)
    ap.add_argument("--start", choices=("zero", "random"), default="zero")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--lbfgs", action="store_true", help="enable the accelerated direction")
    ap.add_argument("--history-tail", type=int, default=8)
    args = ap.parse_args(argv)

    x0, y0, x1, y1 = args.bounds
    dom = fl.build_rectangle((x0, y0), (x1, y1), *args.resolution)
    p = fl.extend_symmetric_mean(fl.parse_field(args.p_expr, fl.POINT))
    s = fl.constant_field(args.s, fl.PAIR)
    g = fl.function_on_domain(fl.parse_field(args.g_expr, fl.POINT), dom)
    prob = fl.EnergyProblem(dom, p, s, g, args.r)

    opts = fl.SolverOptions(
        tol=args.tol, max_iter=args.max_iter, seed=args.seed,
        accelerate=args.lbfgs, start=args.start,
    )
    rep = fl.minimize(prob, opts)

    print(f"status      {rep.status}")
    print(f"iterations  {rep.iterations}")
    print(f"energy      {rep.energy:.12e}")
    print(f"residual    {rep.el_residual:.3e}  (tol {args.tol:.1e})")
    u = rep.minimizer.interior
    print(f"minimizer   min {u.min():.6f}  max {u.max():.6f}  mean {u.mean():.6f}")
    tail = rep.history[-args.history_tail:]
    print("history tail (iteration, energy, gradient sup):")
    for it, e, gi in tail:
        print(f"  {it:5d}  {e: .12e}  {gi:.3e}")
    return 0 if rep.status == fl.CONVERGED else 4


if __name__ == "__main__":
    sys.exit(main())
