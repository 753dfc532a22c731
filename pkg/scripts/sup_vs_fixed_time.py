#!/usr/bin/env python3
"""Semi-analytic model of the additive white-noise spectral error.

For f = 0 and additive white noise the coupled error ``U_N - U_n`` consists of
the modes ``n < k <= N``, each a stationary Ornstein-Uhlenbeck process with
variance ``1 / (2 pi^2 k^2)`` once the smooth initial data have decayed. At
``dt = 1e-3`` and ``k >= 8`` consecutive grid values are nearly independent,
so the sup over the grid behaves like the max of ``steps`` independent draws.
The script compares the fitted order of that model (no time stepping at all)
with the simulated study.
"""
import argparse

import numpy as np

from spdepath.harness.convergence import fit_order


def model_errors(levels, reference, steps, paths, p, rng):
    k = np.arange(1, reference + 1)
    var = 1.0 / (2.0 * np.pi**2 * k**2)
    fixed, sup = [], []
    for n in levels:
        v = var[n:]
        fixed.append(np.sqrt(v.sum()))
        eps = [np.sqrt(((rng.standard_normal((steps, v.size)) ** 2) * v).sum(axis=1).max())
               for _ in range(paths)]
        sup.append(np.mean(np.asarray(eps) ** p) ** (1.0 / p))
    return np.array(fixed), np.array(sup)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", default="8,16,32,64,128")
    ap.add_argument("--reference", type=int, default=512)
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--paths", type=int, default=32)
    ap.add_argument("--p", type=float, default=4.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    levels = [int(s) for s in args.levels.split(",")]
    rng = np.random.default_rng(args.seed)
    fixed, sup = model_errors(levels, args.reference, args.steps, args.paths, args.p, rng)
    big = np.sqrt([(1 / (2 * np.pi**2 * np.arange(n + 1, 10**6) ** 2)).sum() for n in levels])
    print(f"fixed time, reference {args.reference}: order {fit_order(levels, fixed).slope:.4f}")
    print(f"fixed time, untruncated reference: order {fit_order(levels, big).slope:.4f}")
    print(f"sup over {args.steps} grid times:       order {fit_order(levels, sup).slope:.4f}")


if __name__ == "__main__":
    main()
