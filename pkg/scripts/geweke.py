"""Joint-distribution test of the posterior sampler on a small random instance."""

import argparse
import time

import numpy as np

from frl.diagnostics import geweke_test
from frl.model import Hyperparameters, RuleUniverse


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sweeps", type=int, default=100_000)
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--rules", type=int, default=3)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--informative", action="store_true",
                    help="use lambda=1.5, gamma ~ Gamma(2, 1.5), K ~ Gamma(1.5, 2) instead of the defaults")
    a = ap.parse_args()

    H = Hyperparameters(1.5, 2.0, 1.5, 1.5, 2.0) if a.informative else Hyperparameters()
    X = np.random.default_rng(3).random((a.n, a.rules)) < 0.5
    t = time.time()
    res = geweke_test(X, RuleUniverse.identity(a.rules), H, a.sweeps, seed=a.seed)
    print(f"{'statistic':>10} {'forward':>10} {'successive':>11} {'z':>7}")
    for name, f, s, z in zip(res.names, res.forward_mean, res.successive_mean, res.z):
        print(f"{name:>10} {f:10.4f} {s:11.4f} {z:7.2f}")
    print(f"{'pass' if res.passed() else 'FAIL'} (|z| < 4), {time.time() - t:.0f}s")


if __name__ == "__main__":
    main()
