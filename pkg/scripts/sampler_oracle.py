"""Ensemble samplers on a 2D standard Gaussian: pooled moments and acceptance per variant.

Usage::

    python scripts/sampler_oracle.py [--kept 20000] [--walkers 32]

Both stretch-move forms are run so their behaviour can be compared.
"""

import argparse
import time

import numpy as np

from elastobayes.mcmc import AIES, SAIES, SamplerConfig, run


def std_normal(X):
    return -0.5 * np.sum(np.atleast_2d(X) ** 2, axis=1)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kept", type=int, default=20000)
    ap.add_argument("--walkers", type=int, default=32)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    init = np.random.default_rng(args.seed + 100).standard_normal((args.walkers, 2))
    variants = [(SAIES, m, p) for m in ("sequential", "halves") for p in ("standard", "reflected")]
    variants += [(AIES, m, "standard") for m in ("sequential", "halves")]
    print(f"{'kind':6s} {'mode':10s} {'proposal':9s} {'time':>6s} {'mean':>17s} {'cov':>28s} acc")
    for kind, mode, proposal in variants:
        cfg = SamplerConfig(kind=kind, W=args.walkers, S=3 * args.kept, mode=mode, proposal=proposal,
                            rng_seed=args.seed)
        t0 = time.perf_counter()
        chain = run(cfg, std_normal, init=init)
        P = chain.post_burn()
        C = np.cov(P.T)
        print(f"{kind:6s} {mode:10s} {proposal:9s} {time.perf_counter() - t0:6.1f} "
              f"{np.array2string(P.mean(0), precision=3):>17s} "
              f"{np.array2string(C.ravel(), precision=3):>28s} {chain.acceptance_rate.mean():.3f}")


if __name__ == "__main__":
    main()
