"""Compiled versus pure-Python kernels: forward recursion, inverse recursion and the hard-core MCMC loop.

    python benchmarks/bench_kernels.py [--n 32] [--configs 5] [--steps 200000] [--csv out.csv]

Both implementations must give identical results; the script checks that before timing.
"""

import argparse
import csv
import sys
import time

import numpy as np

from gibbs_shift import kernels
from gibbs_shift.gibbs import GibbsParams, McmcSettings, gibbs_chain
from gibbs_shift.harness import ExperimentSpec, build_corpus
from gibbs_shift.transform import apply_transform, build_transform, invert_transform


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=float, default=32.0)
    ap.add_argument("--configs", type=int, default=5)
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--csv")
    args = ap.parse_args(argv)

    if kernels.compiled_kernels is None:
        print("compiled kernels are not built; nothing to compare", file=sys.stderr)
        return 1

    spec = ExperimentSpec.recipe("hard-disks", samples=args.configs, n=args.n)
    dec, consts = spec.decomposition()
    params = spec.transform_params(dec)
    corpus, _ = build_corpus(spec, dec, consts)
    images = []
    for cfg in corpus:
        a = build_transform(cfg, params, dec, "cython")
        b = build_transform(cfg, params, dec, "python")
        assert np.array_equal(a.taus, b.taus) and np.array_equal(a.cluster_of, b.cluster_of)
        images.append(apply_transform(cfg, a))
    particles = sum(len(c) for c in corpus)

    gp = GibbsParams(dec.model, spec.beta, spec.z, corpus[0].window, dec, consts, spec.xi)
    settings = McmcSettings(args.steps, 0, args.steps, seed=7)
    ca = gibbs_chain(gp, settings, kernel="cython")[-1]
    pa = gibbs_chain(gp, settings, kernel="python")[-1]
    assert np.array_equal(ca.pos, pa.pos)

    rows = []
    for label, work in [
        ("forward", lambda k: [build_transform(c, params, dec, k) for c in corpus]),
        ("inverse", lambda k: [invert_transform(im, params, dec, k) for im in images]),
        ("mcmc", lambda k: gibbs_chain(gp, settings, kernel=k)),
    ]:
        tc = best_of(lambda: work("cython"), args.repeats)
        tp = best_of(lambda: work("python"), 1)
        rows.append({"kernel": label, "cython_s": tc, "python_s": tp, "speedup": tp / tc})

    print(f"{len(corpus)} configurations, {particles} particles, window n={args.n}; {args.steps} MCMC steps")
    print(f"{'kernel':8s} {'cython [s]':>11s} {'python [s]':>11s} {'speedup':>8s}")
    for r in rows:
        print(f"{r['kernel']:8s} {r['cython_s']:11.4f} {r['python_s']:11.4f} {r['speedup']:8.1f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
