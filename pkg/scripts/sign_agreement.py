"""How often a corrupted-data score delta has the same sign as the complete-data delta.

Pairwise deletion under MCAR and weighted deletion under MAR (true indicator parents),
on random 4-node networks, as a function of sample size.
"""

import argparse

import numpy as np

from hcmiss.graph import enumerate_neighbors
from hcmiss.search import _CompleteEvaluator, _IPWEvaluator, _PairwiseEvaluator
from hcmiss.synth import forward_sample, inject_missing, make_missingness_spec, random_dag, random_network

ap = argparse.ArgumentParser()
ap.add_argument("--pairs", type=int, default=300)
ap.add_argument("--sizes", type=int, nargs="+", default=[500, 5000, 50000])
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()


def sign(x, tol=1e-6):
    return 0 if abs(x) < tol else int(np.sign(x))


for mech in ("mcar", "mar", "mnar"):
    for n_rows in args.sizes:
        rng = np.random.default_rng([args.seed, n_rows])
        agree = total = k = 0
        while total < args.pairs:
            gt = random_network(4, "dense", seed=int(rng.integers(2**32)), card_range=(2, 3))
            full = forward_sample(gt, n_rows, seed=k)
            spec = make_missingness_spec(full, mech, seed=k)
            d = inject_missing(full, spec, seed=k)
            k += 1
            ref = _CompleteEvaluator(full)
            ev = _PairwiseEvaluator(d) if mech == "mcar" else _IPWEvaluator(d, spec.true_model(4))
            for _ in range(10):
                g = random_dag(4, "dense", int(rng.integers(2**32)))
                ops = list(enumerate_neighbors(g))
                op = ops[int(rng.integers(len(ops)))]
                b = ev(g, op)
                if b is None:
                    continue
                agree += sign(ref(g, op).delta) == sign(b.delta)
                total += 1
        print(f"{mech:<5} N={n_rows:>6}  agreement {agree}/{total} = {agree / total:.3f}")
