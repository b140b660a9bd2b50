# Finite-context ontological models
#
# A model prepares ontic states x, picks a context n with probability
# P_c(n | x, M) and answers each outcome E with mu(E | x, n).  The suite
# checks normalization, covering, response consistency, closure under
# coarse graining, affinity given the context and Born reproduction.

import numpy as np

from finitecontext.ontology import run_model_suite
from finitecontext.protocols import get_model

for name in ("bb", "deterministic", "leaky", "overcounting", "nonaffine"):
    reports = run_model_suite(get_model(name, 3), seed=3, n_born=5, n_trials=20_000)
    failed = sorted({r.check for r in reports if not r.passed})
    print(f"{name:13s} {'ok' if not failed else 'fails ' + ', '.join(failed)}")

# A single Born-reproduction scenario in detail
from finitecontext.hilbert import random_complete_tuple, random_unit_vector
from finitecontext.ontology import born_reproduction_check

rng = np.random.default_rng(1)
m = random_complete_tuple(3, [1, 2], rng)
res = born_reproduction_check(get_model("bb", 3), random_unit_vector(3, rng), None, m, None, 100_000, rng)
for o in res.outcomes:
    print(f"outcome {o.outcome}: freq {o.frequency:.4f}  born {o.born:.4f}  z {o.z:+.2f}")
