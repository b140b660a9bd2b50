# Affine fits on patches
#
# On a connected open set of projectors a smooth measure is affine:
# mu(E) = tr(eta E) + K, with one constant per rank class.  Patches that
# overlap must agree on K, disjoint ones need not.

import numpy as np

from finitecontext.gleason import fit_affine, verify_patch_consistency
from finitecontext.hilbert import random_complete_tuple, random_traceless_hermitian
from finitecontext.measures import AffineMeasure
from finitecontext.regions import projector_ball, random_patch_center, tuple_ball

rng = np.random.default_rng(5)
d = 4

truth = AffineMeasure(random_traceless_hermitian(d, rng), {1: 0.1, 2: 0.3})
patch = tuple_ball(random_patch_center(d, [1, 1, 2], rng), 0.5)
samples = [(e, truth(e)) for m in patch.sample(40, rng) for e in m]
fit = fit_affine(samples, rank_classes=[1, 2])
print("eta error:", np.linalg.norm(fit.eta - truth.eta))
print("K:", {k: round(v, 12) for k, v in fit.constants.items()}, " rms:", fit.rms_residual)

# Two overlapping balls, with charts disagreeing on K: flagged.
c = random_complete_tuple(d, [1] * d, rng)[0]
eta = random_traceless_hermitian(d, rng)
charts = [AffineMeasure(eta, {1: 0.1}).as_measure(), AffineMeasure(eta, {1: 0.35}).as_measure()]
rep = verify_patch_consistency(charts, [projector_ball(c, 0.5), projector_ball(c, 0.4)], seed=rng)
for v in rep.verdicts:
    print(f"patches {v.patches}: overlap={v.overlap} dK={v.delta_k:.3f} -> {v.message}")
