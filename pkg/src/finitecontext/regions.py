"""Open sets of projectors and projector tuples.

An open set is represented operationally by a sampler and a membership
predicate.  Connectedness cannot be decided from samples; it is declared
by the constructor and can be spot-checked with :func:`spot_check_connected`.
"""
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
import scipy.linalg

from .hilbert import (
    MeasurementTuple,
    Projector,
    as_rng,
    haar_random_unitary,
    random_hermitian,
    tuple_geodesic,
    tuple_from_unitary,
    range_basis,
)


@dataclass(frozen=True)
class OpenSet:
    """A (sampler, membership predicate) pair.

    ``sampler(rng)`` draws one element, ``contains(element)`` tests membership.
    """

    sampler: Callable[[np.random.Generator], Any]
    contains: Callable[[Any], bool]
    connected: bool = True
    name: str = ""
    meta: dict = field(default_factory=dict)

    def sample(self, n, seed=None):
        rng = as_rng(seed)
        return [self.sampler(rng) for _ in range(n)]


def _near_identity(d, radius, rng):
    h = random_hermitian(d, rng)
    t = radius * rng.uniform()
    return scipy.linalg.expm(1j * t * h)


def _rejection(draw, contains, rng, max_tries=1000):
    for _ in range(max_tries):
        x = draw(rng)
        if contains(x):
            return x
    raise RuntimeError("rejection sampler failed to hit the open set")


def projector_ball(center, radius, name=""):
    """Projectors of the same rank within Frobenius distance ``radius`` of ``center``."""
    c = center.matrix

    def contains(e):
        e = e.matrix if isinstance(e, Projector) else np.asarray(e)
        return bool(np.trace(e).real.round() == center.rank and np.linalg.norm(e - c) < radius)

    def draw(rng):
        return center.conjugated(_near_identity(center.dim, radius, rng))

    return OpenSet(
        sampler=lambda rng: _rejection(draw, contains, rng),
        contains=contains,
        name=name or f"ball(rank={center.rank}, r={radius:g})",
        meta={"center": center, "radius": radius},
    )


def tuple_ball(center, radius, name=""):
    """Tuples whose every component lies within ``radius`` of the matching center component.

    ``center`` may be a complete :class:`MeasurementTuple` or an incomplete
    sequence of mutually orthogonal projectors (e.g. a pair); samples are
    returned in the same form.
    """
    complete = isinstance(center, MeasurementTuple)
    comps = tuple(center)
    d = comps[0].dim

    def contains(m):
        m = tuple(m)
        if len(m) != len(comps):
            return False
        return all(
            e.rank == c.rank and np.linalg.norm(e.matrix - c.matrix) < radius
            for e, c in zip(m, comps)
        )

    def draw(rng):
        u = _near_identity(d, radius, rng)
        moved = [c.conjugated(u) for c in comps]
        return MeasurementTuple(moved, check=False) if complete else tuple(moved)

    return OpenSet(
        sampler=lambda rng: _rejection(draw, contains, rng),
        contains=contains,
        name=name or f"tuple_ball(ranks={[c.rank for c in comps]}, r={radius:g})",
        meta={"center": center, "radius": radius},
    )


def component_set(tuples, k):
    """Projection of a :func:`tuple_ball` onto slot ``k``.

    Membership is tested against the ball of the same radius around the k-th
    center component, a superset of the exact projection.
    """
    center = tuple(tuples.meta["center"])
    radius = tuples.meta["radius"]
    ball = projector_ball(center[k], radius)
    return OpenSet(
        sampler=lambda rng: tuples.sampler(rng)[k],
        contains=ball.contains,
        connected=tuples.connected,
        name=f"P_{k + 1}({tuples.name})",
    )


def _as_tuple(x):
    if isinstance(x, MeasurementTuple):
        return x, True
    if isinstance(x, Projector):
        comp = np.eye(x.dim) - x.matrix
        if x.rank == x.dim:
            return MeasurementTuple([x], check=False), False
        cols = range_basis(comp)
        rest = Projector.trusted(cols @ cols.conj().T, x.dim - x.rank)
        return MeasurementTuple([x, rest], check=False), False
    comps = list(x)
    d = comps[0].dim
    rest = np.eye(d) - sum(c.matrix for c in comps)
    r = d - sum(c.rank for c in comps)
    if r:
        comps.append(Projector.trusted(rest, r))
    return MeasurementTuple(comps, check=False), False


def _restore(m, like, n_orig):
    if isinstance(like, MeasurementTuple):
        return m
    if isinstance(like, Projector):
        return m[0]
    return tuple(m.projectors[:n_orig])


def spot_check_connected(open_set, samples, seed=None, n_pairs=20, n_steps=16):
    """Fraction of sampled member pairs joined by a unitary path that stays inside.

    A heuristic: 1.0 is consistent with (but does not prove) connectedness.
    Pairs too far apart for a direct rotation count as failures.
    """
    rng = as_rng(seed)
    if len(samples) < 2:
        return 1.0
    ok = 0
    for _ in range(n_pairs):
        i, j = rng.choice(len(samples), size=2, replace=False)
        a, b = samples[i], samples[j]
        n_orig = len(tuple(a)) if not isinstance(a, Projector) else 1
        ta, _ = _as_tuple(a)
        tb, _ = _as_tuple(b)
        try:
            path = tuple_geodesic(ta, tb, n_steps)
        except ValueError:
            continue
        if all(open_set.contains(_restore(m, a, n_orig)) for m in path):
            ok += 1
    return ok / n_pairs


def random_patch_center(d, ranks, seed=None):
    """A random center tuple with the given rank pattern (Haar unitary columns)."""
    return tuple_from_unitary(haar_random_unitary(d, seed), ranks)
