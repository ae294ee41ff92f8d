"""OVL-q statistics D_q(F_n, F) and a brute-force oracle on step CDFs.

Everything works on the *delta envelope*: with ``u_i = F(x_(i))`` the
difference ``F_n - F`` visits, in order,

    0, lo_1, hi_1, lo_2, hi_2, ..., lo_n, hi_n, 0

where ``lo_i = (i - 1)/n - u_i`` is the left limit at the i-th order
statistic and ``hi_i = i/n - u_i`` the value at it. Between consecutive
events the difference is monotone, so suprema of sums of increments are
attained on this finite sequence.

Batch functions take ``u`` of shape ``(..., n)`` (already sorted, reference
CDF applied) so that null tables and power studies evaluate thousands of
samples in one call.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ovlq.distributions import DistributionSpec, EmpiricalSample, cdf

ORACLE_MAX_TUPLES = 10**8


class OracleTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class DeltaEnvelope:
    events: np.ndarray = field(repr=False)

    @property
    def delta_max(self) -> float:
        return float(self.events.max())

    @property
    def delta_min(self) -> float:
        return float(self.events.min())


def _check_q(q: int) -> int:
    if isinstance(q, bool) or int(q) != q or q < 1:
        raise ValueError(f"q must be a positive integer, got {q!r}")
    return int(q)


def transformed(sample: EmpiricalSample, ref: DistributionSpec) -> np.ndarray:
    """``F(x_(i))`` for the sorted sample."""
    return np.asarray(cdf(ref, sample.values), dtype=np.float64)


def lo_hi(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=np.float64)
    n = u.shape[-1]
    steps = np.arange(n + 1, dtype=np.float64) / n
    return steps[:-1] - u, steps[1:] - u


def envelope_events(u: np.ndarray) -> np.ndarray:
    """Event sequences, shape ``(..., 2n + 2)``."""
    lo, hi = lo_hi(u)
    inner = np.stack([lo, hi], axis=-1).reshape(*lo.shape[:-1], -1)
    pad = [(0, 0)] * (inner.ndim - 1) + [(1, 1)]
    return np.pad(inner, pad)


def delta_envelope(sample: EmpiricalSample, ref: DistributionSpec) -> DeltaEnvelope:
    return DeltaEnvelope(envelope_events(transformed(sample, ref)))


def _extremes(u):
    lo, hi = lo_hi(u)
    # hi_i > lo_i, so the max lives among the hi's and the min among the lo's;
    # the bracketing zeros are folded in as well.
    return np.maximum(hi.max(axis=-1), 0.0), np.minimum(lo.min(axis=-1), 0.0)


def ks_from_u(u):
    top, bottom = _extremes(u)
    return np.maximum(top, -bottom)


def d2_from_u(u):
    top, bottom = _extremes(u)
    return top - bottom


def dq_dp(events: np.ndarray, q: int) -> np.ndarray:
    """Half the largest total variation of a (q + 1)-segment closed path.

    The path starts at the first event, passes through q events at
    nondecreasing positions (repeats allowed) and ends at the last event.
    ``best[j]`` after layer k is the largest variation of such a path with k
    interior stops ending at event j; the inner max over predecessors is
    reduced to running maxima of ``best + e`` and ``best - e``.
    """
    q = _check_q(q)
    e = np.asarray(events, dtype=np.float64)
    best = np.full(e.shape, -np.inf)
    best[..., 0] = 0.0
    for _ in range(q):
        plus = np.maximum.accumulate(best + e, axis=-1)
        minus = np.maximum.accumulate(best - e, axis=-1)
        best = np.maximum(plus - e, minus + e)
    # closing segment back to the final event
    last = e[..., -1:]
    total = np.max(best + np.abs(last - e), axis=-1)
    # D_q <= 1; summed increments can overshoot by an ulp
    return np.minimum(0.5 * total, 1.0)


def dq_from_u(u, q: int):
    """D_q for a batch of transformed sorted samples.

    q = 1 and q = 2 use the closed forms, so their results are bit-identical
    to :func:`ks_from_u` and :func:`d2_from_u`. Larger q runs the DP.
    """
    q = _check_q(q)
    if q == 1:
        return ks_from_u(u)
    if q == 2:
        return d2_from_u(u)
    return dq_dp(envelope_events(u), q)


def ks_statistic(sample: EmpiricalSample, ref: DistributionSpec) -> float:
    return float(ks_from_u(transformed(sample, ref)))


def d2_statistic(sample: EmpiricalSample, ref: DistributionSpec) -> float:
    """Kuiper-type statistic ``sup delta - inf delta``, which equals D_2."""
    return float(d2_from_u(transformed(sample, ref)))


def dq_statistic(sample: EmpiricalSample, ref: DistributionSpec, q: int) -> float:
    return float(dq_from_u(transformed(sample, ref), q))


@dataclass(frozen=True)
class StepCdf:
    """Right-continuous step CDF: value ``post_jump_values[k]`` from ``jump_points[k]`` on."""

    jump_points: np.ndarray
    post_jump_values: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.jump_points, dtype=np.float64)
        y = np.asarray(self.post_jump_values, dtype=np.float64)
        if x.ndim != 1 or x.shape != y.shape or x.size == 0:
            raise ValueError("jump_points and post_jump_values must be equal-length 1-d")
        if np.any(np.diff(x) <= 0):
            raise ValueError("jump points must be strictly increasing")
        if np.any(np.diff(y) < 0) or y[0] < 0 or y[-1] != 1.0:
            raise ValueError("values must be nondecreasing in [0, 1] and end at 1")
        object.__setattr__(self, "jump_points", x)
        object.__setattr__(self, "post_jump_values", y)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        idx = np.searchsorted(self.jump_points, x, side="right")
        vals = np.concatenate([[0.0], self.post_jump_values])
        out = vals[idx]
        # explicit sentinels for v_0 = -inf and v_{q+1} = +inf
        out = np.where(x == -np.inf, 0.0, out)
        return np.where(x == np.inf, 1.0, out)

    @classmethod
    def from_sample(cls, values) -> "StepCdf":
        """Empirical CDF of ``values`` (ties merge into one larger jump)."""
        v = np.sort(np.asarray(values, dtype=np.float64))
        pts, counts = np.unique(v, return_counts=True)
        return cls(pts, np.cumsum(counts) / v.size)


def oracle_candidates(f: StepCdf, g: StepCdf) -> np.ndarray:
    jumps = np.union1d(f.jump_points, g.jump_points)
    mids = 0.5 * (jumps[1:] + jumps[:-1])
    span = max(1.0, float(jumps[-1] - jumps[0]))
    sentinels = [jumps[0] - span, jumps[-1] + span]
    return np.sort(np.concatenate([jumps, mids, sentinels]))


def dq_oracle(f: StepCdf, g: StepCdf, q: int) -> float:
    """Brute force ``1 - min r_{F,G}(v)`` over nondecreasing candidate q-tuples.

    ``r(v) = sum_i min(F(v_{i+1}) - F(v_i), G(v_{i+1}) - G(v_i))`` with
    ``v_0 = -inf`` and ``v_{q+1} = +inf``. Candidates are the union of jump
    points, midpoints between consecutive jumps (flat stretches, i.e. left
    limits) and one point beyond each end.
    """
    q = _check_q(q)
    cand = oracle_candidates(f, g)
    if len(cand) ** q > ORACLE_MAX_TUPLES:
        raise OracleTooLargeError(
            f"{len(cand)} candidates ** q={q} exceeds {ORACLE_MAX_TUPLES} tuples"
        )
    fv, gv = f(cand), g(cand)
    best = math.inf
    # chunk the tuples to keep memory bounded
    combos = itertools.combinations_with_replacement(range(len(cand)), q)
    while True:
        block = np.array(list(itertools.islice(combos, 200_000)), dtype=np.intp)
        if block.size == 0:
            break
        fb = np.concatenate(
            [np.zeros((len(block), 1)), fv[block], np.ones((len(block), 1))], axis=1
        )
        gb = np.concatenate(
            [np.zeros((len(block), 1)), gv[block], np.ones((len(block), 1))], axis=1
        )
        r = np.minimum(np.diff(fb, axis=1), np.diff(gb, axis=1)).sum(axis=1)
        best = min(best, float(r.min()))
    return 1.0 - best


def step_events(f: StepCdf, g: StepCdf) -> np.ndarray:
    """Event sequence of ``f - g`` for two step CDFs: 0, values after each jump."""
    pts = np.union1d(f.jump_points, g.jump_points)
    return np.concatenate([[0.0], f(pts) - g(pts), [0.0]])


def envelope_step_cdfs(values, u) -> tuple[StepCdf, StepCdf]:
    """Step-CDF pair whose difference walks the same envelope as ``(sample, F)``.

    ``values`` sorted sample, ``u = F(values)``. The second CDF jumps to
    ``u_i`` just before ``x_(i)`` and to 1 after the last point, so
    ``F_n - G`` takes the values ``lo_i`` then ``hi_i`` in order. Lets the
    brute-force oracle check statistics of a continuous reference.
    """
    x = np.asarray(values, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    pts, counts = np.unique(x, return_counts=True)
    fn = StepCdf(pts, np.cumsum(counts) / x.size)
    # one G-jump per distinct sample point, placed halfway to the previous one
    first = np.searchsorted(x, pts, side="left")
    gap = np.diff(np.concatenate([[pts[0] - 1.0], pts]))
    g_pts = np.concatenate([pts - 0.5 * gap, [pts[-1] + 1.0]])
    g_vals = np.concatenate([u[first], [1.0]])
    g_vals = np.maximum.accumulate(g_vals)
    return fn, StepCdf(g_pts, g_vals)
