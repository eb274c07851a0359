"""Empirical mean map kernel for order-r Markov dependency models.

A sequence is summarized by its normalized (r+1)-gram counts; two profiles are
compared with an RBF over 1-of-k encoded grams, where each mismatching
position contributes a factor exp(-lam). At lam = inf only identical grams
survive and the kernel is the inner product of count vectors (a string
kernel). Continuous sequences use sliding windows of r+1 reals with the plain
RBF on the concatenated window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

Gram = tuple[int, ...]


@dataclass(frozen=True)
class NgramProfile:
    """Normalized sliding-window counts of (order+1)-grams."""

    order: int
    counts: dict[Gram, float]


def ngram_profile(x, order: int) -> NgramProfile:
    """Profile of a discrete sequence; windows overlap, counts sum to 1."""
    if order < 1:
        raise InvalidInputError(f"order must be >= 1, got {order}")
    seq = [int(v) for v in x]
    width = order + 1
    if len(seq) < width:
        raise InvalidInputError(
            f"sequence of length {len(seq)} too short for order {order}"
        )
    n_windows = len(seq) - order
    counts: dict[Gram, float] = {}
    for t in range(n_windows):
        g = tuple(seq[t : t + width])
        counts[g] = counts.get(g, 0.0) + 1.0
    for g in counts:
        counts[g] /= n_windows
    return NgramProfile(order=order, counts=counts)


def emmk(p: NgramProfile, q: NgramProfile, lam: float) -> float:
    """EMMK between two profiles: sum_gg' p(g) q(g') exp(-lam * hamming(g, g'))."""
    if p.order != q.order:
        raise InvalidInputError(f"order mismatch: {p.order} vs {q.order}")
    if lam != lam or lam < 0:
        raise InvalidInputError(f"lam must be >= 0 (math.inf allowed), got {lam!r}")
    w = math.exp(-lam)
    width = p.order + 1
    # group cross terms by Hamming distance; supports are sparse so the
    # pair loop stays |support_p| * |support_q|
    dist_mass = [0.0] * (width + 1)
    for g, pg in p.counts.items():
        for g2, qg in q.counts.items():
            h = sum(a != b for a, b in zip(g, g2))
            dist_mass[h] += pg * qg
    return float(sum(mass * w**h for h, mass in enumerate(dist_mass) if mass))


def emmk_continuous(x, x2, order: int, lam: float) -> float:
    """EMMK between continuous sequences via RBF on sliding windows of r+1 reals."""
    if order < 1:
        raise InvalidInputError(f"order must be >= 1, got {order}")
    a = np.asarray(x, dtype=float).ravel()
    b = np.asarray(x2, dtype=float).ravel()
    width = order + 1
    if len(a) < width or len(b) < width:
        raise InvalidInputError("sequence too short for the requested order")
    wa = np.lib.stride_tricks.sliding_window_view(a, width)
    wb = np.lib.stride_tricks.sliding_window_view(b, width)
    sq = ((wa[:, None, :] - wb[None, :, :]) ** 2).sum(axis=2)
    if math.isinf(lam):
        vals = (sq == 0.0).astype(float)
    else:
        vals = np.exp(-0.5 * lam * sq)
    return float(vals.mean())
