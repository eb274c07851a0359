"""Latent mean map kernel between sequences under one shared HMM.

Sequences are compared clique-by-clique through their smoothing posteriors
under a single global model: an (observation, state) clique kernel v_xq and a
(state, state-successor) clique kernel v_qq, summed into the LMMK. Passing
``lam=math.inf`` takes the cross-state weight exp(-lam) to exactly zero (the
default experiment path); finite lam keeps all cross terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .hmm import Hmm, forward_backward


@dataclass(frozen=True)
class LmmkFeatures:
    """Posterior aggregates of one sequence under the shared model.

    gamma_by_symbol[c, j] = sum of gamma_t(j) over timesteps emitting symbol c
    (sums to the sequence length); xi_avg[i, j] = mean of xi_t(i, j) over the
    T-1 transitions (sums to 1); seq_length = T.
    """

    gamma_by_symbol: np.ndarray
    xi_avg: np.ndarray
    seq_length: int


@dataclass(frozen=True)
class TildeTransformConfig:
    """Bandwidth of the feature-space RBF applied on top of a Gram matrix."""

    nu: float

    def __post_init__(self):
        if not self.nu >= 0:
            raise InvalidInputError(f"nu must be >= 0, got {self.nu!r}")


def _weight(lam: float) -> float:
    if lam != lam or lam < 0:  # NaN or negative
        raise InvalidInputError(f"lam must be >= 0 (math.inf allowed), got {lam!r}")
    return math.exp(-lam)  # exp(-inf) == 0.0 exactly


def lmmk_features(theta: Hmm, x) -> LmmkFeatures:
    """Aggregate forward-backward posteriors of ``x`` under ``theta``."""
    if theta.emission_kind != "discrete":
        raise InvalidInputError("lmmk_features needs a discrete-emission model")
    post = forward_backward(theta, x)
    obs = np.asarray(x, dtype=int)
    t_len, n = post.gamma.shape
    k = theta.alphabet_size
    by_symbol = np.zeros((k, n))
    np.add.at(by_symbol, obs, post.gamma)
    if t_len > 1:
        xi_avg = post.xi.mean(axis=0)
    else:
        xi_avg = np.full((n, n), 1.0 / (n * n))
    return LmmkFeatures(gamma_by_symbol=by_symbol, xi_avg=xi_avg, seq_length=t_len)


def _bucket_sum(g2: np.ndarray, w: float) -> np.ndarray:
    """For table g2, the per-cell kernel-weighted total over all cells:
    cell itself + w * (same row) + w * (same column) + w^2 * (rest)."""
    row = g2.sum(axis=1, keepdims=True)
    col = g2.sum(axis=0, keepdims=True)
    tot = g2.sum()
    return (
        (1.0 - w) ** 2 * g2
        + w * (1.0 - w) * (row + col)
        + w * w * tot
    )


def v_xq_discrete(f: LmmkFeatures, g: LmmkFeatures, lam: float) -> float:
    """(observation, state) clique kernel from symbol-aggregated posteriors."""
    if f.gamma_by_symbol.shape != g.gamma_by_symbol.shape:
        raise InvalidInputError(
            f"feature shape mismatch: {f.gamma_by_symbol.shape} vs {g.gamma_by_symbol.shape}"
        )
    w = _weight(lam)
    inner = _bucket_sum(g.gamma_by_symbol, w)
    return float((f.gamma_by_symbol * inner).sum()) / (f.seq_length * g.seq_length)


def v_qq(f: LmmkFeatures, g: LmmkFeatures, lam: float) -> float:
    """(state, state-successor) clique kernel from averaged transition posteriors."""
    if f.xi_avg.shape != g.xi_avg.shape:
        raise InvalidInputError(
            f"feature shape mismatch: {f.xi_avg.shape} vs {g.xi_avg.shape}"
        )
    w = _weight(lam)
    inner = _bucket_sum(g.xi_avg, w)
    return float((f.xi_avg * inner).sum())


def v_xq_continuous(theta: Hmm, x, x2, lam: float) -> float:
    """(observation, state) clique kernel for continuous emissions.

    Direct double sum over timestep pairs: the base RBF between observations
    times the posterior state-agreement weight, plus exp(-lam) times the
    all-pairs state weight (which the posterior normalization makes 1).
    """
    if theta.emission_kind != "gaussian":
        raise InvalidInputError("v_xq_continuous needs a continuous-emission model")
    w = _weight(lam)
    ga = forward_backward(theta, x).gamma
    gb = forward_backward(theta, x2).gamma
    xa = np.asarray(x, dtype=float).reshape(len(ga), -1)
    xb = np.asarray(x2, dtype=float).reshape(len(gb), -1)
    sq = ((xa[:, None, :] - xb[None, :, :]) ** 2).sum(axis=2)
    base = np.exp(-0.5 * lam * sq) if math.isfinite(lam) else (sq == 0.0).astype(float)
    agree = ga @ gb.T  # sum_i gamma_s(i) gamma'_t(i)
    value = (base * agree).sum() + w * base.sum()
    return float(value) / (ga.shape[0] * gb.shape[0])


def _xi_features(theta: Hmm, x) -> LmmkFeatures:
    post = forward_backward(theta, x)
    n = theta.n_states
    if post.xi.shape[0]:
        xi_avg = post.xi.mean(axis=0)
    else:
        xi_avg = np.full((n, n), 1.0 / (n * n))
    return LmmkFeatures(np.zeros((0, n)), xi_avg, post.gamma.shape[0])


def lmmk(theta: Hmm, x, x2, lam: float) -> float:
    """LMMK between two sequences under one model: v_xq + v_qq."""
    if theta.emission_kind == "discrete":
        f = lmmk_features(theta, x)
        g = lmmk_features(theta, x2)
        return v_xq_discrete(f, g, lam) + v_qq(f, g, lam)
    return v_xq_continuous(theta, x, x2, lam) + v_qq(
        _xi_features(theta, x), _xi_features(theta, x2), lam
    )


def tilde_transform(values: np.ndarray, cfg: TildeTransformConfig) -> np.ndarray:
    """Feature-space RBF on a Gram matrix: exp(-nu (K_ii - 2 K_ij + K_jj)).

    Preserves positive semidefiniteness and has unit diagonal.
    """
    k = np.asarray(values, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise InvalidInputError(f"gram matrix must be square, got {k.shape}")
    if np.abs(k - k.T).max(initial=0.0) > 1e-9:
        raise InvalidInputError("gram matrix asymmetric beyond 1e-9")
    d = np.diag(k)
    sq = d[:, None] - 2.0 * k + d[None, :]
    out = np.exp(-cfg.nu * sq)
    return 0.5 * (out + out.T)
