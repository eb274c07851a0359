"""GMMK between two HMMs via the product dynamic program, plus the PPK on HMMs.

The DP embeds length-(T+1) observation sequences: after seeding with the
initial-state outer product and one Hadamard multiply by the state-pair
emission kernel matrix, each of the T iterations advances both chains one
step and multiplies by the emission kernels again. The accumulator is
rescaled to unit max every iteration with the log factor carried alongside,
so long witness lengths cannot underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .gmmk import KernelValue, gmmk_discrete, gmmk_mixture, ppk_gaussian
from .hmm import Hmm, _require_valid_hmm
from .kernels import RbfParams


@dataclass(frozen=True)
class GmmkHmmConfig:
    """Witness length (number of chain steps; sequences have T+1 observations)
    and base-kernel bandwidth."""

    witness_length: int
    rbf: RbfParams

    def __post_init__(self):
        t = int(self.witness_length)
        if t < 0:
            raise InvalidInputError(f"witness length must be >= 0, got {t}")
        object.__setattr__(self, "witness_length", t)


@dataclass(frozen=True)
class StateKernelMatrix:
    """psi[j, i] = emission GMMK between state i of the first model and state j
    of the second."""

    psi: np.ndarray


def _check_compatible(p: Hmm, q: Hmm) -> None:
    if p.emission_kind != q.emission_kind:
        raise InvalidInputError(
            f"emission kinds differ: {p.emission_kind} vs {q.emission_kind}"
        )
    if p.emission_kind == "discrete":
        if p.alphabet_size != q.alphabet_size:
            raise InvalidInputError(
                f"alphabet mismatch: {p.alphabet_size} vs {q.alphabet_size}"
            )
    elif p.obs_dim != q.obs_dim:
        raise InvalidInputError(f"dimension mismatch: {p.obs_dim} vs {q.obs_dim}")


def state_kernels(p: Hmm, q: Hmm, rbf: RbfParams) -> StateKernelMatrix:
    """Pairwise emission GMMKs between the states of two HMMs."""
    _check_compatible(p, q)
    kernel = gmmk_discrete if p.emission_kind == "discrete" else gmmk_mixture
    psi = np.empty((q.n_states, p.n_states))
    for j, eq in enumerate(q.emissions):
        for i, ep in enumerate(p.emissions):
            psi[j, i] = kernel(ep, eq, rbf).value
    return StateKernelMatrix(psi=psi)


def _product_dp(
    pi_p: np.ndarray,
    a_p: np.ndarray,
    pi_q: np.ndarray,
    a_q: np.ndarray,
    psi: np.ndarray,
    steps: int,
) -> float:
    """Run the paired-chain recursion; returns the log of the accumulated sum."""
    phi = (pi_q[:, None] * pi_p[None, :]) * psi
    log_scale = 0.0
    for _ in range(steps):
        m = phi.max()
        if m <= 0.0:
            return -math.inf
        phi = phi / m
        log_scale += math.log(m)
        phi = (a_q.T @ phi @ a_p) * psi
    total = phi.sum()
    if total <= 0.0:
        return -math.inf
    return math.log(total) + log_scale


def gmmk_hmm(p: Hmm, q: Hmm, cfg: GmmkHmmConfig) -> KernelValue:
    """GMMK between two HMMs over sequences of length witness_length + 1."""
    _require_valid_hmm(p)
    _require_valid_hmm(q)
    psi = state_kernels(p, q, cfg.rbf).psi
    log_value = _product_dp(p.pi, p.A, q.pi, q.A, psi, cfg.witness_length)
    return KernelValue(math.exp(log_value), log_value, "gmmk-hmm", cfg.rbf.lam)


def ppk_hmm(p: Hmm, q: Hmm, witness_length: int, rho: float = 1.0) -> float:
    """PPK between HMMs of either emission kind.

    Discrete emissions support rho in {1, 0.5}; Gaussian-mixture emissions
    support rho = 1, where the state-pair table holds the product integrals
    int p(x|i) q(x|j) dx (bilinear over mixture components).
    """
    _check_compatible(p, q)
    if p.emission_kind == "discrete":
        return ppk_hmm_discrete(p, q, witness_length, rho)
    if rho != 1.0:
        raise InvalidInputError("continuous-emission PPK supports rho=1 only")
    _require_valid_hmm(p)
    _require_valid_hmm(q)
    if witness_length < 0:
        raise InvalidInputError(f"witness length must be >= 0, got {witness_length}")
    psi = np.empty((q.n_states, p.n_states))
    for j, eq in enumerate(q.emissions):
        for i, ep in enumerate(p.emissions):
            acc = 0.0
            for wa, ca in zip(ep.weights, ep.components):
                for wb, cb in zip(eq.weights, eq.components):
                    acc += wa * wb * ppk_gaussian(ca, cb)
            psi[j, i] = acc
    log_value = _product_dp(p.pi, p.A, q.pi, q.A, psi, witness_length)
    return math.exp(log_value)


def ppk_hmm_discrete(p: Hmm, q: Hmm, witness_length: int, rho: float = 1.0) -> float:
    """Probability product kernel between discrete HMMs over length-(T+1) sequences.

    rho = 1 sums the product of marginal sequence probabilities (the delta-kernel
    limit of the GMMK). rho = 0.5 raises the initial, transition, and emission
    factors to 0.5 inside the same recursion (no renormalization), the standard
    latent-model construction.
    """
    if rho not in (1.0, 0.5):
        raise InvalidInputError(f"rho must be 1 or 0.5, got {rho!r}")
    _require_valid_hmm(p)
    _require_valid_hmm(q)
    _check_compatible(p, q)
    if p.emission_kind != "discrete":
        raise InvalidInputError("ppk_hmm_discrete needs discrete emissions")
    if witness_length < 0:
        raise InvalidInputError(f"witness length must be >= 0, got {witness_length}")
    bp = p.emission_matrix() ** rho
    bq = q.emission_matrix() ** rho
    psi = bq @ bp.T  # psi[j, i] = sum_s bq[j, s] bp[i, s]
    log_value = _product_dp(
        p.pi**rho, p.A**rho, q.pi**rho, q.A**rho, psi, witness_length
    )
    return math.exp(log_value)
