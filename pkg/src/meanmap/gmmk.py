"""Closed-form generative mean map kernel (GMMK) evaluations.

The GMMK between models p and q is E_{x~p, y~q}[k(x, y)] for the RBF base
kernel k(x, y) = exp(-0.5 * lam * ||x - y||^2). This module provides the
closed forms for discrete distributions, Gaussians (general and isotropic),
Gaussian mixtures, KDEs, and linear dynamic systems, plus the probability
product kernel for Gaussians used as the large-lam convergence target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import (
    DiscreteDist,
    GaussianDist,
    GaussianMixture,
    KdeModel,
    LdsModel,
    _require_valid,
)
from .errors import InvalidInputError, NumericalError
from .kernels import RbfParams


@dataclass(frozen=True)
class KernelValue:
    """A kernel evaluation with its log (kept separately so tiny values survive)."""

    value: float
    log_value: float
    kernel_id: str
    lam: float

    def __float__(self) -> float:
        return self.value


def _kv(log_value: float, kernel_id: str, lam: float) -> KernelValue:
    return KernelValue(math.exp(log_value), log_value, kernel_id, lam)


def gmmk_discrete(p: DiscreteDist, q: DiscreteDist, rbf: RbfParams) -> KernelValue:
    """GMMK between discrete distributions: sum_ij a_i a'_j exp(-lam (1 - delta_ij))."""
    if p.alphabet_size != q.alphabet_size:
        raise InvalidInputError(
            f"alphabet mismatch: {p.alphabet_size} vs {q.alphabet_size}"
        )
    _require_valid(p)
    _require_valid(q)
    c = math.exp(-rbf.lam)
    # off-diagonal pairs contribute c, diagonal pairs 1; row/column sums are 1
    value = (1.0 - c) * float(p.alpha @ q.alpha) + c
    return KernelValue(value, math.log(value), "gmmk-discrete", rbf.lam)


def _log_rbf_expectation(m: np.ndarray, s: np.ndarray, lam: float) -> float:
    """log E[exp(-0.5 lam ||z||^2)] for z ~ N(m, s); s need only be PSD."""
    d = m.shape[0]
    mat = np.eye(d) + lam * 0.5 * (s + s.T)
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - PD by construction
        raise NumericalError(f"I + lam*(sigma+sigma') not PD: {exc}") from exc
    half_logdet = float(np.log(np.diag(chol)).sum())
    y = np.linalg.solve(chol, m)
    return -half_logdet - 0.5 * lam * float(y @ y)


def gmmk_gaussian(
    p: GaussianDist,
    q: GaussianDist,
    rbf: RbfParams,
    *,
    method: str = "difference",
) -> KernelValue:
    """GMMK between two Gaussians.

    The default route uses the difference variable x - x' ~ N(mu - mu',
    sigma + sigma'), reducing the double integral to a single Gaussian
    expectation: |I + lam S|^{-1/2} exp(-0.5 lam m^T (I + lam S)^{-1} m).
    ``method="product"`` evaluates the equivalent sequential-integration form
    (kept for cross-verification; see tests).
    """
    if p.dim != q.dim:
        raise InvalidInputError(f"dimension mismatch: {p.dim} vs {q.dim}")
    _require_valid(p)
    _require_valid(q)
    if method == "difference":
        log_value = _log_rbf_expectation(p.mu - q.mu, p.sigma + q.sigma, rbf.lam)
    elif method == "product":
        log_value = _log_gmmk_gaussian_product(p, q, rbf.lam)
    else:
        raise InvalidInputError(f"unknown method {method!r}")
    return _kv(log_value, "gmmk-gaussian", rbf.lam)


def _log_gmmk_gaussian_product(p: GaussianDist, q: GaussianDist, lam: float) -> float:
    # Sequential integration: integrate x out first, then x'. Matches the
    # difference route to machine precision on PD covariances.
    d = p.dim
    eye = np.eye(d)
    si = np.linalg.inv(p.sigma)
    s2i = np.linalg.inv(q.sigma)
    p1i = np.linalg.inv(si + lam * eye)
    a = s2i + si - si @ p1i @ si
    b = lam * si @ p1i @ p.mu + s2i @ q.mu
    dconst = (
        -(lam**2) * p.mu @ p1i @ p.mu
        + q.mu @ s2i @ q.mu
        + lam * p.mu @ p.mu
    )
    mat = eye + lam * (p.sigma + q.sigma)
    sign, logdet = np.linalg.slogdet(mat)
    if sign <= 0:
        raise NumericalError("I + lam*(sigma+sigma') not PD")
    return 0.5 * float(b @ np.linalg.solve(a, b) - dconst) - 0.5 * float(logdet)


def gmmk_gaussian_isotropic(
    mu: np.ndarray,
    h: float,
    mu2: np.ndarray,
    h2: float,
    rbf: RbfParams,
) -> KernelValue:
    """GMMK between isotropic Gaussians N(mu, h I) and N(mu2, h2 I).

    With h0 = 1 + lam (h + h2) the value is h0^{-N/2} exp(-0.5 lam ||mu - mu2||^2 / h0).
    """
    if not (h > 0 and h2 > 0):
        raise InvalidInputError(f"bandwidths must be > 0, got {h!r}, {h2!r}")
    mu = np.asarray(mu, dtype=float).ravel()
    mu2 = np.asarray(mu2, dtype=float).ravel()
    if mu.shape != mu2.shape:
        raise InvalidInputError(f"dimension mismatch: {mu.shape} vs {mu2.shape}")
    n = mu.shape[0]
    h0 = 1.0 + rbf.lam * (h + h2)
    d = mu - mu2
    log_value = -0.5 * n * math.log(h0) - 0.5 * rbf.lam * float(d @ d) / h0
    return _kv(log_value, "gmmk-gaussian-isotropic", rbf.lam)


def gmmk_mixture(p: GaussianMixture, q: GaussianMixture, rbf: RbfParams) -> KernelValue:
    """GMMK between Gaussian mixtures via bilinearity over component pairs."""
    if p.dim != q.dim:
        raise InvalidInputError(f"dimension mismatch: {p.dim} vs {q.dim}")
    _require_valid(p)
    _require_valid(q)
    value = 0.0
    for wa, ca in zip(p.weights, p.components):
        for wb, cb in zip(q.weights, q.components):
            value += wa * wb * math.exp(
                _log_rbf_expectation(ca.mu - cb.mu, ca.sigma + cb.sigma, rbf.lam)
            )
    return KernelValue(value, math.log(value), "gmmk-mixture", rbf.lam)


def gmmk_kde(p: KdeModel, q: KdeModel, rbf: RbfParams) -> KernelValue:
    """GMMK between two Gaussian KDEs.

    Equals the mean over center pairs of the isotropic Gaussian GMMK:
    (1 / (m_x m_y h0^{N/2})) sum_ij exp(-0.5 lam ||x_i - y_j||^2 / h0),
    h0 = 1 + lam (h_x + h_y).
    """
    if p.dim != q.dim:
        raise InvalidInputError(f"dimension mismatch: {p.dim} vs {q.dim}")
    _require_valid(p)
    _require_valid(q)
    h0 = 1.0 + rbf.lam * (p.bandwidth + q.bandwidth)
    x, y = p.centers, q.centers
    sq = ((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=2)
    value = float(np.exp(-0.5 * rbf.lam * sq / h0).mean()) / h0 ** (p.dim / 2.0)
    return KernelValue(value, math.log(value), "gmmk-kde", rbf.lam)


def lds_observation_moments(model: LdsModel, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the stacked observations (x_0, ..., x_horizon).

    Per-step recursions: mu_{q_{t+1}} = A mu_{q_t}, S_{q_{t+1}} = A S_{q_t} A^T + I,
    mu_{x_t} = C mu_{q_t}, S_{x_t} = C S_{q_t} C^T + R. Cross-time blocks follow
    from Cov(q_s, q_t) = S_{q_s} (A^{t-s})^T.
    """
    if horizon < 0:
        raise InvalidInputError(f"horizon must be >= 0, got {horizon}")
    k, n = model.state_dim, model.obs_dim
    mus_q = [model.mu0]
    covs_q = [np.array(model.sigma0)]
    for _ in range(horizon):
        mus_q.append(model.A @ mus_q[-1])
        covs_q.append(model.A @ covs_q[-1] @ model.A.T + np.eye(k))
    mean = np.concatenate([model.C @ m for m in mus_q])
    cov = np.zeros(((horizon + 1) * n, (horizon + 1) * n))
    for s in range(horizon + 1):
        a_pow = np.eye(k)
        for t in range(s, horizon + 1):
            block = model.C @ (covs_q[s] @ a_pow.T) @ model.C.T
            if s == t:
                block = block + model.R
            cov[s * n : (s + 1) * n, t * n : (t + 1) * n] = block
            cov[t * n : (t + 1) * n, s * n : (s + 1) * n] = block.T
            a_pow = model.A @ a_pow
    return mean, cov


def gmmk_lds(
    p: LdsModel,
    q: LdsModel,
    horizon: int,
    rbf: RbfParams,
    *,
    marginal_blocks: bool = False,
) -> KernelValue:
    """GMMK between length-(horizon+1) observation sequences of two LDS models.

    The default computes the kernel between the full joint observation
    Gaussians, including the cross-time covariance the latent chain induces,
    and therefore agrees with Monte Carlo over sampled trajectories.
    ``marginal_blocks=True`` drops the cross-time blocks, multiplying the
    per-step marginal Gaussian GMMKs instead (exact only when A = 0).
    """
    if p.obs_dim != q.obs_dim:
        raise InvalidInputError(f"observation dimension mismatch: {p.obs_dim} vs {q.obs_dim}")
    _require_valid(p)
    _require_valid(q)
    mean_p, cov_p = lds_observation_moments(p, horizon)
    mean_q, cov_q = lds_observation_moments(q, horizon)
    if marginal_blocks:
        n = p.obs_dim
        log_value = 0.0
        for t in range(horizon + 1):
            sl = slice(t * n, (t + 1) * n)
            log_value += _log_rbf_expectation(
                mean_p[sl] - mean_q[sl], cov_p[sl, sl] + cov_q[sl, sl], rbf.lam
            )
    else:
        log_value = _log_rbf_expectation(mean_p - mean_q, cov_p + cov_q, rbf.lam)
    return _kv(log_value, "gmmk-lds", rbf.lam)


def ppk_gaussian(p: GaussianDist, q: GaussianDist) -> float:
    """Probability product kernel (rho = 1) between Gaussians.

    Equals the density of N(0, sigma + sigma') evaluated at mu - mu'; the
    large-lam limit target of the scaled Gaussian GMMK.
    """
    if p.dim != q.dim:
        raise InvalidInputError(f"dimension mismatch: {p.dim} vs {q.dim}")
    _require_valid(p)
    _require_valid(q)
    m = p.mu - q.mu
    s = p.sigma + q.sigma
    chol = np.linalg.cholesky(s)
    y = np.linalg.solve(chol, m)
    log_value = (
        -0.5 * p.dim * math.log(2.0 * math.pi)
        - float(np.log(np.diag(chol)).sum())
        - 0.5 * float(y @ y)
    )
    return math.exp(log_value)
