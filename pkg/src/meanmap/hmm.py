"""Hidden Markov model representation, inference, and estimation.

Supports discrete emissions (per-state symbol distributions) and continuous
emissions (per-state Gaussian mixtures). Forward-backward uses scaled
recursions with a per-timestep log shift on emission likelihoods, so
length-10^4 sequences neither underflow nor die on small densities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import (
    VARIANCE_FLOOR,
    DiscreteDist,
    GaussianDist,
    GaussianMixture,
    validate,
)
from .errors import DeadSequenceError, InvalidInputError

EMISSION_SMOOTHING = 1e-8  # add-eps applied after each discrete M-step


@dataclass(frozen=True)
class Hmm:
    """HMM with initial distribution ``pi``, transition matrix ``A``, and
    per-state emissions.

    ``A[i, j]`` is the probability of moving from state i to state j.
    """

    pi: np.ndarray
    A: np.ndarray
    emissions: tuple[DiscreteDist, ...] | tuple[GaussianMixture, ...]

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float)
        A = np.array(self.A, dtype=float)
        emissions = tuple(self.emissions)
        n = pi.shape[0]
        if pi.ndim != 1 or A.shape != (n, n):
            raise InvalidInputError(
                f"pi of length {n} needs an ({n}, {n}) transition matrix, got {A.shape}"
            )
        if len(emissions) != n:
            raise InvalidInputError(f"{len(emissions)} emissions for {n} states")
        kinds = {type(e) for e in emissions}
        if kinds == {DiscreteDist}:
            sizes = {e.alphabet_size for e in emissions}
            if len(sizes) != 1:
                raise InvalidInputError("discrete emissions must share one alphabet")
        elif kinds == {GaussianMixture}:
            dims = {e.dim for e in emissions}
            if len(dims) != 1:
                raise InvalidInputError("continuous emissions must share one dimension")
        else:
            raise InvalidInputError("emissions must be all DiscreteDist or all GaussianMixture")
        pi.flags.writeable = False
        A.flags.writeable = False
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "emissions", emissions)

    @property
    def n_states(self) -> int:
        return self.pi.shape[0]

    @property
    def emission_kind(self) -> str:
        return "discrete" if isinstance(self.emissions[0], DiscreteDist) else "gaussian"

    @property
    def alphabet_size(self) -> int:
        if self.emission_kind != "discrete":
            raise InvalidInputError("continuous-emission HMM has no alphabet")
        return self.emissions[0].alphabet_size

    @property
    def obs_dim(self) -> int:
        if self.emission_kind != "gaussian":
            return 1
        return self.emissions[0].dim

    def emission_matrix(self) -> np.ndarray:
        """(n_states, alphabet) matrix of symbol probabilities (discrete only)."""
        if self.emission_kind != "discrete":
            raise InvalidInputError("emission_matrix is defined for discrete emissions")
        return np.vstack([e.alpha for e in self.emissions])


@dataclass(frozen=True)
class HmmPosteriors:
    """Smoothing posteriors from forward-backward.

    gamma[t, i] = P(Q_t = i | x); xi[t, i, j] = P(Q_t = i, Q_{t+1} = j | x)
    for t < T-1; loglik is the scaled-recursion log likelihood of x.
    """

    gamma: np.ndarray
    xi: np.ndarray
    loglik: float


def validate_hmm(hmm: Hmm) -> list[str]:
    """Diagnostics for the HMM invariants (row-stochasticity, valid emissions)."""
    problems = []
    if abs(hmm.pi.sum() - 1.0) > 1e-10 or (hmm.pi < 0).any():
        problems.append("pi is not a probability vector")
    rows = hmm.A.sum(axis=1)
    if np.abs(rows - 1.0).max() > 1e-10 or (hmm.A < 0).any():
        problems.append("A is not row-stochastic")
    for i, e in enumerate(hmm.emissions):
        problems.extend(f"state {i}: {p}" for p in validate(e))
    return problems


def _require_valid_hmm(hmm: Hmm) -> None:
    problems = validate_hmm(hmm)
    if problems:
        raise InvalidInputError("invalid HMM: " + "; ".join(problems))


def _as_obs_array(hmm: Hmm, x) -> np.ndarray:
    if hmm.emission_kind == "discrete":
        obs = np.asarray(x)
        if obs.ndim != 1 or obs.shape[0] == 0:
            raise InvalidInputError("observation sequence must be a nonempty 1-D array")
        obs = obs.astype(int)
        k = hmm.alphabet_size
        if ((obs < 0) | (obs >= k)).any():
            bad = int(obs[(obs < 0) | (obs >= k)][0])
            raise InvalidInputError(f"symbol {bad} outside alphabet [0, {k})")
        return obs
    obs = np.asarray(x, dtype=float)
    if obs.ndim == 1:
        obs = obs[:, None]
    if obs.ndim != 2 or obs.shape[0] == 0 or obs.shape[1] != hmm.obs_dim:
        raise InvalidInputError(
            f"observations must be (T, {hmm.obs_dim}), got shape {obs.shape}"
        )
    return obs


def _log_emission_matrix(hmm: Hmm, obs: np.ndarray) -> np.ndarray:
    """(T, n) log likelihoods log p(x_t | q_t = j)."""
    if hmm.emission_kind == "discrete":
        with np.errstate(divide="ignore"):
            log_b = np.log(hmm.emission_matrix())
        return log_b[:, obs].T
    T = obs.shape[0]
    out = np.full((T, hmm.n_states), -np.inf)
    for j, mix in enumerate(hmm.emissions):
        dens = np.zeros(T)
        for w, comp in zip(mix.weights, mix.components):
            if w <= 0:
                continue
            chol = np.linalg.cholesky(comp.sigma)
            y = np.linalg.solve(chol, (obs - comp.mu).T)
            logdet = 2.0 * float(np.log(np.diag(chol)).sum())
            logpdf = -0.5 * ((y**2).sum(axis=0) + comp.dim * math.log(2 * math.pi) + logdet)
            dens += w * np.exp(logpdf)
        with np.errstate(divide="ignore"):
            out[:, j] = np.log(dens)
    return out


def _batch_forward_backward(
    pi: np.ndarray, A: np.ndarray, log_b: np.ndarray, *, full_xi: bool
):
    """Scaled alpha/beta pass over a batch of same-length sequences.

    ``log_b`` is (S, T, n). Emission likelihoods are shifted by their
    per-timestep max before exponentiation; the shift is restored in the
    log likelihood. Returns (gamma (S,T,n), xi, loglik (S,)) where xi is the
    full (S, T-1, n, n) table if ``full_xi`` else its sum over t (S, n, n).
    """
    s_count, T, n = log_b.shape
    shift = log_b.max(axis=2)
    if not np.isfinite(shift).all():
        t = int(np.nonzero(~np.isfinite(shift))[1][0])
        raise DeadSequenceError(t)
    b = np.exp(log_b - shift[:, :, None])

    alpha = np.empty((s_count, T, n))
    scale = np.empty((s_count, T))
    a = pi[None, :] * b[:, 0]
    sums = a.sum(axis=1)
    if (sums <= 0.0).any():
        raise DeadSequenceError(0)
    alpha[:, 0] = a / sums[:, None]
    scale[:, 0] = sums
    for t in range(1, T):
        a = (alpha[:, t - 1] @ A) * b[:, t]
        sums = a.sum(axis=1)
        if (sums <= 0.0).any():
            raise DeadSequenceError(t)
        alpha[:, t] = a / sums[:, None]
        scale[:, t] = sums

    beta = np.empty((s_count, T, n))
    beta[:, T - 1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[:, t] = ((b[:, t + 1] * beta[:, t + 1]) @ A.T) / scale[:, t + 1, None]

    gamma = alpha * beta
    gamma /= gamma.sum(axis=2, keepdims=True)

    if full_xi:
        xi = np.empty((s_count, max(T - 1, 0), n, n))
    else:
        xi = np.zeros((s_count, n, n))
    for t in range(T - 1):
        m = alpha[:, t, :, None] * A[None, :, :] * (b[:, t + 1] * beta[:, t + 1])[:, None, :]
        m /= m.sum(axis=(1, 2))[:, None, None]
        if full_xi:
            xi[:, t] = m
        else:
            xi += m
    loglik = np.log(scale).sum(axis=1) + shift.sum(axis=1)
    return gamma, xi, loglik


def _scaled_forward_backward(
    pi: np.ndarray, A: np.ndarray, log_b: np.ndarray, need_xi: bool = True
):
    """Single-sequence wrapper; returns (gamma, xi, loglik)."""
    gamma, xi, loglik = _batch_forward_backward(
        pi, A, log_b[None, :, :], full_xi=need_xi
    )
    return gamma[0], xi[0], float(loglik[0])


def forward_backward(hmm: Hmm, x) -> HmmPosteriors:
    """Smoothing posteriors gamma, xi and the log likelihood of a sequence."""
    _require_valid_hmm(hmm)
    obs = _as_obs_array(hmm, x)
    log_b = _log_emission_matrix(hmm, obs)
    gamma, xi, loglik = _scaled_forward_backward(hmm.pi, hmm.A, log_b)
    return HmmPosteriors(gamma=gamma, xi=xi, loglik=loglik)


def sequence_loglik(hmm: Hmm, x) -> float:
    """Log likelihood of a sequence (forward pass only)."""
    _require_valid_hmm(hmm)
    obs = _as_obs_array(hmm, x)
    log_b = _log_emission_matrix(hmm, obs)
    _, _, loglik = _scaled_forward_backward(hmm.pi, hmm.A, log_b, need_xi=False)
    return loglik


def viterbi(hmm: Hmm, x) -> np.ndarray:
    """Most likely state path (ties broken toward the lowest state index)."""
    _require_valid_hmm(hmm)
    obs = _as_obs_array(hmm, x)
    log_b = _log_emission_matrix(hmm, obs)
    T, n = log_b.shape
    with np.errstate(divide="ignore"):
        log_pi = np.log(hmm.pi)
        log_a = np.log(hmm.A)
    delta = log_pi + log_b[0]
    back = np.zeros((T, n), dtype=int)
    for t in range(1, T):
        cand = delta[:, None] + log_a
        back[t] = cand.argmax(axis=0)
        delta = cand.max(axis=0) + log_b[t]
    path = np.empty(T, dtype=int)
    path[T - 1] = int(delta.argmax())
    for t in range(T - 2, -1, -1):
        path[t] = back[t + 1][path[t + 1]]
    return path


def heuristic_state_count(seq_length: int, alphabet: int, gamma: float = 0.1) -> int:
    """State-count heuristic n = floor(0.5 sqrt(k^2 + 4(T*gamma + k + 1)) - k/2) + 1."""
    if seq_length < 1 or alphabet < 1:
        raise InvalidInputError("sequence length and alphabet must be >= 1")
    k = float(alphabet)
    inner = k * k + 4.0 * (seq_length * gamma + k + 1.0)
    return int(math.floor(0.5 * math.sqrt(inner) - 0.5 * k)) + 1


def hmm_sample(hmm: Hmm, length: int, seed) -> np.ndarray:
    """Sample an observation sequence; deterministic per seed."""
    _require_valid_hmm(hmm)
    if length < 1:
        raise InvalidInputError(f"length must be >= 1, got {length}")
    rng = np.random.default_rng(seed)
    n = hmm.n_states
    states = np.empty(length, dtype=int)
    states[0] = rng.choice(n, p=hmm.pi / hmm.pi.sum())
    a_rows = hmm.A / hmm.A.sum(axis=1, keepdims=True)
    for t in range(1, length):
        states[t] = rng.choice(n, p=a_rows[states[t - 1]])
    if hmm.emission_kind == "discrete":
        b = hmm.emission_matrix()
        k = hmm.alphabet_size
        out = np.empty(length, dtype=int)
        for t in range(length):
            out[t] = rng.choice(k, p=b[states[t]] / b[states[t]].sum())
        return out
    d = hmm.obs_dim
    out = np.empty((length, d))
    for t in range(length):
        mix = hmm.emissions[states[t]]
        c = rng.choice(len(mix.components), p=mix.weights / mix.weights.sum())
        comp = mix.components[c]
        out[t] = comp.mu + np.linalg.cholesky(comp.sigma) @ rng.standard_normal(d)
    return out


def stationary_distribution(A: np.ndarray) -> np.ndarray:
    """Stationary distribution of a row-stochastic matrix (leading eigenvector of A^T)."""
    w, v = np.linalg.eig(np.asarray(A, dtype=float).T)
    idx = int(np.argmin(np.abs(w - 1.0)))
    pi = np.real(v[:, idx])
    pi = np.abs(pi)
    return pi / pi.sum()


@dataclass(frozen=True)
class FitResult:
    """Baum-Welch output: the fitted model plus the per-iteration log likelihoods."""

    hmm: Hmm
    loglik_trace: np.ndarray
    converged: bool


def _as_sequences(hmm_kind: str, data) -> list[np.ndarray]:
    # Accept one sequence or a list of sequences.
    if isinstance(data, (list, tuple)) and len(data) > 0 and not np.isscalar(data[0]):
        seqs = [np.asarray(s) for s in data]
    else:
        seqs = [np.asarray(data)]
    if any(s.shape[0] == 0 for s in seqs):
        raise InvalidInputError("empty sequence")
    return seqs


def _to_2d(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return s[:, None] if s.ndim == 1 else s


def _kmeans_first_occurrence(obs: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Lloyd k-means; returns cluster centers ordered by first occurrence in time."""
    m = obs.shape[0]
    idx = rng.choice(m, size=k, replace=False)
    centers = obs[idx].astype(float)
    assign = np.full(m, -1, dtype=int)
    for _round in range(100):
        d2 = ((obs[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        if (new_assign == assign).all():
            break
        assign = new_assign
        for c in range(k):
            mask = assign == c
            if mask.any():
                centers[c] = obs[mask].mean(axis=0)
    # relabel clusters by the time of their earliest assigned observation
    first = np.full(k, np.iinfo(np.int64).max)
    for c in range(k):
        where = np.nonzero(assign == c)[0]
        if where.size:
            first[c] = where[0]
    order = np.argsort(first, kind="stable")
    return centers[order]


def _init_hmm(
    seqs: list[np.ndarray],
    n_states: int,
    emission_kind: str,
    n_symbols: int | None,
    rng: np.random.Generator,
) -> Hmm:
    n = n_states
    pi = np.full(n, 1.0 / n)
    A = np.full((n, n), 1.0 / n)
    if emission_kind == "discrete":
        if n_symbols is None:
            n_symbols = int(max(int(s.max()) for s in seqs)) + 1
        raw = rng.uniform(0.1, 1.0, size=(n, n_symbols))
        raw /= raw.sum(axis=1, keepdims=True)
        emissions = tuple(DiscreteDist(row) for row in raw)
    else:
        obs = np.concatenate([_to_2d(s) for s in seqs])
        centers = _kmeans_first_occurrence(obs, n, rng)
        var = max(float(obs.var(axis=0).mean()), VARIANCE_FLOOR)
        d = obs.shape[1]
        emissions = tuple(
            GaussianMixture(np.array([1.0]), (GaussianDist(c, var * np.eye(d)),))
            for c in centers
        )
    return Hmm(pi, A, emissions)


def _segmental_update(hmm: Hmm, seqs: list[np.ndarray], n_symbols: int | None) -> Hmm:
    """One Viterbi segmentation pass re-estimating the emissions only."""
    paths = [viterbi(hmm, s) for s in seqs]
    n = hmm.n_states
    if hmm.emission_kind == "discrete":
        k = hmm.alphabet_size if n_symbols is None else n_symbols
        counts = np.full((n, k), EMISSION_SMOOTHING)
        for s, p in zip(seqs, paths):
            np.add.at(counts, (p, s.astype(int)), 1.0)
        counts /= counts.sum(axis=1, keepdims=True)
        emissions = tuple(DiscreteDist(row) for row in counts)
    else:
        emissions = []
        for j in range(n):
            pts = np.concatenate(
                [_to_2d(s)[p == j] for s, p in zip(seqs, paths)]
            )
            if pts.shape[0] == 0:
                emissions.append(hmm.emissions[j])
                continue
            mu = pts.mean(axis=0)
            diff = pts - mu
            cov = diff.T @ diff / pts.shape[0]
            cov[np.diag_indices_from(cov)] = np.maximum(np.diag(cov), VARIANCE_FLOOR)
            emissions.append(GaussianMixture(np.array([1.0]), (GaussianDist(mu, cov),)))
        emissions = tuple(emissions)
    return Hmm(hmm.pi, hmm.A, emissions)


def baum_welch(
    data,
    n_states: int,
    emission_kind: str = "discrete",
    seed=0,
    *,
    n_symbols: int | None = None,
    max_iter: int = 1000,
    tol: float = 1e-6,
) -> FitResult:
    """Fit an HMM by EM with the uniform/random + segmental-Viterbi initialization.

    ``data`` is one observation sequence or a list of sequences (per-sequence
    forward-backward statistics are pooled). Stops at a log-likelihood
    improvement below ``tol`` or at ``max_iter`` iterations.
    """
    if emission_kind not in ("discrete", "gaussian"):
        raise InvalidInputError(f"unknown emission kind {emission_kind!r}")
    seqs = _as_sequences(emission_kind, data)
    total_len = sum(len(s) for s in seqs)
    if total_len < n_states:
        raise InvalidInputError(
            f"need at least {n_states} observations to fit {n_states} states, got {total_len}"
        )
    rng = np.random.default_rng(seed)
    hmm = _init_hmm(seqs, n_states, emission_kind, n_symbols, rng)
    hmm = _segmental_update(hmm, seqs, n_symbols)
    if emission_kind == "discrete" and n_symbols is None:
        n_symbols = hmm.alphabet_size

    obs_list = [_as_obs_array(hmm, s) for s in seqs]
    # sequences of equal length share one vectorized alpha/beta pass
    groups: dict[int, list[int]] = {}
    for i, obs in enumerate(obs_list):
        groups.setdefault(obs.shape[0], []).append(i)
    n = n_states
    trace: list[float] = []
    prev = -np.inf
    converged = False
    for _ in range(max_iter):
        # E-step
        loglik = 0.0
        pi_acc = np.zeros(n)
        xi_acc = np.zeros((n, n))
        gamma_rows: list[np.ndarray | None] = [None] * len(obs_list)
        for members in groups.values():
            log_b = np.stack([_log_emission_matrix(hmm, obs_list[i]) for i in members])
            gamma, xi_sum, lls = _batch_forward_backward(
                hmm.pi, hmm.A, log_b, full_xi=False
            )
            loglik += float(lls.sum())
            pi_acc += gamma[:, 0].sum(axis=0)
            xi_acc += xi_sum.sum(axis=0)
            for pos, i in enumerate(members):
                gamma_rows[i] = gamma[pos]
        trace.append(loglik)
        if loglik - prev < tol and len(trace) > 1:
            converged = True
            break
        prev = loglik

        # M-step
        pi = pi_acc / pi_acc.sum()
        denom = xi_acc.sum(axis=1, keepdims=True)
        A = np.where(denom > 0, xi_acc / np.where(denom > 0, denom, 1.0), hmm.A)
        A /= A.sum(axis=1, keepdims=True)
        if emission_kind == "discrete":
            counts = np.full((n, n_symbols), EMISSION_SMOOTHING)
            for obs, gamma in zip(obs_list, gamma_rows):
                np.add.at(counts.T, obs, gamma)
            counts /= counts.sum(axis=1, keepdims=True)
            emissions = tuple(DiscreteDist(row) for row in counts)
        else:
            emissions = []
            for j in range(n):
                wsum = sum(g[:, j].sum() for g in gamma_rows)
                mu = (
                    sum(g[:, j] @ o for g, o in zip(gamma_rows, obs_list)) / wsum
                )
                cov = sum(
                    ((o - mu) * g[:, j : j + 1]).T @ (o - mu)
                    for g, o in zip(gamma_rows, obs_list)
                ) / wsum
                cov = 0.5 * (cov + cov.T)
                cov[np.diag_indices_from(cov)] = np.maximum(np.diag(cov), VARIANCE_FLOOR)
                emissions.append(GaussianMixture(np.array([1.0]), (GaussianDist(mu, cov),)))
            emissions = tuple(emissions)
        hmm = Hmm(pi, A, emissions)
    return FitResult(hmm=hmm, loglik_trace=np.array(trace), converged=converged)
