"""Probabilistic-model types compared by the generative mean map kernel.

All types are immutable after construction (arrays are defensively copied and
marked read-only). Structural problems (wrong shapes) raise at construction;
numeric invariants are checked by :func:`validate`, which returns diagnostics
instead of raising so that degenerate estimates (e.g. from Baum-Welch on short
sequences) stay reportable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

#: Elementwise lower bound applied to estimated Gaussian variances.
VARIANCE_FLOOR = 1e-6


def _frozen_array(x, dtype=float, ndim=None, name="array") -> np.ndarray:
    a = np.array(x, dtype=dtype)
    if ndim is not None and a.ndim != ndim:
        raise InvalidInputError(f"{name} must be {ndim}-dimensional, got shape {a.shape}")
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class DiscreteDist:
    """Distribution over k symbols with probability vector ``alpha``."""

    alpha: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frozen_array(self.alpha, ndim=1, name="alpha"))

    @property
    def alphabet_size(self) -> int:
        return self.alpha.shape[0]


@dataclass(frozen=True)
class GaussianDist:
    """Multivariate Gaussian with mean ``mu`` and covariance ``sigma``."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = _frozen_array(self.mu, ndim=1, name="mu")
        sigma = _frozen_array(self.sigma, ndim=2, name="sigma")
        if sigma.shape != (mu.shape[0], mu.shape[0]):
            raise InvalidInputError(
                f"sigma shape {sigma.shape} incompatible with mu of dimension {mu.shape[0]}"
            )
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class GaussianMixture:
    """Finite mixture of Gaussians sharing one dimension."""

    weights: np.ndarray
    components: tuple[GaussianDist, ...]

    def __post_init__(self):
        w = _frozen_array(self.weights, ndim=1, name="weights")
        comps = tuple(self.components)
        if len(comps) != w.shape[0]:
            raise InvalidInputError(
                f"{w.shape[0]} weights for {len(comps)} components"
            )
        if not comps:
            raise InvalidInputError("mixture needs at least one component")
        d = comps[0].dim
        if any(c.dim != d for c in comps):
            raise InvalidInputError("mixture components must share one dimension")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return self.components[0].dim


@dataclass(frozen=True)
class KdeModel:
    """Gaussian kernel density estimate: centers plus isotropic variance ``bandwidth``."""

    centers: np.ndarray
    bandwidth: float

    def __post_init__(self):
        c = np.array(self.centers, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        if c.ndim != 2 or c.shape[0] == 0:
            raise InvalidInputError(f"centers must be a nonempty (m, N) array, got {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "bandwidth", float(self.bandwidth))

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def num_centers(self) -> int:
        return self.centers.shape[0]


@dataclass(frozen=True)
class LdsModel:
    """Linear dynamic system with identity process noise.

    State update q' = A q + w, w ~ N(0, I); observation x = C q + v, v ~ N(0, R);
    initial state q_0 ~ N(mu0, sigma0).
    """

    A: np.ndarray
    C: np.ndarray
    R: np.ndarray
    mu0: np.ndarray
    sigma0: np.ndarray

    def __post_init__(self):
        A = _frozen_array(self.A, ndim=2, name="A")
        C = _frozen_array(self.C, ndim=2, name="C")
        R = _frozen_array(self.R, ndim=2, name="R")
        mu0 = _frozen_array(self.mu0, ndim=1, name="mu0")
        sigma0 = _frozen_array(self.sigma0, ndim=2, name="sigma0")
        k = A.shape[0]
        n = C.shape[0]
        if A.shape != (k, k):
            raise InvalidInputError(f"A must be square, got {A.shape}")
        if C.shape[1] != k:
            raise InvalidInputError(f"C maps state dim {k}, got shape {C.shape}")
        if R.shape != (n, n):
            raise InvalidInputError(f"R must be ({n}, {n}), got {R.shape}")
        if mu0.shape != (k,) or sigma0.shape != (k, k):
            raise InvalidInputError("initial state moments must match state dimension")
        for nm, v in (("A", A), ("C", C), ("R", R), ("mu0", mu0), ("sigma0", sigma0)):
            object.__setattr__(self, nm, v)

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.C.shape[0]


Model = DiscreteDist | GaussianDist | GaussianMixture | KdeModel | LdsModel


def _symmetric(m: np.ndarray, rel_tol: float) -> bool:
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    return float(np.abs(m - m.T).max(initial=0.0)) <= rel_tol * scale


def _cholesky_ok(m: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(m)
        return True
    except np.linalg.LinAlgError:
        return False


def _psd_ok(m: np.ndarray) -> bool:
    eig = np.linalg.eigvalsh(0.5 * (m + m.T))
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    return float(eig.min(initial=0.0)) >= -1e-10 * scale


def validate(model: Model) -> list[str]:
    """Check the numeric invariants of a model; returns violated ones (empty if valid)."""
    problems: list[str] = []
    if isinstance(model, DiscreteDist):
        a = model.alpha
        if not np.isfinite(a).all():
            problems.append("probabilities must be finite")
        if (a < 0).any():
            problems.append("probabilities must be >= 0")
        if abs(a.sum() - 1.0) > 1e-12:
            problems.append(f"probabilities sum to {a.sum()!r}, not 1")
    elif isinstance(model, GaussianDist):
        if not (np.isfinite(model.mu).all() and np.isfinite(model.sigma).all()):
            problems.append("moments must be finite")
        elif not _symmetric(model.sigma, 1e-12):
            problems.append("sigma not symmetric")
        elif not _cholesky_ok(model.sigma):
            problems.append("sigma not positive definite")
    elif isinstance(model, GaussianMixture):
        if abs(model.weights.sum() - 1.0) > 1e-12 or (model.weights < 0).any():
            problems.append("weights must be a probability vector")
        for i, comp in enumerate(model.components):
            problems.extend(f"component {i}: {p}" for p in validate(comp))
    elif isinstance(model, KdeModel):
        if not model.bandwidth > 0:
            problems.append(f"bandwidth must be > 0, got {model.bandwidth!r}")
        if not np.isfinite(model.centers).all():
            problems.append("centers must be finite")
    elif isinstance(model, LdsModel):
        if not _symmetric(model.R, 1e-12):
            problems.append("R not symmetric")
        elif not _psd_ok(model.R):
            problems.append("R not positive semidefinite")
        if not _symmetric(model.sigma0, 1e-12):
            problems.append("sigma0 not symmetric")
        elif not _psd_ok(model.sigma0):
            problems.append("sigma0 not positive semidefinite")
    else:
        raise InvalidInputError(f"unknown model type {type(model).__name__}")
    return problems


def _require_valid(model: Model) -> None:
    problems = validate(model)
    if problems:
        raise InvalidInputError(
            f"invalid {type(model).__name__}: " + "; ".join(problems)
        )


def sample(model: Model, seed, count: int, *, horizon: int | None = None) -> np.ndarray:
    """Draw ``count`` iid samples from a model, deterministically per seed.

    Returns an int array of symbols for DiscreteDist, a (count, d) float array
    for the continuous models, and a (count, (horizon+1)*obs_dim) array of
    flattened trajectories for LdsModel (``horizon`` is required there).
    """
    _require_valid(model)
    if count < 1:
        raise InvalidInputError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)

    if isinstance(model, DiscreteDist):
        p = model.alpha / model.alpha.sum()
        return rng.choice(model.alphabet_size, size=count, p=p)
    if isinstance(model, GaussianDist):
        chol = np.linalg.cholesky(model.sigma)
        z = rng.standard_normal((count, model.dim))
        return model.mu + z @ chol.T
    if isinstance(model, GaussianMixture):
        w = model.weights / model.weights.sum()
        idx = rng.choice(len(model.components), size=count, p=w)
        z = rng.standard_normal((count, model.dim))
        out = np.empty((count, model.dim))
        for c, comp in enumerate(model.components):
            mask = idx == c
            if mask.any():
                chol = np.linalg.cholesky(comp.sigma)
                out[mask] = comp.mu + z[mask] @ chol.T
        return out
    if isinstance(model, KdeModel):
        idx = rng.integers(0, model.num_centers, size=count)
        z = rng.standard_normal((count, model.dim))
        return model.centers[idx] + np.sqrt(model.bandwidth) * z
    if isinstance(model, LdsModel):
        if horizon is None or horizon < 0:
            raise InvalidInputError("LDS sampling needs a horizon >= 0")
        return _sample_lds(model, rng, count, horizon)
    raise InvalidInputError(f"unknown model type {type(model).__name__}")


def _chol_psd(m: np.ndarray) -> np.ndarray:
    # PSD factor tolerant of singular matrices (eigen clip at 0)
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(0.5 * (m + m.T))
        return v @ np.diag(np.sqrt(np.clip(w, 0.0, None)))


def _sample_lds(model: LdsModel, rng: np.random.Generator, count: int, horizon: int) -> np.ndarray:
    k, n = model.state_dim, model.obs_dim
    q = model.mu0 + rng.standard_normal((count, k)) @ _chol_psd(model.sigma0).T
    chol_r = _chol_psd(model.R)
    xs = np.empty((count, (horizon + 1) * n))
    for t in range(horizon + 1):
        xs[:, t * n : (t + 1) * n] = q @ model.C.T + rng.standard_normal((count, n)) @ chol_r.T
        if t < horizon:
            q = q @ model.A.T + rng.standard_normal((count, k))
    return xs
