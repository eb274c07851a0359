"""Evaluation machinery: Gram assembly, kernel SVM, kernel PCA, Bayes HMM
classification, and stratified cross-validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NumericalError
from .hmm import Hmm, sequence_loglik

DEFAULT_C_GRID = (1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3)
DEFAULT_LAMBDA_GRID = (1e-2, 1e-1, 1.0, 1e1, 1e2)
DEFAULT_WITNESS_GRID = (10, 20, 30, 40, 50)
DEFAULT_NU_GRID = (1e-2, 1e-1, 1.0, 1e1, 1e2)


@dataclass(frozen=True)
class GramMatrix:
    """Symmetric kernel matrix plus the ids and kernel descriptor it came from."""

    values: np.ndarray
    example_ids: tuple[str, ...]
    kernel_id: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        ids = tuple(str(i) for i in self.example_ids)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InvalidInputError(f"gram matrix must be square, got {v.shape}")
        if v.shape[0] != len(ids):
            raise InvalidInputError(f"{len(ids)} ids for a {v.shape[0]}x{v.shape[0]} matrix")
        if not np.isfinite(v).all():
            raise InvalidInputError("gram matrix entries must be finite")
        if v.size and np.abs(v - v.T).max() > 1e-9 * max(1.0, np.abs(v).max()):
            raise InvalidInputError("gram matrix asymmetric beyond 1e-9")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "example_ids", ids)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def assemble_gram(
    items,
    kernel_fn,
    *,
    ids=None,
    kernel_id: str = "custom",
    params: dict | None = None,
    jobs: int = 1,
) -> GramMatrix:
    """Build a Gram matrix from pairwise kernel calls, exploiting symmetry.

    Each of the n(n+1)/2 cells is computed exactly once, in a fixed order, so
    the result is byte-identical for any ``jobs`` setting.
    """
    items = list(items)
    n = len(items)
    if ids is None:
        ids = [str(i) for i in range(n)]
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    if jobs > 1 and n > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunk = max(1, len(pairs) // (jobs * 4))
            vals = list(
                pool.map(
                    _PairKernel(kernel_fn, items), pairs, chunksize=chunk
                )
            )
    else:
        vals = [kernel_fn(items[i], items[j]) for i, j in pairs]
    k = np.zeros((n, n))
    for (i, j), v in zip(pairs, vals):
        k[i, j] = v
        k[j, i] = v
    return GramMatrix(k, tuple(ids), kernel_id, dict(params or {}))


class _PairKernel:
    """Picklable pair-kernel task for process pools."""

    def __init__(self, fn, items):
        self.fn = fn
        self.items = items

    def __call__(self, pair):
        i, j = pair
        return self.fn(self.items[i], self.items[j])


def cosine_normalize(gram: GramMatrix | np.ndarray) -> np.ndarray:
    """Unit-diagonal normalization K_ij / sqrt(K_ii K_jj); preserves PSD.

    Standard practice for kernels whose raw scale decays with sequence length
    (the PPK at large witness lengths collapses to ~0 otherwise).
    """
    k = gram.values if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=float)
    d = np.sqrt(np.diag(k))
    if (d <= 0).any():
        raise NumericalError("cosine normalization needs positive diagonal entries")
    out = k / np.outer(d, d)
    return 0.5 * (out + out.T)


def check_psd(gram: GramMatrix | np.ndarray) -> tuple[float, bool]:
    """Minimum eigenvalue of the symmetrized matrix and the PSD verdict.

    Passes iff min eig >= -1e-8 * trace.
    """
    k = gram.values if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=float)
    sym = 0.5 * (k + k.T)
    min_eig = float(np.linalg.eigvalsh(sym).min())
    return min_eig, min_eig >= -1e-8 * float(np.trace(sym))


@dataclass(frozen=True)
class SvmModel:
    """Soft-margin kernel SVM in dual form.

    ``dual_coef`` holds alpha_i * y_i for the support vectors;
    ``support_idx`` indexes into the training Gram the model was fit on.
    """

    dual_coef: np.ndarray
    support_idx: np.ndarray
    bias: float
    c: float
    kkt_residual: float


def svm_train(gram: GramMatrix | np.ndarray, labels, c: float, *, tol: float = 1e-5,
              jitter_limit: float = 1e-6) -> SvmModel:
    """Solve the dual soft-margin SVM by pairwise (SMO) optimization.

    Working pairs are picked by maximal KKT violation; stops when the
    violation drops below ``tol`` (default well inside the 1e-3 residual
    contract, which keeps the dual objective within 1e-6 relative of a
    reference QP). If the Gram fails the PSD check within -jitter_limit *
    trace, a compensating ridge is added first; a larger violation aborts.
    """
    k = gram.values if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=float)
    y = np.asarray(labels, dtype=float)
    n = k.shape[0]
    if y.shape != (n,):
        raise InvalidInputError(f"need {n} labels, got shape {y.shape}")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise InvalidInputError("labels must be +1/-1")
    if len(np.unique(y)) < 2:
        raise InvalidInputError("training labels contain a single class")
    if c <= 0:
        raise InvalidInputError(f"C must be > 0, got {c}")

    min_eig, ok = check_psd(k)
    if not ok:
        trace = float(np.trace(k))
        if min_eig < -jitter_limit * max(trace, 1.0):
            raise NumericalError(
                f"gram matrix is not PSD (min eig {min_eig:.3e}); refusing to train"
            )
        k = k + (abs(min_eig) + 1e-10) * np.eye(n)

    q = k * np.outer(y, y)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 0.5 a^T Q a - 1^T a
    max_passes = 200_000

    def violation():
        neg_yg = -y * grad
        up = ((alpha < c) & (y > 0)) | ((alpha > 0) & (y < 0))
        low = ((alpha < c) & (y < 0)) | ((alpha > 0) & (y > 0))
        if not up.any() or not low.any():
            return 0.0, -1, -1
        i = int(np.flatnonzero(up)[np.argmax(neg_yg[up])])
        j = int(np.flatnonzero(low)[np.argmin(neg_yg[low])])
        return float(neg_yg[i] - neg_yg[j]), i, j

    gap = math.inf
    for _ in range(max_passes):
        gap, i, j = violation()
        if gap <= tol or i < 0:
            break
        # two-variable analytic step preserving y^T alpha
        quad = q[i, i] + q[j, j] - 2.0 * y[i] * y[j] * q[i, j]
        quad = max(quad, 1e-12)
        delta = (-y[i] * grad[i] + y[j] * grad[j]) / quad
        # box constraints for alpha_i += y_i*d*y_i ... step in "y-space"
        ai_old, aj_old = alpha[i], alpha[j]
        ai = ai_old + y[i] * delta
        aj = aj_old - y[j] * delta
        # clip jointly so y^T alpha stays fixed
        if y[i] * y[j] > 0:
            total = ai_old + aj_old
            ai = min(max(ai, max(0.0, total - c)), min(c, total))
            aj = total - ai
        else:
            diff = ai_old - aj_old
            ai = min(max(ai, max(0.0, diff)), min(c, c + diff))
            aj = ai - diff
        d_i, d_j = ai - alpha[i], aj - alpha[j]
        if abs(d_i) < 1e-16 and abs(d_j) < 1e-16:
            break
        alpha[i], alpha[j] = ai, aj
        grad += q[:, i] * d_i + q[:, j] * d_j

    # for free support vectors -y_i * grad_i equals the bias; average the
    # tightest up/low bounds (they coincide at exact convergence)
    neg_yg = -y * grad
    up = ((alpha < c) & (y > 0)) | ((alpha > 0) & (y < 0))
    low = ((alpha < c) & (y < 0)) | ((alpha > 0) & (y > 0))
    hi = neg_yg[up].max() if up.any() else 0.0
    lo = neg_yg[low].min() if low.any() else 0.0
    bias = 0.5 * (hi + lo)
    support = np.flatnonzero(alpha > 1e-12)
    return SvmModel(
        dual_coef=alpha[support] * y[support],
        support_idx=support,
        bias=float(bias),
        c=float(c),
        kkt_residual=float(max(gap, 0.0)),
    )


def svm_decision(model: SvmModel, kernel_rows: np.ndarray) -> np.ndarray:
    """Decision values for rows of kernel evaluations against the training set."""
    rows = np.atleast_2d(np.asarray(kernel_rows, dtype=float))
    return rows[:, model.support_idx] @ model.dual_coef + model.bias


def svm_predict(model: SvmModel, kernel_rows: np.ndarray) -> np.ndarray:
    """Predicted labels (+1 on ties) for kernel rows against the training set."""
    d = svm_decision(model, kernel_rows)
    return np.where(d >= 0.0, 1.0, -1.0)


def svm_dual_objective(gram, labels, alpha: np.ndarray) -> float:
    """Dual objective sum(alpha) - 0.5 alpha^T Q alpha for a full alpha vector."""
    k = gram.values if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=float)
    y = np.asarray(labels, dtype=float)
    q = k * np.outer(y, y)
    return float(alpha.sum() - 0.5 * alpha @ q @ alpha)


@dataclass(frozen=True)
class KpcaResult:
    """Kernel PCA output: per-example coordinates for the retained components."""

    coordinates: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    centered: np.ndarray


def kpca(gram: GramMatrix | np.ndarray, num_components: int | None = None) -> KpcaResult:
    """Kernel PCA: double-center, eigendecompose, project.

    Components are ordered by descending eigenvalue; eigenvalues below
    1e-10 * trace are dropped. Coordinates are the centered Gram projected on
    unit-feature-norm components, i.e. coordinate[j, r] = sqrt(l_r) u[j, r].
    """
    k = gram.values if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise InvalidInputError(f"gram matrix must be square, got {k.shape}")
    if np.abs(k - k.T).max(initial=0.0) > 1e-9 * max(1.0, np.abs(k).max(initial=1.0)):
        raise InvalidInputError("gram matrix asymmetric beyond 1e-9")
    n = k.shape[0]
    ones = np.full((n, n), 1.0 / n)
    centered = k - ones @ k - k @ ones + ones @ k @ ones
    centered = 0.5 * (centered + centered.T)
    eigvals, eigvecs = np.linalg.eigh(centered)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    # relative cutoff plus an absolute floor so an all-zero centered matrix
    # retains nothing instead of floating-point dust
    thresh = 1e-10 * max(float(np.trace(centered)), 0.0) + 1e-13 * max(
        1.0, float(np.abs(k).max(initial=0.0))
    )
    keep = eigvals > thresh
    rank = int(keep.sum())
    if num_components is None:
        num_components = rank
    if num_components > rank:
        raise InvalidInputError(
            f"requested {num_components} components but only {rank} retained"
        )
    lam = eigvals[:num_components]
    u = eigvecs[:, :num_components]
    coords = u * np.sqrt(lam)[None, :]
    return KpcaResult(
        coordinates=coords,
        eigenvalues=lam,
        eigenvectors=u,
        centered=centered,
    )


def bayes_hmm_classify(class_models: list[Hmm], x) -> int:
    """Maximum-likelihood class under per-class HMMs (ties -> lowest index)."""
    if not class_models:
        raise InvalidInputError("need at least one class model")
    logliks = [sequence_loglik(m, x) for m in class_models]
    best = max(logliks)
    return int(next(i for i, v in enumerate(logliks) if v == best))


def stratified_folds(labels, folds: int = 10, seed=0) -> list[np.ndarray]:
    """Deterministic stratified fold assignment (class proportions within +-1)."""
    y = np.asarray(labels)
    n = y.shape[0]
    if folds < 2 or folds > n:
        raise InvalidInputError(f"folds must be in [2, {n}], got {folds}")
    rng = np.random.default_rng(seed)
    assignment = np.empty(n, dtype=int)
    next_fold = 0
    for cls in sorted(set(y.tolist())):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        for pos, example in enumerate(idx):
            assignment[example] = (next_fold + pos) % folds
        next_fold = (next_fold + idx.size) % folds
    return [np.flatnonzero(assignment == f) for f in range(folds)]


@dataclass(frozen=True)
class CvRow:
    """Per-grid-point cross-validation result."""

    kernel_id: str
    params: dict
    c: float
    fold_errors: tuple[float, ...]

    @property
    def mean_error(self) -> float:
        return float(np.mean(self.fold_errors))


@dataclass(frozen=True)
class CvReport:
    """All grid points with the best-mean-error row marked."""

    rows: tuple[CvRow, ...]
    folds: int
    seed: int

    @property
    def best(self) -> CvRow:
        return min(self.rows, key=lambda r: (r.mean_error, str(r.params), r.c))


def stratified_cv(
    grams,
    labels,
    folds: int = 10,
    c_grid=DEFAULT_C_GRID,
    seed=0,
) -> CvReport:
    """Stratified k-fold CV of the kernel SVM over (gram, C) grid points.

    ``grams`` is one GramMatrix or a list of them (e.g. one per kernel
    parameter setting); folds are shared across grid points.
    """
    if isinstance(grams, GramMatrix):
        grams = [grams]
    y = np.asarray(labels, dtype=float)
    if len(np.unique(y)) != 2:
        raise InvalidInputError("stratified_cv needs exactly two classes")
    fold_idx = stratified_folds(y, folds, seed)
    rows = []
    for gram in grams:
        if gram.n != y.shape[0]:
            raise InvalidInputError(
                f"gram of size {gram.n} vs {y.shape[0]} labels"
            )
        k = gram.values
        for c in c_grid:
            errs = []
            for test in fold_idx:
                train = np.setdiff1d(np.arange(gram.n), test)
                model = svm_train(k[np.ix_(train, train)], y[train], c)
                pred = svm_predict(model, k[np.ix_(test, train)])
                errs.append(float(np.mean(pred != y[test])))
            rows.append(
                CvRow(gram.kernel_id, dict(gram.params), float(c), tuple(errs))
            )
    return CvReport(rows=tuple(rows), folds=folds, seed=seed)
