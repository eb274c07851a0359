"""Base point kernels: Gaussian RBF and its restriction to 1-of-k encoded symbols.

Convention used library-wide: k(x, y) = exp(-0.5 * lam * ||x - y||^2). Under the
1-of-k encoding two distinct symbols are at squared distance 2, so the symbol
kernel evaluates to exp(-lam * (1 - delta_ij)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class RbfParams:
    """Bandwidth (inverse squared length scale) of the RBF base kernel.

    lam = 0 collapses the kernel to the constant 1 and is allowed; negative or
    non-finite values are rejected.
    """

    lam: float

    def __post_init__(self):
        lam = float(self.lam)
        if not math.isfinite(lam) or lam < 0.0:
            raise InvalidInputError(
                f"rbf bandwidth must be finite and >= 0, got {self.lam!r}"
            )
        object.__setattr__(self, "lam", lam)


@dataclass(frozen=True)
class OneOfKEncoding:
    """Maps symbol i in {0, ..., k-1} to the unit vector e_i in R^k."""

    alphabet_size: int

    def __post_init__(self):
        k = int(self.alphabet_size)
        if k < 1:
            raise InvalidInputError(f"alphabet size must be >= 1, got {k}")
        object.__setattr__(self, "alphabet_size", k)

    def encode(self, symbol: int) -> np.ndarray:
        if not 0 <= symbol < self.alphabet_size:
            raise InvalidInputError(
                f"symbol {symbol} outside alphabet [0, {self.alphabet_size})"
            )
        e = np.zeros(self.alphabet_size)
        e[symbol] = 1.0
        return e


def rbf(x: np.ndarray, y: np.ndarray, params: RbfParams) -> float:
    """RBF kernel exp(-0.5 * lam * ||x - y||^2) between two real vectors."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise InvalidInputError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise InvalidInputError("inputs must be finite")
    d = x - y
    return float(np.exp(-0.5 * params.lam * (d @ d)))


def rbf_symbols(i: int, j: int, enc: OneOfKEncoding, params: RbfParams) -> float:
    """RBF kernel between 1-of-k encoded symbols: 1 if i == j else exp(-lam)."""
    k = enc.alphabet_size
    if not (0 <= i < k and 0 <= j < k):
        raise InvalidInputError(f"symbols ({i}, {j}) outside alphabet [0, {k})")
    if i == j:
        return 1.0
    return math.exp(-params.lam)
