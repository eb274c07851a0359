"""Independent verification engines for the closed-form kernels.

These are written from the defining expectations only and share no numerical
routines with the implementations they check: Monte Carlo estimation of the
mean map inner product, and exhaustive enumeration over all state paths and
observation sequences of small discrete HMMs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .distributions import (
    DiscreteDist,
    GaussianDist,
    GaussianMixture,
    KdeModel,
    LdsModel,
    sample,
)
from .errors import InvalidInputError
from .hmm import Hmm
from .kernels import RbfParams

_BLOCK = 250_000  # MC draws per block; fixed so results are seed-deterministic


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo mean with its standard error."""

    mean: float
    std_error: float
    samples: int
    seed: int


def mc_gmmk(
    p,
    q,
    rbf: RbfParams,
    samples: int,
    seed: int,
    *,
    horizon: int | None = None,
) -> McEstimate:
    """Estimate E_{x~p, y~q}[exp(-0.5 lam ||x-y||^2)] by paired iid sampling.

    Draws come in fixed-size blocks with per-block child seeds, so the
    estimate is deterministic for a given seed. ``horizon`` is forwarded to
    LDS trajectory sampling.
    """
    if samples < 1000:
        raise InvalidInputError(f"need >= 1000 samples, got {samples}")
    total = 0.0
    total_sq = 0.0
    done = 0
    block_idx = 0
    discrete = isinstance(p, DiscreteDist)
    while done < samples:
        m = min(_BLOCK, samples - done)
        xs = sample(p, [seed, 2 * block_idx], m, horizon=horizon)
        ys = sample(q, [seed, 2 * block_idx + 1], m, horizon=horizon)
        if discrete:
            # 1-of-k encodings sit at squared distance 2(1 - delta)
            sq = 2.0 * (xs != ys)
        else:
            sq = ((xs - ys) ** 2).sum(axis=1)
        vals = np.exp(-0.5 * rbf.lam * sq)
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += m
        block_idx += 1
    mean = total / samples
    var = max(total_sq - samples * mean * mean, 0.0) / (samples - 1)
    return McEstimate(
        mean=mean,
        std_error=math.sqrt(var / samples),
        samples=samples,
        seed=seed,
    )


def _enum_paths(hmm: Hmm, length: int) -> list[tuple[tuple[int, ...], float]]:
    paths = []
    for qs in itertools.product(range(hmm.n_states), repeat=length):
        pr = hmm.pi[qs[0]]
        for a, b in zip(qs, qs[1:]):
            pr *= hmm.A[a, b]
        paths.append((qs, float(pr)))
    return paths


def _seq_emission_prob(hmm: Hmm, qs, xs) -> float:
    b = hmm.emission_matrix()
    pr = 1.0
    for q, s in zip(qs, xs):
        pr *= b[q, s]
    return pr


def _enum_seq_table(hmm: Hmm, length: int, power: float = 1.0) -> dict[tuple, float]:
    """sum over state paths of p(q, x)^power, for every observation sequence x."""
    out: dict[tuple, float] = {}
    paths = _enum_paths(hmm, length)
    for xs in itertools.product(range(hmm.alphabet_size), repeat=length):
        acc = 0.0
        for qs, pq in paths:
            joint = pq * _seq_emission_prob(hmm, qs, xs)
            acc += joint if power == 1.0 else joint**power
        out[xs] = acc
    return out


def _check_enum_size(hmm: Hmm, length: int) -> None:
    work = hmm.n_states**length * hmm.alphabet_size**length
    if work > 10**7:
        raise InvalidInputError(
            f"enumeration too large: n^T * k^T = {work} > 1e7"
        )


def enum_hmm_kernel(
    p: Hmm,
    q: Hmm,
    witness_length: int,
    kind: str = "rbf",
    *,
    lam: float | None = None,
    rho: float = 1.0,
) -> float:
    """Exact kernel between small discrete HMMs by raw summation.

    kind="rbf": sum_{x,x'} p(x) q(x') prod_t exp(-lam (1 - delta));
    kind="delta": sum_x p(x) q(x) (shared sequences only);
    kind="ppk": sum_x (sum_paths p(path, x)^rho)(sum_paths q(path, x)^rho).
    """
    if p.emission_kind != "discrete" or q.emission_kind != "discrete":
        raise InvalidInputError("enumeration oracle covers discrete HMMs only")
    length = witness_length + 1
    _check_enum_size(p, length)
    _check_enum_size(q, length)
    if kind == "rbf":
        if lam is None:
            raise InvalidInputError("kind='rbf' needs lam")
        tp = _enum_seq_table(p, length)
        tq = _enum_seq_table(q, length)
        c = math.exp(-lam)
        acc = 0.0
        for xs, pp in tp.items():
            for ys, qq in tq.items():
                mism = sum(a != b for a, b in zip(xs, ys))
                acc += pp * qq * c**mism
        return acc
    if kind == "delta":
        tp = _enum_seq_table(p, length)
        tq = _enum_seq_table(q, length)
        return sum(pp * tq[xs] for xs, pp in tp.items())
    if kind == "ppk":
        tp = _enum_seq_table(p, length, power=rho)
        tq = _enum_seq_table(q, length, power=rho)
        return sum(pp * tq[xs] for xs, pp in tp.items())
    raise InvalidInputError(f"unknown kind {kind!r}")


def enum_posteriors(hmm: Hmm, x) -> tuple[np.ndarray, np.ndarray, float]:
    """Exact smoothing posteriors by summing joint probabilities over all paths.

    Returns (gamma, xi, loglik); the ground truth for forward_backward.
    """
    if hmm.emission_kind != "discrete":
        raise InvalidInputError("enumeration oracle covers discrete HMMs only")
    xs = [int(v) for v in x]
    t_len = len(xs)
    n = hmm.n_states
    if hmm.n_states**t_len > 10**7:
        raise InvalidInputError("enumeration too large")
    gamma = np.zeros((t_len, n))
    xi = np.zeros((max(t_len - 1, 0), n, n))
    total = 0.0
    for qs, pq in _enum_paths(hmm, t_len):
        joint = pq * _seq_emission_prob(hmm, qs, xs)
        total += joint
        for t, s in enumerate(qs):
            gamma[t, s] += joint
        for t in range(t_len - 1):
            xi[t, qs[t], qs[t + 1]] += joint
    if total <= 0.0:
        raise InvalidInputError("sequence has zero probability under the model")
    return gamma / total, xi / total, math.log(total)
