"""Dataset ingestion, scaling, and the built-in synthetic sequence generators.

File formats (line-oriented text):

* discrete sequences  -- one sequence per line, whitespace-separated ints
* continuous sequences -- one sequence per line, whitespace-separated reals
* labeled datasets    -- ``label<TAB>v1 v2 ...`` per line
* UCR files           -- ``label,v1,v2,...`` per line (importer converts)
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .distributions import DiscreteDist
from .errors import InvalidInputError
from .hmm import Hmm, hmm_sample

#: Fixed 3-state 2-symbol generator pair for the synthetic two-class task.
#: Their stationary symbol distributions differ by about 0.20 total variation.
SYNTH_GENERATORS = (
    Hmm(
        pi=np.array([0.6, 0.3, 0.1]),
        A=np.array([[0.7, 0.2, 0.1], [0.2, 0.6, 0.2], [0.1, 0.3, 0.6]]),
        emissions=(
            DiscreteDist(np.array([0.9, 0.1])),
            DiscreteDist(np.array([0.6, 0.4])),
            DiscreteDist(np.array([0.3, 0.7])),
        ),
    ),
    Hmm(
        pi=np.array([0.1, 0.3, 0.6]),
        A=np.array([[0.6, 0.3, 0.1], [0.2, 0.6, 0.2], [0.1, 0.2, 0.7]]),
        emissions=(
            DiscreteDist(np.array([0.7, 0.3])),
            DiscreteDist(np.array([0.4, 0.6])),
            DiscreteDist(np.array([0.1, 0.9])),
        ),
    ),
)


def _nonempty_lines(path) -> list[tuple[int, str]]:
    out = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if line and not line.startswith("#"):
            out.append((lineno, line))
    return out


def load_sequences(path, kind: str = "discrete") -> list[np.ndarray]:
    """Load one-sequence-per-line files of int symbols or reals."""
    if kind not in ("discrete", "continuous"):
        raise InvalidInputError(f"unknown sequence kind {kind!r}")
    seqs = []
    for lineno, line in _nonempty_lines(path):
        try:
            if kind == "discrete":
                seqs.append(np.array([int(t) for t in line.split()], dtype=int))
            else:
                seqs.append(np.array([float(t) for t in line.split()], dtype=float))
        except ValueError as exc:
            raise InvalidInputError(f"{path}:{lineno}: {exc}") from exc
    if not seqs:
        raise InvalidInputError(f"{path}: no sequences found")
    return seqs


def load_labeled(path, kind: str = "discrete") -> tuple[list[str], list[np.ndarray]]:
    """Load ``label<TAB>values`` lines; returns (labels, sequences)."""
    labels: list[str] = []
    seqs: list[np.ndarray] = []
    for lineno, line in _nonempty_lines(path):
        if "\t" not in line:
            raise InvalidInputError(f"{path}:{lineno}: expected 'label<TAB>values'")
        label, _, rest = line.partition("\t")
        try:
            if kind == "discrete":
                seqs.append(np.array([int(t) for t in rest.split()], dtype=int))
            else:
                seqs.append(np.array([float(t) for t in rest.split()], dtype=float))
        except ValueError as exc:
            raise InvalidInputError(f"{path}:{lineno}: {exc}") from exc
        labels.append(label.strip())
    if not seqs:
        raise InvalidInputError(f"{path}: no sequences found")
    return labels, seqs


def write_labeled(path, labels, seqs, kind: str = "discrete", header: str | None = None) -> None:
    lines = [] if header is None else [f"# {header}"]
    for label, s in zip(labels, seqs):
        if kind == "discrete":
            body = " ".join(str(int(v)) for v in s)
        else:
            body = " ".join(repr(float(v)) for v in s)
        lines.append(f"{label}\t{body}")
    Path(path).write_text("\n".join(lines) + "\n")


def import_ucr(path) -> tuple[list[str], list[np.ndarray]]:
    """Parse a UCR-style CSV (label, v1, v2, ...) into labels and sequences."""
    labels: list[str] = []
    seqs: list[np.ndarray] = []
    for lineno, line in _nonempty_lines(path):
        toks = line.split(",") if "," in line else line.split()
        if len(toks) < 2:
            raise InvalidInputError(f"{path}:{lineno}: expected label plus values")
        lab = toks[0].strip()
        try:
            # UCR labels are numeric ("1", "-1", "1.0000000e+00"); canonicalize
            as_float = float(lab)
            if as_float == int(as_float):
                lab = str(int(as_float))
        except ValueError:
            pass
        labels.append(lab)
        try:
            seqs.append(np.array([float(t) for t in toks[1:]], dtype=float))
        except ValueError as exc:
            raise InvalidInputError(f"{path}:{lineno}: {exc}") from exc
    return labels, seqs


def minmax_params(seqs) -> tuple[float, float]:
    """(lo, hi) over all values of the given sequences."""
    lo = min(float(np.min(s)) for s in seqs)
    hi = max(float(np.max(s)) for s in seqs)
    return lo, hi


def minmax_scale(seqs, lo: float, hi: float) -> list[np.ndarray]:
    """Scale values to [0, 1] with the given data range (clipping outside)."""
    span = hi - lo
    if span <= 0:
        return [np.zeros_like(np.asarray(s, dtype=float)) for s in seqs]
    return [np.clip((np.asarray(s, dtype=float) - lo) / span, 0.0, 1.0) for s in seqs]


def balanced_subsample(labels, count: int, seed) -> np.ndarray:
    """Indices of a class-balanced random subsample of total size ~count."""
    y = np.asarray(labels)
    classes = sorted(set(y.tolist()))
    per = count // len(classes)
    if per < 1:
        raise InvalidInputError(f"subsample of {count} too small for {len(classes)} classes")
    rng = np.random.default_rng(seed)
    picks = []
    for cls in classes:
        idx = np.flatnonzero(y == cls)
        if idx.size < per:
            raise InvalidInputError(
                f"class {cls!r} has {idx.size} examples, need {per} for the subsample"
            )
        picks.append(rng.choice(idx, size=per, replace=False))
    return np.sort(np.concatenate(picks))


def synth_dataset(
    num_per_class: int, length: int, seed
) -> tuple[list[str], list[np.ndarray]]:
    """Two-class dataset from the built-in generator pair; deterministic per seed."""
    if num_per_class < 1 or length < 1:
        raise InvalidInputError("need at least one sequence of length >= 1")
    labels: list[str] = []
    seqs: list[np.ndarray] = []
    for cls, gen in enumerate(SYNTH_GENERATORS):
        for i in range(num_per_class):
            seqs.append(hmm_sample(gen, length, [seed, cls, i]))
            labels.append(str(cls))
    return labels, seqs
