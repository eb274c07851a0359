"""Plain-text persistence for models, Gram matrices, and CV reports.

Files are line-oriented ``key: value`` records. Floats are written with
``repr`` (shortest round-trip form), so a load reproduces the in-memory
values bit-exactly. Matrices are stored one row per key with a ``.<row>``
suffix. Every artifact can carry a ``config_hash`` header for provenance
checks by the CLI.

Schema (model files)::

    format: meanmap-model v1
    kind: discrete | gaussian | gaussian-mixture | kde | lds | hmm | lmmk-features
    config_hash: <hex or ->
    ... kind-specific keys ...
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .distributions import (
    DiscreteDist,
    GaussianDist,
    GaussianMixture,
    KdeModel,
    LdsModel,
)
from .errors import InvalidInputError
from .hmm import Hmm
from .learn import CvReport, CvRow, GramMatrix
from .lmmk import LmmkFeatures

FORMAT_MODEL = "meanmap-model v1"
FORMAT_GRAM = "meanmap-gram v1"
FORMAT_REPORT = "meanmap-cvreport v1"


def _fmt_vec(v) -> str:
    return " ".join(repr(float(x)) for x in np.asarray(v, dtype=float).ravel())


def _parse_vec(s: str) -> np.ndarray:
    return np.array([float(tok) for tok in s.split()], dtype=float)


def _emit_matrix(lines: list[str], key: str, m) -> None:
    m = np.asarray(m, dtype=float)
    for r in range(m.shape[0]):
        lines.append(f"{key}.{r}: {_fmt_vec(m[r])}")


def _read_matrix(kv: dict[str, str], key: str, rows: int) -> np.ndarray:
    return np.vstack([_parse_vec(kv[f"{key}.{r}"]) for r in range(rows)])


def _gaussian_lines(prefix: str, g: GaussianDist) -> list[str]:
    lines = [f"{prefix}.mean: {_fmt_vec(g.mu)}"]
    _emit_matrix(lines, f"{prefix}.cov", g.sigma)
    return lines


def _read_gaussian(kv: dict[str, str], prefix: str, dim: int) -> GaussianDist:
    mu = _parse_vec(kv[f"{prefix}.mean"])
    return GaussianDist(mu, _read_matrix(kv, f"{prefix}.cov", dim))


def _mixture_lines(prefix: str, m: GaussianMixture) -> list[str]:
    lines = [f"{prefix}.weights: {_fmt_vec(m.weights)}"]
    for c, comp in enumerate(m.components):
        lines.extend(_gaussian_lines(f"{prefix}.comp.{c}", comp))
    return lines


def _read_mixture(kv: dict[str, str], prefix: str, dim: int) -> GaussianMixture:
    w = _parse_vec(kv[f"{prefix}.weights"])
    comps = tuple(
        _read_gaussian(kv, f"{prefix}.comp.{c}", dim) for c in range(w.shape[0])
    )
    return GaussianMixture(w, comps)


def model_lines(model, config_hash: str | None = None, **extra) -> list[str]:
    """Serialize a model to its text lines (without trailing newline)."""
    lines = [f"format: {FORMAT_MODEL}"]
    hdr = config_hash if config_hash else "-"

    def head(kind: str) -> None:
        lines.append(f"kind: {kind}")
        lines.append(f"config_hash: {hdr}")
        for k, v in sorted(extra.items()):
            lines.append(f"{k}: {v}")

    if isinstance(model, DiscreteDist):
        head("discrete")
        lines.append(f"alpha: {_fmt_vec(model.alpha)}")
    elif isinstance(model, GaussianDist):
        head("gaussian")
        lines.append(f"dim: {model.dim}")
        lines.extend(_gaussian_lines("g", model))
    elif isinstance(model, GaussianMixture):
        head("gaussian-mixture")
        lines.append(f"dim: {model.dim}")
        lines.extend(_mixture_lines("mix", model))
    elif isinstance(model, KdeModel):
        head("kde")
        lines.append(f"dim: {model.dim}")
        lines.append(f"bandwidth: {model.bandwidth!r}")
        lines.append(f"centers: {model.num_centers}")
        _emit_matrix(lines, "center", model.centers)
    elif isinstance(model, LdsModel):
        head("lds")
        lines.append(f"state_dim: {model.state_dim}")
        lines.append(f"obs_dim: {model.obs_dim}")
        _emit_matrix(lines, "A", model.A)
        _emit_matrix(lines, "C", model.C)
        _emit_matrix(lines, "R", model.R)
        lines.append(f"mu0: {_fmt_vec(model.mu0)}")
        _emit_matrix(lines, "sigma0", model.sigma0)
    elif isinstance(model, Hmm):
        head("hmm")
        lines.append(f"states: {model.n_states}")
        lines.append(f"emission: {model.emission_kind}")
        lines.append(f"pi: {_fmt_vec(model.pi)}")
        _emit_matrix(lines, "A", model.A)
        if model.emission_kind == "discrete":
            lines.append(f"alphabet: {model.alphabet_size}")
            for j, e in enumerate(model.emissions):
                lines.append(f"emit.{j}: {_fmt_vec(e.alpha)}")
        else:
            lines.append(f"dim: {model.obs_dim}")
            for j, e in enumerate(model.emissions):
                lines.extend(_mixture_lines(f"emit.{j}", e))
    elif isinstance(model, LmmkFeatures):
        head("lmmk-features")
        k, n = model.gamma_by_symbol.shape
        lines.append(f"alphabet: {k}")
        lines.append(f"states: {n}")
        lines.append(f"seq_length: {model.seq_length}")
        _emit_matrix(lines, "gamma_by_symbol", model.gamma_by_symbol)
        _emit_matrix(lines, "xi_avg", model.xi_avg)
    else:
        raise InvalidInputError(f"cannot serialize {type(model).__name__}")
    return lines


def write_model(path, model, config_hash: str | None = None, **extra) -> None:
    Path(path).write_text("\n".join(model_lines(model, config_hash, **extra)) + "\n")


def _parse_kv(text: str, expected_format: str) -> dict[str, str]:
    kv: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise InvalidInputError(f"line {lineno}: expected 'key: value', got {raw!r}")
        key, _, value = line.partition(":")
        kv[key.strip()] = value.strip()
    if kv.get("format") != expected_format:
        raise InvalidInputError(
            f"expected format {expected_format!r}, got {kv.get('format')!r}"
        )
    return kv


def read_model(path):
    """Load a model file; returns (model, header_dict)."""
    kv = _parse_kv(Path(path).read_text(), FORMAT_MODEL)
    kind = kv.get("kind")
    if kind == "discrete":
        model = DiscreteDist(_parse_vec(kv["alpha"]))
    elif kind == "gaussian":
        model = _read_gaussian(kv, "g", int(kv["dim"]))
    elif kind == "gaussian-mixture":
        model = _read_mixture(kv, "mix", int(kv["dim"]))
    elif kind == "kde":
        model = KdeModel(
            _read_matrix(kv, "center", int(kv["centers"])), float(kv["bandwidth"])
        )
    elif kind == "lds":
        k = int(kv["state_dim"])
        n = int(kv["obs_dim"])
        model = LdsModel(
            _read_matrix(kv, "A", k),
            _read_matrix(kv, "C", n),
            _read_matrix(kv, "R", n),
            _parse_vec(kv["mu0"]),
            _read_matrix(kv, "sigma0", k),
        )
    elif kind == "hmm":
        n = int(kv["states"])
        pi = _parse_vec(kv["pi"])
        A = _read_matrix(kv, "A", n)
        if kv["emission"] == "discrete":
            emissions = tuple(DiscreteDist(_parse_vec(kv[f"emit.{j}"])) for j in range(n))
        else:
            dim = int(kv["dim"])
            emissions = tuple(_read_mixture(kv, f"emit.{j}", dim) for j in range(n))
        model = Hmm(pi, A, emissions)
    elif kind == "lmmk-features":
        k = int(kv["alphabet"])
        model = LmmkFeatures(
            _read_matrix(kv, "gamma_by_symbol", k),
            _read_matrix(kv, "xi_avg", int(kv["states"])),
            int(kv["seq_length"]),
        )
    else:
        raise InvalidInputError(f"unknown model kind {kind!r}")
    return model, kv


def _matrix_checksum(rows: list[str]) -> str:
    return hashlib.sha256("\n".join(rows).encode()).hexdigest()


def write_gram(path, gram: GramMatrix, config_hash: str | None = None) -> None:
    rows = [f"row.{r}: {_fmt_vec(gram.values[r])}" for r in range(gram.n)]
    lines = [
        f"format: {FORMAT_GRAM}",
        f"kernel: {gram.kernel_id}",
        f"params: {json.dumps(gram.params, sort_keys=True)}",
        f"config_hash: {config_hash if config_hash else '-'}",
        f"ids: {' '.join(gram.example_ids)}",
        f"n: {gram.n}",
        f"checksum: {_matrix_checksum(rows)}",
        *rows,
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def read_gram(path) -> tuple[GramMatrix, dict[str, str]]:
    kv = _parse_kv(Path(path).read_text(), FORMAT_GRAM)
    n = int(kv["n"])
    rows = [f"row.{r}: {kv[f'row.{r}']}" for r in range(n)]
    if _matrix_checksum(rows) != kv["checksum"]:
        raise InvalidInputError(f"gram file {path}: checksum mismatch")
    values = _read_matrix(kv, "row", n)
    ids = tuple(kv["ids"].split()) if kv["ids"] else tuple(str(i) for i in range(n))
    gram = GramMatrix(values, ids, kv["kernel"], json.loads(kv["params"]))
    return gram, kv


def write_cv_report(path, report: CvReport, config_hash: str | None = None) -> None:
    """Structured text: one row per fold x grid point, then per-point means."""
    lines = [
        f"# format: {FORMAT_REPORT}",
        f"# config_hash: {config_hash if config_hash else '-'}",
        f"# folds: {report.folds}",
        f"# seed: {report.seed}",
        "# columns: kernel\tparams\tC\tfold\terror",
    ]
    for row in report.rows:
        params = json.dumps(row.params, sort_keys=True)
        for f, err in enumerate(row.fold_errors):
            lines.append(f"{row.kernel_id}\t{params}\t{row.c!r}\t{f}\t{err!r}")
    lines.append("# summary columns: kernel\tparams\tC\tmean_error")
    best = report.best
    for row in report.rows:
        params = json.dumps(row.params, sort_keys=True)
        marker = "\tbest" if row is best else ""
        lines.append(
            f"summary\t{row.kernel_id}\t{params}\t{row.c!r}\t{row.mean_error!r}{marker}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_cv_report(path) -> CvReport:
    folds = None
    seed = 0
    data: dict[tuple[str, str, float], dict[int, float]] = {}
    for raw in Path(path).read_text().splitlines():
        if raw.startswith("# folds:"):
            folds = int(raw.split(":", 1)[1])
        elif raw.startswith("# seed:"):
            seed = int(raw.split(":", 1)[1])
        elif raw.startswith("#") or not raw.strip() or raw.startswith("summary\t"):
            continue
        else:
            kernel, params, c, fold, err = raw.split("\t")
            data.setdefault((kernel, params, float(c)), {})[int(fold)] = float(err)
    rows = tuple(
        CvRow(kernel, json.loads(params), c, tuple(v for _, v in sorted(errs.items())))
        for (kernel, params, c), errs in data.items()
    )
    if folds is None:
        raise InvalidInputError(f"{path}: missing '# folds:' header")
    return CvReport(rows=rows, folds=folds, seed=seed)


def config_hash(config: dict) -> str:
    """Stable hash of a configuration mapping (order-insensitive)."""
    return hashlib.sha256(
        json.dumps(config, sort_keys=True, default=str).encode()
    ).hexdigest()[:16]
