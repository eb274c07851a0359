"""Command-line driver for the kernel experiments.

Verbs: ``synth``, ``fit-hmms``, ``gram``, ``classify``, ``kpca``, ``kde-fit``,
``ucr-import``, ``verify``. Every command is deterministic given its inputs,
config, and seed (byte-identical outputs, for any ``--jobs`` value). Exit
codes: 0 success, 2 invalid input, 3 numerical failure (diagnostic written).
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
import traceback
from pathlib import Path

import numpy as np

from . import data as datamod
from .distributions import KdeModel
from .emmk import emmk, emmk_continuous, ngram_profile
from .errors import InvalidInputError, NumericalError
from .gmmk import gmmk_kde
from .gmmk_hmm import GmmkHmmConfig, gmmk_hmm, ppk_hmm
from .hmm import Hmm, baum_welch, heuristic_state_count
from .kernels import RbfParams
from .learn import (
    DEFAULT_C_GRID,
    DEFAULT_LAMBDA_GRID,
    DEFAULT_NU_GRID,
    DEFAULT_WITNESS_GRID,
    CvReport,
    CvRow,
    GramMatrix,
    assemble_gram,
    check_psd,
    cosine_normalize,
    kpca,
    stratified_folds,
    svm_predict,
    svm_train,
)
from .lmmk import TildeTransformConfig, lmmk_features, tilde_transform, v_qq, v_xq_discrete
from .serialize import (
    config_hash,
    read_gram,
    read_model,
    write_cv_report,
    write_gram,
    write_model,
)

KERNEL_CHOICES = ("gmmk-hmm", "ppk", "lmmk", "emmk", "gmmk-kde")


def _file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.replace(",", " ").split())


def _labels_to_pm1(labels) -> tuple[np.ndarray, list[str]]:
    classes = sorted(set(labels))
    if len(classes) != 2:
        raise InvalidInputError(f"need exactly two classes, got {classes}")
    y = np.array([1.0 if l == classes[1] else -1.0 for l in labels])
    return y, classes


def _state_count(policy: str, seq_len: int, alphabet: int, gamma: float) -> int:
    if policy == "heuristic":
        return heuristic_state_count(seq_len, alphabet, gamma)
    return int(policy)


# ---------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    labels, seqs = datamod.synth_dataset(args.num, args.length, args.seed)
    cfg = config_hash(
        {"cmd": "synth", "num": args.num, "length": args.length, "seed": args.seed}
    )
    datamod.write_labeled(args.out, labels, seqs, "discrete", header=f"config_hash: {cfg}")
    print(f"wrote {2 * args.num} sequences to {args.out} (config {cfg})")
    return 0


def _load_dataset(path, fmt):
    if fmt == "labeled-discrete":
        return datamod.load_labeled(path, "discrete")
    if fmt == "labeled-continuous":
        return datamod.load_labeled(path, "continuous")
    if fmt == "discrete-seq":
        return None, datamod.load_sequences(path, "discrete")
    if fmt == "continuous-seq":
        return None, datamod.load_sequences(path, "continuous")
    raise InvalidInputError(f"unknown format {fmt!r}")


class _FitTask:
    """Picklable per-sequence fit used by the --jobs pool."""

    def __init__(self, kind, states_policy, gamma, n_symbols, seed):
        self.kind = kind
        self.states_policy = states_policy
        self.gamma = gamma
        self.n_symbols = n_symbols
        self.seed = seed

    def __call__(self, item):
        idx, seq = item
        n = _state_count(self.states_policy, len(seq), self.n_symbols or 2, self.gamma)
        fit = baum_welch(
            seq,
            n,
            self.kind,
            seed=[self.seed, idx],
            n_symbols=self.n_symbols,
        )
        return fit.hmm


def cmd_fit_hmms(args) -> int:
    labels, seqs = _load_dataset(args.data, args.format)
    discrete = "discrete" in args.format
    kind = "discrete" if discrete else "gaussian"
    n_symbols = (int(max(int(s.max()) for s in seqs)) + 1) if discrete else None
    cfg = config_hash(
        {
            "cmd": "fit-hmms",
            "data": _file_hash(args.data),
            "states": args.states,
            "gamma": args.gamma,
            "seed": args.seed,
            "per_class": args.per_class,
        }
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    for lineno, seq in enumerate(seqs, 1):
        n = _state_count(args.states, len(seq), n_symbols or 2, args.gamma)
        if len(seq) < n:
            raise InvalidInputError(
                f"{args.data}: line {lineno}: sequence of length {len(seq)} "
                f"too short for {n} states"
            )

    if args.per_class:
        if labels is None:
            raise InvalidInputError("--per-class needs a labeled dataset")
        skipped = fitted = 0
        for cls in sorted(set(labels)):
            path = out / f"hmm_class_{cls}.txt"
            if _resume_hit(path, cfg):
                skipped += 1
                continue
            group = [s for s, l in zip(seqs, labels) if l == cls]
            n = _state_count(args.states, len(group[0]), n_symbols or 2, args.gamma)
            fit = baum_welch(group, n, kind, seed=[args.seed, 0], n_symbols=n_symbols)
            write_model(path, fit.hmm, cfg, label=cls)
            fitted += 1
    else:
        task = _FitTask(kind, args.states, args.gamma, n_symbols, args.seed)
        todo = []
        paths = []
        for i, seq in enumerate(seqs):
            label = labels[i] if labels is not None else "-"
            path = out / f"hmm_{i:05d}.txt"
            paths.append((path, label))
            if not _resume_hit(path, cfg):
                todo.append((i, seq))
        skipped = len(seqs) - len(todo)
        models = _parallel_map(task, todo, args.jobs)
        fitted = 0
        for (i, _seq), hmm in zip(todo, models):
            path, label = paths[i]
            write_model(path, hmm, cfg, label=label, index=i)
            fitted += 1
    print(f"fitted {fitted} models, skipped {skipped} (config {cfg}) -> {args.out}")
    return 0


def _resume_hit(path: Path, cfg: str) -> bool:
    if not path.exists():
        return False
    for line in path.read_text().splitlines():
        if line.startswith("config_hash:"):
            return line.split(":", 1)[1].strip() == cfg
    return False


def _parallel_map(fn, items, jobs: int):
    if jobs > 1 and len(items) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunk = max(1, len(items) // (jobs * 2))
            return list(pool.map(fn, items, chunksize=chunk))
    return [fn(it) for it in items]


def _read_model_dir(path) -> tuple[list, list[str], dict[str, str], str]:
    """All model files in a directory, sorted by filename; hashes must agree."""
    files = sorted(Path(path).glob("*.txt"))
    if not files:
        raise InvalidInputError(f"no model files (*.txt) in {path}")
    models, ids, labels = [], [], {}
    hashes = set()
    for f in files:
        model, kv = read_model(f)
        models.append(model)
        ids.append(f.stem)
        labels[f.stem] = kv.get("label", "-")
        hashes.add(kv.get("config_hash", "-"))
    if len(hashes) > 1:
        raise InvalidInputError(
            f"mixed config hashes in {path}: {sorted(hashes)}; "
            "refusing to combine artifacts from different runs"
        )
    return models, ids, labels, hashes.pop()


class _HmmPairKernel:
    def __init__(self, kernel, lam, witness, rho):
        self.kernel = kernel
        self.lam = lam
        self.witness = witness
        self.rho = rho

    def __call__(self, a, b):
        if self.kernel == "gmmk-hmm":
            return gmmk_hmm(a, b, GmmkHmmConfig(self.witness, RbfParams(self.lam))).value
        return ppk_hmm(a, b, self.witness, self.rho)


def cmd_gram(args) -> int:
    params: dict = {}
    extra = {}
    if args.kernel in ("gmmk-hmm", "ppk"):
        if not args.models:
            raise InvalidInputError(f"--kernel {args.kernel} needs --models")
        models, ids, _labels, src = _read_model_dir(args.models)
        if not all(isinstance(m, Hmm) for m in models):
            raise InvalidInputError("model directory must contain HMMs")
        if args.kernel == "gmmk-hmm":
            if args.lam is None:
                raise InvalidInputError("--kernel gmmk-hmm needs --lambda")
            params = {"lam": args.lam, "T": args.witness}
        else:
            params = {"rho": args.rho, "T": args.witness}
        fn = _HmmPairKernel(args.kernel, args.lam, args.witness, args.rho)
        gram = assemble_gram(
            models, fn, ids=ids, kernel_id=args.kernel, params=params, jobs=args.jobs
        )
        extra["source_hash"] = src
    elif args.kernel == "gmmk-kde":
        if not args.models:
            raise InvalidInputError("--kernel gmmk-kde needs --models")
        if args.lam is None:
            raise InvalidInputError("--kernel gmmk-kde needs --lambda")
        models, ids, _labels, src = _read_model_dir(args.models)
        if not all(isinstance(m, KdeModel) for m in models):
            raise InvalidInputError("model directory must contain KDE models")
        params = {"lam": args.lam}
        rbf = RbfParams(args.lam)
        gram = assemble_gram(
            models,
            lambda a, b: gmmk_kde(a, b, rbf).value,
            ids=ids,
            kernel_id="gmmk-kde",
            params=params,
            jobs=args.jobs,
        )
        extra["source_hash"] = src
    elif args.kernel == "lmmk":
        if not (args.data and args.theta):
            raise InvalidInputError("--kernel lmmk needs --data and --theta")
        _labels, seqs = _load_dataset(args.data, args.format)
        theta, kv = read_model(args.theta)
        if not isinstance(theta, Hmm) or theta.emission_kind != "discrete":
            raise InvalidInputError("--theta must be a discrete-emission HMM")
        feats = [lmmk_features(theta, s) for s in seqs]
        lam = args.lam if args.lam is not None else math.inf
        params = {"lam": lam}
        gram = assemble_gram(
            feats,
            lambda a, b: v_xq_discrete(a, b, lam) + v_qq(a, b, lam),
            ids=[str(i) for i in range(len(seqs))],
            kernel_id="lmmk",
            params=params,
            jobs=1,
        )
        if args.nu is not None:
            gram = GramMatrix(
                tilde_transform(gram.values, TildeTransformConfig(args.nu)),
                gram.example_ids,
                "lmmk-tilde",
                {**params, "nu": args.nu},
            )
        extra["source_hash"] = kv.get("config_hash", "-")
    elif args.kernel == "emmk":
        if not args.data:
            raise InvalidInputError("--kernel emmk needs --data")
        _labels, seqs = _load_dataset(args.data, args.format)
        lam = args.lam if args.lam is not None else math.inf
        params = {"order": args.order, "lam": lam}
        if "discrete" in args.format:
            profiles = [ngram_profile(s, args.order) for s in seqs]
            fn = lambda a, b: emmk(a, b, lam)  # noqa: E731
            items = profiles
        else:
            fn = lambda a, b: emmk_continuous(a, b, args.order, lam)  # noqa: E731
            items = seqs
        gram = assemble_gram(
            items,
            fn,
            ids=[str(i) for i in range(len(seqs))],
            kernel_id="emmk",
            params=params,
            jobs=args.jobs,
        )
        extra["source_hash"] = _file_hash(args.data)
    else:
        raise InvalidInputError(f"unknown kernel {args.kernel!r}")

    if args.normalize:
        gram = GramMatrix(
            cosine_normalize(gram),
            gram.example_ids,
            gram.kernel_id,
            {**gram.params, "normalized": True},
        )
    cfg = config_hash({"cmd": "gram", "kernel": args.kernel, "params": gram.params, **extra})
    write_gram(args.out, gram, cfg)
    min_eig, ok = check_psd(gram)
    print(
        f"wrote {gram.n}x{gram.n} gram to {args.out} "
        f"(psd: min_eig={min_eig:.3e} verdict={'pass' if ok else 'FAIL'})"
    )
    return 0


def _load_labels_file(path) -> list[str]:
    return [line for _no, line in datamod._nonempty_lines(path)]


def cmd_classify(args) -> int:
    if args.grams:
        report, cfg = _classify_from_grams(args)
    elif args.data:
        report, cfg = _classify_from_dataset(args)
    else:
        raise InvalidInputError("classify needs --gram file(s) or --data")
    write_cv_report(args.out, report, cfg)
    best = report.best
    print(
        f"wrote report to {args.out}; best: kernel={best.kernel_id} "
        f"params={best.params} C={best.c} mean_error={best.mean_error:.4f}"
    )
    return 0


def _classify_from_grams(args):
    from .learn import stratified_cv

    grams = []
    sources = set()
    ids = None
    for path in args.grams:
        gram, kv = read_gram(path)
        grams.append(gram)
        sources.add(kv.get("source_hash", kv.get("config_hash", "-")))
        if ids is None:
            ids = gram.example_ids
        elif ids != gram.example_ids:
            raise InvalidInputError("gram files disagree on example ids")
    if len(sources) > 1:
        raise InvalidInputError(
            f"gram files come from different inputs (source hashes {sorted(sources)})"
        )
    if not args.labels:
        raise InvalidInputError("classify from grams needs --labels")
    labels = _load_labels_file(args.labels)
    if len(labels) != grams[0].n:
        raise InvalidInputError(f"{len(labels)} labels for {grams[0].n} examples")
    y, _classes = _labels_to_pm1(labels)
    report = stratified_cv(grams, y, args.folds, args.c_grid, args.seed)
    cfg = config_hash(
        {
            "cmd": "classify",
            "grams": sorted(_file_hash(p) for p in args.grams),
            "labels": _file_hash(args.labels),
            "folds": args.folds,
            "seed": args.seed,
            "c_grid": args.c_grid,
        }
    )
    return report, cfg


def _classify_from_dataset(args):
    labels, seqs = _load_dataset(args.data, args.format)
    if labels is None:
        raise InvalidInputError("classify needs a labeled dataset")
    if args.subsample:
        idx = datamod.balanced_subsample(labels, args.subsample, args.seed)
        if not args.balanced:
            rng = np.random.default_rng(args.seed)
            idx = np.sort(rng.choice(len(labels), size=args.subsample, replace=False))
        labels = [labels[i] for i in idx]
        seqs = [seqs[i] for i in idx]
    y, _classes = _labels_to_pm1(labels)
    discrete = "discrete" in args.format

    cfg = config_hash(
        {
            "cmd": "classify",
            "data": _file_hash(args.data),
            "kernel": args.kernel,
            "states": args.states,
            "gamma": args.gamma,
            "folds": args.folds,
            "seed": args.seed,
            "lambda_grid": args.lambda_grid,
            "witness_grid": args.witness_grid,
            "nu_grid": args.nu_grid,
            "c_grid": args.c_grid,
            "rho": args.rho,
            "order": args.order,
            "subsample": args.subsample,
            "theta_class": args.theta_class,
            "theta_states": args.theta_states,
        }
    )

    if args.kernel == "lmmk":
        if not discrete:
            raise InvalidInputError("lmmk classification supports discrete data")
        report = _lmmk_cv(args, labels, seqs, y)
    elif args.kernel == "emmk":
        report = _emmk_cv(args, seqs, y, discrete)
    elif args.kernel in ("gmmk-hmm", "ppk"):
        if args.kernel == "ppk" and not discrete and args.rho != 1.0:
            raise InvalidInputError("continuous PPK supports rho=1 only")
        if discrete:
            report = _hmm_kernel_cv_discrete(args, seqs, y)
        else:
            report = _hmm_kernel_cv_continuous(args, seqs, y)
    else:
        raise InvalidInputError(f"kernel {args.kernel!r} not usable with --data")
    return report, cfg


def _fit_sequence_models(args, seqs, discrete: bool, jobs: int):
    n_symbols = (int(max(int(s.max()) for s in seqs)) + 1) if discrete else None
    task = _FitTask(
        "discrete" if discrete else "gaussian",
        args.states,
        args.gamma,
        n_symbols,
        args.seed,
    )
    return _parallel_map(task, list(enumerate(seqs)), jobs)


def _normalized(gram: GramMatrix) -> GramMatrix:
    return GramMatrix(
        cosine_normalize(gram),
        gram.example_ids,
        gram.kernel_id,
        {**gram.params, "normalized": True},
    )


def _hmm_kernel_cv_discrete(args, seqs, y):
    from .learn import stratified_cv

    models = _fit_sequence_models(args, seqs, True, args.jobs)
    grams = []
    if args.kernel == "gmmk-hmm":
        for lam in args.lambda_grid:
            for wit in args.witness_grid:
                fn = _HmmPairKernel("gmmk-hmm", lam, wit, 1.0)
                grams.append(
                    assemble_gram(
                        models,
                        fn,
                        kernel_id="gmmk-hmm",
                        params={"lam": lam, "T": wit},
                        jobs=args.jobs,
                    )
                )
    else:
        # raw PPK values decay exponentially in T, starving the SVM at any
        # reasonable C; the baseline is run cosine-normalized
        for wit in args.witness_grid:
            fn = _HmmPairKernel("ppk", 0.0, wit, args.rho)
            grams.append(
                _normalized(
                    assemble_gram(
                        models,
                        fn,
                        kernel_id="ppk",
                        params={"rho": args.rho, "T": wit},
                        jobs=args.jobs,
                    )
                )
            )
    return stratified_cv(grams, y, args.folds, args.c_grid, args.seed)


def _hmm_kernel_cv_continuous(args, seqs, y):
    """Leakage-safe pipeline: per-fold min-max scaling, per-fold fits and grams."""
    folds = stratified_folds(y, args.folds, args.seed)
    grid = (
        [("gmmk-hmm", {"lam": lam, "T": wit}) for lam in args.lambda_grid for wit in args.witness_grid]
        if args.kernel == "gmmk-hmm"
        else [("ppk", {"rho": args.rho, "T": wit}) for wit in args.witness_grid]
    )
    errors: dict[tuple[int, float], list[float]] = {
        (gi, c): [] for gi in range(len(grid)) for c in args.c_grid
    }
    for test in folds:
        train = np.setdiff1d(np.arange(len(seqs)), test)
        lo, hi = datamod.minmax_params([seqs[i] for i in train])
        scaled = datamod.minmax_scale(seqs, lo, hi)
        models = _fit_sequence_models(args, scaled, False, args.jobs)
        for gi, (kid, params) in enumerate(grid):
            if kid == "gmmk-hmm":
                fn = _HmmPairKernel("gmmk-hmm", params["lam"], params["T"], 1.0)
            else:
                fn = _HmmPairKernel("ppk", 0.0, params["T"], params["rho"])
            gram = assemble_gram(models, fn, kernel_id=kid, params=params, jobs=args.jobs)
            k = cosine_normalize(gram) if kid == "ppk" else gram.values
            for c in args.c_grid:
                model = svm_train(k[np.ix_(train, train)], y[train], c)
                pred = svm_predict(model, k[np.ix_(test, train)])
                errors[(gi, c)].append(float(np.mean(pred != y[test])))
    rows = tuple(
        CvRow(grid[gi][0], dict(grid[gi][1]), float(c), tuple(errs))
        for (gi, c), errs in errors.items()
    )
    return CvReport(rows=rows, folds=args.folds, seed=args.seed)


def _emmk_cv(args, seqs, y, discrete: bool):
    from .learn import stratified_cv

    lam_grid = args.lambda_grid if args.lambda_grid else (math.inf,)
    grams = []
    for lam in lam_grid:
        params = {"order": args.order, "lam": lam}
        if discrete:
            profiles = [ngram_profile(s, args.order) for s in seqs]
            gram = assemble_gram(
                profiles,
                lambda a, b: emmk(a, b, lam),
                kernel_id="emmk",
                params=params,
                jobs=args.jobs,
            )
        else:
            gram = assemble_gram(
                seqs,
                lambda a, b: emmk_continuous(a, b, args.order, lam),
                kernel_id="emmk",
                params=params,
                jobs=args.jobs,
            )
        grams.append(gram)
    return stratified_cv(grams, y, args.folds, args.c_grid, args.seed)


def _lmmk_cv(args, labels, seqs, y):
    """Per-fold shared model fit on the designated class's training examples."""
    classes = sorted(set(labels))
    theta_class = args.theta_class if args.theta_class is not None else classes[0]
    if theta_class not in classes:
        raise InvalidInputError(f"theta class {theta_class!r} not among {classes}")
    n_symbols = int(max(int(s.max()) for s in seqs)) + 1
    folds = stratified_folds(y, args.folds, args.seed)
    errors: dict[tuple[float, float], list[float]] = {
        (nu, c): [] for nu in args.nu_grid for c in args.c_grid
    }
    for test in folds:
        train = np.setdiff1d(np.arange(len(seqs)), test)
        group = [seqs[i] for i in train if labels[i] == theta_class]
        n = _state_count(args.theta_states, len(group[0]), n_symbols, args.gamma)
        theta = baum_welch(
            group, n, "discrete", seed=[args.seed, 1], n_symbols=n_symbols
        ).hmm
        feats = [lmmk_features(theta, s) for s in seqs]
        raw = assemble_gram(
            feats,
            lambda a, b: v_xq_discrete(a, b, math.inf) + v_qq(a, b, math.inf),
            kernel_id="lmmk",
            params={"lam": math.inf},
        )
        for nu in args.nu_grid:
            k = tilde_transform(raw.values, TildeTransformConfig(nu))
            for c in args.c_grid:
                model = svm_train(k[np.ix_(train, train)], y[train], c)
                pred = svm_predict(model, k[np.ix_(test, train)])
                errors[(nu, c)].append(float(np.mean(pred != y[test])))
    rows = tuple(
        CvRow("lmmk-tilde", {"lam": math.inf, "nu": nu}, float(c), tuple(errs))
        for (nu, c), errs in errors.items()
    )
    return CvReport(rows=rows, folds=args.folds, seed=args.seed)


def cmd_kpca(args) -> int:
    gram, kv = read_gram(args.gram)
    groups = {}
    if args.labels:
        labels = _load_labels_file(args.labels)
        if len(labels) != gram.n:
            raise InvalidInputError(f"{len(labels)} labels for {gram.n} examples")
        groups = dict(zip(gram.example_ids, labels))
    result = kpca(gram, args.components)
    cfg = config_hash(
        {"cmd": "kpca", "gram": _file_hash(args.gram), "components": args.components}
    )
    lines = [
        "# format: meanmap-kpca v1",
        f"# config_hash: {cfg}",
        "# columns: id\tgroup\t" + "\t".join(f"pc{r+1}" for r in range(args.components)),
    ]
    for i, ex_id in enumerate(gram.example_ids):
        coords = "\t".join(repr(float(v)) for v in result.coordinates[i])
        lines.append(f"{ex_id}\t{groups.get(ex_id, '-')}\t{coords}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {gram.n}x{args.components} coordinates to {args.out}")
    return 0


def _lscv_score(points: np.ndarray, h: float) -> float:
    """Least-squares (integrated square error) criterion for a Gaussian KDE."""
    m, d = points.shape
    sq = ((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)

    def gauss_sum(var):
        return float(
            (np.exp(-0.5 * sq / var) / (2 * math.pi * var) ** (d / 2.0)).sum()
        )

    int_f2 = gauss_sum(2.0 * h) / m**2
    cross = gauss_sum(h) - m / (2 * math.pi * h) ** (d / 2.0)  # drop i == j terms
    loo = 2.0 * cross / (m * (m - 1))
    return int_f2 - loo


def cmd_kde_fit(args) -> int:
    rows = []
    for lineno, line in datamod._nonempty_lines(args.data):
        parts = line.split("\t")
        if len(parts) != 3:
            raise InvalidInputError(
                f"{args.data}:{lineno}: expected 'species<TAB>group<TAB>values'"
            )
        species, group, vals = parts
        rows.append((species, group, np.array([float(t) for t in vals.split()])))
    by_species: dict[str, tuple[str, list[np.ndarray]]] = {}
    for species, group, vec in rows:
        by_species.setdefault(species, (group, []))[1].append(vec)

    if args.bandwidths:
        grid = args.bandwidths
    else:
        all_pts = np.vstack([v for _s, (_g, vs) in by_species.items() for v in vs])
        ref = max(float(all_pts.var(axis=0).mean()), 1e-12)
        grid = tuple(float(v) for v in np.geomspace(1e-3 * ref, 10.0 * ref, args.bandwidth_grid))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = config_hash(
        {"cmd": "kde-fit", "data": _file_hash(args.data), "grid": grid}
    )
    for species in sorted(by_species):
        group, vecs = by_species[species]
        pts = np.vstack(vecs)
        if pts.shape[0] < 2:
            raise InvalidInputError(
                f"species {species!r} has {pts.shape[0]} points; need >= 2"
            )
        scores = [(_lscv_score(pts, h), h) for h in grid]
        best_h = min(scores)[1]
        write_model(
            out / f"kde_{species}.txt",
            KdeModel(pts, best_h),
            cfg,
            label=group,
            chosen_bandwidth=repr(best_h),
        )
    print(f"fitted {len(by_species)} KDE models -> {args.out} (config {cfg})")
    return 0


def cmd_ucr_import(args) -> int:
    labels, seqs = datamod.import_ucr(args.data)
    if args.scale:
        lo, hi = datamod.minmax_params(seqs)
        seqs = datamod.minmax_scale(seqs, lo, hi)
        note = f"scaled: min-max [{lo!r}, {hi!r}] -> [0, 1]"
    else:
        note = "scaled: no"
    cfg = config_hash(
        {"cmd": "ucr-import", "data": _file_hash(args.data), "scale": args.scale}
    )
    datamod.write_labeled(
        args.out, labels, seqs, "continuous", header=f"config_hash: {cfg} | {note}"
    )
    print(f"imported {len(seqs)} sequences -> {args.out}")
    return 0


def cmd_verify(args) -> int:
    """Condensed oracle suite: closed forms vs independent routes."""
    from .distributions import GaussianDist
    from .gmmk import gmmk_gaussian
    from .hmm import forward_backward
    from .oracle import enum_hmm_kernel, enum_posteriors, mc_gmmk

    rng = np.random.default_rng(args.seed)
    failures = 0

    def report(name: str, ok: bool, detail: str) -> None:
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failures += 0 if ok else 1

    for trial in range(3):
        mu = rng.standard_normal(2)
        mu2 = rng.standard_normal(2)
        a = rng.standard_normal((2, 2))
        s = a @ a.T + 0.5 * np.eye(2)
        b = rng.standard_normal((2, 2))
        s2 = b @ b.T + 0.5 * np.eye(2)
        lam = float(rng.uniform(0.3, 2.0))
        p, q = GaussianDist(mu, s), GaussianDist(mu2, s2)
        closed = gmmk_gaussian(p, q, RbfParams(lam)).value
        est = mc_gmmk(p, q, RbfParams(lam), 10**6, 1000 + trial)
        ok = abs(est.mean - closed) <= 3 * est.std_error
        report(
            f"gmmk_gaussian vs MC #{trial}",
            ok,
            f"closed={closed:.6f} mc={est.mean:.6f} se={est.std_error:.2e}",
        )

    for trial in range(5):
        p = _random_discrete_hmm(rng, 2, 2)
        q = _random_discrete_hmm(rng, 2, 2)
        lam = float(rng.uniform(0.3, 2.0))
        dp = gmmk_hmm(p, q, GmmkHmmConfig(2, RbfParams(lam))).value
        exact = enum_hmm_kernel(p, q, 2, "rbf", lam=lam)
        ok = abs(dp - exact) < 1e-11
        report(f"gmmk_hmm vs enumeration #{trial}", ok, f"dp={dp:.12f} enum={exact:.12f}")

    for trial in range(3):
        hmm = _random_discrete_hmm(rng, 3, 2)
        x = rng.integers(0, 2, size=5)
        post = forward_backward(hmm, x)
        g, xi, _ll = enum_posteriors(hmm, x)
        ok = (
            np.abs(post.gamma - g).max() < 1e-10
            and np.abs(post.xi - xi).max() < 1e-10
        )
        report(f"forward_backward vs enumeration #{trial}", ok, f"sequence={x.tolist()}")

    if failures:
        raise NumericalError(f"{failures} verification checks failed")
    print("all verification checks passed")
    return 0


def _random_discrete_hmm(rng, n: int, k: int) -> Hmm:
    from .distributions import DiscreteDist

    pi = rng.dirichlet(np.ones(n))
    A = np.vstack([rng.dirichlet(np.ones(n)) for _ in range(n)])
    emits = tuple(DiscreteDist(rng.dirichlet(np.ones(k))) for _ in range(n))
    return Hmm(pi, A, emits)


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meanmap",
        description="Generative and latent mean map kernel experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, jobs=True):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True)
        if jobs:
            p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("synth", help="write the built-in two-class synthetic dataset")
    p.add_argument("--num", type=int, default=100, help="sequences per class")
    p.add_argument("--length", type=int, default=100)
    common(p, jobs=False)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("fit-hmms", help="fit one HMM per sequence (or per class)")
    p.add_argument("--data", required=True)
    p.add_argument(
        "--format",
        default="labeled-discrete",
        choices=["labeled-discrete", "labeled-continuous", "discrete-seq", "continuous-seq"],
    )
    p.add_argument("--states", default="heuristic", help="state count or 'heuristic'")
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--per-class", action="store_true")
    common(p)
    p.set_defaults(fn=cmd_fit_hmms)

    p = sub.add_parser("gram", help="assemble and persist a Gram matrix")
    p.add_argument("--kernel", required=True, choices=KERNEL_CHOICES)
    p.add_argument("--models", help="directory of model files")
    p.add_argument("--data", help="dataset file (lmmk/emmk)")
    p.add_argument(
        "--format",
        default="labeled-discrete",
        choices=["labeled-discrete", "labeled-continuous", "discrete-seq", "continuous-seq"],
    )
    p.add_argument("--theta", help="shared HMM model file (lmmk)")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--witness-T", dest="witness", type=int, default=10)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--normalize", action="store_true", help="unit-diagonal cosine normalization")
    common(p)
    p.set_defaults(fn=cmd_gram)

    p = sub.add_parser("classify", help="stratified CV of the kernel SVM")
    p.add_argument("--gram", dest="grams", action="append", default=[])
    p.add_argument("--labels")
    p.add_argument("--data")
    p.add_argument(
        "--format",
        default="labeled-discrete",
        choices=["labeled-discrete", "labeled-continuous"],
    )
    p.add_argument("--kernel", choices=KERNEL_CHOICES, default="gmmk-hmm")
    p.add_argument("--states", default="3")
    p.add_argument("--theta-states", default="4")
    p.add_argument("--theta-class", default=None)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--subsample", type=int, default=None)
    p.add_argument("--balanced", action="store_true")
    p.add_argument("--lambda-grid", type=_parse_floats, default=DEFAULT_LAMBDA_GRID)
    p.add_argument("--witness-grid", type=_parse_ints, default=DEFAULT_WITNESS_GRID)
    p.add_argument("--nu-grid", type=_parse_floats, default=DEFAULT_NU_GRID)
    p.add_argument("--c-grid", type=_parse_floats, default=DEFAULT_C_GRID)
    common(p)
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("kpca", help="kernel PCA coordinates from a Gram file")
    p.add_argument("--gram", required=True)
    p.add_argument("--components", type=int, default=2)
    p.add_argument("--labels")
    common(p, jobs=False)
    p.set_defaults(fn=cmd_kpca)

    p = sub.add_parser("kde-fit", help="fit per-species KDEs by LOO least squares")
    p.add_argument("--data", required=True, help="species<TAB>group<TAB>values rows")
    p.add_argument("--bandwidths", type=_parse_floats, default=None)
    p.add_argument("--bandwidth-grid", type=int, default=20)
    common(p, jobs=False)
    p.set_defaults(fn=cmd_kde_fit)

    p = sub.add_parser("ucr-import", help="convert a UCR csv to a labeled dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--no-scale", dest="scale", action="store_false")
    common(p, jobs=False)
    p.set_defaults(fn=cmd_ucr_import)

    p = sub.add_parser("verify", help="run the condensed oracle suites")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        diag = Path("meanmap-diagnostic.txt")
        diag.write_text(
            f"numerical failure: {exc}\n\n{traceback.format_exc()}\n"
        )
        print(f"numerical failure: {exc} (diagnostic in {diag})", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
