"""Datasets, nested crossvalidation and the attack evaluation protocol.

Datasets are line-delimited JSON, one ``{"tree": "<text>", "label": k}``
record per line with labels ``1..L``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import kernels as kern
from .attacks import (
    AttackResult,
    NoReferenceError,
    ReferencePool,
    backtracing_attack,
    evaluate,
    random_attack,
    select_reference,
)
from .models import (
    KINDS,
    ClassifierHandle,
    RecNetClassifier,
    TESClassifier,
    fit_kernel_svm,
)
from .models.recnet import tes_train
from .models.svm import svm_decision, svm_train
from .ted import ted
from .trees import Tree, parse, preorder, serialize

__all__ = [
    "Dataset",
    "SynthSpec",
    "ExperimentConfig",
    "PairwiseStore",
    "load_dataset",
    "save_dataset",
    "synth_generate",
    "stratified_folds",
    "select_hyperparameters",
    "crossvalidate",
    "run_experiment",
    "format_report",
    "attack_and_aggregate",
    "REPORT_HEADER",
    "DEFAULT_GRIDS",
]

log = logging.getLogger(__name__)

REPORT_HEADER = [
    "classifier", "attack", "accuracy_mean", "accuracy_std",
    "success_mean", "success_std", "ratio_mean", "ratio_std",
]

DEFAULT_GRIDS = {
    "C": [0.1, 1.0, 10.0, 100.0],
    "sigma_factors": [0.5, 1.0, 2.0],
    "lam": [0.001, 0.01, 0.1],
    "tes_scale": [0.7, 0.9, 1.0, 1.5, 2.0],
    "tes_dim": [10, 50, 100],
    "rec_dim": 10,
}


# --- data -------------------------------------------------------------------

@dataclass
class Dataset:
    trees: list
    labels: np.ndarray
    name: str = ""
    alphabet: list = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.trees) != len(self.labels):
            raise ValueError("trees and labels differ in length")
        syms = sorted({n.label for t in self.trees for n in preorder(t)})
        if not self.alphabet:
            self.alphabet = syms
        elif not set(syms) <= set(self.alphabet):
            raise ValueError("alphabet does not cover every node label")
        if len(self.labels):
            present = set(self.labels.tolist())
            if present != set(range(1, max(present) + 1)):
                raise ValueError(f"labels must form the range 1..L, got {sorted(present)}")

    def __len__(self):
        return len(self.trees)

    @property
    def n_classes(self) -> int:
        return int(self.labels.max())


def load_dataset(path) -> Dataset:
    path = Path(path)
    trees, labels = [], []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                t = parse(rec["tree"])
                y = rec["label"]
                if not isinstance(y, int) or isinstance(y, bool) or y < 1:
                    raise ValueError(f"label must be an integer >= 1, got {y!r}")
            except (ValueError, KeyError, TypeError) as err:
                raise ValueError(f"{path}:{lineno}: {err}") from None
            trees.append(t)
            labels.append(y)
    if not trees:
        raise ValueError(f"{path}: no records")
    return Dataset(trees, labels, name=path.stem)


def save_dataset(ds: Dataset, path) -> None:
    with Path(path).open("w") as fh:
        for t, y in zip(ds.trees, ds.labels):
            fh.write(json.dumps({"tree": serialize(t), "label": int(y)}) + "\n")


@dataclass
class SynthSpec:
    """Two-class motif task.

    Class 2 trees carry ``motif`` as a complete subtree at a random
    position; class 1 trees never contain it. Backgrounds are random trees
    over the alphabet symbols not used by the motif. ``root`` fixes the
    root symbol of every tree (as in syntax trees sharing one top-level
    node type); ``None`` draws it like any other background node.
    """

    n_examples: int = 60
    alphabet_size: int = 6
    max_depth: int = 2
    motif: str = "d(e,f)"
    max_children: int = 3
    alphabet: Optional[list] = None
    root: Optional[str] = "a"

    def symbols(self) -> list:
        if self.alphabet:
            return list(self.alphabet)
        if not 1 <= self.alphabet_size <= 26:
            raise ValueError("alphabet_size must be in 1..26")
        return [chr(ord("a") + k) for k in range(self.alphabet_size)]


def _contains(t: Tree, sub: Tree) -> bool:
    return any(n == sub for n in preorder(t))


def synth_generate(spec: SynthSpec, rng: np.random.Generator) -> Dataset:
    """Balanced two-class dataset; deterministic given the state of ``rng``."""
    symbols = spec.symbols()
    motif = parse(spec.motif)
    motif_syms = {n.label for n in preorder(motif)}
    if not motif_syms <= set(symbols):
        raise ValueError(f"motif symbols {sorted(motif_syms)} are not in the alphabet {symbols}")
    if spec.root is not None and (spec.root not in symbols or spec.root in motif_syms):
        raise ValueError(f"root symbol {spec.root!r} must be a non-motif alphabet symbol")
    if spec.n_examples < 4:
        raise ValueError("need at least two examples per class")
    if spec.max_depth < 1 or spec.max_children < 1:
        raise ValueError("max_depth and max_children must be >= 1")
    background = [s for s in symbols if s not in motif_syms] or symbols

    def grow(depth):
        if depth == 0 and spec.root is not None:
            lab = spec.root
        else:
            lab = background[int(rng.integers(len(background)))]
        if depth >= spec.max_depth:
            return Tree(lab)
        lo = 1 if depth == 0 else 0
        k = int(rng.integers(lo, spec.max_children + 1))
        return Tree(lab, [grow(depth + 1) for _ in range(k)])

    def plant(t):
        # attach the motif as a new child of some node above the depth limit
        nodes = []
        stack = [(t, (), 0)]
        while stack:
            node, path, d = stack.pop()
            if d < spec.max_depth:
                nodes.append((path, len(node.children)))
            for k, c in enumerate(node.children):
                stack.append((c, path + (k,), d + 1))
        nodes.sort()
        path, arity = nodes[int(rng.integers(len(nodes)))]
        pos = int(rng.integers(arity + 1))

        def rebuild(node, rest):
            kids = list(node.children)
            if not rest:
                kids.insert(pos, motif)
            else:
                kids[rest[0]] = rebuild(kids[rest[0]], rest[1:])
            return Tree(node.label, kids)

        return rebuild(t, path)

    labels = [1 + (k % 2) for k in range(spec.n_examples)]
    labels = [labels[k] for k in rng.permutation(spec.n_examples)]
    trees = []
    for y in labels:
        while True:
            t = grow(0)
            if not _contains(t, motif):
                break
        if y == 2:
            t = plant(t)
        trees.append(t)
    return Dataset(trees, labels, name="synthetic", alphabet=sorted(set(symbols)))


# --- folds ------------------------------------------------------------------

def stratified_folds(labels: Sequence[int], k: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Split indices into ``k`` disjoint test folds, stratified by label.

    Falls back to an unstratified split (with a warning) when some class has
    fewer than ``k`` members.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if k < 2:
        raise ValueError("need at least two folds")
    if k > n:
        raise ValueError(f"cannot split {n} examples into {k} folds")
    classes, counts = np.unique(labels, return_counts=True)
    folds: list[list[int]] = [[] for _ in range(k)]
    if counts.min() < k:
        warnings.warn("some class has fewer members than folds; splitting unstratified", RuntimeWarning)
        for pos, idx in enumerate(rng.permutation(n)):
            folds[pos % k].append(int(idx))
    else:
        offset = 0
        for cls in classes:
            members = np.flatnonzero(labels == cls)
            for pos, idx in enumerate(rng.permutation(members)):
                folds[(offset + pos) % k].append(int(idx))
            offset += len(members)
    return [np.array(sorted(f), dtype=np.intp) for f in folds]


# --- pairwise values --------------------------------------------------------

class PairwiseStore:
    """Lazily computed TED and tree-kernel values over a dataset.

    ``access`` (a set or None) records every index read, which lets tests
    check that selection never touches held-out data.
    """

    def __init__(self, trees: Sequence[Tree]):
        self.trees = list(trees)
        n = len(self.trees)
        self._ted = np.full((n, n), -1, dtype=np.int64)
        np.fill_diagonal(self._ted, 0)
        self._gram: dict = {}
        self.access: Optional[set] = None

    def _touch(self, rows, cols):
        if self.access is not None:
            self.access.update(int(i) for i in rows)
            self.access.update(int(j) for j in cols)

    def ted_block(self, rows, cols) -> np.ndarray:
        self._touch(rows, cols)
        D = self._ted
        for i in rows:
            for j in cols:
                if D[i, j] < 0:
                    D[i, j] = D[j, i] = ted(self.trees[i], self.trees[j])
        return D[np.ix_(rows, cols)].copy()

    def gram_block(self, kind: str, lam: float, rows, cols) -> np.ndarray:
        self._touch(rows, cols)
        key = (kind, lam)
        G = self._gram.get(key)
        if G is None:
            n = len(self.trees)
            G = np.full((n, n), np.nan)
            self._gram[key] = G
        fn = kern.TREE_KERNELS[kind]
        for i in rows:
            for j in cols:
                if np.isnan(G[i, j]):
                    G[i, j] = G[j, i] = fn(self.trees[i], self.trees[j], lam)
        return G[np.ix_(rows, cols)].copy()


# --- configuration ----------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one evaluation run.

    Keys (JSON): ``dataset`` (path) or ``synthetic`` (SynthSpec fields),
    ``classifiers``, ``grids``, ``folds``, ``inner_folds``, ``seed``,
    ``attacks`` (``methods``, ``cap``, ``targeted``), ``normalize``,
    ``tes_ridge``, ``rec_max_iter``.
    """

    dataset: Optional[str] = None
    synthetic: Optional[dict] = None
    classifiers: list = field(default_factory=lambda: list(KINDS))
    grids: dict = field(default_factory=dict)
    folds: int = 5
    inner_folds: int = 3
    seed: int = 0
    attacks: dict = field(default_factory=lambda: {"methods": ["random", "backtrace"], "cap": 100, "targeted": False})
    normalize: bool = False
    tes_ridge: float = 1e-8
    rec_max_iter: int = 20_000

    def __post_init__(self):
        unknown = [k for k in self.classifiers if k not in KINDS]
        if unknown:
            raise ValueError(f"unknown classifiers {unknown}; choose from {list(KINDS)}")
        if self.folds < 2 or self.inner_folds < 2:
            raise ValueError("fold counts must be >= 2")
        grids = dict(DEFAULT_GRIDS)
        grids.update(self.grids or {})
        for key, val in grids.items():
            if key != "rec_dim" and not val:
                raise ValueError(f"grid {key!r} is empty")
        self.grids = grids
        att = {"methods": ["random", "backtrace"], "cap": 100, "targeted": False}
        att.update(self.attacks or {})
        bad = set(att["methods"]) - {"random", "backtrace"}
        if bad:
            raise ValueError(f"unknown attack methods {sorted(bad)}")
        self.attacks = att

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        allowed = set(cls.__dataclass_fields__)
        extra = set(d) - allowed
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def load_data(self) -> Dataset:
        if self.dataset:
            return load_dataset(self.dataset)
        spec = SynthSpec(**(self.synthetic or {}))
        return synth_generate(spec, np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(99,))))


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


# --- hyperparameter selection ----------------------------------------------

def _grid(kind: str, grids: dict, dbar: float) -> list[dict]:
    Cs = grids["C"]
    if kind == "linear":
        return [{"C": C} for C in Cs]
    if kind == "rbf":
        return [{"sigma": f * dbar, "C": C} for f in grids["sigma_factors"] for C in Cs]
    if kind in ("st", "sst", "pt"):
        return [{"lam": lam, "C": C} for lam in grids["lam"] for C in Cs]
    if kind == "tes":
        return [{"scale": s, "n": n} for s in grids["tes_scale"] for n in grids["tes_dim"]]
    return [{"n": grids["rec_dim"]}]


def _svm_accuracy(kind, store, tr, va, labels, params, normalize):
    """Validation accuracy of an SVM trained on ``tr``, scored on ``va``."""
    if kind in ("linear", "rbf"):
        basis = np.concatenate([tr, va])
        D = store.ted_block(basis, basis)
        K = kern.linear_kernel(D) if kind == "linear" else kern.rbf_kernel(D, params["sigma"])
        Kc, _ = kern.clip_projection(K.entries)
        a, b = np.arange(len(tr)), np.arange(len(tr), len(basis))
        Ktr, Kva = Kc[np.ix_(a, a)], Kc[np.ix_(b, a)]
    else:
        Ktr = store.gram_block(kind, params["lam"], tr, tr)
        Kva = store.gram_block(kind, params["lam"], va, tr)
        if normalize:
            dtr = np.array([store.gram_block(kind, params["lam"], [i], [i])[0, 0] for i in tr])
            dva = np.array([store.gram_block(kind, params["lam"], [i], [i])[0, 0] for i in va])
            Ktr = kern.normalize_gram(Ktr, dtr, dtr)
            Kva = kern.normalize_gram(Kva, dva, dtr)
    m = svm_train(Ktr, labels[tr], params["C"])
    pred = np.array(m.classes)[np.argmax(svm_decision(m, Kva), axis=1)]
    return float(np.mean(pred == labels[va]))


def _mean_ted(store: PairwiseStore, idx) -> float:
    D = store.ted_block(idx, idx)
    n = len(idx)
    return float(D.sum() / (n * (n - 1))) if n > 1 else 1.0


def select_hyperparameters(kind: str, store: PairwiseStore, train_idx, labels, config: ExperimentConfig,
                           rng: np.random.Generator, n_classes: int, alphabet: Sequence[str] = ()):
    """Grid search by inner crossvalidation on ``train_idx`` only.

    Returns ``(best_params, scores, dbar)``; ties go to the first grid point.
    """
    train_idx = np.asarray(train_idx)
    labels = np.asarray(labels)
    dbar = _mean_ted(store, train_idx) if kind == "rbf" else None
    grid = _grid(kind, config.grids, dbar or 1.0)
    if len(grid) == 1:
        return grid[0], [], dbar
    inner = stratified_folds(labels[train_idx], config.inner_folds, rng)
    splits = []
    for f in inner:
        mask = np.zeros(len(train_idx), dtype=bool)
        mask[f] = True
        splits.append((train_idx[~mask], train_idx[mask]))
    tes_seeds = rng.integers(2**32, size=len(grid))
    scores = []
    for g, params in enumerate(grid):
        accs = []
        for tr, va in splits:
            if len(set(labels[tr].tolist())) < 2:
                accs.append(0.0)
                continue
            if kind == "tes":
                p = tes_train([store.trees[i] for i in tr], labels[tr], n=params["n"],
                              scale=params["scale"], ridge=config.tes_ridge,
                              rng=np.random.default_rng(tes_seeds[g]), alphabet=alphabet,
                              n_classes=n_classes)
                pred = TESClassifier(p).predict_many([store.trees[i] for i in va])
                accs.append(float(np.mean(pred == labels[va])))
            else:
                accs.append(_svm_accuracy(kind, store, tr, va, labels, params, config.normalize))
        scores.append(float(np.mean(accs)))
    best = int(np.argmax(scores))
    return grid[best], scores, dbar


# --- crossvalidation --------------------------------------------------------

@dataclass
class FoldResult:
    fold: int
    train_idx: np.ndarray
    test_idx: np.ndarray
    model: object
    params: dict
    accuracy: float
    predictions: np.ndarray
    dbar: Optional[float] = None


def _fit_final(kind, store, ds, tr, te, params, config, rng):
    trees_tr = [ds.trees[i] for i in tr]
    y_tr = ds.labels[tr]
    L = ds.n_classes
    if kind == "rec":
        return RecNetClassifier.fit(trees_tr, y_tr, n=params["n"], rng=rng, n_classes=L,
                                    alphabet=ds.alphabet, max_iter=config.rec_max_iter)
    if kind == "tes":
        p = tes_train(trees_tr, y_tr, n=params["n"], scale=params["scale"], ridge=config.tes_ridge,
                      rng=rng, alphabet=ds.alphabet, n_classes=L)
        return TESClassifier(p, {"n": params["n"], "scale": params["scale"], "ridge": config.tes_ridge})
    full = dict(params, normalize=config.normalize)
    if kind in ("linear", "rbf"):
        basis = np.concatenate([tr, te])
        D = store.ted_block(basis, basis)
        return fit_kernel_svm(kind, trees_tr, y_tr, full, extra=[ds.trees[i] for i in te],
                              basis_matrix=D, alphabet=ds.alphabet)
    G = store.gram_block(kind, params["lam"], tr, tr)
    return fit_kernel_svm(kind, trees_tr, y_tr, full, basis_matrix=G, alphabet=ds.alphabet)


def crossvalidate(config: ExperimentConfig, kind: str, ds: Optional[Dataset] = None,
                  store: Optional[PairwiseStore] = None) -> list[FoldResult]:
    """Nested crossvalidation for one classifier kind."""
    ds = ds if ds is not None else config.load_data()
    store = store if store is not None else PairwiseStore(ds.trees)
    kind_no = KINDS.index(kind)
    folds = stratified_folds(ds.labels, config.folds, _rng(config.seed, 0))
    results = []
    for f, te in enumerate(folds):
        mask = np.ones(len(ds), dtype=bool)
        mask[te] = False
        tr = np.flatnonzero(mask)
        missing = set(range(1, ds.n_classes + 1)) - set(ds.labels[tr].tolist())
        if missing:
            raise ValueError(f"fold {f}: classes {sorted(missing)} absent from the training split")
        params, scores, dbar = select_hyperparameters(
            kind, store, tr, ds.labels, config, _rng(config.seed, 1, kind_no, f), ds.n_classes,
            ds.alphabet)
        model = _fit_final(kind, store, ds, tr, te, params, config, _rng(config.seed, 2, kind_no, f))
        pred = model.predict_many([ds.trees[i] for i in te])
        acc = float(np.mean(pred == ds.labels[te]))
        log.info("%s fold %d: params=%s accuracy=%.3f", kind, f, params, acc)
        results.append(FoldResult(f, tr, te, model, params, acc, pred, dbar))
    return results


# --- attacks and reporting --------------------------------------------------

@dataclass
class AttackRecord:
    classifier: str
    fold: int
    origin: int
    result: object


def _attack_fold(kind, fold: FoldResult, ds: Dataset, config: ExperimentConfig):
    model = fold.model
    pred_tr = model.predict_many([ds.trees[i] for i in fold.train_idx])
    pool = ReferencePool.from_predictions(
        [ds.trees[i] for i in fold.train_idx], ds.labels[fold.train_idx], pred_tr)
    kind_no = KINDS.index(kind) if kind in KINDS else len(KINDS)
    cap = int(config.attacks["cap"])
    records = []
    for pos, (i, p) in enumerate(zip(fold.test_idx, fold.predictions)):
        y = int(ds.labels[i])
        if int(p) != y:
            continue
        x = ds.trees[i]
        for method in config.attacks["methods"]:
            rng = _rng(config.seed, 3, kind_no, fold.fold, int(i), 0 if method == "random" else 1)
            handle = ClassifierHandle(model)
            if method == "random":
                res = random_attack(x, handle, model.alphabet, rng, cap=cap, label=y)
            else:
                target = None
                if config.attacks.get("targeted"):
                    options = sorted(set(pool.labels) - {y})
                    target = options[int(rng.integers(len(options)))] if options else None
                try:
                    k = select_reference(x, y, pool, target)
                except NoReferenceError:
                    res = AttackResult(origin=x, method="backtrace", note="no-reference")
                else:
                    res = backtracing_attack(x, handle, pool.trees[k], target=pool.labels[k])
            evaluate(res, pool, y)
            records.append(AttackRecord(kind, fold.fold, int(i), res))
    return records


def _mean_std(values):
    if not values:
        return None, None
    a = np.asarray(values, dtype=float)
    return float(a.mean()), float(a.std())


@dataclass
class ReportRow:
    classifier: str
    attack: str
    accuracy_mean: float
    accuracy_std: float
    success_mean: float
    success_std: float
    ratio_mean: Optional[float]
    ratio_std: Optional[float]


def _fmt(v):
    return "n.a." if v is None else f"{v:.4f}"


def format_report(rows: Sequence[ReportRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for r in rows:
        w.writerow([r.classifier, r.attack, _fmt(r.accuracy_mean), _fmt(r.accuracy_std),
                    _fmt(r.success_mean), _fmt(r.success_std), _fmt(r.ratio_mean), _fmt(r.ratio_std)])
    return buf.getvalue()


@dataclass
class ExperimentResult:
    rows: list
    folds: dict  # kind -> [FoldResult]
    records: list  # [AttackRecord]
    metadata: dict

    def csv(self) -> str:
        return format_report(self.rows)


def attack_and_aggregate(kind: str, folds: Sequence[FoldResult], ds: Dataset,
                         config: ExperimentConfig) -> tuple[list, list]:
    """Attack every fold's model and aggregate one report row per attack method.

    Works for any fold model exposing ``predict``, ``predict_many`` and
    ``alphabet``. Returns ``(rows, records)``.
    """
    acc_m, acc_s = _mean_std([f.accuracy for f in folds])
    by_fold, records = {}, []
    for fold in folds:
        recs = _attack_fold(kind, fold, ds, config)
        by_fold[fold.fold] = recs
        records.extend(recs)
    rows = []
    for method in config.attacks["methods"]:
        rates, ratios = [], []
        for fold in folds:
            recs = [r.result for r in by_fold[fold.fold] if r.result.method == method]
            rates.append(sum(r.success for r in recs) / len(recs) if recs else 0.0)
            rs = [r.ratio for r in recs if r.ratio is not None]
            if rs:
                ratios.append(float(np.mean(rs)))
        s_m, s_s = _mean_std(rates)
        r_m, r_s = _mean_std(ratios)
        rows.append(ReportRow(kind, method, acc_m, acc_s, s_m, s_s, r_m, r_s))
    return rows, records


def run_experiment(config: ExperimentConfig, ds: Optional[Dataset] = None) -> ExperimentResult:
    """Train every configured classifier, attack it, and aggregate per fold."""
    t0 = time.perf_counter()
    ds = ds if ds is not None else config.load_data()
    store = PairwiseStore(ds.trees)
    rows, all_folds, all_records = [], {}, []
    for kind in config.classifiers:
        folds = crossvalidate(config, kind, ds, store)
        all_folds[kind] = folds
        kind_rows, records = attack_and_aggregate(kind, folds, ds, config)
        rows.extend(kind_rows)
        all_records.extend(records)
    metadata = {
        "seed": config.seed,
        "folds": config.folds,
        "inner_folds": config.inner_folds,
        "grids": config.grids,
        "normalize": config.normalize,
        "attacks": config.attacks,
        "dataset": config.dataset or {"synthetic": asdict(SynthSpec(**(config.synthetic or {})))},
        "n_examples": len(ds),
        "conventions": {
            "std": "population standard deviation across outer folds",
            "success_rate": "successes / correctly classified test points, per fold",
            "ratio": "d(z,x)/d(z,y) with y the nearest correctly classified training point "
                     "whose label differs from x; undefined ratios are skipped; n.a. if none",
            "reference_pool": "correctly classified training points of the attacked model",
        },
        "selected": {
            kind: [{"fold": f.fold, "params": f.params, "accuracy": f.accuracy} for f in folds]
            for kind, folds in all_folds.items()
        },
        "elapsed_seconds": round(time.perf_counter() - t0, 3),
    }
    return ExperimentResult(rows, all_folds, all_records, metadata)
