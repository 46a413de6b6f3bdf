"""The seven tree classifiers behind a common ``predict(tree)`` surface."""
from __future__ import annotations

import threading
from typing import Optional, Sequence

import numpy as np

from .. import kernels as kern
from ..ted import cross_ted, pairwise_ted
from ..trees import Tree, preorder
from .recnet import RecNetParams, TESParams, predict_batch, recnet_train, tes_train
from .svm import SVMModel, svm_decision, svm_train

__all__ = [
    "KINDS",
    "SVM_KINDS",
    "Classifier",
    "KernelSVMClassifier",
    "RecNetClassifier",
    "TESClassifier",
    "ClassifierHandle",
    "fit_kernel_svm",
    "tree_alphabet",
]

SVM_KINDS = ("linear", "rbf", "st", "sst", "pt")
KINDS = SVM_KINDS + ("rec", "tes")


def tree_alphabet(trees: Sequence[Tree]) -> list[str]:
    return sorted({node.label for t in trees for node in preorder(t)})


class Classifier:
    """Base class: deterministic ``predict`` with a per-instance memo."""

    kind: str = ""
    alphabet: list
    classes: list

    def __init__(self):
        self._memo: dict[Tree, int] = {}

    def predict(self, t: Tree) -> int:
        y = self._memo.get(t)
        if y is None:
            y = int(self.predict_many([t])[0])
            self._memo[t] = y
        return y

    def predict_many(self, trees: Sequence[Tree]) -> np.ndarray:
        raise NotImplementedError


class KernelSVMClassifier(Classifier):
    """SVM on a TED-based (``linear``, ``rbf``) or tree kernel (``st``, ``sst``, ``pt``).

    TED-based kernels live on a basis of trees (training trees plus any
    evaluation trees supplied at fit time). Their Gram matrix over the basis
    is clip-corrected once; a query row ``k`` is corrected as ``k @ P`` with
    the stored projection ``P``, which reproduces the clipped rows for basis
    members.
    """

    def __init__(self, kind: str, params: dict, basis: list, train_idx: np.ndarray,
                 svm: SVMModel, alphabet: list, D_basis: Optional[np.ndarray] = None,
                 P: Optional[np.ndarray] = None, diag: Optional[np.ndarray] = None):
        super().__init__()
        self.kind = kind
        self.params = dict(params)
        self.basis = list(basis)
        self.train_idx = np.asarray(train_idx, dtype=np.intp)
        self.svm = svm
        self.alphabet = list(alphabet)
        self.classes = list(svm.classes)
        self.D_basis = D_basis
        self.P = P
        self.diag = diag

    def kernel_rows(self, trees: Sequence[Tree]) -> np.ndarray:
        """Corrected kernel values between ``trees`` and the training trees."""
        if self.kind in ("linear", "rbf"):
            Dq = cross_ted(trees, self.basis)
            if self.kind == "linear":
                R = kern.linear_kernel_rows(Dq, self.D_basis)
            else:
                R = kern.rbf_rows(Dq, self.params["sigma"])
            if self.P is not None:
                R = R @ self.P
            return R[:, self.train_idx]
        lam = self.params["lam"]
        fn = kern.TREE_KERNELS[self.kind]
        sv = self.svm.support()
        R = np.zeros((len(trees), self.svm.n_train))
        for r, t in enumerate(trees):
            for k in sv:
                R[r, k] = fn(t, self.basis[self.train_idx[k]], lam)
        if self.params.get("normalize"):
            dq = np.array([fn(t, t, lam) for t in trees])
            R = kern.normalize_gram(R, dq, self.diag)
        return R

    def decision_function(self, trees: Sequence[Tree]) -> np.ndarray:
        return svm_decision(self.svm, self.kernel_rows(trees))

    def predict_many(self, trees: Sequence[Tree]) -> np.ndarray:
        f = self.decision_function(trees)
        return np.array(self.classes)[np.argmax(f, axis=1)]


def fit_kernel_svm(kind: str, train: Sequence[Tree], labels: Sequence[int], params: dict,
                   extra: Sequence[Tree] = (), basis_matrix: Optional[np.ndarray] = None,
                   alphabet: Optional[Sequence[str]] = None) -> KernelSVMClassifier:
    """Train a kernel SVM.

    ``params`` holds ``C`` and ``sigma`` (rbf) or ``lam`` (tree kernels), and
    optionally ``normalize``. ``basis_matrix`` may supply the precomputed
    TED matrix over ``train + extra`` (TED kernels) or the Gram matrix over
    ``train`` (tree kernels).
    """
    if kind not in SVM_KINDS:
        raise ValueError(f"unknown SVM kind {kind!r}")
    train = list(train)
    labels = np.asarray(labels)
    alphabet = sorted(set(alphabet or ()) | set(tree_alphabet(train)))
    if kind in ("linear", "rbf"):
        basis = train + list(extra)
        D = pairwise_ted(basis) if basis_matrix is None else np.asarray(basis_matrix)
        K = kern.linear_kernel(D) if kind == "linear" else kern.rbf_kernel(D, params["sigma"])
        Kc, P = kern.clip_projection(K.entries)
        if np.array_equal(P, np.eye(len(basis))):
            P = None
        idx = np.arange(len(train))
        svm = svm_train(Kc[np.ix_(idx, idx)], labels, params["C"])
        return KernelSVMClassifier(kind, params, basis, idx, svm, alphabet,
                                   D_basis=np.asarray(D, dtype=np.int64) if kind == "linear" else None, P=P)
    lam = params["lam"]
    K = kern.tree_gram(kind, train, lam) if basis_matrix is None else np.asarray(basis_matrix, dtype=float)
    diag = None
    if params.get("normalize"):
        diag = np.diag(K).copy()
        K = kern.normalize_gram(K)
    svm = svm_train(K, labels, params["C"])
    return KernelSVMClassifier(kind, params, train, np.arange(len(train)), svm, alphabet, diag=diag)


class RecNetClassifier(Classifier):
    kind = "rec"

    def __init__(self, params: RecNetParams, hyper: Optional[dict] = None):
        super().__init__()
        self.net = params
        self.params = dict(hyper or {"n": params.n})
        self.alphabet = list(params.alphabet)
        self.classes = list(range(1, params.n_classes + 1))

    @classmethod
    def fit(cls, trees, labels, n: int = 10, rng=None, n_classes=None, **kw) -> "RecNetClassifier":
        p = recnet_train(trees, labels, n=n, rng=rng, n_classes=n_classes, **kw)
        return cls(p, {"n": n})

    def predict_many(self, trees: Sequence[Tree]) -> np.ndarray:
        return predict_batch(self.net, trees)


class TESClassifier(RecNetClassifier):
    kind = "tes"

    def __init__(self, params: TESParams, hyper: Optional[dict] = None):
        super().__init__(params, hyper or {"n": params.n, "scale": params.scale, "ridge": params.ridge})

    @classmethod
    def fit(cls, trees, labels, n: int = 10, scale: float = 1.0, ridge: float = 1e-8,
            rng=None, n_classes=None) -> "TESClassifier":
        p = tes_train(trees, labels, n=n, scale=scale, ridge=ridge, rng=rng, n_classes=n_classes)
        return cls(p, {"n": n, "scale": scale, "ridge": ridge})


class ClassifierHandle:
    """Black-box view of a classifier that counts label queries.

    Attacks see only ``predict`` and ``query_count``.
    """

    __slots__ = ("_predict", "_count", "_lock")

    def __init__(self, model):
        self._predict = model.predict if hasattr(model, "predict") else model
        self._count = 0
        self._lock = threading.Lock()

    def predict(self, t: Tree) -> int:
        with self._lock:
            self._count += 1
        return int(self._predict(t))

    __call__ = predict

    @property
    def query_count(self) -> int:
        return self._count
