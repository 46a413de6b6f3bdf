"""Kernel SVM on a precomputed Gram matrix, trained by SMO.

Binary problems use a single machine with class 1 as the positive side.
More than two classes use one-vs-rest. Prediction is the argmax over
per-class decision values, ties going to the smallest class.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SVMModel", "smo", "svm_train", "svm_decision", "svm_predict", "kkt_violation"]

_TAU = 1e-12


def smo(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3, max_iter: int = 1_000_000):
    """Solve the binary soft-margin dual for labels ``y`` in {-1, +1}.

    Working pairs are chosen by maximal violation plus second-order gain.
    Returns ``(alpha, bias, gradient)`` with decision
    ``f(x) = sum_i alpha_i y_i k(x_i, x) + bias``.
    """
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of 1/2 a^T Q a - e^T a, Q = yy^T * K
    diag = np.diag(K).copy()
    for _ in range(max_iter):
        minus_yG = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            break
        cand = np.where(up, minus_yG, -np.inf)
        i = int(np.argmax(cand))
        m = cand[i]
        M = np.where(low, minus_yG, np.inf).min()
        if m - M < tol:
            break
        b = m - minus_yG
        ok = low & (b > 0)
        a = diag[i] + diag - 2.0 * K[i]
        a = np.where(a > 0, a, _TAU)
        gain = np.where(ok, -(b * b) / a, np.inf)
        j = int(np.argmin(gain))
        aij = a[j]
        t = b[j] / aij
        # box limits along d_i = y_i, d_j = -y_j
        t = min(t, C - alpha[i] if y[i] > 0 else alpha[i])
        t = min(t, alpha[j] if y[j] > 0 else C - alpha[j])
        alpha[i] += y[i] * t
        alpha[j] -= y[j] * t
        # snap tiny round-off onto the box
        for k in (i, j):
            if alpha[k] < 1e-12 * C:
                alpha[k] = 0.0
            elif alpha[k] > C - 1e-12 * C:
                alpha[k] = C
        G += y * t * (K[:, i] - K[:, j])
    minus_yG = -y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(minus_yG[free].mean())
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        hi = minus_yG[up].max() if up.any() else minus_yG[low].min()
        lo = minus_yG[low].min() if low.any() else minus_yG[up].max()
        bias = float(0.5 * (hi + lo))
    return alpha, bias, G


def kkt_violation(alpha: np.ndarray, y: np.ndarray, G: np.ndarray, C: float) -> float:
    """Maximal KKT violation ``max_up(-yG) - min_low(-yG)`` (<= 0 when optimal)."""
    minus_yG = -y * G
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    if not up.any() or not low.any():
        return 0.0
    return float(minus_yG[up].max() - minus_yG[low].min())


@dataclass
class SVMModel:
    """Dual coefficients ``alpha[k]`` and signs ``signs[k]`` per machine."""

    classes: list
    alpha: np.ndarray  # (machines, n_train)
    signs: np.ndarray  # (machines, n_train), entries +-1
    bias: np.ndarray  # (machines,)
    C: float
    violations: np.ndarray  # (machines,)

    @property
    def n_train(self) -> int:
        return self.alpha.shape[1]

    def support(self) -> np.ndarray:
        """Indices of training points with a non-zero coefficient anywhere."""
        return np.flatnonzero((self.alpha > 0).any(axis=0))


def svm_train(K, labels, C: float, tol: float = 1e-3) -> SVMModel:
    K = np.asarray(K, dtype=float)
    labels = np.asarray(labels)
    if K.shape != (len(labels), len(labels)):
        raise ValueError("Gram matrix and label vector sizes differ")
    if not C > 0:
        raise ValueError("C must be positive")
    classes = sorted(set(labels.tolist()))
    if len(classes) < 2:
        raise ValueError("SVM training needs at least two classes")
    targets = classes[:1] if len(classes) == 2 else classes
    alphas, signs, biases, viols = [], [], [], []
    for cls in targets:
        y = np.where(labels == cls, 1.0, -1.0)
        a, b, G = smo(K, y, C, tol)
        alphas.append(a)
        signs.append(y)
        biases.append(b)
        viols.append(kkt_violation(a, y, G, C))
    return SVMModel(classes, np.array(alphas), np.array(signs), np.array(biases), float(C), np.array(viols))


def svm_decision(m: SVMModel, k_rows) -> np.ndarray:
    """Per-class decision values for kernel rows of shape ``(q, n_train)``."""
    R = np.atleast_2d(np.asarray(k_rows, dtype=float))
    if R.shape[1] != m.n_train:
        raise ValueError(f"kernel row has length {R.shape[1]}, expected {m.n_train}")
    f = R @ (m.alpha * m.signs).T + m.bias
    if len(m.classes) == 2:
        f = np.column_stack([f[:, 0], -f[:, 0]])
    return f


def svm_predict(m: SVMModel, k_row):
    """Label for a single kernel row (argmax, ties to the smallest class)."""
    f = svm_decision(m, k_row)[0]
    return m.classes[int(np.argmax(f))]
