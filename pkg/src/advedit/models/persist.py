"""Save and load trained classifiers as JSON.

Layout::

    {"format": "advedit-model", "version": 1, "kind": ...,
     "hyperparameters": {...}, "alphabet": [...], "classes": [...],
     "trees": [...], "arrays": {name: {"shape": [...], "data": [...]}}}

Floats are written with ``repr`` so they survive the round trip exactly.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..trees import parse, serialize
from .classifiers import KernelSVMClassifier, RecNetClassifier, TESClassifier
from .recnet import RecNetParams, TESParams
from .svm import SVMModel

__all__ = ["save_model", "load_model", "model_to_dict", "model_from_dict"]

FORMAT = "advedit-model"


def _pack(a) -> dict:
    a = np.asarray(a)
    kind = "int" if np.issubdtype(a.dtype, np.integer) else "float"
    return {"dtype": kind, "shape": list(a.shape), "data": a.ravel().tolist()}


def _unpack(d: dict) -> np.ndarray:
    dtype = np.int64 if d.get("dtype") == "int" else float
    return np.array(d["data"], dtype=dtype).reshape(d["shape"])


def model_to_dict(model) -> dict:
    out = {
        "format": FORMAT,
        "version": 1,
        "kind": model.kind,
        "hyperparameters": dict(model.params),
        "alphabet": list(model.alphabet),
        "classes": [int(c) for c in model.classes],
    }
    arrays = {}
    if isinstance(model, KernelSVMClassifier):
        out["trees"] = [serialize(t) for t in model.basis]
        arrays["train_idx"] = _pack(model.train_idx)
        arrays["alpha"] = _pack(model.svm.alpha)
        arrays["signs"] = _pack(model.svm.signs)
        arrays["bias"] = _pack(model.svm.bias)
        arrays["violations"] = _pack(model.svm.violations)
        out["hyperparameters"]["C"] = model.svm.C
        for name in ("D_basis", "P", "diag"):
            val = getattr(model, name)
            if val is not None:
                arrays[name] = _pack(val)
    elif isinstance(model, RecNetClassifier):
        net = model.net
        for name in ("W", "b", "V", "c"):
            arrays[name] = _pack(getattr(net, name))
    else:
        raise TypeError(f"cannot persist {type(model).__name__}")
    out["arrays"] = arrays
    return out


def model_from_dict(d: dict):
    if d.get("format") != FORMAT:
        raise ValueError("not an advedit model file")
    kind = d["kind"]
    hyper = d["hyperparameters"]
    arrays = {k: _unpack(v) for k, v in d["arrays"].items()}
    if kind in ("rec", "tes"):
        args = (list(d["alphabet"]), arrays["W"], arrays["b"], arrays["V"], arrays["c"])
        if kind == "rec":
            return RecNetClassifier(RecNetParams(*args), hyper)
        return TESClassifier(TESParams(*args, scale=hyper["scale"], ridge=hyper["ridge"]), hyper)
    svm = SVMModel(
        list(d["classes"]), arrays["alpha"], arrays["signs"], arrays["bias"],
        float(hyper["C"]), arrays["violations"],
    )
    basis = [parse(s) for s in d["trees"]]
    return KernelSVMClassifier(
        kind, hyper, basis, arrays["train_idx"], svm, d["alphabet"],
        D_basis=arrays.get("D_basis"), P=arrays.get("P"), diag=arrays.get("diag"),
    )


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))
