"""Versioned matrix files (numpy ``.npz`` with a JSON header).

Every file carries ``header``: a JSON object with ``format``, ``version``,
``kind`` and kind-specific metadata (``n`` and ``alpha`` for propagation
matrices). Arrays are stored row-major float64.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .factorization import FactorizationState
from .propagation import PropagationMatrix

FORMAT = "trica-matrix"
VERSION = 1


def save_arrays(path, kind: str, meta: dict, **arrays) -> None:
    header = {"format": FORMAT, "version": VERSION, "kind": kind, **meta}
    payload = {name: np.ascontiguousarray(a, dtype=np.float64) for name, a in arrays.items()}
    with Path(path).open("wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)), **payload)


def load_arrays(path, kind: str) -> tuple[dict, dict]:
    with np.load(Path(path), allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format") != FORMAT:
            raise ValueError(f"{path}: not a {FORMAT} file")
        if header.get("version") != VERSION:
            raise ValueError(f"{path}: unsupported version {header.get('version')}")
        if header.get("kind") != kind:
            raise ValueError(f"{path}: holds a {header.get('kind')!r}, expected {kind!r}")
        arrays = {name: data[name] for name in data.files if name != "header"}
    return header, arrays


def save_propagation(path, pm: PropagationMatrix) -> None:
    save_arrays(path, "propagation", {"n": pm.n, "alpha": pm.alpha}, p=pm.p)


def load_propagation(path) -> PropagationMatrix:
    header, arrays = load_arrays(path, "propagation")
    p = arrays["p"]
    if p.shape != (header["n"], header["n"]):
        raise ValueError(f"{path}: matrix shape {p.shape} disagrees with header n={header['n']}")
    return PropagationMatrix(p, float(header["alpha"]))


def save_factorization(path, state: FactorizationState) -> None:
    meta = {"k": state.k, "beta": state.beta, "converged": state.converged,
            "M": state.F_s.shape[0], "N": state.F_t.shape[0]}
    save_arrays(path, "factorization", meta, F_s=state.F_s, R_s=state.R_s, F_t=state.F_t,
                R_t=state.R_t, A=state.A, objective_history=np.array(state.objective_history))


def load_factorization(path) -> FactorizationState:
    header, a = load_arrays(path, "factorization")
    return FactorizationState(a["F_s"], a["R_s"], a["F_t"], a["R_t"], a["A"], beta=float(header["beta"]),
                              objective_history=a["objective_history"].tolist(),
                              converged=bool(header["converged"]))
