"""JSON encodings of matrices and models.

Complex matrices are row-major nested lists whose entries are either real
numbers or ``[re, im]`` pairs. Encoders always emit pairs.
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .gksl import GKSLModel
from .nonmarkov import DynamicsFamily
from .qcore import QuantumMap
from .semimarkov.classical import ClassicalSemiMarkov
from .semimarkov.phasetype import PhaseTypeWTD
from .semimarkov.quantum import SemiMarkovModel
from .total import BipartiteModel


def _entry(x) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise InvalidInputError(f"complex entries must be [re, im] pairs, got {x!r}")
        return complex(float(x[0]), float(x[1]))
    return complex(float(x))


def matrix_from_json(obj, name: str = "matrix") -> np.ndarray:
    if not isinstance(obj, (list, tuple)) or not obj or not all(isinstance(r, (list, tuple)) for r in obj):
        raise InvalidInputError(f"{name} must be a nonempty list of rows")
    try:
        rows = [[_entry(x) for x in row] for row in obj]
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"{name}: {exc}") from None
    if len({len(r) for r in rows}) != 1:
        raise InvalidInputError(f"{name} rows have different lengths")
    return np.array(rows, dtype=complex)


def matrix_to_json(a) -> list:
    a = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def map_from_json(obj) -> QuantumMap:
    """``{"kraus": [...]}``, ``{"superop": M}`` or ``{"choi": M, "dim_in": d}``."""
    keys = {"kraus", "superop", "choi"} & set(obj)
    if len(keys) != 1:
        raise InvalidInputError("map needs exactly one of 'kraus', 'superop', 'choi'")
    if "kraus" in obj:
        return QuantumMap.from_kraus([matrix_from_json(k, "Kraus operator") for k in obj["kraus"]])
    if "superop" in obj:
        return QuantumMap.from_superop(matrix_from_json(obj["superop"], "superop"))
    c = matrix_from_json(obj["choi"], "choi")
    d_in = int(obj.get("dim_in", round(np.sqrt(c.shape[0]))))
    return QuantumMap.from_choi(c, d_in, obj.get("dim_out"))


def map_to_json(m: QuantumMap) -> dict:
    return {"superop": matrix_to_json(m.superop)}


def gksl_from_json(obj) -> GKSLModel:
    h = matrix_from_json(obj["H"], "H")
    if "dim" in obj and int(obj["dim"]) != h.shape[0]:
        raise InvalidInputError(f"H has dimension {h.shape[0]}, declared dim {obj['dim']}")
    chans = [(c["gamma"], matrix_from_json(c["L"], f"channel {k} L")) for k, c in enumerate(obj.get("channels", []))]
    return GKSLModel(h, chans)


def gksl_to_json(m: GKSLModel) -> dict:
    return {"dim": m.dim, "H": matrix_to_json(m.H),
            "channels": [{"gamma": g, "L": matrix_to_json(op)} for g, op in m.channels]}


def bipartite_from_json(obj) -> BipartiteModel:
    return BipartiteModel(int(obj["dS"]), int(obj["dE"]), matrix_from_json(obj["H_total"], "H_total"),
                          matrix_from_json(obj["rho_E"], "rho_E"))


def wtd_from_json(obj) -> PhaseTypeWTD:
    return PhaseTypeWTD(np.asarray(obj["alpha"], dtype=float), np.asarray(obj["S"], dtype=float))


def semimarkov_from_json(obj) -> SemiMarkovModel:
    m = SemiMarkovModel(map_from_json(obj["E"]), gksl_from_json(obj["F_generator"]), wtd_from_json(obj["wtd"]))
    if "dim" in obj and int(obj["dim"]) != m.dim:
        raise InvalidInputError(f"model has dimension {m.dim}, declared dim {obj['dim']}")
    return m


def semimarkov_to_json(m: SemiMarkovModel) -> dict:
    return {"dim": m.dim, "E": map_to_json(m.E), "F_generator": gksl_to_json(m.F_generator), "wtd": m.wtd.to_json()}


def classical_from_json(obj) -> ClassicalSemiMarkov:
    return ClassicalSemiMarkov(np.asarray(obj["pi"], dtype=float), tuple(wtd_from_json(w) for w in obj["wtds"]))


def classical_to_json(c: ClassicalSemiMarkov) -> dict:
    return {"pi": c.pi.tolist(), "wtds": [w.to_json() for w in c.wtds]}


def family_from_json(obj) -> DynamicsFamily:
    """``{"grid": [...], "maps": [superop, ...]}`` with an optional ``"dim"``."""
    maps = np.stack([matrix_from_json(m, f"maps[{k}]") for k, m in enumerate(obj["maps"])])
    dim = int(obj.get("dim", round(np.sqrt(maps.shape[1]))))
    return DynamicsFamily(dim, np.asarray(obj["grid"], dtype=float), maps)


def family_to_json(f: DynamicsFamily) -> dict:
    return {"dim": f.dim, "grid": f.grid.tolist(), "maps": [matrix_to_json(m) for m in f.maps]}
