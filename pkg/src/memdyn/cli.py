"""Command-line front end: ``memdyn run CONFIG`` and ``memdyn validate CONFIG``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 a solver produced output that fails the state invariants.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import platform
import sys
import tempfile
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__
from .errors import ContourError, InvalidInputError, MemdynError, NonInvertibleError, NotCompletelyPositiveError
from .gksl import dyson_expansion, semigroup_propagators
from .nonmarkov import (
    DynamicsFamily,
    OptConfig,
    blp_measure,
    check_cp_divisible,
    check_p_divisible,
    helstrom_measure,
)
from .qcore import (
    as_square,
    hermiticity_defect,
    partial_trace,
    trace_distance,
    unvec,
    vec,
)
from .semimarkov import classical as cl
from .semimarkov import quantum as qsm
from .semimarkov.phasetype import PhaseTypeWTD
from .semimarkov.volterra import volterra_solution
from .serialize import (
    bipartite_from_json,
    classical_from_json,
    family_from_json,
    gksl_from_json,
    matrix_from_json,
    semimarkov_from_json,
)
from .total import check_bound, info_external, initial_total_state, reduced_map_kraus, total_state

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INVARIANT = 0, 2, 3, 4
THREADS_ENV = "MEMDYN_THREADS"

_NUM = {"type": "number"}
_ENTRY = {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}]}
_MATRIX = {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": _ENTRY}}
_REAL_MATRIX = {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": _NUM}}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_GKSL = _obj({
    "dim": {"type": "integer", "minimum": 1},
    "H": _MATRIX,
    "channels": {"type": "array", "items": _obj({"gamma": _NUM, "L": _MATRIX}, ["gamma", "L"])},
}, ["H"])
_MAP = {"oneOf": [
    _obj({"kraus": {"type": "array", "minItems": 1, "items": _MATRIX}}, ["kraus"]),
    _obj({"superop": _MATRIX}, ["superop"]),
    _obj({"choi": _MATRIX, "dim_in": {"type": "integer"}, "dim_out": {"type": "integer"}}, ["choi"]),
]}
_WTD = _obj({"alpha": {"type": "array", "minItems": 1, "items": _NUM}, "S": _REAL_MATRIX}, ["alpha", "S"])
_SEMIMARKOV = _obj({"dim": {"type": "integer", "minimum": 1}, "E": _MAP, "F_generator": _GKSL, "wtd": _WTD},
                   ["E", "F_generator", "wtd"])
_CLASSICAL = _obj({"pi": _REAL_MATRIX, "wtds": {"type": "array", "minItems": 1, "items": _WTD}}, ["pi", "wtds"])
_BIPARTITE = _obj({"dS": {"type": "integer", "minimum": 1}, "dE": {"type": "integer", "minimum": 1},
                   "H_total": _MATRIX, "rho_E": _MATRIX}, ["dS", "dE", "H_total", "rho_E"])
_FAMILY = _obj({"dim": {"type": "integer", "minimum": 1}, "grid": {"type": "array", "minItems": 1, "items": _NUM},
                "maps": {"type": "array", "minItems": 1, "items": _MATRIX}}, ["grid", "maps"])
_FAMILY_SOURCE = {"oneOf": [_obj({"gksl": _GKSL}, ["gksl"]), _obj({"semimarkov": _SEMIMARKOV}, ["semimarkov"]),
                            _obj({"family": _FAMILY}, ["family"])]}

_SOLVER = _obj({
    "method": {"enum": ["expm", "dyson", "laplace", "series", "volterra", "mc", "embedding"]},
    "ordering": {"enum": list(qsm.ORDERINGS)},
    "k_max": {"type": "integer", "minimum": 0},
    "n_quad": {"type": "integer", "minimum": 2},
    "n_traj": {"type": "integer", "minimum": 1},
    "talbot_nodes": {"type": "integer", "minimum": 2},
    "n_random": {"type": "integer", "minimum": 0},
    "n_samples": {"type": "integer", "minimum": 1},
})
_TOLERANCES = _obj({
    "hermiticity": {"type": "number", "exclusiveMinimum": 0},
    "trace": {"type": "number", "exclusiveMinimum": 0},
    "min_eig": {"type": "number", "exclusiveMinimum": 0},
    "divisibility": {"type": "number", "exclusiveMinimum": 0},
})
_GRID = _obj({"t_max": {"type": "number", "exclusiveMinimum": 0}, "n_steps": {"type": "integer", "minimum": 1}},
             ["t_max", "n_steps"])
_COMMON = {
    "grid": _GRID,
    "rho0": _MATRIX,
    "solver": _SOLVER,
    "tolerances": _TOLERANCES,
    "seed": {"type": "integer", "minimum": 0},
    "output": _obj({"dir": {"type": "string"}}),
}


def _kind(name: str, model: dict, extra: dict | None = None, needs_grid: bool = True) -> dict:
    props = {"kind": {"const": name}, "model": model, **_COMMON, **(extra or {})}
    return _obj(props, ["kind", "model", "grid"] if needs_grid else ["kind", "model"])


CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"enum": ["semigroup", "bipartite", "semimarkov", "measure", "divisibility"]}},
    "allOf": [
        {"if": {"properties": {"kind": {"const": k}}}, "then": s} for k, s in [
            ("semigroup", _kind("semigroup", _GKSL)),
            ("bipartite", _kind("bipartite", _BIPARTITE, {"rho0_alt": _MATRIX})),
            ("semimarkov", _kind("semimarkov", {"oneOf": [
                _obj({"quantum": _SEMIMARKOV}, ["quantum"]),
                _obj({"classical": _CLASSICAL}, ["classical"]),
            ]}, {"p0": {"type": "array", "items": _NUM}})),
            ("measure", _kind("measure", _FAMILY_SOURCE, needs_grid=False)),
            ("divisibility", _kind("divisibility", _FAMILY_SOURCE, needs_grid=False)),
        ]
    ],
}

DEFAULT_TOLERANCES = {"hermiticity": 1e-8, "trace": 1e-6, "min_eig": 1e-6, "divisibility": 1e-9}


class ConfigError(Exception):
    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


# ---------------------------------------------------------------- loading and validation

def load_config(path) -> tuple[dict, bytes]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from None
    try:
        cfg = json.loads(raw.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ConfigError([f"config is not UTF-8: {exc}"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None
    return cfg, raw


def schema_diagnostics(cfg) -> list[str]:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    out = []
    for err in sorted(validator.iter_errors(cfg), key=lambda e: [str(p) for p in e.absolute_path]):
        where = "/" + "/".join(str(p) for p in err.absolute_path)
        if err.validator == "oneOf" and err.context:
            # report the branch that got furthest
            best = max(err.context, key=lambda e: len(e.absolute_path))
            where = "/" + "/".join(str(p) for p in best.absolute_path)
            out.append(f"{where}: {best.message}")
        else:
            out.append(f"{where}: {err.message}")
    return out


def _collect(diags: list[str], where: str, fn):
    try:
        return fn()
    except (MemdynError, ValueError, KeyError, TypeError) as exc:
        diags.append(f"{where}: {exc}")
        return None


def _gksl_diagnostics(obj, where: str) -> list[str]:
    diags = []
    h = _collect(diags, f"{where}/H", lambda: as_square(matrix_from_json(obj["H"], "H"), "H"))
    for k, ch in enumerate(obj.get("channels", [])):
        if ch["gamma"] < 0:
            diags.append(f"{where}/channels/{k}: channel {k}: negative rate ({ch['gamma']})")
        op = _collect(diags, f"{where}/channels/{k}/L", lambda ch=ch: matrix_from_json(ch["L"], "L"))
        if h is not None and op is not None and op.shape != h.shape:
            diags.append(f"{where}/channels/{k}/L: channel {k}: shape {op.shape} does not match H {h.shape}")
    if not diags:
        _collect(diags, where, lambda: gksl_from_json(obj))
    return diags


def _wtd_diagnostics(obj, where: str) -> list[str]:
    diags = []
    _collect(diags, where, lambda: PhaseTypeWTD(np.asarray(obj["alpha"], dtype=float), np.asarray(obj["S"], dtype=float)))
    return diags


def _semimarkov_diagnostics(obj, where: str) -> list[str]:
    diags = _gksl_diagnostics(obj["F_generator"], f"{where}/F_generator") + _wtd_diagnostics(obj["wtd"], f"{where}/wtd")
    if not diags:
        _collect(diags, where, lambda: semimarkov_from_json(obj))
    return diags


def _classical_diagnostics(obj, where: str) -> list[str]:
    diags = [f"{where}/pi: {m}" for m in cl.stochastic_violations(obj["pi"])]
    for k, w in enumerate(obj["wtds"]):
        diags += _wtd_diagnostics(w, f"{where}/wtds/{k}")
    if not diags:
        _collect(diags, where, lambda: classical_from_json(obj))
    return diags


def model_diagnostics(cfg: dict) -> list[str]:
    kind, model = cfg["kind"], cfg["model"]
    if kind == "semigroup":
        diags = _gksl_diagnostics(model, "/model")
    elif kind == "bipartite":
        diags = []
        _collect(diags, "/model", lambda: bipartite_from_json(model))
    elif kind == "semimarkov":
        if "quantum" in model:
            diags = _semimarkov_diagnostics(model["quantum"], "/model/quantum")
        else:
            diags = _classical_diagnostics(model["classical"], "/model/classical")
    elif "family" in model:
        diags = []
        _collect(diags, "/model/family", lambda: family_from_json(model["family"]))
        if "grid" in cfg:
            diags.append("/grid: a tabulated family carries its own grid; remove /grid")
    else:
        if "gksl" in model:
            diags = _gksl_diagnostics(model["gksl"], "/model/gksl")
        else:
            diags = _semimarkov_diagnostics(model["semimarkov"], "/model/semimarkov")
        if "grid" not in cfg:
            diags.append("/grid: required for generated families")
    for key in ("rho0", "rho0_alt"):
        if key in cfg:
            _collect(diags, f"/{key}", lambda key=key: _state_from_json(cfg[key]))
    return diags


def validate_config(cfg) -> list[str]:
    """All schema violations, then (if the schema passes) all model invariant violations."""
    diags = schema_diagnostics(cfg)
    if diags:
        return diags
    return model_diagnostics(cfg)


# ---------------------------------------------------------------- output helpers

def _fmt(x: float) -> str:
    return "%.17g" % x


def _atomic_write(path: Path, data: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_bytes(header: list[str], rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(float(x)) for x in row])
    return buf.getvalue().encode()


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n").encode()


def _state_columns(d: int) -> list[str]:
    cols = []
    for i in range(d):
        for j in range(d):
            cols += [f"re_{i}{j}", f"im_{i}{j}"]
    return cols + ["p_excited"]


def _state_row(rho: np.ndarray) -> list[float]:
    d = rho.shape[0]
    vals = []
    for i in range(d):
        for j in range(d):
            vals += [rho[i, j].real, rho[i, j].imag]
    return vals + [rho[d - 1, d - 1].real]


def _state_from_json(obj) -> np.ndarray:
    return as_square(matrix_from_json(obj, "rho0"), "rho0")


def _check_states(states: np.ndarray, tol: dict, trace_slack=None) -> dict:
    herm = max(hermiticity_defect(r) for r in states)
    trace_dev = np.abs(np.einsum("nii->n", states) - 1.0)
    slack = np.zeros(len(states)) if trace_slack is None else np.asarray(trace_slack)
    min_eig = min(float(np.linalg.eigvalsh(0.5 * (r + r.conj().T))[0]) for r in states)
    passed = bool(herm <= tol["hermiticity"] and np.all(trace_dev <= tol["trace"] + slack)
                  and min_eig >= -tol["min_eig"])
    return {"max_hermiticity_defect": float(herm), "max_trace_defect": float(trace_dev.max()),
            "min_eigenvalue": min_eig, "passed": passed}


def _check_probs(p: np.ndarray, tol: dict) -> dict:
    lo = float(p.min())
    dev = float(np.abs(p.sum(axis=1) - 1).max())
    return {"min_probability": lo, "max_normalization_defect": dev,
            "passed": bool(lo >= -tol["min_eig"] and dev <= tol["trace"])}


def _matrix_json(a) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(a, dtype=complex)]


# ---------------------------------------------------------------- experiment runners

def _grid(cfg) -> np.ndarray:
    g = cfg["grid"]
    return np.linspace(0.0, float(g["t_max"]), int(g["n_steps"]) + 1)


def _default_rho0(d: int) -> np.ndarray:
    r = np.zeros((d, d), dtype=complex)
    r[d - 1, d - 1] = 1.0
    return r


def _rho0(cfg, d: int) -> np.ndarray:
    if "rho0" not in cfg:
        return _default_rho0(d)
    r = _state_from_json(cfg["rho0"])
    if r.shape[0] != d:
        raise ConfigError([f"/rho0: dimension {r.shape[0]} does not match model dimension {d}"])
    return r


def _run_semigroup(cfg, ctx) -> tuple[bytes, dict]:
    m = gksl_from_json(cfg["model"])
    grid = _grid(cfg)
    r0 = _rho0(cfg, m.dim)
    solver = cfg.get("solver", {})
    method = solver.get("method", "expm")
    if method == "expm":
        states = np.stack([unvec(p @ vec(r0)) for p in semigroup_propagators(m, grid)])
    elif method == "dyson":
        k_max, n_quad = solver.get("k_max", 6), solver.get("n_quad", 200)
        states = np.stack([r0] + [dyson_expansion(m, r0, t, k_max, n_quad) for t in grid[1:]])
    else:
        raise ConfigError([f"/solver/method: {method!r} is not available for semigroup experiments"])
    inv = _check_states(states, ctx["tol"])
    return _csv_bytes(["t"] + _state_columns(m.dim), ([t] + _state_row(r) for t, r in zip(grid, states))), {
        "method": method, "invariants": inv, "final_state": _matrix_json(states[-1])}


def _run_bipartite(cfg, ctx) -> tuple[bytes, dict]:
    m = bipartite_from_json(cfg["model"])
    grid = _grid(cfg)
    r0 = _rho0(cfg, m.d_S)
    states, gap = [], 0.0
    for t in grid:
        rs = partial_trace(total_state(m, r0, t), m.d_S, m.d_E)
        gap = max(gap, float(np.abs(reduced_map_kraus(m, t)(r0) - rs).max()))
        states.append(rs)
    states = np.stack(states)
    summary = {"invariants": _check_states(states, ctx["tol"]), "kraus_vs_partial_trace_max_gap": gap}
    if "rho0_alt" in cfg:
        r1 = _state_from_json(cfg["rho0_alt"])
        worst, ok = -np.inf, True
        for i, s in enumerate(grid):
            for t in grid[i:]:
                rep = check_bound(m, r0, r1, s, t)
                worst = max(worst, rep.lhs - rep.rhs)
                ok &= rep.satisfied
        totals = []
        for t in grid:
            a = total_state(m, r0, t)
            b = total_state(m, r1, t)
            i_int = trace_distance(partial_trace(a, m.d_S, m.d_E), partial_trace(b, m.d_S, m.d_E))
            totals.append(i_int + info_external(a, b, m.d_S, m.d_E))
        totals = np.array(totals)
        summary["bound"] = {"satisfied": bool(ok), "max_lhs_minus_rhs": float(worst)}
        summary["information_total_spread"] = float(totals.max() - totals.min())
        summary["information_total_initial"] = float(trace_distance(initial_total_state(m, r0), initial_total_state(m, r1)))
    return _csv_bytes(["t"] + _state_columns(m.d_S), ([t] + _state_row(r) for t, r in zip(grid, states))), summary


def _run_semimarkov(cfg, ctx) -> tuple[bytes, dict]:
    grid = _grid(cfg)
    solver = cfg.get("solver", {})
    nodes = solver.get("talbot_nodes", 32)
    if "classical" in cfg["model"]:
        c = classical_from_json(cfg["model"]["classical"])
        p0 = np.asarray(cfg.get("p0", np.eye(c.n)[0]), dtype=float)
        method = solver.get("method", "laplace")
        summary = {"method": method}
        if method == "laplace":
            probs = cl.classical_gme_solve(c, p0, grid, nodes)
            rows = (np.concatenate([[t], p]) for t, p in zip(grid, probs))
            header = ["t"] + [f"P_{n}" for n in range(c.n)]
        elif method == "mc":
            n_traj = solver.get("n_traj", 10000)
            probs, se = cl.classical_mc(c, p0, grid, n_traj, ctx["seed"])
            rows = (np.concatenate([[t], p, s]) for t, p, s in zip(grid, probs, se))
            header = ["t"] + [f"P_{n}" for n in range(c.n)] + [f"se_{n}" for n in range(c.n)]
            summary["n_traj"] = n_traj
        elif method == "embedding":
            probs = cl.extended_chain_solve(c, p0, grid)
            rows = (np.concatenate([[t], p]) for t, p in zip(grid, probs))
            header = ["t"] + [f"P_{n}" for n in range(c.n)]
        else:
            raise ConfigError([f"/solver/method: {method!r} is not available for classical models"])
        summary["invariants"] = _check_probs(probs, ctx["tol"])
        return _csv_bytes(header, rows), summary

    m = semimarkov_from_json(cfg["model"]["quantum"])
    r0 = _rho0(cfg, m.dim)
    method = solver.get("method", "laplace")
    ordering = solver.get("ordering", "micromaser")
    summary = {"method": method, "ordering": ordering}
    header = ["t"] + _state_columns(m.dim)
    slack = None
    if method == "laplace":
        states = qsm.laplace_series(m, r0, grid, ordering, nodes)
    elif method == "embedding":
        states = np.stack([unvec(p @ vec(r0)) for p in qsm.embedded_propagators(m, grid, ordering)])
    elif method == "volterra":
        states = volterra_solution(m, r0, grid, ordering, nodes)
    elif method == "series":
        k_max, n_quad = solver.get("k_max", 12), solver.get("n_quad", 200)
        res = [qsm.series_evaluate(m, r0, t, k_max, n_quad, ordering) for t in grid]
        states = np.stack([r.state for r in res])
        slack = np.array([r.tail_bound for r in res])
        summary.update(k_max=k_max, n_quad=n_quad, max_tail_bound=float(slack.max()))
    elif method == "mc":
        n_traj = solver.get("n_traj", 10000)
        res = qsm.mc_simulate(m, r0, grid, n_traj, ctx["seed"], ordering, workers=ctx["threads"])
        states = res.states
        header += [f"se_{c}" for c in _state_columns(m.dim)[:-1]]
        rows = []
        for t, r, s in zip(grid, states, res.stderr):
            rows.append([t] + _state_row(r) + _state_row(s)[:-1])
        summary["n_traj"] = n_traj
        summary["invariants"] = _check_states(states, ctx["tol"])
        return _csv_bytes(header, rows), summary
    else:
        raise ConfigError([f"/solver/method: {method!r} is not available for quantum semi-Markov models"])
    summary["invariants"] = _check_states(states, ctx["tol"], slack)
    return _csv_bytes(header, ([t] + _state_row(r) for t, r in zip(grid, states))), summary


def _family(cfg, ctx) -> DynamicsFamily:
    model = cfg["model"]
    if "family" in model:
        return family_from_json(model["family"])
    grid = _grid(cfg)
    if "gksl" in model:
        return DynamicsFamily.from_semigroup(gksl_from_json(model["gksl"]), grid)
    solver = cfg.get("solver", {})
    m = semimarkov_from_json(model["semimarkov"])
    return qsm.dynamics_family(m, grid, solver.get("ordering", "micromaser"), "laplace", solver.get("talbot_nodes", 32))


def _run_measure(cfg, ctx) -> tuple[bytes, dict]:
    f = _family(cfg, ctx)
    solver = cfg.get("solver", {})
    opt = OptConfig(seed=ctx["seed"], n_random=solver.get("n_random", OptConfig.n_random))
    blp = blp_measure(f, opt)
    hel = helstrom_measure(f, opt)
    summary = {}
    for name, res in (("blp", blp), ("helstrom", hel)):
        summary[name] = {
            "value": float(res.value),
            "argmax_pair": [_matrix_json(res.argmax_pair[0]), _matrix_json(res.argmax_pair[1])],
            "weights": [float(w) for w in res.weights],
            "revival_intervals": [[float(a), float(b)] for a, b in res.revival_intervals],
        }
    rows = ([t, a, b] for t, a, b in zip(f.grid, blp.trajectory, hel.trajectory))
    return _csv_bytes(["t", "trace_distance", "helstrom_norm"], rows), summary


def _run_divisibility(cfg, ctx) -> tuple[bytes, dict]:
    f = _family(cfg, ctx)
    solver = cfg.get("solver", {})
    tol = ctx["tol"]["divisibility"]
    cp = check_cp_divisible(f, tol=tol)
    p = check_p_divisible(f, tol=tol, n_samples=solver.get("n_samples", 200), seed=ctx["seed"])
    summary = {
        "cp_divisible": bool(cp.divisible),
        "p_divisible": bool(p.divisible),
        "helstrom_monotone": bool(p.helstrom_monotone),
        "p_verdict_consistent_with_helstrom": bool(p.consistent),
        "cp_implies_p_holds": bool(p.divisible or not cp.divisible),
        "cp_worst_step": [int(cp.worst[0]), int(cp.worst[1]), float(cp.worst[2])],
        "p_worst_step": [int(p.worst[0]), float(p.worst[1])],
        "certificate": p.certificate,
    }
    rows = ([f.grid[i + 1], a, b, c] for i, (a, b, c) in
            enumerate(zip(cp.step_min_eigs, p.step_min_eigs, p.step_max_increments)))
    return _csv_bytes(["t", "cp_min_choi_eig", "p_min_output_eig", "helstrom_max_increment"], rows), summary


RUNNERS = {
    "semigroup": _run_semigroup,
    "bipartite": _run_bipartite,
    "semimarkov": _run_semimarkov,
    "measure": _run_measure,
    "divisibility": _run_divisibility,
}


def _threads(arg) -> int:
    if arg is not None:
        return max(1, int(arg))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError([f"{THREADS_ENV} must be an integer, got {env!r}"]) from None
    return 1


def run(config_path, out_dir=None, seed=None, threads=None, validate_only: bool = False, stream=None) -> int:
    stream = sys.stderr if stream is None else stream
    try:
        cfg, raw = load_config(config_path)
        diags = validate_config(cfg)
        if diags:
            raise ConfigError(diags)
        if validate_only:
            print("config OK", file=stream)
            return EXIT_OK
        ctx = {
            "seed": int(seed if seed is not None else cfg.get("seed", 0)),
            "threads": _threads(threads),
            "tol": {**DEFAULT_TOLERANCES, **cfg.get("tolerances", {})},
        }
        out = Path(out_dir or cfg.get("output", {}).get("dir") or (Path(config_path).stem + "_out"))
        series, summary = RUNNERS[cfg["kind"]](cfg, ctx)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"config error: {d}", file=stream)
        return EXIT_CONFIG
    except InvalidInputError as exc:
        print(f"config error: {exc}", file=stream)
        return EXIT_CONFIG
    except (NonInvertibleError, ContourError, NotCompletelyPositiveError, MemdynError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=stream)
        return EXIT_NUMERIC

    summary = {"kind": cfg["kind"], "seed": ctx["seed"], **summary}
    manifest = {
        "config_sha256": hashlib.sha256(raw).hexdigest(),
        "seed": ctx["seed"],
        "kind": cfg["kind"],
        "versions": {"memdyn": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "outputs": ["series.csv", "summary.json"],
    }
    _atomic_write(out / "series.csv", series)
    _atomic_write(out / "summary.json", _json_bytes(summary))
    _atomic_write(out / "manifest.json", _json_bytes(manifest))
    inv = summary.get("invariants")
    if inv is not None and not inv["passed"]:
        print(f"invariant violation: {json.dumps(inv, sort_keys=True)}", file=stream)
        return EXIT_INVARIANT
    print(f"wrote {out}", file=stream)
    return EXIT_OK


def validate(config_path, stream=None) -> list[str]:
    """Dry-run diagnostics: every schema and model violation, no computation."""
    try:
        cfg, _ = load_config(config_path)
    except ConfigError as exc:
        diags = exc.diagnostics
    else:
        diags = validate_config(cfg)
    if stream is not None:
        for d in diags:
            print(d, file=stream)
    return diags


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="memdyn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--threads", type=int, default=None, help=f"worker threads (default: ${THREADS_ENV} or 1)")
    p_run.add_argument("--validate-only", action="store_true", help="check the config and exit")
    p_val = sub.add_parser("validate", help="report all config problems without computing")
    p_val.add_argument("config")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config, args.out, args.seed, args.threads, args.validate_only)
    diags = validate(args.config, sys.stdout)
    if not diags:
        print("config OK")
    return EXIT_OK if not diags else EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
