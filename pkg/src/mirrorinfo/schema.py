"""JSON configuration schema for problem instances and solver settings.

Complex matrices are row-major nested lists whose entries are either plain
numbers or ``[re, im]`` pairs.  Validation failures raise
:class:`SchemaError` naming the offending field.
"""

import math

import numpy as np

from .factories import KINDS, InstanceSpec, random_instance
from .problems import CONES, StinespringChannel
from .solvers import ALGORITHMS, SolverConfig

SOLVER_KEYS = ("algorithm", "kappa", "tol", "max_iters", "alpha", "theta_bar", "seed")
TOP_KEYS = ("problem", "data", "solver", "cones")
DATA_KEYS = {
    "cc": ("Q", "A", "b"),
    "cq": ("states", "A", "b"),
    "ea": ("isometry", "dims", "kraus", "observables", "b"),
    "crd": ("p", "D", "delta"),
    "qrd": ("rho", "D"),
    "ree": ("rho", "dims"),
}


class SchemaError(ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


# -- arrays -----------------------------------------------------------------


def _entry(v, field):
    if isinstance(v, bool):
        raise SchemaError(field, "booleans are not numbers")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in v):
        return complex(v[0], v[1])
    raise SchemaError(field, f"expected a number or an [re, im] pair, got {v!r}")


def decode_matrix(obj, field, real=False):
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise SchemaError(field, "expected a non-empty list of rows")
    width = len(obj[0])
    if width == 0 or any(len(r) != width for r in obj):
        raise SchemaError(field, "rows must be non-empty and of equal length")
    M = np.array([[_entry(v, f"{field}[{i}][{j}]") for j, v in enumerate(r)] for i, r in enumerate(obj)])
    if real:
        if np.any(M.imag != 0):
            raise SchemaError(field, "expected real entries")
        return M.real.copy()
    return M


def decode_vector(obj, field):
    if not isinstance(obj, list) or not obj:
        raise SchemaError(field, "expected a non-empty list of numbers")
    out = []
    for i, v in enumerate(obj):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SchemaError(f"{field}[{i}]", f"expected a number, got {v!r}")
        out.append(float(v))
    return np.array(out)


def decode_number(obj, field):
    if isinstance(obj, bool) or not isinstance(obj, (int, float)) or not math.isfinite(obj):
        raise SchemaError(field, f"expected a finite number, got {obj!r}")
    return float(obj)


def decode_int(obj, field, minimum=None):
    if isinstance(obj, bool) or not isinstance(obj, int):
        raise SchemaError(field, f"expected an integer, got {obj!r}")
    if minimum is not None and obj < minimum:
        raise SchemaError(field, f"must be at least {minimum}")
    return obj


def encode_matrix(M):
    M = np.asarray(M)
    if np.iscomplexobj(M):
        return [[[float(v.real), float(v.imag)] for v in row] for row in M]
    return [[float(v) for v in row] for row in M]


def encode_vector(v):
    return [float(a) for a in np.asarray(v, dtype=float)]


# -- instances --------------------------------------------------------------


def _require(data, key, kind):
    if key not in data:
        raise SchemaError(f"data.{key}", f"required for problem {kind!r}")
    return data[key]


def _energy(data):
    if "A" not in data and "b" not in data:
        return {}
    A = decode_matrix(_require(data, "A", "energy constraints"), "data.A", real=True)
    b = decode_vector(_require(data, "b", "energy constraints"), "data.b")
    return {"A": A, "b": b}


def _dims(obj, field, length):
    if not isinstance(obj, list) or len(obj) != length:
        raise SchemaError(field, f"expected a list of {length} positive integers")
    return tuple(decode_int(d, f"{field}[{i}]", 1) for i, d in enumerate(obj))


def decode_instance(kind, data):
    if kind not in KINDS:
        raise SchemaError("problem", f"unknown kind {kind!r}; expected one of {list(KINDS)}")
    if not isinstance(data, dict):
        raise SchemaError("data", "expected an object")
    if "random" in data:
        r = data["random"]
        if not isinstance(r, dict):
            raise SchemaError("data.random", "expected an object")
        unknown = set(r) - {"dims", "seed"}
        if unknown:
            raise SchemaError(f"data.random.{sorted(unknown)[0]}", "unknown field")
        dims = r.get("dims")
        if dims is not None:
            if not isinstance(dims, list) or not dims:
                raise SchemaError("data.random.dims", "expected a list of integers")
            dims = tuple(decode_int(d, f"data.random.dims[{i}]", 0) for i, d in enumerate(dims))
        seed = decode_int(r.get("seed", 0), "data.random.seed", 0)
        return random_instance(kind, dims, seed)
    unknown = set(data) - set(DATA_KEYS[kind])
    if unknown:
        raise SchemaError(f"data.{sorted(unknown)[0]}", f"unknown field for problem {kind!r}")
    if kind == "cc":
        Q = decode_matrix(_require(data, "Q", kind), "data.Q", real=True)
        payload = {"Q": Q, **_energy(data)}
        dims = (Q.shape[1], len(payload.get("b", ())))
    elif kind == "cq":
        states = _require(data, "states", kind)
        if not isinstance(states, list) or not states:
            raise SchemaError("data.states", "expected a non-empty list of matrices")
        states = [decode_matrix(s, f"data.states[{i}]") for i, s in enumerate(states)]
        payload = {"states": states, **_energy(data)}
        dims = (len(states), len(payload.get("b", ())))
    elif kind == "ea":
        if "kraus" in data:
            kraus = data["kraus"]
            if not isinstance(kraus, list) or not kraus:
                raise SchemaError("data.kraus", "expected a non-empty list of matrices")
            ch = StinespringChannel.from_kraus([decode_matrix(K, f"data.kraus[{i}]") for i, K in enumerate(kraus)])
        else:
            U = decode_matrix(_require(data, "isometry", kind), "data.isometry")
            ch = StinespringChannel(U, _dims(_require(data, "dims", kind), "data.dims", 3))
        payload = {"channel": ch}
        if "observables" in data or "b" in data:
            obs = _require(data, "observables", "energy constraints")
            if not isinstance(obs, list) or not obs:
                raise SchemaError("data.observables", "expected a non-empty list of matrices")
            payload["observables"] = [decode_matrix(a, f"data.observables[{i}]") for i, a in enumerate(obs)]
            payload["b"] = decode_vector(_require(data, "b", "energy constraints"), "data.b")
        dims = (ch.dims[0], len(payload.get("b", ())))
    elif kind == "crd":
        p = decode_vector(_require(data, "p", kind), "data.p")
        payload = {"p": p, "D": decode_number(_require(data, "D", kind), "data.D")}
        if "delta" in data:
            payload["delta"] = decode_matrix(data["delta"], "data.delta", real=True)
        dims = (p.size,)
    elif kind == "qrd":
        rho = decode_matrix(_require(data, "rho", kind), "data.rho")
        payload = {"rho": rho, "D": decode_number(_require(data, "D", kind), "data.D")}
        dims = (rho.shape[0],)
    else:
        rho = decode_matrix(_require(data, "rho", kind), "data.rho")
        payload = {"rho": rho}
        dims = _dims(_require(data, "dims", kind), "data.dims", 2)
    return InstanceSpec(kind, dims, payload)


def encode_instance(spec):
    d = spec.data
    out = {}
    for key in ("Q", "A", "delta"):
        if key in d:
            out[key] = encode_matrix(np.asarray(d[key], dtype=float))
    for key in ("b", "p"):
        if key in d:
            out[key] = encode_vector(d[key])
    if "D" in d:
        out["D"] = float(d["D"])
    if "states" in d:
        out["states"] = [encode_matrix(np.asarray(s, dtype=complex)) for s in d["states"]]
    if "observables" in d:
        out["observables"] = [encode_matrix(np.asarray(a, dtype=complex)) for a in d["observables"]]
    if "channel" in d:
        out["isometry"] = encode_matrix(d["channel"].U)
        out["dims"] = list(d["channel"].dims)
    if "rho" in d:
        out["rho"] = encode_matrix(np.asarray(d["rho"], dtype=complex))
        if spec.kind == "ree":
            out["dims"] = list(spec.dims)
    return out


# -- full config ------------------------------------------------------------


def decode_solver(obj):
    if obj is None:
        obj = {}
    if not isinstance(obj, dict):
        raise SchemaError("solver", "expected an object")
    unknown = set(obj) - set(SOLVER_KEYS)
    if unknown:
        raise SchemaError(f"solver.{sorted(unknown)[0]}", "unknown field")
    kw = {}
    if "algorithm" in obj:
        if obj["algorithm"] not in ALGORITHMS:
            raise SchemaError("solver.algorithm", f"expected one of {list(ALGORITHMS)}, got {obj['algorithm']!r}")
        kw["algorithm"] = obj["algorithm"]
    for key in ("kappa", "tol", "alpha", "theta_bar"):
        if key in obj and obj[key] is not None:
            kw[key] = decode_number(obj[key], f"solver.{key}")
    if "max_iters" in obj:
        kw["max_iters"] = decode_int(obj["max_iters"], "solver.max_iters", 1)
    if "seed" in obj:
        kw["seed"] = decode_int(obj["seed"], "solver.seed", 0)
    try:
        return SolverConfig(**kw)
    except ValueError as exc:
        raise SchemaError("solver", str(exc)) from None


def decode_cones(obj):
    if obj is None:
        return None
    if not isinstance(obj, list):
        raise SchemaError("cones", "expected a list of cone tags")
    for i, c in enumerate(obj):
        if c not in CONES:
            raise SchemaError(f"cones[{i}]", f"unknown cone tag {c!r}; expected one of {list(CONES)}")
    return tuple(obj)


def decode_config(cfg):
    """Parse a config object into ``(InstanceSpec, SolverConfig, cones or None)``."""
    if not isinstance(cfg, dict):
        raise SchemaError("<root>", "expected a JSON object")
    unknown = set(cfg) - set(TOP_KEYS)
    if unknown:
        raise SchemaError(sorted(unknown)[0], "unknown top-level field")
    if "problem" not in cfg:
        raise SchemaError("problem", "required")
    cones = decode_cones(cfg.get("cones"))
    solver = decode_solver(cfg.get("solver"))
    spec = decode_instance(cfg["problem"], cfg.get("data", {}))
    return spec, solver, cones


def encode_config(spec, solver=None):
    out = {"problem": spec.kind, "data": encode_instance(spec)}
    if solver is not None:
        out["solver"] = {
            "algorithm": solver.algorithm,
            "kappa": solver.kappa,
            "tol": solver.tol,
            "max_iters": solver.max_iters,
            "alpha": solver.alpha,
            "theta_bar": solver.theta_bar,
            "seed": solver.seed,
        }
    return out


__all__ = [
    "SchemaError",
    "decode_matrix",
    "decode_vector",
    "encode_matrix",
    "decode_instance",
    "encode_instance",
    "decode_solver",
    "decode_cones",
    "decode_config",
    "encode_config",
]
