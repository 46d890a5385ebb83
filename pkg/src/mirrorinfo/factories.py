"""Problem builders for the six applications and seeded random instances."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .entropy import von_neumann_entropy
from .errors import DimensionError, DomainError, InfeasibleError, InstanceBudgetError
from .kernels import Domain, KernelKind, as_density_point, as_simplex_point
from .matfun import as_hermitian, dagger, partial_trace, partial_transpose, spectral_decompose
from .problems import (
    ClassicalChannel,
    ConstraintBlock,
    CqEnsemble,
    LinearConstraintSet,
    SaddleProblem,
    StinespringChannel,
    bipartite_mutual_information,
    classical_mutual_information,
    holevo_information,
    joint_mutual_information,
    qre_linear_objective,
    quantum_mutual_information,
)

KINDS = ("cc", "cq", "ea", "crd", "qrd", "ree")
DEFAULT_KAPPA = {"cc": 1.0, "cq": 1.0, "ree": 1.0, "ea": 10.0, "crd": 10.0, "qrd": 10.0}
SENSE_CONES = {"le": ("nonneg", "psd"), "eq": ("zero",)}
FEASIBILITY_TOL = 1e-9


def _block(name, sense, cone, apply, adjoint, rhs, hermitian=False):
    # inequality rows need a sign-restricted multiplier, equalities a free one
    assert cone in SENSE_CONES[sense], f"cone {cone} does not match constraint sense {sense}"
    return ConstraintBlock(name, cone, apply, adjoint, rhs, hermitian)


def _energy_block(A, b):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if A.shape[0] != b.shape[0]:
        raise DimensionError(f"{A.shape[0]} constraint rows but {b.shape[0]} bounds")
    return A, b


def _check_simplex_feasible(A, b):
    m = A.shape[1]
    if np.all(A @ np.full(m, 1.0 / m) <= b):
        return
    res = linprog(
        np.zeros(m), A_ub=A, b_ub=b, A_eq=np.ones((1, m)), b_eq=[1.0], bounds=[(0, None)] * m, method="highs"
    )
    if res.status == 2:
        raise InfeasibleError("energy constraints exclude every input distribution")
    if res.status != 0:
        raise InfeasibleError(f"feasibility probe failed: {res.message}")


def _vector_problem(kind, oracle, A, b, m, smoothness, meta):
    blocks = ()
    if A is not None:
        A, b = _energy_block(A, b)
        if A.shape[1] != m:
            raise DimensionError(f"constraint matrix has {A.shape[1]} columns for {m} inputs")
        if np.any(A < 0) or np.any(b < 0):
            raise DomainError("energy data must be entrywise nonnegative")
        _check_simplex_feasible(A, b)
        blocks = (_block("energy", "le", "nonneg", lambda p, A=A: A @ p, lambda z, A=A: A.T @ z, b),)
    return SaddleProblem(
        kind=kind,
        oracle=oracle,
        domain=Domain.SIMPLEX,
        kernel=KernelKind.NEG_SHANNON,
        smoothness=smoothness,
        x0=np.full(m, 1.0 / m),
        constraints=LinearConstraintSet(blocks),
        kappa=DEFAULT_KAPPA[kind],
        sign=-1.0,
        dims=(m, len(b) if A is not None else 0),
        meta=meta,
    )


def make_classical_capacity(Q, A=None, b=None):
    """Energy-constrained capacity ``max I_c(p)`` s.t. ``A p <= b`` (minimizes ``-I_c``)."""
    ch = Q if isinstance(Q, ClassicalChannel) else ClassicalChannel(Q)

    def oracle(p):
        v, g = classical_mutual_information(p, ch)
        return -v, -g

    return _vector_problem("cc", oracle, A, b, ch.n_inputs, 1.0, {"channel": ch})


def make_cq_capacity(ensemble, A=None, b=None):
    """Energy-constrained classical-quantum capacity ``max chi(p)`` s.t. ``A p <= b``."""
    ens = ensemble if isinstance(ensemble, CqEnsemble) else CqEnsemble(tuple(ensemble))

    def oracle(p):
        v, g = holevo_information(p, ens)
        return -v, -g

    return _vector_problem("cq", oracle, A, b, ens.size, 1.0, {"ensemble": ens})


def _trace_block(observables, b):
    obs = np.stack([as_hermitian(np.asarray(a, dtype=complex)) for a in observables])
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if obs.shape[0] != b.shape[0]:
        raise DimensionError(f"{obs.shape[0]} observables but {b.shape[0]} bounds")
    return obs, b


def max_min_energy(obs, b, iters=2000):
    """Lower estimate of ``max_w lambda_min(sum w_i A_i) - w.b`` over the simplex.

    A positive value certifies that ``{rho : tr[A_i rho] <= b_i}`` contains no
    density matrix.  Entropic ascent with the best iterate retained.
    """
    l = obs.shape[0]
    w = np.full(l, 1.0 / l)
    best = -math.inf
    for k in range(iters):
        lam, V = np.linalg.eigh(np.einsum("i,iab->ab", w, obs))
        val = float(lam[0] - w @ b)
        best = max(best, val)
        v = V[:, 0]
        g = np.real(np.einsum("a,iab,b->i", v.conj(), obs, v)) - b
        w = w * np.exp(g / math.sqrt(k + 1.0) / max(1.0, float(np.max(np.abs(g)))))
        w = w / w.sum()
    for i in range(l):
        best = max(best, float(np.linalg.eigvalsh(obs[i])[0] - b[i]))
    return best


def make_ea_capacity(ch, observables=None, b=None):
    """Energy-constrained entanglement-assisted capacity ``max I_q(rho)`` s.t. ``tr[A_i rho] <= b_i``."""
    if not isinstance(ch, StinespringChannel):
        raise TypeError("expected a StinespringChannel")
    n = ch.dims[0]
    blocks = ()
    nl = 0
    if observables is not None and len(observables):
        obs, b = _trace_block(observables, b)
        if obs.shape[1:] != (n, n):
            raise DimensionError(f"observables of shape {obs.shape[1:]} for input dimension {n}")
        if np.any(np.linalg.eigvalsh(obs)[:, 0] < -1e-10) or np.any(b < 0):
            raise DomainError("observables must be PSD and bounds nonnegative")
        if not np.all(np.real(np.einsum("iaa->i", obs)) / n <= b) and max_min_energy(obs, b) > FEASIBILITY_TOL:
            raise InfeasibleError("energy constraints exclude every density matrix")
        nl = obs.shape[0]
        blocks = (
            _block(
                "energy",
                "le",
                "nonneg",
                lambda r, obs=obs: np.real(np.einsum("iab,ba->i", obs, r)),
                lambda z, obs=obs: np.einsum("i,iab->ab", z, obs),
                b,
            ),
        )

    def oracle(rho):
        v, g = quantum_mutual_information(rho, ch)
        return -v, -g

    return SaddleProblem(
        kind="ea",
        oracle=oracle,
        domain=Domain.DENSITY,
        kernel=KernelKind.NEG_VON_NEUMANN,
        smoothness=2.0,
        x0=np.eye(n, dtype=complex) / n,
        constraints=LinearConstraintSet(blocks),
        kappa=DEFAULT_KAPPA["ea"],
        sign=-1.0,
        dims=(n, nl),
        meta={"channel": ch},
    )


def hamming_distortion(n):
    return np.ones((n, n)) - np.eye(n)


def make_classical_rd(p, D, delta=None):
    """Rate-distortion ``min I_c(P)`` over joints with input marginal ``p`` and ``<P, delta> <= D``.

    ``delta[i, j]`` is the cost of reproducing input ``j`` as output ``i``
    (Hamming by default).  A bound below the least achievable distortion is
    rejected here rather than left to the dual iterates.
    """
    p = as_simplex_point(p)
    if np.any(p <= 0):
        raise DomainError("source distribution must be strictly positive")
    m = p.size
    delta = hamming_distortion(m) if delta is None else np.asarray(delta, dtype=float)
    if delta.ndim != 2 or delta.shape[1] != m:
        raise DimensionError(f"distortion matrix of shape {delta.shape} for {m} source symbols")
    if np.any(delta < 0) or D < 0:
        raise DomainError("distortion data must be nonnegative")
    n = delta.shape[0]
    d_min = float(p @ delta.min(axis=0))
    if D < d_min - FEASIBILITY_TOL:
        raise InfeasibleError(f"distortion bound {D!r} is below the least achievable distortion {d_min!r}")
    block = _block(
        "distortion",
        "le",
        "nonneg",
        lambda P, delta=delta: np.array([float(np.sum(P * delta))]),
        lambda z, delta=delta: z[0] * delta,
        np.array([float(D)]),
    )

    def oracle(P):
        return joint_mutual_information(P, p)

    return SaddleProblem(
        kind="crd",
        oracle=oracle,
        domain=Domain.FIXED_MARGINAL,
        kernel=KernelKind.NEG_SHANNON,
        smoothness=1.0,
        x0=np.tile(p / n, (n, 1)),
        constraints=LinearConstraintSet((block,)),
        marginal=p,
        kappa=DEFAULT_KAPPA["crd"],
        dims=(m,),
        meta={"p": p, "delta": delta, "D": float(D)},
    )


def purification(rho_a):
    """Minimal purification ``sum sqrt(lambda_i) |a_i> (x) |i>`` and the reference marginal."""
    w, U = spectral_decompose(as_density_point(rho_a))
    n = w.size
    if w[-1] <= 1e-12 * w[0]:
        raise DomainError(
            "input state must have full rank; restrict it to its support (truncate the zero eigenvalues) first"
        )
    psi = sum(math.sqrt(w[i]) * np.kron(U[:, i], np.eye(n)[i]) for i in range(n))
    return psi, np.diag(w).astype(complex)


def make_quantum_rd(rho_a, D):
    """Entanglement-assisted rate-distortion with entanglement-fidelity distortion ``I - |psi><psi|``."""
    if not 0 <= D <= 1:
        raise DomainError(f"distortion bound must lie in [0, 1], got {D!r}")
    rho_a = as_density_point(rho_a)
    psi, rho_r = purification(rho_a)
    n = rho_r.shape[0]
    delta = np.eye(n * n) - np.outer(psi, psi.conj())
    s_a = von_neumann_entropy(rho_a)
    blocks = (
        _block(
            "marginal",
            "eq",
            "zero",
            lambda r: partial_trace(r, n, n, over="A"),
            lambda v: np.kron(np.eye(n), v),
            rho_r,
            hermitian=True,
        ),
        _block(
            "distortion",
            "le",
            "nonneg",
            lambda r, delta=delta: np.array([float(np.real(np.vdot(delta, r)))]),
            lambda z, delta=delta: z[0] * delta,
            np.array([float(D)]),
        ),
    )

    def oracle(rho):
        return bipartite_mutual_information(rho, (n, n), s_a)

    return SaddleProblem(
        kind="qrd",
        oracle=oracle,
        domain=Domain.DENSITY,
        kernel=KernelKind.NEG_VON_NEUMANN,
        smoothness=1.0,
        x0=np.kron(np.eye(n) / n, rho_r),
        constraints=LinearConstraintSet(blocks),
        kappa=DEFAULT_KAPPA["qrd"],
        dims=(n,),
        meta={"psi": psi, "rho_r": rho_r, "distortion": delta, "S_A": s_a, "D": float(D)},
    )


def _ree_oracle(rho):
    def oracle(sigma):
        return qre_linear_objective(sigma, rho)

    return oracle


def make_ree_ppt(rho, dims):
    """Relative entropy of entanglement relaxed to PPT states (log-det kernel)."""
    dA, dB = (int(d) for d in dims)
    rho = as_density_point(rho)
    if rho.shape != (dA * dB, dA * dB):
        raise DimensionError(f"state of shape {rho.shape} does not factor as {dA} x {dB}")
    w = np.linalg.eigvalsh(rho)
    n = dA * dB
    block = _block(
        "ppt",
        "le",
        "psd",
        lambda s: -partial_transpose(s, dA, dB, over="B"),
        lambda Z: -partial_transpose(Z, dA, dB, over="B"),
        np.zeros((n, n), dtype=complex),
        hermitian=True,
    )
    return SaddleProblem(
        kind="ree",
        oracle=_ree_oracle(rho),
        domain=Domain.DENSITY,
        kernel=KernelKind.NEG_LOG_DET,
        smoothness=float(max(w[-1], 0.0)),
        x0=np.eye(n, dtype=complex) / n,
        constraints=LinearConstraintSet((block,)),
        strong_convexity=float(max(w[0], 0.0)),
        kappa=DEFAULT_KAPPA["ree"],
        offset=-von_neumann_entropy(rho),
        dims=(dA, dB),
        meta={"rho": rho},
    )


def make_qre_problem(rho):
    """Unconstrained ``min_sigma S(rho || sigma)`` over density matrices (minimizer ``rho``)."""
    rho = as_density_point(rho)
    w = np.linalg.eigvalsh(rho)
    n = rho.shape[0]
    return SaddleProblem(
        kind="qre",
        oracle=_ree_oracle(rho),
        domain=Domain.DENSITY,
        kernel=KernelKind.NEG_LOG_DET,
        smoothness=float(w[-1]),
        x0=np.eye(n, dtype=complex) / n,
        strong_convexity=float(max(w[0], 0.0)),
        offset=-von_neumann_entropy(rho),
        dims=(n,),
        meta={"rho": rho},
    )


# -- channels and states ----------------------------------------------------


def binary_symmetric_channel(f):
    return np.array([[1.0 - f, f], [f, 1.0 - f]])


def depolarizing_channel(p):
    """Qubit depolarizing channel ``rho -> (1 - p) rho + p I/2`` in Stinespring form."""
    X = np.array([[0, 1], [1, 0]], dtype=complex)
    Y = np.array([[0, -1j], [1j, 0]])
    Z = np.diag([1.0, -1.0]).astype(complex)
    kraus = [math.sqrt(1 - 3 * p / 4) * np.eye(2)] + [math.sqrt(p / 4) * P for P in (X, Y, Z)]
    return StinespringChannel.from_kraus(kraus)


def bell_state():
    psi = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)
    return np.outer(psi, psi.conj())


def random_density(n, rng):
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = G @ dagger(G)
    rho = 0.5 * (rho + dagger(rho))
    return rho / np.real(np.trace(rho))


def random_isometry(rows, cols, rng):
    G = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    Qm, R = np.linalg.qr(G)
    # fix the column phases so the factorization is unique
    d = np.diag(R)
    return Qm * (d / np.abs(d))


def random_channel_matrix(n, m, rng):
    Q = rng.uniform(size=(n, m))
    return Q / Q.sum(axis=0)


def random_probability(n, rng):
    p = rng.uniform(size=n)
    return p / p.sum()


# -- random instances -------------------------------------------------------


def _default_dims(kind):
    return {"cc": (4, 1), "cq": (4, 1), "ea": (4, 1), "crd": (4,), "qrd": (3,), "ree": (2, 2)}[kind]


@dataclass
class InstanceSpec:
    """A problem kind with its data payload; ``build`` returns the :class:`SaddleProblem`."""

    kind: str
    dims: tuple
    data: dict = field(default_factory=dict)
    seed: int = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}; expected one of {KINDS}")
        self.dims = tuple(int(d) for d in self.dims)
        if "D" in self.data and not self.data["D"] >= 0:
            raise DomainError("distortion bound must be nonnegative")
        if self.kind in ("cc", "cq") and "A" in self.data:
            if np.any(np.asarray(self.data["A"]) < 0) or np.any(np.asarray(self.data["b"]) < 0):
                raise DomainError("energy data must be entrywise nonnegative")

    def build(self):
        d = self.data
        if self.kind == "cc":
            return make_classical_capacity(d["Q"], d.get("A"), d.get("b"))
        if self.kind == "cq":
            return make_cq_capacity(d["states"], d.get("A"), d.get("b"))
        if self.kind == "ea":
            return make_ea_capacity(d["channel"], d.get("observables"), d.get("b"))
        if self.kind == "crd":
            return make_classical_rd(d["p"], d["D"], d.get("delta"))
        if self.kind == "qrd":
            return make_quantum_rd(d["rho"], d["D"])
        return make_ree_ppt(d["rho"], self.dims)

    def to_config(self, solver=None):
        from .schema import encode_config

        return encode_config(self, solver)

    @classmethod
    def from_config(cls, cfg):
        from .schema import decode_config

        return decode_config(cfg)[0]


def _draw_energy(kind, n, l, rng):
    if kind == "ea":
        obs = np.stack([n * random_density(n, rng) for _ in range(l)])
        return {"observables": obs, "b": rng.uniform(size=l)}
    return {"A": rng.uniform(size=(l, n)), "b": rng.uniform(size=l)}


def _has_active_constraint(spec, base):
    """Solve without the constraints and test whether the optimum violates any of them."""
    from .solvers import SolverConfig, mirror_descent

    problem = spec.build()
    sol, _ = mirror_descent(base, SolverConfig(algorithm="md", tol=1e-5, max_iters=5000))
    return any(v > 0 for v in problem.constraints.violations(sol.x))


def random_instance(kind, dims=None, seed=0, max_resamples=100):
    """Seeded instance following the random-sampling protocol for ``kind``.

    Capacity problems keep the channel and redraw the energy data until the
    constraints are feasible and at least one is active at the unconstrained
    optimum.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown problem kind {kind!r}; expected one of {KINDS}")
    dims = tuple(dims) if dims is not None else _default_dims(kind)
    rng = np.random.default_rng(seed)
    if kind in ("crd", "qrd"):
        n = dims[0]
        if kind == "crd":
            return InstanceSpec(kind, dims, {"p": random_probability(n, rng), "D": 0.5}, seed)
        return InstanceSpec(kind, dims, {"rho": random_density(n, rng), "D": 0.5}, seed)
    if kind == "ree":
        dA, dB = dims
        return InstanceSpec(kind, dims, {"rho": random_density(dA * dB, rng)}, seed)
    n, l = dims
    if kind == "cc":
        base = {"Q": random_channel_matrix(n, n, rng)}
        base_problem = make_classical_capacity(base["Q"])
    elif kind == "cq":
        base = {"states": [random_density(n, rng) for _ in range(n)]}
        base_problem = make_cq_capacity(base["states"])
    else:
        dE = math.ceil(n / 2)
        base = {"channel": StinespringChannel(random_isometry(n * dE, n, rng), (n, n, dE))}
        base_problem = make_ea_capacity(base["channel"])
    if l == 0:
        return InstanceSpec(kind, dims, base, seed)
    for _ in range(max_resamples):
        spec = InstanceSpec(kind, dims, {**base, **_draw_energy(kind, n, l, rng)}, seed)
        try:
            if _has_active_constraint(spec, base_problem):
                return spec
        except InfeasibleError:
            continue
    raise InstanceBudgetError(f"no feasible instance with an active constraint after {max_resamples} resamples")


__all__ = [
    "KINDS",
    "DEFAULT_KAPPA",
    "make_classical_capacity",
    "make_cq_capacity",
    "make_ea_capacity",
    "make_classical_rd",
    "make_quantum_rd",
    "make_ree_ppt",
    "make_qre_problem",
    "hamming_distortion",
    "purification",
    "binary_symmetric_channel",
    "depolarizing_channel",
    "bell_state",
    "random_density",
    "random_isometry",
    "random_channel_matrix",
    "random_probability",
    "InstanceSpec",
    "random_instance",
    "max_min_energy",
]
