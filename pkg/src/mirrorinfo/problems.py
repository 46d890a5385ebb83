"""Objective/gradient oracles, channel representations and saddle problems.

Every oracle returns ``(value, gradient)`` of the information quantity in
its natural orientation (mutual information, Holevo quantity, ...).  The
factories negate capacities into minimization form.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .entropy import shannon_entropy, von_neumann_entropy
from .errors import DimensionError, DomainError
from .kernels import Domain, KernelKind
from .matfun import (
    CLAMP_RTOL,
    LOG,
    apply_operator_function,
    as_hermitian,
    clamp_spectrum,
    dagger,
    eigh_desc,
    first_divided_differences,
    inner,
    partial_trace,
    reassemble,
    spectral_decompose,
)

CONES = ("nonneg", "psd", "zero")


# -- channels ---------------------------------------------------------------


@dataclass(frozen=True)
class ClassicalChannel:
    """Column-stochastic transition matrix ``Q[i, j] = P(output i | input j)``."""

    Q: np.ndarray

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim != 2 or Q.size == 0:
            raise DimensionError(f"channel matrix must be 2-D, got shape {Q.shape}")
        if np.any(Q < 0) or np.any(np.abs(Q.sum(axis=0) - 1.0) > 1e-10):
            raise DomainError("channel matrix must be column stochastic")
        object.__setattr__(self, "Q", Q)

    @property
    def n_outputs(self):
        return self.Q.shape[0]

    @property
    def n_inputs(self):
        return self.Q.shape[1]


@dataclass(frozen=True)
class CqEnsemble:
    """Channel outputs ``N(rho_j)`` of a classical-quantum alphabet."""

    states: tuple

    def __post_init__(self):
        states = tuple(as_hermitian(np.asarray(s, dtype=complex)) for s in self.states)
        if not states:
            raise DimensionError("ensemble needs at least one state")
        d = states[0].shape[0]
        for s in states:
            if s.shape != (d, d):
                raise DimensionError("ensemble states must share one dimension")
            w = np.linalg.eigvalsh(s)
            if w[0] < -1e-10 or abs(w.sum() - 1.0) > 1e-10:
                raise DomainError("ensemble members must be density matrices")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "_stack", np.stack(states))
        object.__setattr__(self, "_entropies", np.array([von_neumann_entropy(s) for s in states]))

    @property
    def dim(self):
        return self.states[0].shape[0]

    @property
    def size(self):
        return len(self.states)

    def average(self, p):
        return np.einsum("j,jab->ab", np.asarray(p, dtype=float), self._stack)


@dataclass(frozen=True)
class StinespringChannel:
    """Channel ``rho -> tr_E(U rho U^dag)`` for an isometry ``U: A -> B (x) E``.

    The output space is ordered ``B (x) E``; tracing out ``B`` instead gives the
    complementary channel.
    """

    U: np.ndarray
    dims: tuple

    def __post_init__(self):
        U = np.asarray(self.U, dtype=complex)
        dA, dB, dE = (int(d) for d in self.dims)
        if U.shape != (dB * dE, dA):
            raise DimensionError(f"isometry shape {U.shape} does not match dims {(dA, dB, dE)}")
        err = float(np.max(np.abs(dagger(U) @ U - np.eye(dA))))
        if err > 1e-10:
            raise DomainError(f"U is not an isometry: max |U^dag U - I| = {err:.3e}")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "dims", (dA, dB, dE))

    @classmethod
    def from_kraus(cls, kraus):
        kraus = [np.asarray(K, dtype=complex) for K in kraus]
        dB, dA = kraus[0].shape
        U = np.stack(kraus, axis=1).reshape(dB * len(kraus), dA)
        return cls(U, (dA, dB, len(kraus)))

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim, dtype=complex), (dim, dim, 1))

    def kraus_operators(self):
        dA, dB, dE = self.dims
        T = self.U.reshape(dB, dE, dA)
        return [T[:, k, :] for k in range(dE)]

    def swapped(self):
        """The channel with the roles of ``B`` and ``E`` exchanged."""
        dA, dB, dE = self.dims
        U = self.U.reshape(dB, dE, dA).transpose(1, 0, 2).reshape(dE * dB, dA)
        return StinespringChannel(U, (dA, dE, dB))

    def _joint(self, rho):
        rho = np.asarray(rho)
        if rho.shape != (self.dims[0], self.dims[0]):
            raise DimensionError(f"input of shape {rho.shape}, channel expects dimension {self.dims[0]}")
        return self.U @ rho @ dagger(self.U)

    def apply(self, rho):
        _, dB, dE = self.dims
        return as_hermitian(partial_trace(self._joint(rho), dB, dE, over="B"))

    def complementary(self, rho):
        _, dB, dE = self.dims
        return as_hermitian(partial_trace(self._joint(rho), dB, dE, over="A"))

    def adjoint(self, Y):
        _, _, dE = self.dims
        return as_hermitian(dagger(self.U) @ np.kron(Y, np.eye(dE)) @ self.U)

    def complementary_adjoint(self, Y):
        _, dB, _ = self.dims
        return as_hermitian(dagger(self.U) @ np.kron(np.eye(dB), Y) @ self.U)


def channel_apply(ch, rho):
    return ch.apply(rho)


def complementary_apply(ch, rho):
    return ch.complementary(rho)


# -- linear constraints -----------------------------------------------------


@dataclass(frozen=True)
class ConstraintBlock:
    """One block of ``b - A(x) in K`` (``cone`` is the dual-side tag of ``K``)."""

    name: str
    cone: str
    apply: Callable
    adjoint: Callable
    rhs: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        if self.cone not in CONES:
            raise ValueError(f"unknown cone tag {self.cone!r}; expected one of {CONES}")


@dataclass(frozen=True)
class LinearConstraintSet:
    """Concatenated linear map ``x -> (A_1(x), ..., A_k(x))`` with right-hand sides."""

    blocks: tuple = ()

    @property
    def cones(self):
        return tuple(b.cone for b in self.blocks)

    def __len__(self):
        return len(self.blocks)

    def apply(self, x):
        return [b.apply(x) for b in self.blocks]

    def adjoint(self, z, like):
        out = np.zeros_like(like)
        for blk, zb in zip(self.blocks, z):
            out = out + blk.adjoint(zb)
        return out

    def residual(self, x):
        """``A(x) - b`` blockwise."""
        return [b.apply(x) - b.rhs for b in self.blocks]

    def zeros(self):
        return [np.zeros_like(b.rhs) for b in self.blocks]

    def violations(self, x, applied=None):
        """Norm of the part of ``A(x) - b`` that leaves the constraint cone, per block.

        ``applied`` may carry an already computed ``A(x)``.
        """
        res = self.residual(x) if applied is None else [a - b.rhs for a, b in zip(applied, self.blocks)]
        out = []
        for blk, r in zip(self.blocks, res):
            if blk.cone == "nonneg":
                out.append(float(np.linalg.norm(np.maximum(np.real(r), 0.0))))
            elif blk.cone == "psd":
                w = np.linalg.eigvalsh(as_hermitian(r))
                out.append(float(np.linalg.norm(np.maximum(w, 0.0))))
            else:
                out.append(float(np.linalg.norm(r)))
        return out

    def random_dual(self, rng):
        z = []
        for b in self.blocks:
            if b.hermitian:
                z.append(random_hermitian(b.rhs.shape[0], rng))
            else:
                z.append(rng.standard_normal(np.shape(b.rhs)))
        return z

    def adjoint_residual(self, like, rng, trials=100):
        """Largest relative mismatch of ``<z, A(x)> = <A^dag(z), x>`` over random pairs."""
        worst = 0.0
        for _ in range(trials):
            x = random_like(like, rng)
            z = self.random_dual(rng)
            lhs = dual_inner(z, self.apply(x))
            rhs = inner(self.adjoint(z, like), x)
            worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
        return worst


def dual_inner(z, w):
    return sum(inner(a, b) for a, b in zip(z, w))


def dual_norm(z):
    return float(np.sqrt(sum(inner(a, a) for a in z)))


def dual_max_abs(z):
    return max((float(np.max(np.abs(a))) for a in z if np.size(a)), default=0.0)


def random_hermitian(n, rng):
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (G + dagger(G))


def random_like(x, rng):
    """Random direction in the space of ``x`` (Hermitian if ``x`` is complex square)."""
    x = np.asarray(x)
    if np.iscomplexobj(x) and x.ndim == 2 and x.shape[0] == x.shape[1]:
        return random_hermitian(x.shape[0], rng)
    return rng.standard_normal(x.shape)


# -- saddle problem ---------------------------------------------------------


@dataclass
class SaddleProblem:
    """``min_{x in C} max_{z in Z} f(x) + <z, A(x) - b>`` with its geometry.

    ``oracle`` returns ``(f(x), grad f(x))`` in minimization form.  Reported
    values are ``sign * f + offset`` (so capacities come out positive and the
    REE includes the constant ``S(rho)``).
    """

    kind: str
    oracle: Callable
    domain: Domain
    kernel: KernelKind
    smoothness: float
    x0: np.ndarray
    constraints: LinearConstraintSet = field(default_factory=LinearConstraintSet)
    marginal: Optional[np.ndarray] = None
    strong_convexity: float = 0.0
    kappa: float = 1.0
    sign: float = 1.0
    offset: float = 0.0
    dims: tuple = ()
    meta: dict = field(default_factory=dict)

    def objective(self, x):
        return self.oracle(x)[0]

    def gradient(self, x):
        return self.oracle(x)[1]

    def lagrangian(self, x, z):
        return self.objective(x) + dual_inner(z, self.constraints.residual(x))

    def report(self, f):
        return self.sign * f + self.offset

    def normalize(self, x):
        """Reporting projection: rescale onto the primal domain's normalization."""
        x = np.asarray(x)
        if self.domain is Domain.SIMPLEX:
            return x / x.sum()
        if self.domain is Domain.FIXED_MARGINAL:
            return x * (self.marginal / x.sum(axis=0))[None, :]
        if self.domain is Domain.DENSITY:
            return x / np.real(np.trace(x))
        return x


# -- oracles ----------------------------------------------------------------


def _relative_entropies_to(Q, q):
    """``H(Q_j || q)`` for every column of ``Q``."""
    pos = Q > 0
    if np.any(pos & (q[:, None] <= 0)):
        raise DomainError("output distribution misses the support of a channel column")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pos, Q * (np.log(np.where(pos, Q, 1.0)) - np.log(np.where(q[:, None] > 0, q[:, None], 1.0))), 0.0)
    return terms.sum(axis=0)


def classical_mutual_information(p, Q):
    """``I_c(p) = sum_j p_j H(Q_j || Qp)`` and its gradient ``H(Q_j || Qp) - 1``."""
    Q = Q.Q if isinstance(Q, ClassicalChannel) else np.asarray(Q, dtype=float)
    p = np.asarray(p, dtype=float)
    if p.shape != (Q.shape[1],):
        raise DimensionError(f"input distribution of shape {p.shape} for channel with {Q.shape[1]} inputs")
    q = Q @ p
    pos = Q > 0
    live = p > 0
    # value only needs the columns in use
    rel = _relative_entropies_to(Q[:, live], q)
    value = float(np.dot(p[live], rel))
    if np.all(live):
        grad = rel - 1.0
    else:
        if np.any(pos[:, ~live] & (q[:, None] <= 0)):
            raise DomainError("gradient undefined: an unused input reaches an output of zero probability")
        grad = _relative_entropies_to(Q, q) - 1.0
    return value, grad


def holevo_information(p, ensemble):
    """Holevo quantity ``S(sum p_j s_j) - sum p_j S(s_j)`` and gradient ``S(s_j || avg) - 1``."""
    p = np.asarray(p, dtype=float)
    if p.shape != (ensemble.size,):
        raise DimensionError(f"weights of shape {p.shape} for an ensemble of {ensemble.size}")
    avg = ensemble.average(p)
    w, U = spectral_decompose(avg)
    value = shannon_entropy(w) - float(np.dot(p, ensemble._entropies))
    top = float(np.max(w))
    low = w < CLAMP_RTOL * top
    if np.any(low):
        null = U[:, low]
        leak = np.real(np.einsum("ak,jab,bk->j", null.conj(), ensemble._stack, null))
        if np.any(leak > 1e-12):
            raise DomainError("an ensemble member is not supported on the ensemble average")
    wc, _ = clamp_spectrum(w, name="log")
    log_avg = reassemble(U, np.log(wc))
    cross = np.real(np.einsum("jab,ba->j", ensemble._stack, log_avg))
    grad = -ensemble._entropies - cross - 1.0
    return value, grad


def quantum_mutual_information(rho, ch):
    """``I_q(rho) = S(rho) + S(N(rho)) - S(N_c(rho))`` and its gradient."""
    rho = as_hermitian(np.asarray(rho))
    out = ch.apply(rho)
    env = ch.complementary(rho)
    value = von_neumann_entropy(rho) + von_neumann_entropy(out) - von_neumann_entropy(env)
    grad = (
        -apply_operator_function(rho, LOG)
        - ch.adjoint(apply_operator_function(out, LOG))
        + ch.complementary_adjoint(apply_operator_function(env, LOG))
        - np.eye(rho.shape[0])
    )
    return value, grad


def joint_mutual_information(P, p):
    """Mutual information of a joint ``P[i, j]`` (output i, input j) with fixed input marginal ``p``.

    Value ``sum P_ij log(P_ij / (p_j q_i))`` with ``q = P 1``; partials
    ``log P_ij - log(p_j q_i)``.
    """
    P = np.asarray(P, dtype=float)
    p = np.asarray(p, dtype=float)
    if P.ndim != 2 or p.shape != (P.shape[1],):
        raise DimensionError(f"joint of shape {P.shape} does not match marginal of shape {p.shape}")
    if np.any(P <= 0):
        raise DomainError("joint distribution must be strictly positive on the gradient path")
    q = P.sum(axis=1)
    L = np.log(P) - np.log(q)[:, None] - np.log(p)[None, :]
    return float(np.sum(P * L)), L


def bipartite_mutual_information(rho_br, dims, entropy_a):
    """``S(rho_A) + S(tr_R rho_BR) - S(rho_BR)`` with gradient ``log rho_BR - log(tr_R rho_BR) (x) I_R``."""
    dB, dR = dims
    rho_br = as_hermitian(np.asarray(rho_br))
    rho_b = partial_trace(rho_br, dB, dR, over="B")
    value = entropy_a + von_neumann_entropy(rho_b) - von_neumann_entropy(rho_br)
    grad = apply_operator_function(rho_br, LOG) - np.kron(apply_operator_function(rho_b, LOG), np.eye(dR))
    return value, grad


def qre_linear_objective(sigma, rho):
    """``g(sigma) = -tr[rho log sigma]`` with gradient ``-U [log^[1](Lambda) * (U^dag rho U)] U^dag``."""
    w, U = eigh_desc(as_hermitian(sigma))
    wc, _ = clamp_spectrum(w, name="log")
    rho = np.asarray(rho)
    R = dagger(U) @ rho @ U
    value = -float(np.real(np.sum(np.diag(R) * np.log(wc))))
    table = first_divided_differences(wc, LOG)
    G = -(U @ (table * R) @ dagger(U))
    return value, 0.5 * (G + dagger(G))


def gradient_check(oracle, x, directions, h=1e-5):
    """Relative errors of ``<grad f(x), V>`` against centered finite differences."""
    _, g = oracle(x)
    errs = []
    for V in directions:
        fd = (oracle(x + h * V)[0] - oracle(x - h * V)[0]) / (2 * h)
        an = inner(g, V)
        errs.append(abs(an - fd) / max(abs(fd), 1e-8))
    return np.array(errs)


__all__ = [
    "CONES",
    "ClassicalChannel",
    "CqEnsemble",
    "StinespringChannel",
    "channel_apply",
    "complementary_apply",
    "ConstraintBlock",
    "LinearConstraintSet",
    "SaddleProblem",
    "classical_mutual_information",
    "holevo_information",
    "quantum_mutual_information",
    "joint_mutual_information",
    "bipartite_mutual_information",
    "qre_linear_objective",
    "gradient_check",
    "dual_inner",
    "dual_norm",
    "random_hermitian",
]
