"""Legendre kernels, Bregman divergences and mirror-step solvers.

A mirror step solves

    x+ = argmin_{x in C} <g, x> + (1/t) D_phi(x || x_k)

for a (kernel, domain) pair.  Entropic kernels give closed forms (normalized
exponentials); the Burg / log-determinant kernels reduce to one scalar root
for the normalization multiplier.
"""

import enum
import math

import numpy as np
from scipy.linalg import solve_triangular

from .entropy import kl_divergence, quantum_relative_entropy
from .errors import DomainError
from .matfun import (
    as_hermitian,
    clamp_spectrum,
    eigh_desc,
    inner,
    reassemble,
    spectral_decompose,
)

SUM_TOL = 1e-6
NEG_TOL = 1e-10
ROOT_TOL = 1e-13


class KernelKind(enum.Enum):
    ENERGY = "energy"
    NEG_SHANNON = "neg_shannon"
    NEG_VON_NEUMANN = "neg_von_neumann"
    NEG_BURG = "neg_burg"
    NEG_LOG_DET = "neg_log_det"

    @property
    def is_matrix(self):
        return self in (KernelKind.NEG_VON_NEUMANN, KernelKind.NEG_LOG_DET)


class Domain(enum.Enum):
    FREE = "free"
    SIMPLEX = "simplex"
    FIXED_MARGINAL = "fixed_marginal"
    DENSITY = "density"


def as_simplex_point(x):
    """Validate and renormalize a probability vector (or joint distribution)."""
    x = np.array(x, dtype=float)
    total = float(x.sum())
    if np.any(x < -NEG_TOL) or abs(total - 1.0) > SUM_TOL:
        raise DomainError(f"not a probability vector: min {x.min():.3e}, sum {total!r}")
    x = np.clip(x, 0.0, None)
    return x / x.sum()


def as_density_point(rho):
    """Validate and renormalize a density matrix."""
    rho = as_hermitian(np.asarray(rho, dtype=complex))
    tr = float(np.real(np.trace(rho)))
    w = np.linalg.eigvalsh(rho)
    if w[0] < -NEG_TOL or abs(tr - 1.0) > SUM_TOL:
        raise DomainError(f"not a density matrix: min eigenvalue {w[0]:.3e}, trace {tr!r}")
    return rho / tr


def _clamped(x, name):
    x, _ = clamp_spectrum(np.asarray(x, dtype=float).ravel(), name=name)
    return x


def kernel_value_and_gradient(kind, x):
    """Kernel value and gradient at ``x`` (near-boundary entries are clamped)."""
    if kind is KernelKind.ENERGY:
        x = np.asarray(x)
        return 0.5 * inner(x, x), x.copy()
    if kind in (KernelKind.NEG_SHANNON, KernelKind.NEG_BURG):
        x = np.asarray(x, dtype=float)
        xc = _clamped(x, kind.value).reshape(x.shape)
        if kind is KernelKind.NEG_SHANNON:
            return float(np.sum(xc * np.log(xc))), np.log(xc) + 1.0
        return float(-np.sum(np.log(xc))), -1.0 / xc
    w, U = spectral_decompose(x)
    w = _clamped(w, kind.value)
    if kind is KernelKind.NEG_VON_NEUMANN:
        return float(np.sum(w * np.log(w))), reassemble(U, np.log(w) + 1.0)
    if kind is KernelKind.NEG_LOG_DET:
        return float(-np.sum(np.log(w))), reassemble(U, -1.0 / w)
    raise ValueError(f"unknown kernel {kind!r}")


def bregman_divergence(kind, x, y):
    """``phi(x) - phi(y) - <grad phi(y), x - y>``; ``inf`` when ``x`` leaves the support."""
    if kind is KernelKind.ENERGY:
        d = np.asarray(x) - np.asarray(y)
        return 0.5 * inner(d, d)
    if kind is KernelKind.NEG_SHANNON:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if np.any(y < -NEG_TOL * max(1.0, float(np.max(np.abs(y))))):
            raise DomainError("second argument has negative entries")
        if np.any((y <= 0) & (x > 0)):
            return math.inf
        # termwise x log1p(d/y) - d avoids cancellation when x is close to y
        pos = (y > 0) & (x > 0)
        xp, yp = x[pos], y[pos]
        d = xp - yp
        r = d / yp
        near = np.abs(r) < 0.5
        logs = np.where(near, np.log1p(np.where(near, r, 0.0)), np.log(xp) - np.log(yp))
        return float(np.sum(xp * logs - d) + np.sum(y[x <= 0]))
    if kind is KernelKind.NEG_VON_NEUMANN:
        w = np.linalg.eigvalsh(as_hermitian(y))
        if w[0] < -NEG_TOL * max(1.0, float(w[-1])):
            raise DomainError(f"second argument has eigenvalue {w[0]:.3e}")
        return quantum_relative_entropy(x, y) - float(np.real(np.trace(x) - np.trace(y)))
    if kind is KernelKind.NEG_BURG:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if np.any(y <= 0):
            raise DomainError("negative Burg entropy needs a strictly positive second argument")
        if np.any(x <= 0):
            return math.inf
        d = (x - y) / y
        return float(np.sum(d - np.log1p(d)))
    if kind is KernelKind.NEG_LOG_DET:
        y = as_hermitian(y)
        try:
            C = np.linalg.cholesky(y)
        except np.linalg.LinAlgError:
            w = np.linalg.eigvalsh(y)
            raise DomainError(
                f"log-det divergence needs a positive definite second argument, got eigenvalue {w[0]:.3e}"
            ) from None
        # eigenvalues of y^{-1/2} x y^{-1/2} via the similar matrix C^{-1} x C^{-dag}
        W = solve_triangular(C, np.asarray(x), lower=True)
        W = solve_triangular(C, W.conj().T, lower=True)
        mu = np.linalg.eigvalsh(0.5 * (W + W.conj().T))
        if mu[0] <= 0:
            return math.inf
        d = mu - 1.0
        return float(np.sum(d - np.log1p(d)))
    raise ValueError(f"unknown kernel {kind!r}")


def _check_step(g, t):
    g = np.asarray(g)
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient has non-finite entries")
    if not t > 0:
        raise ValueError(f"step size must be positive, got {t!r}")
    return g


def mirror_step_simplex(x, g, t):
    """Entropic step on the simplex: ``x+_i ∝ x_i exp(-t g_i)``."""
    g = _check_step(g, t)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        s = np.log(x) - t * g
    s = s - np.max(s)
    e = np.exp(s)
    return e / e.sum()


def mirror_step_fixed_marginal(P, G, t, marginal):
    """Entropic step on joint distributions whose column sums are ``marginal``."""
    G = _check_step(G, t)
    P = np.asarray(P, dtype=float)
    with np.errstate(divide="ignore"):
        s = np.log(P) - t * G
    s = s - np.max(s, axis=0, keepdims=True)
    e = np.exp(s)
    return np.asarray(marginal)[None, :] * e / e.sum(axis=0, keepdims=True)


def mirror_step_density(rho, G, t):
    """Matrix entropic step ``exp(log rho - t G) / tr[...]``."""
    G = as_hermitian(_check_step(G, t))
    w, U = eigh_desc(as_hermitian(rho))
    w = _clamped(w, "log")
    M = reassemble(U, np.log(w)) - t * G
    mu, V = eigh_desc(M)
    e = np.exp(mu - mu[0])
    return reassemble(V, e / e.sum())


def _unit_trace_shift(d):
    """Root ``c`` in ``[1, n]`` of ``sum 1/(d_i + c) = 1`` for ``d_i >= 0``, ``min d = 0``.

    Newton from the left end converges monotonically (the sum is convex and
    decreasing); the bracket is kept and bisection takes over if a step
    ever leaves it.
    """
    n = d.size
    a, b = 1.0, float(n)
    c = a
    for _ in range(200):
        r = 1.0 / (d + c)
        h = float(r.sum()) - 1.0
        if abs(h) <= ROOT_TOL:
            return c
        if h > 0:
            a = c
        else:
            b = c
        dh = -float(np.sum(r * r))
        nxt = c - h / dh
        if not a < nxt < b:
            nxt = 0.5 * (a + b)
        if nxt == c:
            return c
        c = nxt
    raise RuntimeError(f"unit-trace root did not converge in bracket [{a!r}, {b!r}]")


def solve_unit_trace_root(eigs):
    """Unique ``nu > -min(eigs)`` with ``sum 1/(eigs_i + nu) = 1``."""
    lam = np.asarray(eigs, dtype=float).ravel()
    if lam.size == 0 or not np.all(np.isfinite(lam)):
        raise ValueError("eigenvalues must be a non-empty finite sequence")
    lmin = float(lam.min())
    return _unit_trace_shift(lam - lmin) - lmin


def mirror_step_burg_simplex(x, g, t):
    """Burg-entropy step on the simplex: ``x+ = 1 / (1/x + t g + nu)``."""
    g = _check_step(g, t)
    m = 1.0 / np.asarray(x, dtype=float) + t * g
    d = m - m.min()
    c = _unit_trace_shift(d)
    return 1.0 / (d + c)


def mirror_step_logdet_density(sigma, G, t):
    """Log-det step on density matrices: ``[sigma^-1 + t G + nu I]^-1`` with unit trace."""
    G = as_hermitian(_check_step(G, t))
    w, U = eigh_desc(as_hermitian(sigma))
    w = _clamped(w, "inv")
    M = reassemble(U, 1.0 / w) + t * G
    mu, V = eigh_desc(M)
    d = mu - mu[-1]
    c = _unit_trace_shift(d)
    return reassemble(V, 1.0 / (d + c))


def mirror_step(kind, domain, x, g, t, marginal=None):
    """Dispatch to the mirror-step solver for a supported (kernel, domain) pair."""
    if kind is KernelKind.NEG_SHANNON and domain is Domain.SIMPLEX:
        return mirror_step_simplex(x, g, t)
    if kind is KernelKind.NEG_SHANNON and domain is Domain.FIXED_MARGINAL:
        return mirror_step_fixed_marginal(x, g, t, marginal)
    if kind is KernelKind.NEG_VON_NEUMANN and domain is Domain.DENSITY:
        return mirror_step_density(x, g, t)
    if kind is KernelKind.NEG_LOG_DET and domain is Domain.DENSITY:
        return mirror_step_logdet_density(x, g, t)
    if kind is KernelKind.NEG_BURG and domain is Domain.SIMPLEX:
        return mirror_step_burg_simplex(x, g, t)
    if kind is KernelKind.ENERGY and domain is Domain.FREE:
        return np.asarray(x) - t * _check_step(g, t)
    raise ValueError(f"no mirror step for kernel {kind.value} on domain {domain.value}")


__all__ = [
    "KernelKind",
    "Domain",
    "as_simplex_point",
    "as_density_point",
    "kernel_value_and_gradient",
    "bregman_divergence",
    "mirror_step",
    "mirror_step_simplex",
    "mirror_step_fixed_marginal",
    "mirror_step_density",
    "mirror_step_logdet_density",
    "mirror_step_burg_simplex",
    "solve_unit_trace_root",
]
