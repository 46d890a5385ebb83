"""Spectral calculus for Hermitian matrices.

Operator functions ``f(H) = U f(Lambda) U^dag``, their first-order
(Daleckii-Krein) derivatives, gradients of trace functionals, and the
partial trace / partial transpose on bipartite spaces.

Functions whose domain is the open half line ``(0, inf)`` are evaluated on a
clamped spectrum: eigenvalues below ``1e-14 * lambda_max`` are lifted to that
floor and a :class:`ClampWarning` is emitted.  Eigenvalues more negative than
``-1e-10 * lambda_max`` are not roundoff and raise :class:`DomainError`.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.linalg import lapack

from .errors import DimensionError, DomainError, NotHermitianError

HERMITIAN_RTOL = 1e-12
_TINY = np.finfo(float).tiny
_zheevd, _dsyevd = lapack.zheevd, lapack.dsyevd
CLAMP_RTOL = 1e-14
NEGATIVE_RTOL = 1e-10
MERGE_RTOL = 1e-8


class ClampWarning(RuntimeWarning):
    """Eigenvalues were lifted onto the clamping floor."""


@dataclass(frozen=True)
class ScalarFunction:
    """A differentiable real function on an open interval ``(lo, hi)``."""

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    domain: tuple = (-math.inf, math.inf)

    def __call__(self, x):
        return self.value(x)


def _xlogx(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log(x[pos])
    return out


LOG = ScalarFunction("log", np.log, lambda x: 1.0 / x, (0.0, math.inf))
EXP = ScalarFunction("exp", np.exp, np.exp)
XLOGX = ScalarFunction("xlogx", _xlogx, lambda x: np.log(x) + 1.0, (0.0, math.inf))
NEG_LOG = ScalarFunction("neglog", lambda x: -np.log(x), lambda x: -1.0 / x, (0.0, math.inf))
SQUARE = ScalarFunction("square", np.square, lambda x: 2.0 * x)
INV = ScalarFunction("inv", lambda x: 1.0 / x, lambda x: -1.0 / x**2, (0.0, math.inf))


class Spectrum(NamedTuple):
    """Eigenvalues in descending order and matching unitary eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        return reassemble(self.eigenvectors, self.eigenvalues)


def dagger(M):
    return np.conj(np.swapaxes(M, -1, -2))


def inner(X, Y):
    """Real trace inner product ``Re tr[X^dag Y]`` (Euclidean for vectors)."""
    return float(np.real(np.vdot(X, Y)))


def as_hermitian(H, tol=HERMITIAN_RTOL):
    """Validate ``H`` as a square Hermitian matrix and return its Hermitian part."""
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] < 1:
        raise DimensionError(f"expected a non-empty square matrix, got shape {H.shape}")
    Hd = H.conj().T
    scale = float(np.abs(H).max())
    residual = float(np.abs(H - Hd).max())
    if residual > tol * max(scale, _TINY):
        raise NotHermitianError(residual, tol * scale)
    return 0.5 * (H + Hd)


def reassemble(U, values):
    """``U diag(values) U^dag``, returned exactly Hermitian."""
    M = (U * values) @ dagger(U)
    return 0.5 * (M + dagger(M))


def spectral_decompose(H):
    """Eigendecomposition with descending eigenvalues and a fixed eigenvector phase.

    Each eigenvector is rotated so that its first component of non-negligible
    magnitude is real and positive, which makes the output reproducible.
    """
    H = as_hermitian(H)
    w, V = np.linalg.eigh(H)
    w = w[::-1].copy()
    V = V[:, ::-1]
    mag = np.abs(V)
    k = np.argmax(mag > 1e-12 * mag.max(axis=0), axis=0)
    lead = V[k, np.arange(V.shape[1])]
    V = V * (np.conj(lead) / np.abs(lead))
    return Spectrum(w, V)


def eigh_desc(H):
    """Descending eigenpairs of a matrix already known to be Hermitian.

    No validation and no phase convention: for inner loops whose results
    depend only on the spectral projectors.
    """
    H = np.asarray(H)
    # the LAPACK driver directly: numpy's wrapper costs more than the solve at these sizes
    if np.iscomplexobj(H):
        w, V, info = _zheevd(H)
    else:
        w, V, info = _dsyevd(H)
    if info != 0:
        raise np.linalg.LinAlgError(f"eigendecomposition failed (info={info})")
    return Spectrum(w[::-1], V[:, ::-1])


def clamp_spectrum(eigs, lo=0.0, hi=math.inf, name="f"):
    """Map eigenvalues into the open interval ``(lo, hi)`` under the clamping rule.

    Only a lower bound of exactly zero is clamped; any other boundary is
    checked strictly.  Returns the (possibly) adjusted eigenvalues and the
    number that were lifted.
    """
    eigs = np.asarray(eigs, dtype=float)
    count = 0
    if lo == 0.0:
        top = float(np.max(eigs)) if eigs.size else 0.0
        if not top > 0.0:
            raise DomainError(f"{name}: largest eigenvalue {top!r} is not positive")
        bad = eigs < -NEGATIVE_RTOL * top
        if np.any(bad):
            raise DomainError(f"{name}: eigenvalue {float(eigs[bad][0])!r} outside domain (0, inf)")
        floor = CLAMP_RTOL * top
        low = eigs < floor
        count = int(np.count_nonzero(low))
        if count:
            eigs = np.where(low, floor, eigs)
            warnings.warn(f"{name}: {count} eigenvalue(s) clamped to {floor:.3e}", ClampWarning, stacklevel=3)
    elif lo > -math.inf:
        bad = eigs <= lo
        if np.any(bad):
            raise DomainError(f"{name}: eigenvalue {float(eigs[bad][0])!r} outside domain ({lo}, {hi})")
    if hi < math.inf:
        bad = eigs >= hi
        if np.any(bad):
            raise DomainError(f"{name}: eigenvalue {float(eigs[bad][0])!r} outside domain ({lo}, {hi})")
    return eigs, count


def _spectrum_of(H):
    return H if isinstance(H, Spectrum) else spectral_decompose(H)


def apply_operator_function(H, f):
    """``U f(Lambda) U^dag`` for Hermitian ``H`` (or a precomputed :class:`Spectrum`)."""
    w, U = _spectrum_of(H)
    w, _ = clamp_spectrum(w, *f.domain, name=f.name)
    return reassemble(U, f.value(w))


def first_divided_differences(eigs, f):
    """Table of ``(f(a) - f(b)) / (a - b)``, with ``f'`` on the diagonal and merged pairs.

    Pairs closer than ``1e-8 * max(1, |a|, |b|)`` use ``f'((a + b) / 2)``.
    """
    lam, _ = clamp_spectrum(eigs, *f.domain, name=f.name)
    a = lam[:, None]
    b = lam[None, :]
    diff = a - b
    merged = np.abs(diff) <= MERGE_RTOL * np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    fl = f.value(lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        table = (fl[:, None] - fl[None, :]) / np.where(merged, 1.0, diff)
    mid = f.derivative(0.5 * (a + b))
    table = np.where(merged, mid, table)
    return 0.5 * (table + table.T)


def directional_derivative(H, V, f):
    """Frechet derivative ``D f(H)[V] = U [f^[1](Lambda) * (U^dag V U)] U^dag``."""
    w, U = _spectrum_of(H)
    V = as_hermitian(V)
    if V.shape != U.shape:
        raise DimensionError(f"direction has shape {V.shape}, expected {U.shape}")
    table = first_divided_differences(w, f)
    M = U @ (table * (dagger(U) @ V @ U)) @ dagger(U)
    return 0.5 * (M + dagger(M))


def trace_functional_gradient(H, f):
    """Gradient ``f'(H)`` of ``X -> tr f(X)``."""
    w, U = _spectrum_of(H)
    w, _ = clamp_spectrum(w, *f.domain, name=f.name)
    return reassemble(U, f.derivative(w))


def _check_bipartite(M, dimA, dimB):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape != (dimA * dimB, dimA * dimB):
        raise DimensionError(f"matrix of shape {M.shape} does not factor as {dimA} x {dimB}")
    return M.reshape(dimA, dimB, dimA, dimB)


def partial_trace(M, dimA, dimB, over="B"):
    """Trace out subsystem ``over`` ('A' or 'B') of an operator on ``A (x) B``."""
    T = _check_bipartite(M, dimA, dimB)
    if over == "B":
        return np.einsum("ijkj->ik", T)
    if over == "A":
        return np.einsum("ijil->jl", T)
    raise ValueError(f"unknown subsystem tag {over!r}")


def partial_transpose(M, dimA, dimB, over="B"):
    """Transpose subsystem ``over`` ('A' or 'B') of an operator on ``A (x) B``."""
    T = _check_bipartite(M, dimA, dimB)
    if over == "B":
        T = T.transpose(0, 3, 2, 1)
    elif over == "A":
        T = T.transpose(2, 1, 0, 3)
    else:
        raise ValueError(f"unknown subsystem tag {over!r}")
    return T.reshape(dimA * dimB, dimA * dimB)
