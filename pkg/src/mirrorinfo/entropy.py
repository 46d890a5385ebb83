"""Classical and quantum entropies in nats.

All functions use ``0 log 0 = 0``; divergences return ``inf`` when the
support of the first argument is not contained in that of the second.
"""

import numpy as np

from .matfun import LOG, apply_operator_function, as_hermitian, spectral_decompose, reassemble

SUPPORT_RTOL = 1e-14


def shannon_entropy(x):
    x = np.asarray(x, dtype=float)
    pos = x > 0
    return float(-np.sum(x[pos] * np.log(x[pos])))


def binary_entropy(d):
    return shannon_entropy([d, 1.0 - d])


def kl_divergence(x, y):
    """``sum x log(x / y)`` (unnormalized inputs allowed)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    pos = x > 0
    if np.any(y[pos] <= 0):
        return np.inf
    return float(np.sum(x[pos] * np.log(x[pos] / y[pos])))


def von_neumann_entropy(rho):
    w = np.linalg.eigvalsh(as_hermitian(rho))
    return shannon_entropy(w)


def quantum_relative_entropy(rho, sigma):
    """``tr[rho (log rho - log sigma)]`` with the support convention."""
    rho = as_hermitian(rho)
    w, U = spectral_decompose(sigma)
    top = max(float(np.max(w)), 0.0)
    supp = w > SUPPORT_RTOL * top
    if not np.all(supp):
        null = U[:, ~supp]
        leak = float(np.real(np.trace(null.conj().T @ rho @ null)))
        if leak > 1e-12 * max(1.0, float(np.real(np.trace(rho)))):
            return np.inf
    log_sigma = reassemble(U[:, supp], np.log(w[supp]))
    wr = np.linalg.eigvalsh(rho)
    return float(-shannon_entropy(wr) - np.real(np.vdot(rho, log_sigma)))


def matrix_log(rho):
    return apply_operator_function(rho, LOG)
