"""Batched Hermitian log-determinants for small matrices.

Monte Carlo trials produce millions of tiny Hermitian positive-definite
matrices. A column-oriented complex Cholesky vectorised over the batch axis
is much faster than one LAPACK call per matrix for ``n <= 8``.
"""

import numpy as np

__all__ = ["NotPositiveDefinite", "cholesky_hpd", "logdet_hpd", "SMALL_N"]

SMALL_N = 8


class NotPositiveDefinite(np.linalg.LinAlgError):
    pass


def cholesky_hpd(a):
    """Lower Cholesky factor of Hermitian positive-definite ``a`` (``(..., n, n)``).

    Only the lower triangle of ``a`` is read.
    """
    a = np.asarray(a)
    n = a.shape[-1]
    if a.shape[-2] != n:
        raise ValueError("matrix must be square")
    if n > SMALL_N:
        try:
            return np.linalg.cholesky(a)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(str(exc)) from None
    out = np.zeros(a.shape, dtype=np.result_type(a.dtype, np.complex128))
    for j in range(n):
        row = out[..., j, :j]
        d = a[..., j, j].real - np.sum(row.real ** 2 + row.imag ** 2, axis=-1)
        if np.any(~(d > 0)):
            raise NotPositiveDefinite("matrix is not positive definite")
        ljj = np.sqrt(d)
        out[..., j, j] = ljj
        if j + 1 < n:
            below = a[..., j + 1:, j]
            if j:
                below = below - np.einsum("...ik,...k->...i", out[..., j + 1:, :j], row.conj())
            out[..., j + 1:, j] = below / ljj[..., None]
    return out


def logdet_hpd(a, base=2.0):
    """``log_base det(a)`` for Hermitian positive-definite ``a`` via Cholesky."""
    c = cholesky_hpd(a)
    diag = np.diagonal(c, axis1=-2, axis2=-1).real
    return 2.0 * np.sum(np.log(diag), axis=-1) / np.log(base)

