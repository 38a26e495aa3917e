"""Pure-numpy reference versions of the compiled kernels.

Fields are entry-major: a matrix field has shape ``(d, d, n_x, n_p)`` so each
matrix entry is a contiguous 2-D array. The compiled module ``_kernels``
exposes the same three functions with the same signatures.
"""

import numpy as np


def diff_zero(f, h, axis):
    """Central difference along a cell axis (0 = x, 1 = p) with zero exterior cells."""
    ax = f.ndim - 2 + axis
    f = np.moveaxis(f, ax, 0)
    out = np.empty_like(f)
    inv = 1.0 / (2.0 * h)
    out[1:-1] = (f[2:] - f[:-2]) * inv
    out[0] = f[1] * inv
    out[-1] = -f[-2] * inv
    return np.moveaxis(out, 0, ax)


def assemble(H, Hx, Hp, rho, rx, rp, corrected):
    """Right-hand side of the hybrid equation from precomputed derivatives.

    Evaluates ``-i[H, rho] + 1/2 {H, rho}_P - 1/2 {rho, H}_P`` and, when
    ``corrected``, the two commutator terms ``-i/2 [dH, d rho]``. The Poisson and
    correction terms are grouped as ``Hx M + M^dag Hx`` with ``M = rp - c i rx``
    (``c`` is 1 or 0), and every cellwise sum runs over ``k`` in the same order
    for entry ``(a, b)`` and its mirror, so the output is Hermitian to the bit.
    """
    c = 1j if corrected else 0.0
    m = rp - c * rx
    mt = rp + c * rx
    n = rx + c * rp
    nt = rx - c * rp
    d = rho.shape[0]
    out = np.empty_like(rho, dtype=complex)
    for a in range(d):
        for b in range(d):
            comm = 0.0
            tx = 0.0
            tp = 0.0
            for k in range(d):
                comm = comm + (H[a, k] * rho[k, b] - rho[a, k] * H[k, b])
                tx = tx + (Hx[a, k] * m[k, b] + mt[a, k] * Hx[k, b])
                tp = tp + (Hp[a, k] * n[k, b] + nt[a, k] * Hp[k, b])
            out[a, b] = -1j * comm + 0.5 * tx - 0.5 * tp
    return out


def min_eig(rho):
    """Smallest eigenvalue of the Hermitian matrix in every cell, shape ``(n_x, n_p)``."""
    d = rho.shape[0]
    if d == 1:
        return rho[0, 0].real.copy()
    if d == 2:
        a = rho[0, 0].real
        c = rho[1, 1].real
        b2 = rho[0, 1].real ** 2 + rho[0, 1].imag ** 2
        half = 0.5 * (a - c)
        return 0.5 * (a + c) - np.sqrt(half * half + b2)
    cells = np.moveaxis(rho, (0, 1), (-2, -1))
    return np.linalg.eigvalsh(cells)[..., 0]
