"""Vectorized NumPy assembly kernel (fallback for the compiled one).

Accumulates, per element, the local matrices of a sum of weighted squares

    sum_t int c_t(r) * ( sum_f alpha_{t,f}(r) u_f + beta_{t,f}(r) u_f' )^2 w(r) dr

for `nfields` scalar FE fields sharing one basis.  Local dof ordering is
node-major: index = a * nfields + f for basis function a and field f.
"""
from __future__ import annotations

import numpy as np


def accumulate_forms(w, coeff, alpha, beta, phi, dphi):
    """Element matrices of the term list.

    Parameters
    ----------
    w : (E, Q) quadrature weights (any measure factors folded in)
    coeff : (T, E, Q) per-term coefficients
    alpha, beta : (T, E, Q, F) per-field multipliers of u_f and u_f'
    phi, dphi : (E, Q, A) basis values and global derivatives

    Returns
    -------
    (E, A*F, A*F) symmetric local matrices.
    """
    L = (
        alpha[:, :, :, None, :] * phi[None, :, :, :, None]
        + beta[:, :, :, None, :] * dphi[None, :, :, :, None]
    )
    T, E, Q, A, F = L.shape
    L = L.reshape(T, E, Q, A * F)
    wc = coeff * w[None, :, :]
    return np.einsum("teq,teqi,teqj->eij", wc, L, L, optimize=True)
