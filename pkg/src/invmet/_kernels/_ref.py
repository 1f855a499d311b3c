"""NumPy reference implementation of the hot kernels.

The compiled extension (``_core``) mirrors these signatures exactly; this
module is the import-time fallback and the correctness oracle for it.

Domains are passed in a flat "atom" encoding so the kernels stay free of
Python object dispatch: a domain is a max of one or two atomic margins
(two only for window intersections).  Atom codes:

    0  unit disc            (no params)
    1  ball                 f = [radius], c = center
    2  polydisc             f = radii
    3  complex ellipsoid    f = exponents
    4  annulus              f = [inner radius]
    5  half-plane           f = [offset], c = unit normal
"""

import numpy as np

BACKEND = "numpy"

DISC, BALL, POLYDISC, ELLIPSOID, ANNULUS, HALFPLANE = range(6)


def atom_margin(code, f, c, pts):
    """Signed violation margin of one atom: negative inside, positive outside.

    pts has shape (..., n); the result drops the last axis.
    """
    if code == DISC:
        return np.abs(pts[..., 0]) - 1.0
    if code == BALL:
        return np.sqrt(np.sum(np.abs(pts - c) ** 2, axis=-1)) - f[0]
    if code == POLYDISC:
        return np.max(np.abs(pts) - f, axis=-1)
    if code == ELLIPSOID:
        return np.sum(np.abs(pts) ** (2.0 * f), axis=-1) - 1.0
    if code == ANNULUS:
        r = np.abs(pts[..., 0])
        return np.maximum(r - 1.0, f[0] - r)
    if code == HALFPLANE:
        return np.real(np.sum(pts * np.conj(c), axis=-1)) - f[0]
    raise ValueError(f"unknown atom code {code}")


def margin_points(codes, fidx, fpar, cidx, cpar, pts):
    """Max margin over all atoms, pointwise.  pts: (..., n) complex."""
    out = None
    for a, code in enumerate(codes):
        f = fpar[fidx[a]:fidx[a + 1]]
        c = cpar[cidx[a]:cidx[a + 1]]
        m = atom_margin(int(code), f, c, pts)
        out = m if out is None else np.maximum(out, m)
    return out


def eval_disc_batch(coeffs, zetas):
    """Evaluate a batch of polynomial discs at sample parameters.

    coeffs: (B, K, n) complex, zetas: (M,) complex -> (B, M, n) complex,
    Horner over the K coefficients.
    """
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    zetas = np.asarray(zetas, dtype=np.complex128)
    B, K, n = coeffs.shape
    z = zetas[None, :, None]
    out = np.broadcast_to(coeffs[:, K - 1, None, :], (B, zetas.size, n)).copy()
    for k in range(K - 2, -1, -1):
        out *= z
        out += coeffs[:, k, None, :]
    return out


def penalty_batch(coeffs, zetas, codes, fidx, fpar, cidx, cpar):
    """Mean squared positive margin per batch row: (B,) float64."""
    pts = eval_disc_batch(coeffs, zetas)
    m = margin_points(codes, fidx, fpar, cidx, cpar, pts)
    v = np.maximum(m, 0.0)
    return np.mean(v * v, axis=-1)
