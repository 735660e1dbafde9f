"""Fixed-size real 3-D linear algebra.

Every routine broadcasts over leading axes, so a stack of ``(..., 3)``
vectors or ``(..., 3, 3)`` matrices is processed at once.  Reductions are
spelled out term by term instead of going through ``matmul``/``einsum``:
the result for one matrix is then bit-identical whatever the size of the
batch it travels in, which the ensemble runner relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Svd3",
    "DegenerateInputError",
    "dot3",
    "norm3",
    "cross",
    "matvec3",
    "matmul3",
    "transpose3",
    "normalize",
    "sign_normalize",
    "jacobi_eigh3",
    "svd3",
    "orthonormal_complement",
    "plane_projector",
]

_PAIRS = ((0, 1), (0, 2), (1, 2))


class DegenerateInputError(ValueError):
    """Raised when a geometric construction has no well-defined answer."""


def dot3(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def norm3(a):
    return np.sqrt(dot3(a, a))


def cross(a, b):
    """Right-handed cross product ``a x b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.stack(
        [
            a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
            a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
            a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        ],
        axis=-1,
    )


def matvec3(m, v):
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    return (
        m[..., :, 0] * v[..., None, 0]
        + m[..., :, 1] * v[..., None, 1]
        + m[..., :, 2] * v[..., None, 2]
    )


def matmul3(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (
        a[..., :, 0, None] * b[..., None, 0, :]
        + a[..., :, 1, None] * b[..., None, 1, :]
        + a[..., :, 2, None] * b[..., None, 2, :]
    )


def transpose3(m):
    return np.swapaxes(np.asarray(m, dtype=float), -1, -2)


def normalize(v):
    v = np.asarray(v, dtype=float)
    return v / norm3(v)[..., None]


def sign_normalize(v, tol=1e-12):
    """Flip ``v`` so that its first component with ``|c| > tol`` is positive."""
    v = np.asarray(v, dtype=float)
    lead = np.zeros(v.shape[:-1])
    found = np.zeros(v.shape[:-1], dtype=bool)
    for c in range(3):
        take = ~found & (np.abs(v[..., c]) > tol)
        lead = np.where(take, v[..., c], lead)
        found |= take
    return np.where((lead < 0)[..., None], -v, v)


def jacobi_eigh3(a, max_sweeps=30, rel_tol=1e-14):
    """Cyclic Jacobi eigen-decomposition of symmetric 3x3 matrices.

    Returns ``(w, V)`` with ``a @ V[..., :, k] = w[..., k] * V[..., :, k]``.
    Eigenvalues are left in the order the rotations leave them.  A pair is
    rotated only while its off-diagonal exceeds ``rel_tol * ||a||_F``; once a
    matrix has converged further sweeps leave it untouched.
    """
    a = np.array(a, dtype=float, copy=True)
    shape = a.shape[:-2]
    v = np.broadcast_to(np.eye(3), shape + (3, 3)).copy()
    thresh = rel_tol * np.sqrt(np.sum(a * a, axis=(-1, -2)))

    for _ in range(max_sweeps):
        if not np.any(
            (np.abs(a[..., 0, 1]) > thresh)
            | (np.abs(a[..., 0, 2]) > thresh)
            | (np.abs(a[..., 1, 2]) > thresh)
        ):
            break
        for p, q in _PAIRS:
            apq = a[..., p, q]
            active = np.abs(apq) > thresh
            if not np.any(active):
                continue
            safe_apq = np.where(active, apq, 1.0)
            theta = (a[..., q, q] - a[..., p, p]) / (2.0 * safe_apq)
            big = np.abs(theta) > 1e150
            theta_c = np.where(big, 1.0, theta)
            t = np.where(
                big,
                0.5 / np.where(big, theta, 1.0),
                np.where(theta_c >= 0, 1.0, -1.0)
                / (np.abs(theta_c) + np.sqrt(theta_c * theta_c + 1.0)),
            )
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            # A <- J^T A J, with J the (p, q) plane rotation
            cp = a[..., :, p].copy()
            cq = a[..., :, q].copy()
            a[..., :, p] = c[..., None] * cp - s[..., None] * cq
            a[..., :, q] = s[..., None] * cp + c[..., None] * cq
            rp = a[..., p, :].copy()
            rq = a[..., q, :].copy()
            a[..., p, :] = c[..., None] * rp - s[..., None] * rq
            a[..., q, :] = s[..., None] * rp + c[..., None] * rq
            a[..., p, q] = np.where(active, 0.0, a[..., p, q])
            a[..., q, p] = np.where(active, 0.0, a[..., q, p])

            vp = v[..., :, p].copy()
            vq = v[..., :, q].copy()
            v[..., :, p] = c[..., None] * vp - s[..., None] * vq
            v[..., :, q] = s[..., None] * vp + c[..., None] * vq

    w = np.stack([a[..., 0, 0], a[..., 1, 1], a[..., 2, 2]], axis=-1)
    return w, v


@dataclass(frozen=True)
class Svd3:
    """Singular value decomposition of a real 3x3 matrix (or a stack of them).

    ``sigma[..., k]`` is sorted descending; ``v[..., k, :]`` and
    ``u[..., k, :]`` are the k-th right and left singular vectors, so that
    ``M @ v[k] == sigma[k] * u[k]``.
    """

    sigma: np.ndarray
    v: np.ndarray
    u: np.ndarray

    @property
    def v1(self):
        return self.v[..., 0, :]

    def reconstruct(self):
        return (
            self.sigma[..., 0, None, None] * self.u[..., 0, :, None] * self.v[..., 0, None, :]
            + self.sigma[..., 1, None, None] * self.u[..., 1, :, None] * self.v[..., 1, None, :]
            + self.sigma[..., 2, None, None] * self.u[..., 2, :, None] * self.v[..., 2, None, :]
        )


def _hestenes(m, max_sweeps=30, rel_tol=1e-15):
    """One-sided Jacobi: rotate the columns of ``M`` until they are orthogonal.

    Returns ``(B, V)`` with ``B = M V`` having mutually orthogonal columns.
    Only pairs whose normalised overlap exceeds ``rel_tol`` are rotated, so
    a converged matrix is left bit-for-bit alone by later sweeps.
    """
    b = np.array(m, dtype=float, copy=True)
    shape = b.shape[:-2]
    v = np.broadcast_to(np.eye(3), shape + (3, 3)).copy()
    for _ in range(max_sweeps):
        rotated = False
        for p, q in _PAIRS:
            bp = b[..., :, p]
            bq = b[..., :, q]
            alpha = dot3(bp, bp)
            beta = dot3(bq, bq)
            gamma = dot3(bp, bq)
            active = np.abs(gamma) > rel_tol * np.sqrt(alpha * beta)
            if not np.any(active):
                continue
            rotated = True
            with np.errstate(over="ignore"):
                # a subnormal overlap can overflow zeta; the big branch gives t ~ 0
                zeta = (beta - alpha) / (2.0 * np.where(active, gamma, 1.0))
            big = np.abs(zeta) > 1e150
            zc = np.where(big, 1.0, zeta)
            t = np.where(zc >= 0, 1.0, -1.0) / (np.abs(zc) + np.sqrt(1.0 + zc * zc))
            t = np.where(big, 0.5 / np.where(big, zeta, 1.0), t)
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            sn = c * t
            bp, bq = bp.copy(), bq.copy()
            b[..., :, p] = c[..., None] * bp - sn[..., None] * bq
            b[..., :, q] = sn[..., None] * bp + c[..., None] * bq
            vp = v[..., :, p].copy()
            vq = v[..., :, q].copy()
            v[..., :, p] = c[..., None] * vp - sn[..., None] * vq
            v[..., :, q] = sn[..., None] * vp + c[..., None] * vq
        if not rotated:
            break
    return b, v


def svd3(m):
    """SVD of real 3x3 matrices by one-sided (Hestenes) Jacobi.

    Working on the columns of ``M`` directly, rather than on ``M^T M``,
    keeps small singular values and their vectors accurate.  Right singular
    vectors are sign-normalised (first nonzero component positive); ties in
    ``sigma`` keep the original column order, so the zero matrix gives the
    canonical basis.
    """
    m = np.asarray(m, dtype=float)
    b, vecs = _hestenes(m)
    vs = np.swapaxes(vecs, -1, -2)  # rows are right singular vectors
    mv = np.swapaxes(b, -1, -2)  # rows are M v_k
    signed = sign_normalize(vs)
    flip = np.sum(signed * vs, axis=-1) < 0
    vs = signed
    mv = np.where(flip[..., None], -mv, mv)
    sig = np.sqrt(np.stack([dot3(mv[..., k, :], mv[..., k, :]) for k in range(3)], axis=-1))

    order = np.argsort(-sig, axis=-1, kind="stable")
    sig = np.take_along_axis(sig, order, axis=-1)
    vs = np.take_along_axis(vs, order[..., :, None], axis=-2)
    mv = np.take_along_axis(mv, order[..., :, None], axis=-2)

    fro = np.sqrt(np.sum(m * m, axis=(-1, -2)))
    live = sig > 1e-13 * fro[..., None]
    live &= sig > 0

    eye = np.broadcast_to(np.eye(3), m.shape)
    u1 = np.where(live[..., 0, None], mv[..., 0, :] / np.where(live[..., 0], sig[..., 0], 1.0)[..., None], eye[..., 0, :])
    # Gram-Schmidt the second left vector against the first
    w2 = mv[..., 1, :] - dot3(u1, mv[..., 1, :])[..., None] * u1
    n2 = norm3(w2)
    ok2 = live[..., 1] & (n2 > 0)
    fallback2, _ = _complement(u1)
    u2 = np.where(ok2[..., None], w2 / np.where(ok2, n2, 1.0)[..., None], fallback2)
    u3 = cross(u1, u2)
    flip3 = live[..., 2] & (dot3(u3, mv[..., 2, :]) < 0)
    u3 = np.where(flip3[..., None], -u3, u3)
    us = np.stack([u1, u2, u3], axis=-2)
    return Svd3(sigma=sig, v=vs, u=us)


def _complement(vhat):
    absv = np.abs(vhat)
    idx = np.argmin(absv, axis=-1)
    e = np.eye(3)[idx]
    w = e - dot3(e, vhat)[..., None] * vhat
    p1 = w / norm3(w)[..., None]
    p2 = cross(vhat, p1)
    return p1, p2


def orthonormal_complement(v, tol=1e-12):
    """Two unit vectors completing ``v/|v|`` to a right-handed orthonormal triad.

    ``p1`` is the normalised rejection of the canonical axis least aligned
    with ``v`` (ties go to x, then y, then z) and ``p2 = v_hat x p1``.
    """
    v = np.asarray(v, dtype=float)
    n = norm3(v)
    if np.any(n <= tol):
        raise DegenerateInputError(f"cannot build a plane orthogonal to a vector of norm <= {tol:g}")
    return _complement(v / n[..., None])


def plane_projector(p1, p2, tol=1e-10):
    """Orthogonal projector ``p1 p1^T + p2 p2^T`` onto the plane spanned by p1, p2."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if (
        np.any(np.abs(dot3(p1, p1) - 1.0) > tol)
        or np.any(np.abs(dot3(p2, p2) - 1.0) > tol)
        or np.any(np.abs(dot3(p1, p2)) > tol)
    ):
        raise ValueError("plane_projector needs an orthonormal pair")
    return _projector(p1, p2)


def _projector(p1, p2):
    return p1[..., :, None] * p1[..., None, :] + p2[..., :, None] * p2[..., None, :]
