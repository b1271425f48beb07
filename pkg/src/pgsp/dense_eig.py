"""Self-contained dense symmetric eigensolver for the reference oracle.

Classical two-stage algorithm: Householder reduction to tridiagonal form,
then QL iteration with implicit Wilkinson shifts on the tridiagonal,
accumulating the orthogonal transform.  Kept in-repo (rather than calling
out to a library solver) so the reference path shares no code with the
iterative solver it is used to check.

Intended for small problems only (a few hundred rows); the production
path never calls this module.
"""

from __future__ import annotations

import numpy as np

__all__ = ["symmetric_eig"]

_MAX_QL_SWEEPS = 50


def _householder_tridiagonalize(a: np.ndarray):
    """Reduce symmetric ``a`` to tridiagonal T = Q.T @ a @ Q.

    Returns (d, e, q): diagonal, subdiagonal (length n-1), and the
    accumulated orthogonal matrix q with ``q @ T @ q.T == a``.
    """
    t = np.array(a, dtype=np.float64, copy=True)
    n = t.shape[0]
    q = np.eye(n)
    for k in range(n - 2):
        x = t[k + 1 :, k]
        norm_x = np.linalg.norm(x)
        if norm_x == 0.0:
            continue
        v = x.copy()
        # Reflect onto -sign(x0) * ||x|| * e1 to avoid cancellation.
        v[0] += np.copysign(norm_x, x[0]) if x[0] != 0.0 else norm_x
        v_norm = np.linalg.norm(v)
        if v_norm == 0.0:
            continue
        v /= v_norm
        # Two-sided application of P = I - 2 v v^T to the trailing block.
        t[k + 1 :, k:] -= 2.0 * np.outer(v, v @ t[k + 1 :, k:])
        t[:, k + 1 :] -= 2.0 * np.outer(t[:, k + 1 :] @ v, v)
        q[:, k + 1 :] -= 2.0 * np.outer(q[:, k + 1 :] @ v, v)
    d = np.diag(t).copy()
    e = np.diag(t, -1).copy()
    return d, e, q


def _ql_implicit_shifts(d: np.ndarray, e: np.ndarray, z: np.ndarray):
    """QL iteration with implicit shifts on a symmetric tridiagonal.

    ``d`` holds the diagonal, ``e`` the subdiagonal (e[i] couples i and
    i+1), ``z`` the transform accumulated so far; all are updated in
    place.  On return d holds eigenvalues and the columns of z the
    corresponding eigenvectors.
    """
    n = d.shape[0]
    e = np.append(e, 0.0)
    for l in range(n):
        sweeps = 0
        while True:
            # Look for a negligible subdiagonal element splitting the matrix.
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= np.finfo(np.float64).eps * dd:
                    break
                m += 1
            if m == l:
                break
            sweeps += 1
            if sweeps > _MAX_QL_SWEEPS:
                raise RuntimeError(
                    f"QL iteration failed to converge for eigenvalue {l}"
                )
            # Wilkinson shift from the leading 2x2 block.
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + np.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    # Recover from underflow: split and restart this block.
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zi = z[:, i].copy()
                z[:, i] = c * zi - s * z[:, i + 1]
                z[:, i + 1] = s * zi + c * z[:, i + 1]
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0


def symmetric_eig(a: np.ndarray):
    """Full eigendecomposition of a symmetric matrix.

    Returns (w, v) with eigenvalues ``w`` in ascending order and
    orthonormal eigenvectors in the columns of ``v`` so that
    ``a == v @ diag(w) @ v.T`` up to rounding.  Symmetry is required up
    to 1e-10 and enforced by averaging before reduction.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        return np.empty(0), np.empty((0, 0))
    if not np.allclose(a, a.T, atol=1e-10):
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    if a.shape[0] == 1:
        return a[0].copy(), np.ones((1, 1))
    d, e, q = _householder_tridiagonalize(a)
    _ql_implicit_shifts(d, e, q)
    order = np.argsort(d, kind="stable")
    return d[order], q[:, order]
