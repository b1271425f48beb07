"""Spectral basis of the augmented graph and low-pass filtering.

The ideal low-pass filter is the projector U_k U_k^T onto the k smoothest
eigenvectors of L = I - A, i.e. the k largest eigenvalues of A.  Rather
than running an eigensolver on the (m+n)-dimensional A, the basis is
assembled from singular triplets of the m x n block S_ui:

    if S_ui v = sigma u with ||u|| = ||v|| = 1, then
        A (u;  v)/sqrt(2) = (sigma^2 + sigma) (u;  v)/sqrt(2)
        A (u; -v)/sqrt(2) = (sigma^2 - sigma) (u; -v)/sqrt(2)

Since sigma >= 0, the top-k eigenvectors of A come from the k largest
singular triplets.  The identity follows from the block structure of A
(S_u = S_ui S_ui^T, S_i = S_ui^T S_ui) and is verified against a dense
eigendecomposition by the test suite.

Large problems use implicitly restarted Lanczos bidiagonalization
(ARPACK via ``scipy.sparse.linalg.svds``) with a seeded start vector;
small or near-full requests fall back to a dense SVD, which also covers
k above the rank of S_ui by completing the basis from the + / - families
and the null spaces.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.linalg import svd as dense_svd
from scipy.sparse.linalg import ArpackNoConvergence, svds

from .graph import AugmentedGraph

__all__ = [
    "SpectralBasis",
    "SpectralDiagnostics",
    "ConvergenceError",
    "truncated_eigenbasis",
    "ideal_lowpass_apply",
    "total_variation",
    "diagnostics",
    "eigenpair_residuals",
    "save_basis",
    "load_basis",
    "try_load_basis",
]

DEFAULT_TOL = 1e-8

# Below this inner dimension ARPACK buys nothing; use the dense route.
_DENSE_CUTOFF = 16

_CACHE_MAGIC = b"PGSPEIG1"
_CACHE_HEADER = struct.Struct("<qqqqd")  # m, n, k, seed, tol


class ConvergenceError(RuntimeError):
    """Eigensolver did not converge within the iteration cap.

    Carries the residual norms achieved by the converged part of the
    basis, if any.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals if residuals is not None else np.empty(0)


@dataclass(frozen=True)
class SpectralBasis:
    """Top-k eigenpairs of the augmented graph operator A.

    ``vectors`` is (m+n) x k with orthonormal columns; ``eigenvalues``
    holds the matching eigenvalues of A in non-increasing order (the
    eigenvalues of L = I - A are ``1 - eigenvalues``, non-decreasing).
    """

    vectors: np.ndarray
    eigenvalues: np.ndarray
    num_users: int
    num_items: int
    seed: int
    tol: float

    @property
    def k(self) -> int:
        return self.vectors.shape[1]

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def laplacian_eigenvalues(self) -> np.ndarray:
        return 1.0 - self.eigenvalues


@dataclass(frozen=True)
class SpectralDiagnostics:
    """Smoothness measures of one graph signal."""

    total_variation: float
    energy: float
    rayleigh: float


def _assemble(u: np.ndarray, s: np.ndarray, v: np.ndarray):
    """Eigenpairs of A with eigenvalue sigma^2 + sigma from triplets of S_ui.

    ``u``: (m, r), ``v``: (n, r), columns paired with ``s``.
    """
    vectors = np.vstack([u, v]) / np.sqrt(2.0)
    return vectors, s * s + s


def truncated_eigenbasis(
    graph: AugmentedGraph,
    k: int,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
) -> SpectralBasis:
    """Top-k spectral basis of A, deterministic for a given seed.

    ``k`` may be anything from 1 to m+n; requests at or above the inner
    dimension of S_ui are served by the dense route, which extends the
    assembled basis with the sigma^2 - sigma family and null-space
    vectors (all eigenvalue <= 0, so the ordering is unaffected).
    """
    m, n = graph.num_users, graph.num_items
    dim = m + n
    if not 1 <= k <= dim:
        raise ValueError(f"k must be in [1, {dim}], got {k}")
    p = min(m, n)
    if k < p - 1 and p > _DENSE_CUTOFF:
        vectors, values = _arpack_basis(graph, k, seed, tol)
    else:
        vectors, values = _dense_basis(graph, k)
    order = np.argsort(-values, kind="stable")
    return SpectralBasis(
        vectors=np.ascontiguousarray(vectors[:, order]),
        eigenvalues=values[order],
        num_users=m,
        num_items=n,
        seed=int(seed),
        tol=float(tol),
    )


def _arpack_basis(graph: AugmentedGraph, k: int, seed: int, tol: float):
    s_ui = graph.sim.s_ui
    v0 = np.random.default_rng(seed).uniform(-1.0, 1.0, min(s_ui.shape))
    try:
        u, s, vt = svds(
            s_ui,
            k=k,
            which="LM",
            v0=v0,
            tol=tol,
            maxiter=30 * k,
            solver="arpack",
        )
    except ArpackNoConvergence as exc:
        residuals = _partial_residuals(graph, exc)
        raise ConvergenceError(
            f"eigensolver did not converge within {30 * k} restarts "
            f"({len(residuals)} converged pair(s))",
            residuals=residuals,
        ) from exc
    return _assemble(u, s, vt.T)


def _partial_residuals(graph: AugmentedGraph, exc: ArpackNoConvergence):
    values = np.atleast_1d(np.asarray(exc.eigenvalues, dtype=np.float64))
    vectors = np.atleast_2d(np.asarray(exc.eigenvectors, dtype=np.float64))
    if values.size == 0 or vectors.size == 0:
        return np.empty(0)
    # ARPACK reports eigenpairs of the Gram operator (sigma^2, v or u);
    # report Gram residuals directly.
    s_ui = graph.sim.s_ui
    gram_dim = vectors.shape[0]
    residuals = []
    for i in range(values.size):
        x = vectors[:, i]
        if gram_dim == s_ui.shape[1]:
            gx = s_ui.T @ (s_ui @ x)
        else:
            gx = s_ui @ (s_ui.T @ x)
        residuals.append(np.linalg.norm(gx - values[i] * x))
    return np.asarray(residuals)


def _dense_basis(graph: AugmentedGraph, k: int):
    s_ui = graph.sim.s_ui.toarray()
    m, n = s_ui.shape
    u, s, vt = dense_svd(s_ui, full_matrices=True)
    p = min(m, n)
    v = vt.T
    plus_vec, plus_val = _assemble(u[:, :p], s, v[:, :p])
    if k <= p:
        return plus_vec[:, :k], plus_val[:k]
    minus_vec = np.vstack([u[:, :p], -v[:, :p]]) / np.sqrt(2.0)
    minus_val = s * s - s
    blocks = [plus_vec, minus_vec]
    values = [plus_val, minus_val]
    if m > p:  # left vectors beyond the rank: (u; 0), eigenvalue 0
        extra = np.vstack([u[:, p:], np.zeros((n, m - p))])
        blocks.append(extra)
        values.append(np.zeros(m - p))
    if n > p:  # right vectors beyond the rank: (0; v), eigenvalue 0
        extra = np.vstack([np.zeros((m, n - p)), v[:, p:]])
        blocks.append(extra)
        values.append(np.zeros(n - p))
    vectors = np.hstack(blocks)
    vals = np.concatenate(values)
    order = np.argsort(-vals, kind="stable")[:k]
    return vectors[:, order], vals[order]


def ideal_lowpass_apply(basis: SpectralBasis, signals: np.ndarray) -> np.ndarray:
    """Project signal rows onto the basis span: signals @ U_k @ U_k^T.

    Two skinny dense products; the (m+n)^2 projector itself is never
    formed.
    """
    signals = np.asarray(signals, dtype=np.float64)
    squeeze = signals.ndim == 1
    if squeeze:
        signals = signals[None, :]
    if signals.shape[1] != basis.dim:
        raise ValueError(
            f"expected {basis.dim} columns, got shape {signals.shape}"
        )
    out = (signals @ basis.vectors) @ basis.vectors.T
    return out[0] if squeeze else out


def total_variation(graph: AugmentedGraph, x: np.ndarray) -> float:
    """x^T (I - A) x: small for signals that vary little across edges."""
    x = np.asarray(x, dtype=np.float64)
    return float(x @ x - x @ graph.matvec(x))


def diagnostics(graph: AugmentedGraph, x: np.ndarray) -> SpectralDiagnostics:
    """Total variation, energy and Rayleigh quotient of a signal.

    Raises ValueError on the zero signal, whose Rayleigh quotient is
    undefined (its total variation is 0; use ``total_variation`` for
    that case).
    """
    x = np.asarray(x, dtype=np.float64)
    energy = float(x @ x)
    if energy == 0.0:
        raise ValueError("rayleigh quotient undefined for the zero signal")
    tv = total_variation(graph, x)
    return SpectralDiagnostics(
        total_variation=tv, energy=energy, rayleigh=tv / energy
    )


def eigenpair_residuals(basis: SpectralBasis, graph: AugmentedGraph) -> np.ndarray:
    """Residual norms ||A u_i - lambda_i u_i|| for every basis column."""
    residuals = np.empty(basis.k)
    for i in range(basis.k):
        u = basis.vectors[:, i]
        residuals[i] = np.linalg.norm(graph.matvec(u) - basis.eigenvalues[i] * u)
    return residuals


def save_basis(path, basis: SpectralBasis) -> None:
    """Write the basis to a binary cache file.

    Layout: magic, then (m, n, k, seed, tol) as little-endian int64/float64,
    then U_k in column-major float64, then the eigenvalues.
    """
    header = _CACHE_HEADER.pack(
        basis.num_users, basis.num_items, basis.k, basis.seed, basis.tol
    )
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(header)
        fh.write(np.asfortranarray(basis.vectors).astype("<f8").tobytes(order="F"))
        fh.write(basis.eigenvalues.astype("<f8").tobytes())


def load_basis(path) -> SpectralBasis:
    """Read a basis cache file written by ``save_basis``."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_CACHE_MAGIC))
        if magic != _CACHE_MAGIC:
            raise ValueError(f"{path}: not a spectral basis cache file")
        m, n, k, seed, tol = _CACHE_HEADER.unpack(fh.read(_CACHE_HEADER.size))
        dim = m + n
        payload = fh.read(dim * k * 8)
        if len(payload) != dim * k * 8:
            raise ValueError(f"{path}: truncated basis payload")
        vectors = np.frombuffer(payload, dtype="<f8").reshape((dim, k), order="F")
        tail = fh.read(k * 8)
        if len(tail) != k * 8:
            raise ValueError(f"{path}: truncated eigenvalue payload")
        eigenvalues = np.frombuffer(tail, dtype="<f8")
    return SpectralBasis(
        vectors=np.ascontiguousarray(vectors),
        eigenvalues=eigenvalues.copy(),
        num_users=m,
        num_items=n,
        seed=seed,
        tol=tol,
    )


def try_load_basis(path, m: int, n: int, k: int, seed: int, tol: float):
    """Load a cached basis if its header matches, else None.

    A stale or mismatching cache (different shape, k, seed or tolerance)
    forces recomputation rather than silently serving wrong vectors.
    """
    try:
        basis = load_basis(path)
    except (OSError, ValueError):
        return None
    if (basis.num_users, basis.num_items, basis.k, basis.seed) != (m, n, k, seed):
        return None
    if basis.tol != tol:
        return None
    return basis
