"""Sparse matrix primitives shared by the whole package.

Everything downstream (similarity graphs, spectral filters, the scoring
pipeline) is built from four kernels on CSR matrices: matrix-vector
products, the two Gram products ``P @ P.T`` / ``P.T @ P``, and horizontal
concatenation.  All kernels return canonical CSR (sorted column indices,
no duplicates, float64 data) so that floating-point reductions are
reproducible run to run.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.sparse as sp

__all__ = [
    "InteractionMatrix",
    "matvec",
    "gram_left",
    "gram_right",
    "gram_nnz_bound",
    "hconcat",
]


def _canonical(matrix) -> sp.csr_matrix:
    """Return ``matrix`` as canonical float64 CSR (deduped, sorted indices)."""
    out = sp.csr_matrix(matrix, dtype=np.float64)
    out.sum_duplicates()
    out.sort_indices()
    return out


class InteractionMatrix:
    """Binary user-item interaction matrix in CSR form.

    Stored values are exactly 1.0; duplicate (user, item) pairs collapse to
    a single entry (with a warning reporting how many were dropped).  Row
    and column degrees are the per-user / per-item interaction counts.
    """

    def __init__(self, matrix):
        csr = _canonical(matrix)
        data = csr.data
        if data.size and not np.all(data == 1.0):
            raise ValueError("interaction matrix entries must all be exactly 1")
        self._matrix = csr
        self._user_degrees = np.asarray(csr.sum(axis=1)).ravel()
        self._item_degrees = np.asarray(csr.sum(axis=0)).ravel()

    @classmethod
    def from_pairs(cls, pairs, num_users: int, num_items: int) -> "InteractionMatrix":
        """Build from an iterable of (user, item) index pairs.

        Duplicates are collapsed to a single interaction; out-of-range
        indices raise ValueError.
        """
        pairs = np.asarray(list(pairs), dtype=np.int64)
        if pairs.size == 0:
            rows = np.empty(0, dtype=np.int64)
            cols = np.empty(0, dtype=np.int64)
        else:
            rows, cols = pairs[:, 0], pairs[:, 1]
        if rows.size:
            if rows.min() < 0 or rows.max() >= num_users:
                raise ValueError("user index out of range")
            if cols.min() < 0 or cols.max() >= num_items:
                raise ValueError("item index out of range")
        coo = sp.coo_matrix(
            (np.ones(rows.size), (rows, cols)), shape=(num_users, num_items)
        )
        csr = coo.tocsr()
        csr.sum_duplicates()
        duplicates = rows.size - csr.nnz
        if duplicates:
            warnings.warn(
                f"collapsed {duplicates} duplicate interaction(s) to binary entries",
                stacklevel=2,
            )
        csr.data[:] = 1.0
        return cls(csr)

    @property
    def matrix(self) -> sp.csr_matrix:
        return self._matrix

    @property
    def num_users(self) -> int:
        return self._matrix.shape[0]

    @property
    def num_items(self) -> int:
        return self._matrix.shape[1]

    @property
    def shape(self):
        return self._matrix.shape

    @property
    def nnz(self) -> int:
        return self._matrix.nnz

    @property
    def user_degrees(self) -> np.ndarray:
        return self._user_degrees

    @property
    def item_degrees(self) -> np.ndarray:
        return self._item_degrees

    def toarray(self) -> np.ndarray:
        return self._matrix.toarray()

    def __repr__(self):
        m, n = self.shape
        return f"InteractionMatrix({m} users x {n} items, {self.nnz} interactions)"


def matvec(matrix, x: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product ``matrix @ x`` with dimension checks.

    Summation runs in row order over sorted column indices, so the result
    is deterministic for a given CSR layout.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a vector, got shape {x.shape}")
    if x.shape[0] != matrix.shape[1]:
        raise ValueError(
            f"dimension mismatch: matrix is {matrix.shape}, vector has length {x.shape[0]}"
        )
    return matrix @ x


def gram_left(matrix) -> sp.csr_matrix:
    """Materialized left Gram product ``P @ P.T`` as canonical CSR.

    The result is symmetric and positive semidefinite; only row pairs that
    share at least one column produce an entry.  For large, dense-ish
    outputs prefer the implicit composed form (two matrix-free products);
    ``gram_nnz_bound`` gives the cheap density estimate.
    """
    csr = _canonical(matrix)
    return _canonical(csr @ csr.T)


def gram_right(matrix) -> sp.csr_matrix:
    """Materialized right Gram product ``P.T @ P`` as canonical CSR."""
    csr = _canonical(matrix)
    return _canonical(csr.T @ csr)


def gram_nnz_bound(matrix, side: str = "left") -> int:
    """Cheap upper bound on the nnz of a Gram product, without computing it.

    Every pair of rows sharing a column contributes at most one entry per
    shared column, so summing squared column (or row) counts bounds the
    output nnz from above.  Used to decide whether materializing the Gram
    product is affordable (e.g. estimate <= 25% of the dense size).
    """
    csr = _canonical(matrix)
    if side == "left":
        counts = np.diff(csr.tocsc().indptr)
        cap = csr.shape[0] ** 2
    elif side == "right":
        counts = np.diff(csr.indptr)
        cap = csr.shape[1] ** 2
    else:
        raise ValueError("side must be 'left' or 'right'")
    return int(min(np.sum(counts.astype(np.int64) ** 2), cap))


def hconcat(left, right) -> sp.csr_matrix:
    """Concatenate two sparse matrices horizontally: ``[left | right]``.

    Column indices of ``right`` are shifted by ``left.shape[1]``.  Raises
    on row-count mismatch; a zero-column ``right`` is a neutral element.
    """
    if left.shape[0] != right.shape[0]:
        raise ValueError(
            f"row-count mismatch: {left.shape[0]} vs {right.shape[0]}"
        )
    return _canonical(sp.hstack([_canonical(left), _canonical(right)], format="csr"))
