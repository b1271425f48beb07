"""Similarity graph construction over users and items.

From a binary interaction matrix R this module derives:

* the degree-normalized interaction matrix  S_ui = D_u^{-1/2} R D_i^{-1/2},
  whose entries weight each observed edge by the degrees of both endpoints
  (a random-walk reading: high-degree endpoints dilute the edge);
* the user-user and item-item similarities S_u = S_ui S_ui^T and
  S_i = S_ui^T S_ui (two-hop walk weights);
* the augmented graph A = [[S_u, S_ui], [S_ui^T, S_i]] over the union of
  user and item vertices;
* a per-user signal matrix [S_u | R] pairing each user's similarity row
  with their interaction row, plus the column-degree scaling used by the
  scoring pipeline.

Zero-degree users/items are annihilated (d^{-1/2} := 0 when d == 0) so
cold rows/columns stay identically zero instead of producing infinities.
For large user/item counts the Gram blocks are kept implicit and applied
as composed products instead of being materialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .sparse import InteractionMatrix, gram_left, gram_right, hconcat

__all__ = [
    "MATERIALIZE_LIMIT",
    "NormalizedSimilarity",
    "AugmentedGraph",
    "PersonalizedSignalMatrix",
    "build_normalized_interaction",
    "build_augmented_graph",
    "build_personalized_signal",
    "degree_scale",
]

# Above this many users (or items) the corresponding Gram block is kept
# implicit: at production scale S_u is nearly dense and materializing it
# is the dominant memory hazard.
MATERIALIZE_LIMIT = 20_000


def _inv_sqrt(degrees: np.ndarray) -> np.ndarray:
    """d^{-1/2} with the zero-degree convention 0^{-1/2} := 0."""
    out = np.zeros_like(degrees, dtype=np.float64)
    nz = degrees > 0
    out[nz] = 1.0 / np.sqrt(degrees[nz])
    return out


def degree_scale(degrees: np.ndarray, exponent: float) -> np.ndarray:
    """Columnwise scale factors d^exponent with 0^exponent := 0.

    The zero convention applies for every exponent (including 0), so a
    zero-degree column is zeroed both by the forward scaling and by the
    inverse scaling that undoes it, keeping such columns zero end to end.
    """
    out = np.zeros_like(degrees, dtype=np.float64)
    nz = degrees > 0
    out[nz] = degrees[nz] ** exponent
    return out


@dataclass
class NormalizedSimilarity:
    """Degree-normalized interaction matrix and the derived Gram blocks.

    ``user_sim`` / ``item_sim`` hold the materialized CSR blocks when the
    corresponding dimension is small enough, else None (implicit form:
    apply as ``s_ui @ (s_ui.T @ x)`` / ``s_ui.T @ (s_ui @ x)``).
    """

    s_ui: sp.csr_matrix
    user_sim: sp.csr_matrix | None
    item_sim: sp.csr_matrix | None
    user_degrees: np.ndarray
    item_degrees: np.ndarray
    _s_ui_t: sp.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        self._s_ui_t = self.s_ui.T.tocsr()

    @property
    def num_users(self) -> int:
        return self.s_ui.shape[0]

    @property
    def num_items(self) -> int:
        return self.s_ui.shape[1]

    @property
    def s_ui_t(self) -> sp.csr_matrix:
        return self._s_ui_t

    def user_sim_rows(self, users) -> np.ndarray:
        """Dense rows S_u[users, :], composed on the fly when implicit."""
        users = np.asarray(users, dtype=np.int64)
        if self.user_sim is not None:
            return self.user_sim[users].toarray()
        return (self.s_ui[users] @ self._s_ui_t).toarray()

    def user_sim_colsums(self) -> np.ndarray:
        """Column sums of S_u (equal to row sums by symmetry)."""
        if self.user_sim is not None:
            return np.asarray(self.user_sim.sum(axis=0)).ravel()
        ones = np.ones(self.num_users)
        return self.s_ui @ (self._s_ui_t @ ones)


def build_normalized_interaction(
    interactions: InteractionMatrix,
    materialize_limit: int = MATERIALIZE_LIMIT,
) -> NormalizedSimilarity:
    """Normalize R by endpoint degrees and derive the similarity blocks.

    S_ui[i, j] = R[i, j] / sqrt(d_i * d_j); zero-degree rows/columns map
    to all-zero rows/columns.  Raises ValueError on an interaction matrix
    with no interactions at all.
    """
    if interactions.nnz == 0:
        raise ValueError("no interactions")
    user_scale = _inv_sqrt(interactions.user_degrees)
    item_scale = _inv_sqrt(interactions.item_degrees)
    s_ui = sp.diags(user_scale) @ interactions.matrix @ sp.diags(item_scale)
    s_ui = sp.csr_matrix(s_ui)
    s_ui.sort_indices()
    m, n = s_ui.shape
    user_sim = gram_left(s_ui) if m <= materialize_limit else None
    item_sim = gram_right(s_ui) if n <= materialize_limit else None
    return NormalizedSimilarity(
        s_ui=s_ui,
        user_sim=user_sim,
        item_sim=item_sim,
        user_degrees=interactions.user_degrees.astype(np.float64),
        item_degrees=interactions.item_degrees.astype(np.float64),
    )


class AugmentedGraph:
    """Symmetric block operator A = [[S_u, S_ui], [S_ui^T, S_i]].

    Never materialized as one matrix; products are computed blockwise,
    falling back to composed Gram products when a diagonal block is
    implicit.
    """

    def __init__(self, sim: NormalizedSimilarity):
        self.sim = sim

    @property
    def num_users(self) -> int:
        return self.sim.num_users

    @property
    def num_items(self) -> int:
        return self.sim.num_items

    @property
    def dim(self) -> int:
        return self.sim.num_users + self.sim.num_items

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """A @ x for a length-(m+n) vector."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"expected vector of length {self.dim}, got {x.shape}")
        sim = self.sim
        m = sim.num_users
        u, v = x[:m], x[m:]
        if sim.user_sim is not None:
            top = sim.user_sim @ u
        else:
            top = sim.s_ui @ (sim.s_ui_t @ u)
        top = top + sim.s_ui @ v
        if sim.item_sim is not None:
            bottom = sim.item_sim @ v
        else:
            bottom = sim.s_ui_t @ (sim.s_ui @ v)
        bottom = sim.s_ui_t @ u + bottom
        return np.concatenate([top, bottom])

    def apply_right(self, x: np.ndarray) -> np.ndarray:
        """X @ A for dense X with m+n columns (rows are graph signals)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ValueError(
                f"expected a matrix with {self.dim} columns, got shape {x.shape}"
            )
        sim = self.sim
        m = sim.num_users
        xu, xi = x[:, :m], x[:, m:]
        xu_sui = xu @ sim.s_ui  # (b, n)
        if sim.user_sim is not None:
            left = xu @ sim.user_sim
        else:
            left = xu_sui @ sim.s_ui_t
        left = left + xi @ sim.s_ui_t
        if sim.item_sim is not None:
            right = xi @ sim.item_sim
        else:
            right = (xi @ sim.s_ui_t) @ sim.s_ui
        right = xu_sui + right
        return np.hstack([left, right])

    def toarray(self) -> np.ndarray:
        """Dense A; for diagnostics and small instances only."""
        sim = self.sim
        user_sim = (
            sim.user_sim if sim.user_sim is not None else gram_left(sim.s_ui)
        )
        item_sim = (
            sim.item_sim if sim.item_sim is not None else gram_right(sim.s_ui)
        )
        top = np.hstack([user_sim.toarray(), sim.s_ui.toarray()])
        bottom = np.hstack([sim.s_ui.T.toarray(), item_sim.toarray()])
        return np.vstack([top, bottom])


def build_augmented_graph(sim: NormalizedSimilarity) -> AugmentedGraph:
    """Wrap the similarity blocks as the (m+n)-dimensional graph operator."""
    return AugmentedGraph(sim)


@dataclass
class PersonalizedSignalMatrix:
    """Per-user graph signals [S_u | R] with column-degree scaling.

    ``signal`` is the materialized m x (m+n) CSR when the user block is
    materialized, else None; ``dense_rows`` serves both cases.
    ``col_degrees`` holds the column sums of [S_u | R] and ``beta`` the
    (non-positive) scaling exponent: popular columns are damped by
    d^beta before filtering and restored by d^{-beta} afterwards.
    """

    sim: NormalizedSimilarity
    interactions: InteractionMatrix
    beta: float
    col_degrees: np.ndarray
    signal: sp.csr_matrix | None

    @property
    def num_users(self) -> int:
        return self.sim.num_users

    @property
    def dim(self) -> int:
        return self.sim.num_users + self.sim.num_items

    def dense_rows(self, users) -> np.ndarray:
        """Dense signal rows [S_u[users] | R[users]], unscaled."""
        users = np.asarray(users, dtype=np.int64)
        if self.signal is not None:
            return self.signal[users].toarray()
        left = self.sim.user_sim_rows(users)
        right = self.interactions.matrix[users].toarray()
        return np.hstack([left, right])

    def forward_scale(self) -> np.ndarray:
        """Column factors d^beta (zero columns stay zero)."""
        return degree_scale(self.col_degrees, self.beta)

    def inverse_scale(self) -> np.ndarray:
        """Column factors d^{-beta} undoing ``forward_scale``."""
        return degree_scale(self.col_degrees, -self.beta)


def build_personalized_signal(
    sim: NormalizedSimilarity,
    interactions: InteractionMatrix,
    beta: float,
) -> PersonalizedSignalMatrix:
    """Concatenate user-similarity rows with interaction rows.

    The first m columns of the signal equal S_u, the last n columns equal
    the binary R.  ``beta`` must be <= 0 (0 disables the scaling).
    """
    if beta > 0:
        raise ValueError(f"beta must be <= 0, got {beta}")
    col_degrees = np.concatenate(
        [sim.user_sim_colsums(), sim.item_degrees.astype(np.float64)]
    )
    signal = None
    if sim.user_sim is not None:
        signal = hconcat(sim.user_sim, interactions.matrix)
    return PersonalizedSignalMatrix(
        sim=sim,
        interactions=interactions,
        beta=float(beta),
        col_degrees=col_degrees,
        signal=signal,
    )
