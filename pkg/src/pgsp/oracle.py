"""Dense reference implementation of the whole pipeline.

Everything here is the obvious textbook computation on dense arrays:
explicit degree scaling, explicit block matrix, a full in-repo symmetric
eigendecomposition (see ``dense_eig``), and the filter applied as plain
matrix products.  It exists to generate expected values and to check the
fast path on small instances; it shares no code with the sparse/ARPACK
route.  Hard-capped at m + n <= 200.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dense_eig import symmetric_eig
from .pipeline import FilterConfig
from .sparse import InteractionMatrix

__all__ = ["SIZE_CAP", "DenseModel", "oracle_run"]

SIZE_CAP = 200


@dataclass
class DenseModel:
    """All pipeline intermediates of one dense run."""

    interactions: np.ndarray        # R, m x n binary
    s_ui: np.ndarray                # normalized interactions
    user_sim: np.ndarray            # S_u
    item_sim: np.ndarray            # S_i
    augmented: np.ndarray           # A, (m+n) x (m+n)
    eigenvalues: np.ndarray         # of A, descending
    eigenvectors: np.ndarray        # columns matching eigenvalues
    signal: np.ndarray              # [S_u | R]
    col_degrees: np.ndarray         # column sums of the signal
    filtered: np.ndarray            # signal after scaling + filtering
    predictions: np.ndarray         # m x n scores

    def intermediates_json(self) -> str:
        """All intermediates as JSON (golden-file dumps for tests)."""
        payload = {
            name: getattr(self, name).tolist()
            for name in (
                "interactions",
                "s_ui",
                "user_sim",
                "item_sim",
                "augmented",
                "eigenvalues",
                "eigenvectors",
                "signal",
                "col_degrees",
                "filtered",
                "predictions",
            )
        }
        return json.dumps(payload)


def _scale_vector(degrees, exponent):
    out = np.zeros_like(degrees, dtype=np.float64)
    nz = degrees > 0
    out[nz] = degrees[nz] ** exponent
    return out


def oracle_run(interactions: InteractionMatrix, config: FilterConfig) -> DenseModel:
    """Run the full pipeline densely and expose every intermediate."""
    m, n = interactions.shape
    if m + n > SIZE_CAP:
        raise ValueError(f"oracle capped at m + n <= {SIZE_CAP}, got {m + n}")
    if interactions.nnz == 0:
        raise ValueError("no interactions")

    r = interactions.toarray()
    user_deg = r.sum(axis=1)
    item_deg = r.sum(axis=0)
    s_ui = _scale_vector(user_deg, -0.5)[:, None] * r * _scale_vector(item_deg, -0.5)[None, :]
    user_sim = s_ui @ s_ui.T
    item_sim = s_ui.T @ s_ui
    augmented = np.block([[user_sim, s_ui], [s_ui.T, item_sim]])

    values, vectors = symmetric_eig(augmented)
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]

    signal = np.hstack([user_sim, r])
    col_degrees = signal.sum(axis=0)
    forward = _scale_vector(col_degrees, config.beta)
    inverse = _scale_vector(col_degrees, -config.beta)

    u_k = vectors[:, : config.k]
    projector = u_k @ u_k.T
    filt = (1.0 - config.phi) * projector + config.phi * augmented

    scaled = signal * forward
    filtered = scaled @ filt
    predictions = (filtered * inverse)[:, m:]

    return DenseModel(
        interactions=r,
        s_ui=s_ui,
        user_sim=user_sim,
        item_sim=item_sim,
        augmented=augmented,
        eigenvalues=values,
        eigenvectors=vectors,
        signal=signal,
        col_degrees=col_degrees,
        filtered=filtered,
        predictions=predictions,
    )
