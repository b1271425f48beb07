"""End-to-end scoring pipeline and top-N ranking.

Three steps per batch of users:

1. pre-processing: take the personalized signal rows [S_u | R] and damp
   popular columns by d^beta;
2. graph convolution: apply the mixed-frequency filter
   (1 - phi) * U_k U_k^T  +  phi * A
   (ideal low-pass projector blended with one neighborhood-aggregation
   pass; the filter matrix itself is never materialized);
3. post-processing: undo the column scaling with d^{-beta} and keep the
   item columns as prediction scores.

Scores are computed in user batches so the m x (m+n) intermediate never
exists at full size; batches are independent and may run on a thread
pool, with results merged back in user order.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .graph import (
    AugmentedGraph,
    PersonalizedSignalMatrix,
    build_augmented_graph,
    build_normalized_interaction,
    build_personalized_signal,
)
from .sparse import InteractionMatrix
from .spectral import (
    DEFAULT_TOL,
    SpectralBasis,
    ideal_lowpass_apply,
    save_basis,
    truncated_eigenbasis,
    try_load_basis,
)

__all__ = [
    "FilterConfig",
    "PredictionMatrix",
    "RankedRecommendations",
    "PgspModel",
    "mixed_filter_apply",
    "run_pgsp",
    "rank_topn",
    "rank_rows",
    "rank_streaming",
    "write_recommendations_tsv",
]

DEFAULT_BATCH_ROWS = 1024


@dataclass(frozen=True)
class FilterConfig:
    """Hyperparameters of the scoring pipeline.

    k: rank of the ideal low-pass projector.
    phi: weight of the linear (neighborhood) filter, in [0, 1];
         0 = projector only, 1 = neighborhood aggregation only.
    beta: column-degree damping exponent, <= 0.
    top_n: list length for ranked recommendations.
    """

    k: int = 256
    phi: float = 0.3
    beta: float = -0.5
    top_n: int = 20

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.phi <= 1.0:
            raise ValueError(f"phi must be in [0, 1], got {self.phi}")
        if self.beta > 0:
            raise ValueError(f"beta must be <= 0, got {self.beta}")
        if self.top_n < 1:
            raise ValueError(f"top_n must be >= 1, got {self.top_n}")


@dataclass
class PredictionMatrix:
    """Dense user x item scores; ``masked`` records whether training
    interactions were already excluded."""

    scores: np.ndarray
    masked: bool = False


@dataclass
class RankedRecommendations:
    """Per-user ranked item lists (scores non-increasing, ties by index)."""

    items: list
    scores: list
    top_n: int

    def __len__(self):
        return len(self.items)


def mixed_filter_apply(
    signals: np.ndarray,
    basis: SpectralBasis,
    graph: AugmentedGraph,
    phi: float,
) -> np.ndarray:
    """(1 - phi) * signals @ U_k U_k^T  +  phi * signals @ A.

    Affine in phi; the endpoints reproduce the pure ideal / pure linear
    filters exactly.
    """
    if not 0.0 <= phi <= 1.0:
        raise ValueError(f"phi must be in [0, 1], got {phi}")
    signals = np.asarray(signals, dtype=np.float64)
    if signals.ndim != 2 or signals.shape[1] != graph.dim:
        raise ValueError(
            f"expected a matrix with {graph.dim} columns, got shape {signals.shape}"
        )
    if phi == 0.0:
        return ideal_lowpass_apply(basis, signals)
    if phi == 1.0:
        return graph.apply_right(signals)
    smooth = ideal_lowpass_apply(basis, signals)
    local = graph.apply_right(signals)
    return (1.0 - phi) * smooth + phi * local


class PgspModel:
    """Graph, signal and spectral basis bound together for scoring.

    Building the model is the entire "training": one pass to normalize
    the interactions, one truncated eigendecomposition, nothing learned.
    ``timings_ms`` records the wall-clock cost of each build stage.
    """

    def __init__(
        self,
        interactions: InteractionMatrix,
        config: FilterConfig,
        seed: int = 0,
        *,
        basis: SpectralBasis | None = None,
        cache_path=None,
        materialize_limit: int | None = None,
        tol: float = DEFAULT_TOL,
    ):
        self.interactions = interactions
        self.config = config
        self.seed = int(seed)
        self.timings_ms: dict = {}

        t0 = time.perf_counter()
        kwargs = {}
        if materialize_limit is not None:
            kwargs["materialize_limit"] = materialize_limit
        self.sim = build_normalized_interaction(interactions, **kwargs)
        self.graph = build_augmented_graph(self.sim)
        self.signal = build_personalized_signal(self.sim, interactions, config.beta)
        self.timings_ms["graph_build"] = (time.perf_counter() - t0) * 1000.0

        t0 = time.perf_counter()
        m, n = interactions.shape
        self.basis_cache_hit = False
        if basis is None and cache_path is not None:
            cached = try_load_basis(cache_path, m, n, config.k, self.seed, tol)
            if cached is not None:
                basis = cached
                self.basis_cache_hit = True
        if basis is None:
            basis = truncated_eigenbasis(self.graph, config.k, seed=self.seed, tol=tol)
            if cache_path is not None:
                save_basis(cache_path, basis)
        self.basis = basis
        self.timings_ms["eigensolve"] = (time.perf_counter() - t0) * 1000.0

        self._forward = self.signal.forward_scale()
        self._inverse = self.signal.inverse_scale()

    @property
    def num_users(self) -> int:
        return self.interactions.num_users

    @property
    def num_items(self) -> int:
        return self.interactions.num_items

    def score_batch(self, users, phi: float | None = None) -> np.ndarray:
        """Prediction scores for a batch of users, shape (len(users), n)."""
        if phi is None:
            phi = self.config.phi
        rows = self.signal.dense_rows(users)
        rows *= self._forward
        filtered = mixed_filter_apply(rows, self.basis, self.graph, phi)
        filtered *= self._inverse
        return filtered[:, self.num_users :]

    def predict_all(
        self,
        phi: float | None = None,
        batch_rows: int = DEFAULT_BATCH_ROWS,
        threads: int = 1,
    ) -> np.ndarray:
        """Full m x n score matrix, computed batchwise."""
        batches = _user_batches(self.num_users, batch_rows)
        parts = parallel_map(
            lambda users: self.score_batch(users, phi=phi), batches, threads
        )
        return np.vstack(parts)


def _user_batches(num_users: int, batch_rows: int):
    batch_rows = max(1, int(batch_rows))
    return [
        np.arange(start, min(start + batch_rows, num_users))
        for start in range(0, num_users, batch_rows)
    ]


def parallel_map(fn, batches, threads: int):
    """Apply ``fn`` over batches, preserving order.

    With threads > 1 the batches run on a thread pool (the heavy work is
    BLAS, which releases the GIL); results are merged in batch order, so
    the output is identical for any thread count.
    """
    if threads is None or threads <= 1 or len(batches) <= 1:
        return [fn(b) for b in batches]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, batches))


def run_pgsp(
    interactions: InteractionMatrix,
    config: FilterConfig,
    seed: int = 0,
    **model_kwargs,
) -> PredictionMatrix:
    """Build the model and materialize the full prediction matrix.

    Deterministic for a given seed.  Convenience path for small and
    moderate problems; at large scale use ``PgspModel.score_batch`` and
    stream.
    """
    model = PgspModel(interactions, config, seed=seed, **model_kwargs)
    return PredictionMatrix(scores=model.predict_all(), masked=False)


def rank_rows(
    scores: np.ndarray,
    train_items: list,
    top_n: int,
):
    """Rank one batch of score rows, excluding each user's training items.

    Returns (items, scores) lists; sorting is by descending score with
    ties broken by ascending item index (stable sort on the negated
    scores).  Users who trained on every item get empty lists.
    """
    scores = np.asarray(scores, dtype=np.float64)
    out_items = []
    out_scores = []
    for row, trained in zip(scores, train_items):
        masked = row.copy()
        trained = np.asarray(trained, dtype=np.int64)
        if trained.size:
            masked[trained] = -np.inf
        order = np.argsort(-masked, kind="stable")
        keep = min(top_n, masked.shape[0] - trained.size)
        top = order[:keep] if keep > 0 else order[:0]
        out_items.append(top.astype(np.int64))
        out_scores.append(row[top])
    return out_items, out_scores


def rank_topn(
    predictions: PredictionMatrix,
    train: InteractionMatrix,
    top_n: int,
) -> RankedRecommendations:
    """Per-user top-N lists over items not seen in training."""
    scores = predictions.scores
    if scores.shape != train.shape:
        raise ValueError(
            f"shape mismatch: scores {scores.shape} vs train {train.shape}"
        )
    csr = train.matrix
    train_items = [
        csr.indices[csr.indptr[u] : csr.indptr[u + 1]]
        for u in range(train.num_users)
    ]
    items, ranked_scores = rank_rows(scores, train_items, top_n)
    return RankedRecommendations(items=items, scores=ranked_scores, top_n=top_n)


def rank_streaming(
    model: "PgspModel",
    train: InteractionMatrix,
    top_n: int,
    batch_rows: int = DEFAULT_BATCH_ROWS,
    threads: int = 1,
    phi: float | None = None,
) -> RankedRecommendations:
    """Top-N lists for every user without keeping the full score matrix."""
    csr = train.matrix
    train_items = [
        csr.indices[csr.indptr[u] : csr.indptr[u + 1]]
        for u in range(train.num_users)
    ]
    batches = _user_batches(model.num_users, batch_rows)

    def work(users):
        scores = model.score_batch(users, phi=phi)
        return rank_rows(scores, [train_items[u] for u in users], top_n)

    items: list = []
    ranked_scores: list = []
    for batch_items, batch_scores in parallel_map(work, batches, threads):
        items.extend(batch_items)
        ranked_scores.extend(batch_scores)
    return RankedRecommendations(items=items, scores=ranked_scores, top_n=top_n)


def write_recommendations_tsv(recs: RankedRecommendations, fh) -> None:
    """One line per recommendation: ``user TAB item TAB rank TAB score``."""
    for user, (items, scores) in enumerate(zip(recs.items, recs.scores)):
        for rank, (item, score) in enumerate(zip(items, scores), start=1):
            fh.write(f"{user}\t{int(item)}\t{rank}\t{float(score)!r}\n")
