"""Spectral diarization: affinity refinement, eigen-gap k estimation,
K-means and the constrained (pseudo-label-seeded) K-means variant.

Two pipelines are exposed: `diarize_unsupervised` (spectral clustering
with eigen-gap k estimation) and `diarize_semisupervised` (same front end,
then constrained K-means with k = max(k_estimate, k_known)).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    EmbeddingSet,
    InvalidInput,
    PseudoLabeling,
    SpeakerTimeline,
    SubSegment,
    TimeInterval,
    Turn,
    TIME_EPS,
)

REFINE_STEPS = ("threshold", "symmetrize", "diffuse", "normalize")


@dataclass
class ClusterParams:
    threshold_percentile: float = 0.95
    threshold_factor: float = 0.01
    k_max: int = 100
    normalize_rows: bool = True
    max_iters: int = 300
    refine_steps: tuple[str, ...] = REFINE_STEPS
    subsegment_length: float = 1.0


@dataclass
class SpectralEmbedding:
    E: np.ndarray  # (n, k), column j is the eigenvector of the j-th largest eigenvalue
    eigenvalues: np.ndarray  # full spectrum, descending

    @property
    def k(self) -> int:
        return self.E.shape[1]


@dataclass
class ClusterResult:
    labels: np.ndarray  # (n,), values 1..k
    centroids: np.ndarray  # (k, dim)
    k: int
    k_tilde: int
    k_prime: int
    iterations: int


def cosine_affinity(embeddings: EmbeddingSet | np.ndarray) -> np.ndarray:
    X = embeddings.matrix if isinstance(embeddings, EmbeddingSet) else np.asarray(embeddings, float)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise InvalidInput("zero-norm embedding row")
    Xn = X / norms
    A = Xn @ Xn.T
    return (A + A.T) / 2.0


def refine(
    A: np.ndarray,
    threshold_percentile: float = 0.95,
    threshold_factor: float = 0.01,
    steps: Sequence[str] = REFINE_STEPS,
) -> np.ndarray:
    """Smooth and denoise an affinity matrix.

    In order: row-wise percentile thresholding (values below the row
    quantile are scaled by `threshold_factor`), elementwise-max
    symmetrization, diffusion (A @ A.T), and row-wise max normalization.
    Steps are individually toggleable for ablation.
    """
    if not (0 < threshold_percentile < 1):
        raise InvalidInput("threshold_percentile must be in (0, 1)")
    if not (0 <= threshold_factor <= 1):
        raise InvalidInput("threshold_factor must be in [0, 1]")
    A = np.array(A, dtype=np.float64, copy=True)
    for step in steps:
        if step == "threshold":
            q = np.quantile(A, threshold_percentile, axis=1, keepdims=True)
            A = np.where(A < q, A * threshold_factor, A)
        elif step == "symmetrize":
            A = np.maximum(A, A.T)
        elif step == "diffuse":
            A = A @ A.T
        elif step == "normalize":
            row_max = A.max(axis=1, keepdims=True)
            if np.any(row_max <= 0):
                raise InvalidInput("degenerate affinity: all-zero row after refinement")
            A = A / row_max
        else:
            raise InvalidInput(f"unknown refinement step {step!r}")
    return A


def spectral_embed(A: np.ndarray, k: int) -> SpectralEmbedding:
    """Top-k eigenvectors of the (symmetrized) refined affinity.

    Columns are ordered by descending eigenvalue with a deterministic sign
    convention: the first nonzero component of each eigenvector is
    positive.
    """
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if not (1 <= k <= n):
        raise InvalidInput(f"k={k} outside [1, {n}]")
    S = (A + A.T) / 2.0  # row-max normalization can leave slight asymmetry
    try:
        w, V = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(
            f"eigendecomposition failed: n={n}, "
            f"finite={np.isfinite(S).all()}, norm={np.linalg.norm(S):.3g}"
        ) from exc
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    for j in range(n):
        col = V[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        if nz.size and col[nz[0]] < 0:
            V[:, j] = -col
    return SpectralEmbedding(E=V[:, :k].copy(), eigenvalues=w)


def estimate_k(eigenvalues: Sequence[float], k_max: int) -> int:
    """Maximum eigen-gap estimate of the number of clusters.

    Returns argmax over 1 <= j <= k_max of eigenvalue[j] - eigenvalue[j+1]
    (descending order, 1-based); ties break to the smaller j.
    """
    w = np.asarray(eigenvalues, dtype=np.float64)
    if w.size < 2:
        raise InvalidInput("need at least 2 eigenvalues")
    if not (1 <= k_max < w.size):
        raise InvalidInput(f"k_max={k_max} outside [1, {w.size - 1}]")
    gaps = w[:k_max] - w[1 : k_max + 1]
    # ties (up to float noise) break to the smaller j
    best = gaps.max()
    tol = 1e-9 * max(1.0, abs(best))
    return int(np.argmax(gaps >= best - tol)) + 1


def _kmeans_pp_init(
    E: np.ndarray, k: int, rng: np.random.Generator, placed: Optional[np.ndarray] = None
) -> np.ndarray:
    """K-means++ D^2 sampling; conditions on already-placed centroids."""
    n = E.shape[0]
    centroids: list[np.ndarray] = [] if placed is None else [c for c in placed]
    need = k - len(centroids)
    if need <= 0:
        return np.asarray(centroids)[:k]
    if not centroids:
        centroids.append(E[int(rng.integers(n))].copy())
        need -= 1
    d2 = np.min(
        np.stack([np.sum((E - c) ** 2, axis=1) for c in centroids]), axis=0
    )
    for _ in range(need):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids.append(E[idx].copy())
        d2 = np.minimum(d2, np.sum((E - E[idx]) ** 2, axis=1))
    return np.asarray(centroids)


def _lloyd(
    E: np.ndarray,
    centroids: np.ndarray,
    fixed_labels: Optional[np.ndarray],
    max_iters: int,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Lloyd iterations; entries of fixed_labels > 0 never change cluster."""
    n, k = E.shape[0], centroids.shape[0]
    centroids = centroids.copy()
    labels = np.zeros(n, dtype=np.int64)
    sq_norms = np.sum(E**2, axis=1)
    iterations = 0
    for it in range(1, max_iters + 1):
        iterations = it
        d2 = sq_norms[:, None] - 2.0 * E @ centroids.T + np.sum(centroids**2, axis=1)
        new_labels = np.argmin(d2, axis=1) + 1
        if fixed_labels is not None:
            mask = fixed_labels > 0
            new_labels[mask] = fixed_labels[mask]
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        # M-step
        empty = []
        for j in range(1, k + 1):
            members = labels == j
            if members.any():
                centroids[j - 1] = E[members].mean(axis=0)
            else:
                empty.append(j)
        if empty:
            # re-seed each empty centroid at the point farthest from its
            # nearest centroid (deterministic)
            d2 = (
                sq_norms[:, None]
                - 2.0 * E @ centroids.T
                + np.sum(centroids**2, axis=1)
            )
            nearest = d2.min(axis=1)
            order = np.argsort(-nearest)
            for pos, j in enumerate(empty):
                centroids[j - 1] = E[order[pos % n]].copy()
    return labels, centroids, iterations


def kmeans(
    E: SpectralEmbedding | np.ndarray, k: int, seed: int, max_iters: int = 300
) -> ClusterResult:
    """Standard K-means (K-means++ init, Lloyd iterations), seeded."""
    X = E.E if isinstance(E, SpectralEmbedding) else np.asarray(E, float)
    n = X.shape[0]
    if k < 1:
        raise InvalidInput("k must be >= 1")
    if k > n:
        raise InvalidInput(f"k={k} exceeds n={n}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(X, k, rng)
    labels, centroids, iters = _lloyd(X, centroids, None, max_iters)
    return ClusterResult(
        labels=labels, centroids=centroids, k=k, k_tilde=k, k_prime=0, iterations=iters
    )


def constrained_kmeans(
    E: SpectralEmbedding | np.ndarray,
    pseudo: PseudoLabeling,
    k_tilde: int,
    seed: int,
    max_iters: int = 300,
) -> ClusterResult:
    """Pseudo-label-constrained K-means.

    k = max(k_tilde, k'); centroids 1..k' start as the means of the
    pseudo-labeled points, the rest come from K-means++ D^2 sampling
    conditioned on the placed centroids.  Pseudo-labeled points never
    change assignment; all k centroids are recomputed each M-step.
    """
    X = E.E if isinstance(E, SpectralEmbedding) else np.asarray(E, float)
    n = X.shape[0]
    if pseudo.n != n:
        raise InvalidInput(f"{pseudo.n} pseudo labels for {n} points")
    kp = pseudo.k_prime
    if kp == 0:
        return kmeans(X, k_tilde, seed, max_iters)
    k = max(k_tilde, kp)
    if k > n:
        raise InvalidInput(f"k={k} exceeds n={n}")
    seeded = np.stack([X[pseudo.labels == j].mean(axis=0) for j in range(1, kp + 1)])
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(X, k, rng, placed=seeded)
    labels, centroids, iters = _lloyd(X, centroids, pseudo.labels, max_iters)
    return ClusterResult(
        labels=labels, centroids=centroids, k=k, k_tilde=k_tilde, k_prime=kp,
        iterations=iters,
    )


def labels_to_timeline(
    labels: np.ndarray,
    subsegments: Sequence[SubSegment],
    names: Optional[dict[int, str]] = None,
) -> SpeakerTimeline:
    """Map per-sub-segment labels to turns, merging adjacent same-label
    sub-segments that touch in time."""
    def name_of(label: int) -> str:
        if names and label in names:
            return names[label]
        return f"SPK{label:02d}"

    turns: list[Turn] = []
    cur_label, cur_start, cur_end = None, 0.0, 0.0
    for seg, label in zip(subsegments, labels):
        label = int(label)
        if (
            cur_label == label
            and abs(seg.interval.start - cur_end) <= 1e-6
        ):
            cur_end = seg.interval.end
            continue
        if cur_label is not None:
            turns.append(Turn(TimeInterval(cur_start, cur_end), name_of(cur_label)))
        cur_label, cur_start, cur_end = label, seg.interval.start, seg.interval.end
    if cur_label is not None:
        turns.append(Turn(TimeInterval(cur_start, cur_end), name_of(cur_label)))
    return SpeakerTimeline(turns)


def _front_end(embeddings: EmbeddingSet, params: ClusterParams) -> SpectralEmbedding:
    A = cosine_affinity(embeddings)
    A = refine(
        A,
        threshold_percentile=params.threshold_percentile,
        threshold_factor=params.threshold_factor,
        steps=params.refine_steps,
    )
    return spectral_embed(A, k=A.shape[0])


def _effective_k_max(n: int, k_max: int) -> int:
    return max(1, min(k_max, n - 1))


def _slice_embedding(full: SpectralEmbedding, k: int, normalize_rows: bool) -> np.ndarray:
    E = full.E[:, :k].copy()
    if normalize_rows:
        norms = np.linalg.norm(E, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        E = E / norms
    return E


def diarize_unsupervised(
    embeddings: EmbeddingSet,
    params: ClusterParams = ClusterParams(),
    k_override: Optional[int] = None,
    seed: int = 0,
) -> tuple[SpeakerTimeline, ClusterResult]:
    """Spectral-clustering baseline; k from the eigen-gap unless overridden."""
    if embeddings.n < 2:
        raise InvalidInput("need at least 2 sub-segments")
    full = _front_end(embeddings, params)
    k_tilde = estimate_k(
        full.eigenvalues, _effective_k_max(embeddings.n, params.k_max)
    )
    k = k_override if k_override is not None else k_tilde
    if not (1 <= k <= embeddings.n):
        raise InvalidInput(f"cluster count k={k} outside [1, {embeddings.n}]")
    E = _slice_embedding(full, k, params.normalize_rows)
    result = kmeans(E, k, seed, params.max_iters)
    result.k_tilde = k_tilde
    timeline = labels_to_timeline(result.labels, embeddings.subsegments)
    return timeline, result


def diarize_semisupervised(
    embeddings: EmbeddingSet,
    pseudo: PseudoLabeling,
    params: ClusterParams = ClusterParams(),
    seed: int = 0,
) -> tuple[SpeakerTimeline, ClusterResult]:
    """Constrained-K-means diarization seeded by pseudo labels.

    With no pseudo labels at all this degrades exactly to
    `diarize_unsupervised` at the same seed.  Clusters 1..k' carry the
    pseudo-label character names; extra clusters get synthetic ids.
    """
    if embeddings.n < 2:
        raise InvalidInput("need at least 2 sub-segments")
    if pseudo.n != embeddings.n:
        raise InvalidInput("pseudo labeling does not match embedding count")
    full = _front_end(embeddings, params)
    k_tilde = estimate_k(
        full.eigenvalues, _effective_k_max(embeddings.n, params.k_max)
    )
    k = max(k_tilde, pseudo.k_prime)
    E = _slice_embedding(full, k, params.normalize_rows)
    result = constrained_kmeans(E, pseudo, k_tilde, seed, params.max_iters)
    names = None
    if pseudo.k_prime > 0:
        names = dict(pseudo.names)
        for j in range(pseudo.k_prime + 1, result.k + 1):
            names[j] = f"UNK{j:02d}"
    timeline = labels_to_timeline(result.labels, embeddings.subsegments, names)
    return timeline, result
