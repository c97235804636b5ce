"""Representative few-shot selection by k-means++ seeding plus Lloyd refinement.

Centers are seeded with probability proportional to squared distance from
the nearest chosen center, refined by alternating assignment/mean updates,
then mapped back onto the nearest real corpus members so every selected
few-shot is an actual pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import FewShotPair
from .embedding import DgcnModel, EmbeddingCache, embed_pair
from .graphs import FlatGraphSource


class SamplingError(ValueError):
    pass


@dataclass
class PointSet:
    """Embedded corpus: row n of ``vectors`` belongs to pair ``indices[n]``."""

    vectors: np.ndarray          # (N, d)
    indices: list[int]

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 1:
            raise SamplingError("point set needs at least one point")
        if len(self.indices) != self.vectors.shape[0]:
            raise SamplingError("one pair index required per vector")

    def __len__(self) -> int:
        return self.vectors.shape[0]


@dataclass
class ClusterResult:
    centers: np.ndarray                   # (K, d)
    assignments: np.ndarray               # (N,) cluster index per point
    representative_indices: list[int] | None = None
    iterations: int = 0


def _nearest(vectors: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index of the nearest center per point (lowest index wins ties)."""
    d2 = ((vectors[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1), d2


def kmeanspp_seed(points: PointSet, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seed k centers: first uniform, the rest drawn with prob D^2 / sum D^2.

    D[n] tracks the distance from point n to its nearest chosen center.
    Points coinciding with a chosen center have zero draw probability, so
    with k = N every distinct point becomes a center. If all residual
    distances are zero (duplicate-heavy data) the next center is drawn
    uniformly from the not-yet-chosen points.
    """
    n = len(points)
    if k < 1 or k > n:
        raise SamplingError(f"k must be in [1, {n}], got {k}")
    chosen = [int(rng.integers(0, n))]
    dist = np.full(n, np.inf)
    for _ in range(1, k):
        last = points.vectors[chosen[-1]]
        dist = np.minimum(dist, np.linalg.norm(points.vectors - last, axis=1))
        weights = dist**2
        total = weights.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=weights / total))
        else:
            remaining = [i for i in range(n) if i not in set(chosen)]
            idx = int(remaining[rng.integers(0, len(remaining))])
        chosen.append(idx)
    return points.vectors[chosen].copy()


def lloyd_refine(
    points: PointSet,
    centers: np.ndarray,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> ClusterResult:
    """Alternate nearest-center assignment and centroid updates.

    Stops when the largest center displacement drops below ``tol`` or after
    ``max_iter`` sweeps. A cluster that loses all its points keeps its
    previous center.
    """
    centers = np.asarray(centers, dtype=np.float64).copy()
    if centers.ndim != 2 or centers.shape[0] < 1:
        raise SamplingError("need at least one center")
    if tol <= 0:
        raise SamplingError("tol must be positive")
    assignments, _ = _nearest(points.vectors, centers)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        new_centers = centers.copy()
        for c in range(centers.shape[0]):
            members = points.vectors[assignments == c]
            if len(members):
                new_centers[c] = members.mean(axis=0)
        shift = np.linalg.norm(new_centers - centers, axis=1).max()
        centers = new_centers
        assignments, _ = _nearest(points.vectors, centers)
        if shift < tol:
            break
    return ClusterResult(centers=centers, assignments=assignments, iterations=iterations)


def deembed(centers: np.ndarray, points: PointSet) -> list[int]:
    """Map each center to the pair index of its nearest point.

    Representatives are kept distinct: when two centers land nearest to the
    same point, the later center takes its next-nearest unused point.
    """
    centers = np.asarray(centers, dtype=np.float64)
    if centers.shape[0] > len(points):
        raise SamplingError("more centers than points to de-embed onto")
    used: set[int] = set()
    representatives: list[int] = []
    for center in centers:
        order = np.argsort(np.linalg.norm(points.vectors - center, axis=1), kind="stable")
        pick = next(int(i) for i in order if int(i) not in used)
        used.add(pick)
        representatives.append(points.indices[pick])
    return representatives


def embed_corpus(
    corpus: list[FewShotPair],
    model: DgcnModel,
    graphs: FlatGraphSource | None = None,
    cache: EmbeddingCache | None = None,
) -> PointSet:
    vectors = []
    for pair in corpus:
        try:
            vectors.append(embed_pair(pair, model, graphs=graphs, cache=cache).values)
        except Exception as exc:
            raise SamplingError(f"pair {pair.pair_id}: {exc}") from exc
    return PointSet(vectors=np.array(vectors), indices=[p.index for p in corpus])


def select_fewshots(
    corpus: list[FewShotPair],
    k: int,
    model: DgcnModel,
    rng: np.random.Generator,
    graphs: FlatGraphSource | None = None,
    cache: EmbeddingCache | None = None,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> list[FewShotPair]:
    """Pick k representative pairs, returned in cluster-index order."""
    if not 1 <= k <= len(corpus):
        raise SamplingError(f"k must be in [1, {len(corpus)}], got {k}")
    points = embed_corpus(corpus, model, graphs=graphs, cache=cache)
    centers = kmeanspp_seed(points, k, rng)
    refined = lloyd_refine(points, centers, tol=tol, max_iter=max_iter)
    representatives = deembed(refined.centers, points)
    by_index = {pair.index: pair for pair in corpus}
    return [by_index[idx] for idx in representatives]
