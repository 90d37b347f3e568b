"""Spectral clustering of patient geolocations.

Pipeline: affinity construction (RBF or k-nearest-neighbor kernel on the
road-corrected distance matrix) → symmetric normalized Laplacian →
smallest-eigenvector embedding with row normalization → k-means on the
embedding rows.  Every step is deterministic given a seed; ties break by
lowest index throughout.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
import scipy.sparse.linalg

from .geo import DEFAULT_ROAD_COEFF, DistanceMatrix, GeoPoint, build_distance_matrix
from .ingest import Discipline

log = logging.getLogger(__name__)


class InsufficientPatients(Exception):
    """Fewer patients than requested clusters."""


class Kernel(str, Enum):
    RBF = "RBF"
    KNEAREST = "KNearest"


class EigStrategy(str, Enum):
    DENSE = "Dense"
    ITERATIVE = "Iterative"


@dataclass(frozen=True)
class SpectralParams:
    """Hyperparameters for one spectral-clustering run."""

    kernel: Kernel = Kernel.RBF
    psi: float = 1.0
    knn_k: int = 10
    embed_dim: int = 2
    kmeans_n_init: int = 10
    eig_strategy: EigStrategy = EigStrategy.ITERATIVE
    eig_max_iter: int = 100
    eig_tol: float = 1e-8

    def __post_init__(self) -> None:
        if self.psi <= 0:
            raise ValueError(f"psi must be positive, got {self.psi}")
        if self.knn_k < 1:
            raise ValueError(f"knn_k must be positive, got {self.knn_k}")
        if self.embed_dim < 1:
            raise ValueError(f"embed_dim must be positive, got {self.embed_dim}")
        if self.kmeans_n_init < 1:
            raise ValueError(f"kmeans_n_init must be positive, got {self.kmeans_n_init}")
        if self.eig_max_iter < 1:
            raise ValueError(f"eig_max_iter must be positive, got {self.eig_max_iter}")
        if self.eig_tol <= 0:
            raise ValueError(f"eig_tol must be positive, got {self.eig_tol}")

    @classmethod
    def defaults(cls, C: int, n: int) -> "SpectralParams":
        """Stock settings: RBF kernel with unit coefficient, embedding width
        equal to the cluster count, 10 k-means restarts, iterative
        eigensolver capped at 100 iterations, k-NN fan-out 10·C clamped."""
        return cls(
            kernel=Kernel.RBF,
            psi=1.0,
            knn_k=max(1, min(10 * C, n - 1)),
            embed_dim=C,
            kmeans_n_init=10,
            eig_strategy=EigStrategy.ITERATIVE,
            eig_max_iter=100,
            eig_tol=1e-8,
        )

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.value,
            "psi": self.psi,
            "knn_k": self.knn_k,
            "embed_dim": self.embed_dim,
            "kmeans_n_init": self.kmeans_n_init,
            "eig_strategy": self.eig_strategy.value,
            "eig_max_iter": self.eig_max_iter,
            "eig_tol": self.eig_tol,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SpectralParams":
        return cls(
            kernel=Kernel(raw["kernel"]),
            psi=float(raw["psi"]),
            knn_k=int(raw["knn_k"]),
            embed_dim=int(raw["embed_dim"]),
            kmeans_n_init=int(raw["kmeans_n_init"]),
            eig_strategy=EigStrategy(raw["eig_strategy"]),
            eig_max_iter=int(raw["eig_max_iter"]),
            eig_tol=float(raw["eig_tol"]),
        )


@dataclass(frozen=True)
class ClusterAssignment:
    """Patient-to-cluster labeling for one discipline."""

    discipline: Discipline
    C: int
    labels: tuple[int, ...]
    patient_ids: tuple[str, ...]
    params: SpectralParams
    seed: int
    centroid_of: dict[int, str] | None = None

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.patient_ids):
            raise ValueError("labels and patient_ids length mismatch")
        if any(not 0 <= lab < self.C for lab in self.labels):
            raise ValueError("cluster label outside [0, C)")
        if set(self.labels) != set(range(self.C)):
            raise ValueError("every cluster index in [0, C) must be non-empty")

    @property
    def members(self) -> list[list[str]]:
        """Per-cluster patient id lists, indexed by cluster."""
        out: list[list[str]] = [[] for _ in range(self.C)]
        for pid, lab in zip(self.patient_ids, self.labels):
            out[lab].append(pid)
        return out

    def to_dict(self) -> dict:
        return {
            "discipline": self.discipline.value,
            "C": self.C,
            "labels": list(self.labels),
            "params": self.params.to_dict(),
            "seed": self.seed,
        }


def rbf_affinity(D: DistanceMatrix, psi: float) -> np.ndarray:
    """Gaussian kernel k(i,j) = exp(−psi · d(i,j))."""
    if psi <= 0:
        raise ValueError(f"psi must be positive, got {psi}")
    return np.exp(-psi * D.values)


def knn_affinity(D: DistanceMatrix, k: int) -> np.ndarray:
    """Binary k-nearest-neighbor adjacency, OR-symmetrized, zero diagonal.

    Neighbor ties at the cut distance break toward the lower index.
    """
    n = len(D)
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n={n}, got {k}")
    A = np.zeros((n, n))
    for i in range(n):
        order = [j for j in np.argsort(D.values[i], kind="stable") if j != i]
        A[i, order[:k]] = 1.0
    A = np.maximum(A, A.T)
    np.fill_diagonal(A, 0.0)
    return A


def normalized_laplacian(A: np.ndarray) -> np.ndarray:
    """Symmetric normalized Laplacian L = I − Δ^(−1/2) A Δ^(−1/2).

    Isolated vertices (zero degree) keep identity rows.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"affinity must be square, got shape {A.shape}")
    if np.max(np.abs(A - A.T)) > 1e-9:
        raise ValueError("affinity matrix is not symmetric")
    if np.any(A < 0):
        raise ValueError("affinity entries must be non-negative")
    degrees = A.sum(axis=1)
    inv_sqrt = np.where(degrees > 0, 1.0 / np.sqrt(np.where(degrees > 0, degrees, 1.0)), 0.0)
    L = np.eye(len(A)) - (inv_sqrt[:, None] * A * inv_sqrt[None, :])
    return L


def _effectively_disconnected(L: np.ndarray, tau: float) -> bool:
    """Whether the coupling graph of ``L`` splits at tolerance ``tau``.

    Couplings below ``tau`` are invisible to an iterative eigensolver, so a
    graph that falls apart without them has a (numerically) degenerate
    smallest eigenvalue — one zero per effective component.  Single-vector
    Lanczos silently returns an incomplete basis for such an eigenspace,
    which would scramble the embedding; those instances need the exact
    dense solve.
    """
    n = len(L)
    adjacent = np.abs(L) > tau
    np.fill_diagonal(adjacent, False)
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        for j in np.flatnonzero(adjacent[stack.pop()]):
            if not seen[j]:
                seen[j] = True
                stack.append(j)
    return not bool(seen.all())


def spectral_embed(
    L: np.ndarray,
    embed_dim: int,
    eig_strategy: EigStrategy = EigStrategy.ITERATIVE,
    eig_max_iter: int = 100,
    eig_tol: float = 1e-8,
) -> np.ndarray:
    """Embedding from the eigenvectors of the smallest ``embed_dim``
    eigenvalues, with rows normalized to unit length (zero rows kept zero).

    The iterative strategy falls back to the dense path with a warning when
    it does not converge, and also when the coupling graph is effectively
    disconnected at the solver tolerance (a degenerate spectrum that
    single-vector Lanczos cannot resolve).  Eigenvector signs are
    canonicalized so both strategies yield the same embedding up to
    numerical noise.
    """
    n = len(L)
    dim = max(1, min(embed_dim, n - 1)) if n > 1 else 1
    if dim != embed_dim:
        log.debug("embed_dim %d clamped to %d for n=%d", embed_dim, dim, n)

    vectors: np.ndarray | None = None
    if eig_strategy is EigStrategy.ITERATIVE and dim < n:
        if _effectively_disconnected(L, eig_tol):
            log.warning(
                "coupling graph is effectively disconnected (degenerate spectrum); using dense solve"
            )
        else:
            v0 = np.full(n, 1.0 / np.sqrt(n))
            try:
                vals, vecs = scipy.sparse.linalg.eigsh(
                    L, k=dim, which="SA", maxiter=eig_max_iter, tol=eig_tol, v0=v0
                )
                order = np.argsort(vals, kind="stable")
                vectors = vecs[:, order]
            except scipy.sparse.linalg.ArpackNoConvergence:
                log.warning("iterative eigensolver did not converge in %d iterations; using dense solve", eig_max_iter)
    if vectors is None:
        vals, vecs = np.linalg.eigh(L)
        vectors = vecs[:, :dim]

    # Fix each column's sign by its largest-magnitude entry (lowest index on ties).
    for col in range(vectors.shape[1]):
        v = vectors[:, col]
        pivot = int(np.argmax(np.abs(v)))
        if v[pivot] < 0:
            vectors[:, col] = -v

    norms = np.linalg.norm(vectors, axis=1)
    safe = np.where(norms > 1e-12, norms, 1.0)
    return vectors / safe[:, None]


@dataclass(frozen=True)
class KMeansResult:
    labels: tuple[int, ...]
    centroids: np.ndarray
    inertia: float


def kmeans(embedding: np.ndarray, C: int, n_init: int, seed: int) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding, best of ``n_init`` restarts.

    Restart r draws from an independent stream derived from (seed, r), so
    restarts may run in any order; inertia ties break by restart index.
    An empty cluster is re-seeded at the point farthest from its assigned
    centroid, up to 5 times, before erroring out.
    """
    X = np.asarray(embedding, dtype=float)
    n = len(X)
    if not 1 <= C <= n:
        raise ValueError(f"C must satisfy 1 <= C <= n={n}, got {C}")
    best: tuple[float, int, np.ndarray, np.ndarray] | None = None
    for restart in range(n_init):
        rng = np.random.default_rng([seed, restart])
        labels, centroids, inertia = _lloyd(X, C, rng)
        if best is None or inertia < best[0] - 1e-12:
            best = (inertia, restart, labels, centroids)
    assert best is not None
    return KMeansResult(tuple(int(v) for v in best[2]), best[3], float(best[0]))


def _plusplus_init(X: np.ndarray, C: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    centroids = np.empty((C, X.shape[1]))
    centroids[0] = X[int(rng.integers(n))]
    closest = np.sum((X - centroids[0]) ** 2, axis=1)
    for k in range(1, C):
        total = closest.sum()
        if total <= 1e-18:
            centroids[k] = X[int(rng.integers(n))]
            continue
        centroids[k] = X[int(rng.choice(n, p=closest / total))]
        closest = np.minimum(closest, np.sum((X - centroids[k]) ** 2, axis=1))
    return centroids


def _fix_empty(X: np.ndarray, C: int, labels: np.ndarray, centroids: np.ndarray, dists: np.ndarray) -> None:
    """Re-seed each empty cluster at the point farthest from its centroid."""
    for attempt in range(6):
        empty = [k for k in range(C) if not np.any(labels == k)]
        if not empty:
            return
        if attempt == 5:
            raise RuntimeError("could not resolve empty cluster after 5 re-seedings")
        assigned = dists[np.arange(len(X)), labels].copy()
        for k in empty:
            far = int(np.argmax(assigned))
            centroids[k] = X[far]
            labels[far] = k
            assigned[far] = -1.0


def _lloyd(X: np.ndarray, C: int, rng: np.random.Generator, max_iter: int = 300):
    centroids = _plusplus_init(X, C, rng)
    labels = np.zeros(len(X), dtype=int)
    for _ in range(max_iter):
        dists = np.sum((X[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        labels = np.argmin(dists, axis=1)
        _fix_empty(X, C, labels, centroids, dists)
        new_centroids = np.stack([X[labels == k].mean(axis=0) for k in range(C)])
        if np.max(np.abs(new_centroids - centroids)) < 1e-12:
            centroids = new_centroids
            break
        centroids = new_centroids
    dists = np.sum((X[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    labels = np.argmin(dists, axis=1)
    _fix_empty(X, C, labels, centroids, dists)
    inertia = float(np.sum(np.sum((X - centroids[labels]) ** 2, axis=1)))
    return labels, centroids, inertia


def spectral_cluster(
    patients: Sequence[GeoPoint],
    C: int,
    params: SpectralParams,
    seed: int,
    discipline: Discipline = Discipline.RN,
    patient_ids: Sequence[str] | None = None,
    distance: DistanceMatrix | None = None,
    road_coeff: float = DEFAULT_ROAD_COEFF,
) -> ClusterAssignment:
    """Cluster patient locations into exactly C groups.

    A precomputed ``distance`` matrix (over the same patients, same order)
    skips the geometry step; otherwise corrected distances are built from
    the points directly.
    """
    n = len(patients)
    if C < 1:
        raise ValueError(f"C must be positive, got {C}")
    if n < C:
        raise InsufficientPatients(f"{n} patients cannot form {C} clusters")
    ids = tuple(patient_ids) if patient_ids is not None else tuple(str(i) for i in range(n))
    if len(ids) != n:
        raise ValueError("patient_ids length mismatch")
    if distance is None:
        distance = build_distance_matrix(list(zip(ids, patients)), road_coeff)
    elif len(distance) != n:
        raise ValueError("distance matrix does not match patient count")

    if params.kernel is Kernel.RBF:
        A = rbf_affinity(distance, params.psi)
    else:
        k = min(params.knn_k, n - 1)
        if k < 1:
            A = np.zeros((n, n))
        else:
            A = knn_affinity(distance, k)
    L = normalized_laplacian(A)
    embedding = spectral_embed(L, params.embed_dim, params.eig_strategy, params.eig_max_iter, params.eig_tol)
    labels = kmeans(embedding, C, params.kmeans_n_init, seed).labels
    return ClusterAssignment(
        discipline=discipline,
        C=C,
        labels=labels,
        patient_ids=ids,
        params=params,
        seed=seed,
    )
