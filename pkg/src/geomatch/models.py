"""Ground-truth instance generation and the three observation maps.

An :class:`Instance` bundles two point clouds related by a hidden
permutation and additive Gaussian noise, ``Y = P* X + sigma * Z``. An
:class:`Observation` is what an estimator may look at: the raw clouds
(linear assignment model), the Gram pair ``(X X^T, Y Y^T)`` (dot-product
model), or the squared-distance pair (distance model).

Row convention, fixed globally: ``(P X)`` has row ``i`` equal to row
``pi(i)`` of ``X``, i.e. the permutation matrix satisfies
``P[i, pi(i)] = 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MODELS = ("linear_assignment", "dot_product", "distance")

PSD_EIGENVALUE_TOL = -1e-8
MIN_COVARIANCE_EIGENVALUE = 1e-6


class Permutation:
    """A bijection on {0..n-1} stored as the image array ``mapping``.

    ``mapping[i]`` is the image of ``i``. Under the global row convention,
    ``perm.apply(X)`` returns the matrix whose row ``i`` is ``X[perm(i)]``.
    """

    __slots__ = ("mapping",)

    def __init__(self, mapping: Sequence[int] | np.ndarray):
        arr = np.asarray(mapping, dtype=np.int64)
        if arr.ndim != 1:
            raise ValueError("permutation mapping must be one-dimensional")
        n = arr.shape[0]
        seen = np.zeros(n, dtype=bool)
        if n and (arr.min() < 0 or arr.max() >= n):
            raise ValueError("permutation images must lie in {0..n-1}")
        seen[arr] = True
        if not seen.all():
            raise ValueError("permutation mapping is not a bijection")
        arr.setflags(write=False)
        self.mapping = arr

    # -- constructors ------------------------------------------------

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n, dtype=np.int64))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "Permutation":
        return cls(rng.permutation(n))

    @classmethod
    def transposition(cls, n: int, i: int, j: int) -> "Permutation":
        m = np.arange(n, dtype=np.int64)
        m[i], m[j] = m[j], m[i]
        return cls(m)

    # -- basics ------------------------------------------------------

    def __len__(self) -> int:
        return int(self.mapping.shape[0])

    def __call__(self, i: int) -> int:
        return int(self.mapping[i])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Permutation):
            return NotImplemented
        return np.array_equal(self.mapping, other.mapping)

    def __hash__(self) -> int:
        return hash(self.mapping.tobytes())

    def __repr__(self) -> str:
        return f"Permutation({self.mapping.tolist()})"

    # -- group operations ----------------------------------------------

    def compose(self, other: "Permutation") -> "Permutation":
        """Return ``self o other``: ``i -> self(other(i))``."""
        if len(self) != len(other):
            raise ValueError("length mismatch in composition")
        return Permutation(self.mapping[other.mapping])

    def inverse(self) -> "Permutation":
        inv = np.empty_like(self.mapping)
        inv[self.mapping] = np.arange(len(self), dtype=np.int64)
        return Permutation(inv)

    def matrix(self) -> np.ndarray:
        """Dense permutation matrix P with ``P[i, self(i)] = 1``."""
        return np.eye(len(self))[self.mapping]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Rows of ``x`` reordered so row ``i`` becomes ``x[self(i)]``."""
        return np.asarray(x)[self.mapping]

    # -- metrics and structure -----------------------------------------

    def hamming(self, other: "Permutation") -> int:
        if len(self) != len(other):
            raise ValueError("length mismatch in Hamming distance")
        return int(np.count_nonzero(self.mapping != other.mapping))

    def cycles(self, min_length: int = 1) -> list[tuple[int, ...]]:
        """Cycles as tuples, each starting at its smallest element."""
        n = len(self)
        seen = np.zeros(n, dtype=bool)
        out: list[tuple[int, ...]] = []
        for start in range(n):
            if seen[start]:
                continue
            cyc = [start]
            seen[start] = True
            j = int(self.mapping[start])
            while j != start:
                cyc.append(j)
                seen[j] = True
                j = int(self.mapping[j])
            if len(cyc) >= min_length:
                out.append(tuple(cyc))
        return out

    def cycle_type(self) -> dict[int, int]:
        """Number of k-cycles for each occurring length k."""
        counts: dict[int, int] = {}
        for cyc in self.cycles():
            counts[len(cyc)] = counts.get(len(cyc), 0) + 1
        return counts


@dataclass
class Instance:
    """Ground-truth bundle for one draw of the generative model."""

    x: np.ndarray
    y: np.ndarray
    pi_star: Permutation
    sigma: float
    covariance: np.ndarray | None = None
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass
class Observation:
    """What an estimator is allowed to see, tagged by model.

    ``left`` is always the X-side payload and ``right`` the Y-side one.
    ``dim`` records the latent dimension; pairwise payloads are n x n and
    would otherwise not reveal it.
    """

    model: str
    left: np.ndarray
    right: np.ndarray
    dim: int

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"unknown model tag {self.model!r}, expected one of {MODELS}")


def _validate_covariance(covariance: np.ndarray, d: int) -> np.ndarray:
    cov = np.asarray(covariance, dtype=np.float64)
    if cov.shape != (d, d):
        raise ValueError(f"covariance must be {d}x{d}, got {cov.shape}")
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise ValueError("covariance must be symmetric")
    min_eig = float(np.linalg.eigvalsh(cov).min())
    if min_eig <= MIN_COVARIANCE_EIGENVALUE:
        raise ValueError(
            f"covariance must be positive definite with min eigenvalue > "
            f"{MIN_COVARIANCE_EIGENVALUE}, got {min_eig:.3e}"
        )
    return cov


def sample_instance(
    n: int,
    d: int,
    sigma: float,
    covariance: np.ndarray | None = None,
    rng: np.random.Generator | int | None = None,
) -> Instance:
    """Draw one instance: X rows iid N(0, Sigma), pi* uniform, Y = P* X + sigma Z.

    Passing an integer ``rng`` seeds a fresh generator and records the seed
    on the instance, which makes the draw bit-reproducible. The draw order
    (X, then pi*, then Z) is part of the reproducibility contract: for a
    fixed seed, instances at different noise levels share X, pi* and the
    noise directions Z, and differ only in the scaling of Z.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    seed = None
    if rng is None:
        rng = np.random.default_rng()
    elif isinstance(rng, (int, np.integer)):
        seed = int(rng)
        rng = np.random.default_rng(seed)

    cov = None
    chol = None
    if covariance is not None:
        cov = _validate_covariance(covariance, d)
        chol = np.linalg.cholesky(cov)

    x = rng.standard_normal((n, d))
    if chol is not None:
        x = x @ chol.T
    pi_star = Permutation.random(n, rng)
    z = rng.standard_normal((n, d))
    y = pi_star.apply(x) + sigma * z
    return Instance(x=x, y=y, pi_star=pi_star, sigma=float(sigma), covariance=cov, seed=seed)


def observe(inst: Instance, model: str) -> Observation:
    """Map an instance to the payload pair an estimator may see."""
    if model == "linear_assignment":
        return Observation(model, inst.x.copy(), inst.y.copy(), inst.d)
    if model == "dot_product":
        a = inst.x @ inst.x.T
        b = inst.y @ inst.y.T
        return Observation(model, _symmetrize(a), _symmetrize(b), inst.d)
    if model == "distance":
        return Observation(model, _sq_distances(inst.x), _sq_distances(inst.y), inst.d)
    raise ValueError(f"unknown model tag {model!r}, expected one of {MODELS}")


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return (m + m.T) / 2.0


def _sq_distances(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d, 0.0, out=d)
    d = _symmetrize(d)
    np.fill_diagonal(d, 0.0)
    return d


def double_center(dist: np.ndarray) -> np.ndarray:
    """Map squared distances to the centered Gram matrix, -1/2 (I-F) D (I-F).

    ``F = 11^T / n``. If ``D`` came from points ``X``, the result equals
    ``Xc @ Xc.T`` for the row-centered cloud ``Xc``, and annihilates the
    all-ones vector.
    """
    dist = np.asarray(dist, dtype=np.float64)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise ValueError(f"distance matrix must be square, got {dist.shape}")
    if not np.allclose(dist, dist.T, atol=1e-9):
        raise ValueError("distance matrix must be symmetric")
    if not np.allclose(np.diag(dist), 0.0, atol=1e-9):
        raise ValueError("distance matrix must have zero diagonal")
    row_mean = dist.mean(axis=1, keepdims=True)
    col_mean = dist.mean(axis=0, keepdims=True)
    grand = dist.mean()
    centered = -0.5 * (dist - row_mean - col_mean + grand)
    return _symmetrize(centered)


def top_eigenpairs(a: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-d eigenpairs of a symmetric matrix, eigenvalues descending.

    Column sign convention: the entry of largest magnitude in each
    eigenvector is made positive, so repeated runs (and both clouds of a
    noiseless pair) produce comparable bases up to genuine sign ambiguity,
    which the sign-enumerating estimators then resolve.
    """
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError(f"matrix must be square, got {a.shape}")
    if d > n:
        raise ValueError(f"target rank {d} exceeds matrix size {n}")
    vals, vecs = np.linalg.eigh(a)
    order = np.argsort(vals)[::-1][:d]
    vals = vals[order]
    vecs = vecs[:, order]
    for k in range(d):
        col = vecs[:, k]
        if col[np.argmax(np.abs(col))] < 0:
            vecs[:, k] = -col
    return vals, vecs


def factorize(a: np.ndarray, d: int) -> np.ndarray:
    """Rank-d factor ``M = U_d diag(sqrt(lambda_d))`` of a PSD matrix.

    ``M @ M.T`` is the best rank-d approximation of ``a``. Eigenvalues
    below the PSD tolerance raise; small numerical negatives are clipped
    to zero so the square root stays real.
    """
    vals, vecs = top_eigenpairs(a, d)
    if vals.min(initial=0.0) < PSD_EIGENVALUE_TOL:
        raise ValueError(
            f"matrix is not PSD within tolerance: top-{d} eigenvalue "
            f"{vals.min():.3e} < {PSD_EIGENVALUE_TOL}"
        )
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


# -- serialization ----------------------------------------------------


def instance_to_json(inst: Instance) -> str:
    """Serialize an instance to a reproducibility-bundle JSON document."""
    doc = {
        "n": inst.n,
        "d": inst.d,
        "sigma": inst.sigma,
        "seed": inst.seed,
        "covariance": None if inst.covariance is None else inst.covariance.tolist(),
        "X": inst.x.tolist(),
        "Y": inst.y.tolist(),
        "pi_star": inst.pi_star.mapping.tolist(),
    }
    return json.dumps(doc)


def instance_from_json(text: str) -> Instance:
    doc = json.loads(text)
    x = np.asarray(doc["X"], dtype=np.float64)
    y = np.asarray(doc["Y"], dtype=np.float64)
    if x.shape != (doc["n"], doc["d"]) or y.shape != x.shape:
        raise ValueError("instance document has inconsistent shapes")
    cov = doc.get("covariance")
    return Instance(
        x=x,
        y=y,
        pi_star=Permutation(doc["pi_star"]),
        sigma=float(doc["sigma"]),
        covariance=None if cov is None else np.asarray(cov, dtype=np.float64),
        seed=doc.get("seed"),
    )
