"""Dense linear-algebra primitives on the orthogonal group.

Everything the estimators need that is not a matching step lives here:
nuclear norm and its maximizer (the orthogonal Procrustes rotation), the
two one-parameter families of 2x2 orthogonal matrices, the coordinate
sign-flip subgroup, Haar sampling, and a finite covering net of O(2).

All functions are pure; randomness always enters through an explicit
``numpy.random.Generator``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

SIGN_FLIP_MAX_DIM = 20
ORTHOGONALITY_TOL = 1e-9


def _as_square(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def nuclear_norm(m: np.ndarray) -> float:
    """Sum of singular values of a square matrix.

    Equals ``max_{Q in O(d)} <m, Q>``, the dual form used by every
    factor-alignment objective in this package.
    """
    m = _as_square(m)
    return float(np.linalg.svd(m, compute_uv=False).sum())


def procrustes_rotation(m: np.ndarray) -> np.ndarray:
    """Orthogonal maximizer of ``<m, Q>`` over O(d).

    Returns ``U @ V.T`` from the SVD ``m = U S V.T``. When ``m`` is rank
    deficient the maximizer is not unique; any SVD completion is returned,
    and the attained objective still equals ``nuclear_norm(m)``.
    """
    m = _as_square(m)
    u, _, vt = np.linalg.svd(m)
    return u @ vt


def rotation2d(theta: float, reflect: bool = False) -> np.ndarray:
    """2x2 rotation by ``theta``, or the reflection with mirror angle ``theta/2``."""
    if not np.isfinite(theta):
        raise ValueError("theta must be finite")
    c, s = np.cos(theta), np.sin(theta)
    if reflect:
        return np.array([[c, s], [s, -c]])
    return np.array([[c, -s], [s, c]])


def sign_flip_group(d: int) -> list[np.ndarray]:
    """All ``2**d`` diagonal +/-1 matrices, in lexicographic sign order.

    The first element is the identity (all +1), the last is ``-I``.
    Capped at ``d <= 20``: the enumeration is exponential by nature.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if d > SIGN_FLIP_MAX_DIM:
        raise ValueError(
            f"sign-flip enumeration capped at d={SIGN_FLIP_MAX_DIM}, got d={d}"
        )
    group = []
    for bits in range(2**d):
        signs = np.array([1.0 if (bits >> (d - 1 - i)) & 1 == 0 else -1.0 for i in range(d)])
        group.append(np.diag(signs))
    return group


def haar_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix.

    QR of a square standard-Gaussian matrix with the R diagonal signs
    fixed positive, which makes the factorization unique and the Q factor
    exactly Haar.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    g = rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))


def net_O2(delta: float) -> list[np.ndarray]:
    """Finite subset of O(2) within operator-norm ``delta`` of every element.

    Built as a uniform angle grid over rotations plus the same grid over
    reflections. Two elements of either family at angles ``t, t'`` are at
    operator distance ``2*sin(|t - t'|/2)``, so angle spacing
    ``2*arcsin(delta/2)`` suffices (and in fact over-covers by 2x, since
    the worst case is half a spacing away).
    """
    if not (0.0 < delta < 2.0):
        raise ValueError(f"delta must be in (0, 2), got {delta}")
    spacing = 2.0 * np.arcsin(delta / 2.0)
    count = int(np.ceil(2.0 * np.pi / spacing))
    angles = 2.0 * np.pi * np.arange(count) / count
    net = [rotation2d(t, reflect=False) for t in angles]
    net += [rotation2d(t, reflect=True) for t in angles]
    return net


def is_orthogonal(q: np.ndarray, tol: float = ORTHOGONALITY_TOL) -> bool:
    """Check ``Q.T @ Q = I`` (Frobenius) and ``|det Q| = 1`` within ``tol``."""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        return False
    d = q.shape[0]
    gram_err = np.linalg.norm(q.T @ q - np.eye(d))
    det_err = abs(abs(np.linalg.det(q)) - 1.0)
    return bool(gram_err <= tol and det_err <= tol)


def orthogonal_phases(q: np.ndarray) -> np.ndarray:
    """Eigen-phases of an orthogonal matrix, sorted ascending in [-pi, pi].

    The eigenvalues of ``Q in O(d)`` lie on the unit circle; this returns
    their angles, which is what the moment-generating-function formulas
    consume.
    """
    q = _as_square(q, "Q")
    return np.sort(np.angle(np.linalg.eigvals(q)))


def random_matrix(d: int, rng: np.random.Generator) -> np.ndarray:
    """Square standard-Gaussian matrix (test helper)."""
    return rng.standard_normal((d, d))
