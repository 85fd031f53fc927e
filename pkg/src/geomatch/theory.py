"""Computable theory objects: orbit decompositions, MGF closed forms, nets.

These functions exist to be cross-checked against each other and against
Monte-Carlo estimates; the test suite treats them as oracles for the
estimator package. All products over cycles are accumulated in log-space,
since the per-cycle factors vanish numerically long before n gets large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from geomatch import linalg
from geomatch.models import Instance, Permutation


# -- likelihood orbit decomposition ------------------------------------


def loglik_diff(inst: Instance, pi: Permutation) -> float:
    """Log-likelihood difference between ``pi`` and the ground truth.

    Equals ``<P X - P* X, Y> / sigma^2``; zero when ``pi`` equals the truth.
    """
    if inst.sigma <= 0:
        raise ValueError("log-likelihood differences need sigma > 0")
    if len(pi) != inst.n:
        raise ValueError("permutation length does not match the instance")
    diff = pi.apply(inst.x) - inst.pi_star.apply(inst.x)
    return float(np.sum(diff * inst.y)) / inst.sigma**2


def orbit_decomposition(pi_star: Permutation, pi: Permutation) -> list[tuple[int, ...]]:
    """Orbits (length >= 2) of the relative permutation ``pi_star^{-1} o pi``.

    Consecutive orbit elements satisfy ``i_{k+1} = pi_star^{-1}(pi(i_k))``,
    which is exactly the indexing that makes the per-orbit increments sum
    to the total log-likelihood difference.
    """
    relative = pi_star.inverse().compose(pi)
    return relative.cycles(min_length=2)


def delta_orbit(inst: Instance, orbit: Sequence[int]) -> float:
    """Likelihood increment of one orbit: sum of <X_{pi*(next)} - X_{pi*(cur)}, Y_cur>."""
    idx = np.asarray(orbit, dtype=np.int64)
    if idx.ndim != 1 or idx.size < 2:
        raise ValueError("an orbit needs at least two vertices")
    if len(np.unique(idx)) != idx.size:
        raise ValueError("orbit vertices must be distinct")
    if idx.min() < 0 or idx.max() >= inst.n:
        raise ValueError("orbit vertices out of range")
    w = inst.pi_star.apply(inst.x)
    nxt = np.roll(idx, -1)
    return float(np.sum((w[nxt] - w[idx]) * inst.y[idx]))


def augmenting_2orbits(inst: Instance) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """All augmenting transposition orbits, plus a vertex-disjoint subset.

    A pair (i, j) is augmenting when swapping the two matches does not
    decrease the likelihood. The disjoint list is extracted greedily in
    index order; a maximal (not maximum) independent collection is all the
    qualitative checks need.
    """
    if inst.n < 2:
        raise ValueError("need at least two points")
    w = inst.pi_star.apply(inst.x)
    cross = inst.y @ w.T  # cross[i, j] = <Y_i, X_{pi*(j)}>
    diag = np.diag(cross)
    delta = cross + cross.T - diag[:, None] - diag[None, :]
    iu, ju = np.triu_indices(inst.n, k=1)
    mask = delta[iu, ju] >= 0.0
    pairs = [(int(i), int(j)) for i, j in zip(iu[mask], ju[mask])]
    used = np.zeros(inst.n, dtype=bool)
    disjoint: list[tuple[int, int]] = []
    for i, j in pairs:
        if not used[i] and not used[j]:
            disjoint.append((i, j))
            used[i] = used[j] = True
    return pairs, disjoint


# -- moment generating functions ---------------------------------------


def _validate_cycle_type(cycle_type: Mapping[int, int]) -> dict[int, int]:
    clean: dict[int, int] = {}
    for k, count in cycle_type.items():
        k = int(k)
        count = int(count)
        if k < 1:
            raise ValueError(f"cycle length must be >= 1, got {k}")
        if count < 0:
            raise ValueError(f"cycle count must be >= 0, got {count}")
        if count:
            clean[k] = count
    if not clean:
        raise ValueError("cycle type is empty")
    return clean


def log_mgf_closed_form(
    cycle_type: Mapping[int, int], thetas: Sequence[float], sigma: float
) -> float:
    """Log of the alignment MGF from cycle type and eigen-phases.

    The MGF of ``exp(-||X - P X Q||_F^2 / (32 sigma^2))`` over a standard
    Gaussian cloud factorizes over the cycles of P, and each length-k
    factor depends on Q only through ``cos(k theta_l)``. Writing
    ``p = sqrt(1 + 4 sigma^2) + 2 sigma`` (whose reciprocal is the
    conjugate root), the factor is

        a_k = (4 sigma)^{k d} * prod_l [p^{2k} + p^{-2k} - 2 cos(k theta_l)]^{-1/2}.
    """
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    counts = _validate_cycle_type(cycle_type)
    th = np.asarray(thetas, dtype=np.float64)
    if th.ndim != 1 or th.size < 1:
        raise ValueError("thetas must be a non-empty vector of phases")
    d = th.size
    log_p = math.log(math.sqrt(1.0 + 4.0 * sigma**2) + 2.0 * sigma)
    log_4sigma = math.log(4.0 * sigma)
    total = 0.0
    for k, count in counts.items():
        alpha = 2.0 * k * log_p
        # log(e^a + e^-a - 2cos(k th)) = a + log1p(e^{-2a} - 2 cos(k th) e^{-a})
        inner = np.log1p(np.exp(-2.0 * alpha) - 2.0 * np.cos(k * th) * np.exp(-alpha))
        log_ak = k * d * log_4sigma - 0.5 * float(np.sum(alpha + inner))
        total += count * log_ak
    return total


def mgf_closed_form(
    cycle_type: Mapping[int, int], thetas: Sequence[float], sigma: float
) -> float:
    """The alignment MGF itself; underflows to 0.0 for large instances by design."""
    return math.exp(log_mgf_closed_form(cycle_type, thetas, sigma))


def mgf_monte_carlo(
    n: int,
    d: int,
    pi: Permutation,
    q: np.ndarray,
    sigma: float,
    samples: int,
    rng: np.random.Generator,
    center: bool = False,
) -> float:
    """Empirical mean of ``exp(-||X - P X Q||_F^2 / (32 sigma^2))``.

    With ``center=True`` the cloud is row-centered first, which is the
    distance-model variant of the same integral.
    """
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    if samples < 1000:
        raise ValueError("use at least 1e3 samples")
    if len(pi) != n:
        raise ValueError("permutation length must equal n")
    t = 1.0 / (32.0 * sigma**2)
    total = 0.0
    batch = max(1, min(samples, 200_000 // max(1, n * d)))
    done = 0
    while done < samples:
        take = min(batch, samples - done)
        x = rng.standard_normal((take, n, d))
        if center:
            x = x - x.mean(axis=1, keepdims=True)
        moved = x[:, pi.mapping, :] @ q
        sq = np.sum((x - moved) ** 2, axis=(1, 2))
        total += float(np.exp(-t * sq).sum())
        done += take
    return total / samples


def mgf_distance_correction(thetas: Sequence[float], sigma: float) -> float:
    """Multiplier relating centered-cloud and raw-cloud MGFs.

    The centered MGF equals the raw closed form times
    ``prod_l (1 + (2 - 2 cos theta_l) / (16 sigma^2))^{1/2}``, exactly and
    for every permutation: centering deletes one unit eigenvalue direction
    per phase.
    """
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    th = np.asarray(thetas, dtype=np.float64)
    factors = 1.0 + (2.0 - 2.0 * np.cos(th)) / (16.0 * sigma**2)
    return float(np.sqrt(np.prod(factors)))


# -- net lemma and thresholds -------------------------------------------


@dataclass
class NetLemmaReport:
    lhs: float
    rhs: float
    holds: bool


def check_net_lemma(m: np.ndarray, delta: float) -> NetLemmaReport:
    """Evaluate both sides of the quadratic net bound for one 2x2 matrix.

    lhs is the best net inner product, rhs is ``(1 - delta^2/2)`` times the
    nuclear norm; the report says whether lhs >= rhs within 1e-12.
    """
    net = linalg.net_O2(delta)
    m = np.asarray(m, dtype=np.float64)
    lhs = max(float(np.sum(m * q)) for q in net)
    rhs = (1.0 - delta**2 / 2.0) * linalg.nuclear_norm(m)
    return NetLemmaReport(lhs=lhs, rhs=rhs, holds=bool(lhs >= rhs - 1e-12))


@dataclass
class ThresholdReport:
    """Noise thresholds and necessary-condition statistics at (n, d, sigma)."""

    perfect_threshold: float
    almost_threshold: float
    mi_almost_lhs: float
    exact_nec_lhs: float


def thresholds(n: int, d: int, sigma: float, epsilon: float = 0.1) -> ThresholdReport:
    """Recovery thresholds plus the two necessary-condition left-hand sides.

    ``mi_almost_lhs`` is the mutual-information bound statistic at error
    fraction ``epsilon``: nonnegative whenever almost-perfect recovery at
    that error fraction is possible. ``exact_nec_lhs`` is the analogous
    statistic for perfect recovery (diverges when recovery is possible).
    """
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    log_snr = math.log1p(sigma**-2)
    mi_almost = 0.5 * d * log_snr - (1.0 - epsilon) * math.log(n) + 1.0 + math.log(n + 1) / n
    exact_nec = 0.25 * d * log_snr - math.log(n) + math.log(d)
    return ThresholdReport(
        perfect_threshold=float(n ** (-2.0 / d)),
        almost_threshold=float(n ** (-1.0 / d)),
        mi_almost_lhs=float(mi_almost),
        exact_nec_lhs=float(exact_nec),
    )
