"""Permutation estimators: factor alignment, spectral baselines, and the MLE.

Every estimator maps an :class:`~geomatch.models.Observation` to an
:class:`EstimateResult`. The matching weight orientation follows the global
row convention: candidate permutations map Y-side rows to X-side rows, so
the weight of pairing Y-row ``i`` with X-row ``j`` sits at ``W[i, j]``.

The factor-alignment family maximizes ``<B_half, P A_half Q>`` jointly over
permutations and a set of orthogonal candidates Q: a dense 2-d angle grid,
the coordinate sign-flip subgroup, or (for the spectral variant) sign
combinations of bare eigenvectors. A full-resolution alternating ascent and
a Frobenius-relaxed variant provide the iterative baselines, GRAMPA and
degree matching the spectral ones, and a tiny-n Monte-Carlo average over
the orthogonal group serves as the exact-likelihood reference.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from geomatch import linalg
from geomatch.assignment import greedy_match, solve_lap_max
from geomatch.models import Observation, Permutation, double_center, factorize, top_eigenpairs

ESTIMATOR_KINDS = (
    "mle_linear",
    "aml_grid2d",
    "aml_signflip",
    "umeyama",
    "alternating",
    "qap_frobenius",
    "grampa",
    "degree",
    "haar_mle",
)

HAAR_MLE_MAX_N = 8
CONVERGENCE_TOL = 1e-9


@dataclass
class EstimatorConfig:
    """Configuration bundle consumed by :func:`run_estimator`.

    ``matcher`` selects the rounding step for the grid and sign-flip
    estimators: the exact assignment solver or the greedy matcher.
    """

    kind: str
    grid_size: int = 100
    eta: float = 0.2
    max_iter: int = 100
    restarts: int = 10
    mc_samples: int = 1000
    seed: int = 0
    matcher: str = "exact"

    def __post_init__(self) -> None:
        if self.kind not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if self.grid_size < 1:
            raise ValueError("grid_size must be >= 1")
        if self.eta <= 0:
            raise ValueError("eta must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")
        if self.matcher not in ("exact", "greedy"):
            raise ValueError(f"unknown matcher {self.matcher!r}")

    @property
    def name(self) -> str:
        return self.kind if self.matcher == "exact" else f"{self.kind}_greedy"


@dataclass
class EstimateResult:
    permutation: Permutation
    objective: float
    iterations: int = 1
    best_q: np.ndarray | None = None


def overlap(p: Permutation, q: Permutation) -> float:
    """Fraction of indices on which two permutations agree."""
    if len(p) != len(q):
        raise ValueError("permutations must have equal length")
    return float(np.mean(p.mapping == q.mapping))


# -- shared plumbing ---------------------------------------------------


def _require_model(obs: Observation, *models: str) -> None:
    if obs.model not in models:
        raise ValueError(
            f"estimator expects model in {models}, got {obs.model!r}"
        )


def _factor_pair(obs: Observation, d: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Rank-d factors (A_half, B_half) of a Gram-pair observation."""
    _require_model(obs, "dot_product")
    d = obs.dim if d is None else d
    return factorize(obs.left, d), factorize(obs.right, d)


def _matcher(which: str) -> Callable[[np.ndarray], tuple[Permutation, float]]:
    if which == "exact":
        return solve_lap_max
    if which == "greedy":
        return greedy_match
    raise ValueError(f"unknown matcher {which!r}")


def _best_over_candidates(
    fa: np.ndarray,
    fb: np.ndarray,
    candidates: list[np.ndarray],
    matcher: str,
) -> EstimateResult:
    """Maximize <B_half, P A_half Q> over permutations and listed Q."""
    match = _matcher(matcher)
    best: EstimateResult | None = None
    for idx, q in enumerate(candidates):
        w = fb @ (fa @ q).T
        pi, obj = match(w)
        # Deterministic reduction: strictly-better wins; candidate order
        # breaks exact ties regardless of evaluation schedule.
        if best is None or obj > best.objective:
            best = EstimateResult(pi, obj, iterations=idx + 1, best_q=q)
    best.iterations = len(candidates)
    return best


# -- estimators --------------------------------------------------------


def mle_linear(obs: Observation) -> EstimateResult:
    """Exact MLE for directly observed clouds: one max-weight matching."""
    _require_model(obs, "linear_assignment")
    w = obs.right @ obs.left.T
    pi, obj = solve_lap_max(w)
    return EstimateResult(pi, obj)


def aml_grid2d(obs: Observation, t0: int = 100, matcher: str = "exact") -> EstimateResult:
    """Factor alignment over a 2-d angle grid of rotations and reflections.

    Enumerates ``2 * t0`` orthogonal candidates (t0 rotations plus t0
    reflections at angles ``2 pi k / t0``), solving one matching per
    candidate and keeping the best objective.
    """
    if obs.dim != 2:
        raise ValueError(f"grid estimator supports d=2 only, got d={obs.dim}")
    fa, fb = _factor_pair(obs)
    angles = 2.0 * np.pi * np.arange(t0) / t0
    candidates = [linalg.rotation2d(t, reflect=False) for t in angles]
    candidates += [linalg.rotation2d(t, reflect=True) for t in angles]
    return _best_over_candidates(fa, fb, candidates, matcher)


def aml_signflip(obs: Observation, matcher: str = "exact") -> EstimateResult:
    """Factor alignment restricted to the coordinate sign-flip subgroup."""
    candidates = linalg.sign_flip_group(obs.dim)
    fa, fb = _factor_pair(obs)
    return _best_over_candidates(fa, fb, candidates, matcher)


def umeyama(obs: Observation) -> EstimateResult:
    """Spectral matching on signed sums of eigenvector outer products.

    Discards eigenvalues entirely: with U, V the top-d eigenvectors of the
    two Gram matrices, enumerates sign vectors q and rounds
    ``sum_l q_l v_l u_l^T`` with the exact matcher.
    """
    _require_model(obs, "dot_product")
    d = obs.dim
    if d > linalg.SIGN_FLIP_MAX_DIM:
        raise ValueError(f"sign enumeration capped at d={linalg.SIGN_FLIP_MAX_DIM}")
    _, u = top_eigenpairs(obs.left, d)
    _, v = top_eigenpairs(obs.right, d)
    best: EstimateResult | None = None
    for signs in itertools.product((1.0, -1.0), repeat=d):
        w = (v * np.asarray(signs)) @ u.T
        pi, obj = solve_lap_max(w)
        if best is None or obj > best.objective:
            q = np.diag(np.asarray(signs))
            best = EstimateResult(pi, obj, best_q=q)
    best.iterations = 2**d
    return best


def alternating_procrustes(
    obs: Observation,
    init: np.ndarray | None = None,
    max_iter: int = 100,
    restarts: int = 10,
    rng: np.random.Generator | None = None,
) -> EstimateResult:
    """Alternating ascent on <B_half, P A_half Q>.

    Iterates an exact matching step at fixed Q with the Procrustes rotation
    at fixed P; the objective is nondecreasing by construction. Keeps the
    best of ``restarts`` runs started from Haar-random rotations (or from
    ``init``, which replaces the first start).
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    fa, fb = _factor_pair(obs)
    d = obs.dim
    if rng is None:
        rng = np.random.default_rng()
    starts: list[np.ndarray] = []
    if init is not None:
        starts.append(np.asarray(init, dtype=np.float64))
    while len(starts) < max(1, restarts):
        starts.append(linalg.haar_orthogonal(d, rng))

    best: EstimateResult | None = None
    for q0 in starts:
        q = q0
        prev = -np.inf
        pi = None
        iters = 0
        for it in range(max_iter):
            w = fb @ (fa @ q).T
            pi, obj = solve_lap_max(w)
            m = fa.T @ _apply_transpose(pi, fb)
            q = linalg.procrustes_rotation(m)
            iters = it + 1
            if obj - prev < CONVERGENCE_TOL:
                break
            prev = obj
        obj = float(np.sum(m * q))
        if best is None or obj > best.objective:
            best = EstimateResult(pi, obj, iterations=iters, best_q=q)
    return best


def _apply_transpose(pi: Permutation, rows: np.ndarray) -> np.ndarray:
    """Rows of ``P^T rows``: row pi(i) receives row i."""
    out = np.empty_like(rows)
    out[pi.mapping] = rows
    return out


def qap_frobenius(
    obs: Observation,
    max_iter: int = 100,
    init: Permutation | None = None,
) -> EstimateResult:
    """Alternating heuristic for the Frobenius-relaxed alignment.

    Replaces the orthogonal dual with the unit-Frobenius ball, so the
    Q-step is ``M / ||M||_F`` and the attained objective is
    ``||A_half^T P^T B_half||_F``. Heuristic only: returns the best local
    maximizer found, not the exact quadratic-assignment optimum.
    """
    fa, fb = _factor_pair(obs)
    d = obs.dim
    if init is not None:
        m = fa.T @ _apply_transpose(init, fb)
        q = m / max(np.linalg.norm(m), 1e-300)
    else:
        q = np.eye(d) / np.sqrt(d)
    prev = -np.inf
    pi = None
    iters = 0
    for it in range(max_iter):
        w = fb @ (fa @ q).T
        pi, obj = solve_lap_max(w)
        m = fa.T @ _apply_transpose(pi, fb)
        norm = float(np.linalg.norm(m))
        q = m / max(norm, 1e-300)
        iters = it + 1
        if norm - prev < CONVERGENCE_TOL:
            break
        prev = norm
    return EstimateResult(pi, float(np.linalg.norm(m)), iterations=iters, best_q=q)


def grampa(obs: Observation, eta: float = 0.2) -> EstimateResult:
    """Spectral similarity over all eigenpair pairs with regularizer eta.

    Builds ``S = sum_{ij} <u_i,1><v_j,1> / ((lam_i - mu_j)^2 + eta^2) u_i v_j^T``
    from the full spectra of the two payloads and rounds its transpose
    (Y-rows match X-rows) with the exact matcher.
    """
    if eta <= 0:
        raise ValueError(f"eta must be > 0, got {eta}")
    _require_model(obs, "dot_product", "distance")
    a, b = obs.left, obs.right
    lam, u = np.linalg.eigh(a)
    mu, v = np.linalg.eigh(b)
    ua = u.T @ np.ones(a.shape[0])
    vb = v.T @ np.ones(b.shape[0])
    coeff = (ua[:, None] * vb[None, :]) / ((lam[:, None] - mu[None, :]) ** 2 + eta**2)
    similarity = u @ coeff @ v.T
    pi, obj = solve_lap_max(similarity.T)
    return EstimateResult(pi, obj)


def degree_match(obs: Observation) -> EstimateResult:
    """Match by sorting row sums of the two payloads.

    Y-row i is assigned the X-row of equal rank; ties in the row sums are
    broken by index, making the output deterministic.
    """
    _require_model(obs, "dot_product", "distance")
    a_sums = obs.left.sum(axis=1)
    b_sums = obs.right.sum(axis=1)
    order_a = np.argsort(a_sums, kind="stable")
    order_b = np.argsort(b_sums, kind="stable")
    mapping = np.empty(len(a_sums), dtype=np.int64)
    mapping[order_b] = order_a
    pi = Permutation(mapping)
    objective = float(np.dot(b_sums, a_sums[mapping]))
    return EstimateResult(pi, objective)


def haar_mle(
    obs: Observation,
    sigma: float,
    mc_samples: int = 1000,
    rng: np.random.Generator | None = None,
    q_samples: list[np.ndarray] | None = None,
) -> EstimateResult:
    """Monte-Carlo maximum likelihood over all permutations (tiny n only).

    Estimates the orthogonal-group average of
    ``exp(<B_half, P A_half Q> / sigma^2)`` with common random Q draws
    across permutations, and returns the permutation with the largest
    estimate. The objective is reported in log-space (log-sum-exp
    stabilized). ``q_samples`` overrides the Haar draws, which the tests
    use to pin degenerate cases.
    """
    if sigma <= 0:
        raise ValueError("haar_mle requires sigma > 0")
    fa, fb = _factor_pair(obs)
    n, d = fa.shape
    if n > HAAR_MLE_MAX_N:
        raise ValueError(f"exhaustive enumeration capped at n={HAAR_MLE_MAX_N}, got n={n}")
    if q_samples is None:
        if rng is None:
            rng = np.random.default_rng()
        q_samples = [linalg.haar_orthogonal(d, rng) for _ in range(mc_samples)]
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    rows = np.arange(n)
    # Online log-sum-exp over samples, one accumulator per permutation.
    running_max = np.full(len(perms), -np.inf)
    running_sum = np.zeros(len(perms))
    for q in q_samples:
        w = fb @ (fa @ q).T
        vals = w[rows[None, :], perms].sum(axis=1) / sigma**2
        new_max = np.maximum(running_max, vals)
        with np.errstate(invalid="ignore"):
            scale = np.exp(running_max - new_max)
        scale[~np.isfinite(scale)] = 0.0
        running_sum = running_sum * scale + np.exp(vals - new_max)
        running_max = new_max
    log_means = running_max + np.log(running_sum) - np.log(len(q_samples))
    best = int(np.argmax(log_means))
    pi = Permutation(perms[best])
    return EstimateResult(pi, float(log_means[best]), iterations=len(q_samples))


DISTANCE_INNER_KINDS = ("aml_grid2d", "aml_signflip", "umeyama", "alternating")


def estimate_distance(
    obs: Observation,
    inner: EstimatorConfig,
    rng: np.random.Generator | None = None,
) -> EstimateResult:
    """Run a factor-alignment estimator on double-centered distance data."""
    _require_model(obs, "distance")
    if inner.kind not in DISTANCE_INNER_KINDS:
        raise ValueError(
            f"distance model supports inner kinds {DISTANCE_INNER_KINDS}, got {inner.kind!r}"
        )
    centered = Observation(
        model="dot_product",
        left=double_center(obs.left),
        right=double_center(obs.right),
        dim=obs.dim,
    )
    return run_estimator(centered, inner, rng=rng)


def run_estimator(
    obs: Observation,
    cfg: EstimatorConfig,
    rng: np.random.Generator | None = None,
    sigma: float | None = None,
) -> EstimateResult:
    """Dispatch an observation to the configured estimator.

    Distance-model observations are routed through double centering for
    the factor-alignment kinds. ``sigma`` is only consumed by the
    likelihood-averaging estimator.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if obs.model == "distance" and cfg.kind in DISTANCE_INNER_KINDS:
        return estimate_distance(obs, cfg, rng=rng)
    if cfg.kind == "mle_linear":
        return mle_linear(obs)
    if cfg.kind == "aml_grid2d":
        return aml_grid2d(obs, t0=cfg.grid_size, matcher=cfg.matcher)
    if cfg.kind == "aml_signflip":
        return aml_signflip(obs, matcher=cfg.matcher)
    if cfg.kind == "umeyama":
        return umeyama(obs)
    if cfg.kind == "alternating":
        return alternating_procrustes(
            obs, max_iter=cfg.max_iter, restarts=cfg.restarts, rng=rng
        )
    if cfg.kind == "qap_frobenius":
        return qap_frobenius(obs, max_iter=cfg.max_iter)
    if cfg.kind == "grampa":
        return grampa(obs, eta=cfg.eta)
    if cfg.kind == "degree":
        return degree_match(obs)
    if cfg.kind == "haar_mle":
        if sigma is None:
            raise ValueError("haar_mle needs the noise level sigma")
        return haar_mle(obs, sigma, mc_samples=cfg.mc_samples, rng=rng)
    raise ValueError(f"unknown estimator kind {cfg.kind!r}")


def supported_models(kind: str) -> tuple[str, ...]:
    """Model tags an estimator kind can consume (used by the sweep harness)."""
    if kind == "mle_linear":
        return ("linear_assignment",)
    if kind in ("aml_grid2d", "aml_signflip", "umeyama", "alternating"):
        return ("dot_product", "distance")
    if kind in ("qap_frobenius", "haar_mle"):
        return ("dot_product",)
    if kind in ("grampa", "degree"):
        return ("dot_product", "distance")
    raise ValueError(f"unknown estimator kind {kind!r}")
