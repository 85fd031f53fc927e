import itertools

import numpy as np
import pytest

from geomatch import linalg, theory
from geomatch.assignment import solve_lap_max
from geomatch.models import Permutation, sample_instance


class TestLoglikDiff:
    def test_zero_at_truth(self):
        inst = sample_instance(12, 2, 0.4, rng=0)
        assert theory.loglik_diff(inst, inst.pi_star) == 0.0

    def test_requires_positive_sigma(self):
        inst = sample_instance(8, 2, 0.0, rng=1)
        with pytest.raises(ValueError, match="sigma"):
            theory.loglik_diff(inst, inst.pi_star)

    def test_orbit_sum_identity(self):
        # sigma^2 * loglik_diff equals the sum of per-orbit increments.
        rng = np.random.default_rng(2)
        for _ in range(100):
            n = int(rng.integers(4, 21))
            inst = sample_instance(
                n, int(rng.integers(1, 4)), float(rng.uniform(0.05, 1.0)),
                rng=int(rng.integers(2**31)),
            )
            pi = Permutation.random(n, rng)
            orbit_total = sum(
                theory.delta_orbit(inst, orbit)
                for orbit in theory.orbit_decomposition(inst.pi_star, pi)
            )
            lhs = inst.sigma**2 * theory.loglik_diff(inst, pi)
            assert lhs == pytest.approx(orbit_total, abs=1e-9 * max(1.0, abs(lhs)))

    def test_argmax_matches_linear_mle(self):
        from geomatch.estimators import mle_linear
        from geomatch.models import observe

        rng = np.random.default_rng(3)
        for _ in range(10):
            inst = sample_instance(4, 2, 0.3, rng=int(rng.integers(2**31)))
            best = max(
                (Permutation(np.array(p)) for p in itertools.permutations(range(4))),
                key=lambda pi: theory.loglik_diff(inst, pi),
            )
            res = mle_linear(observe(inst, "linear_assignment"))
            assert theory.loglik_diff(inst, res.permutation) == pytest.approx(
                theory.loglik_diff(inst, best), abs=1e-9
            )


class TestDeltaOrbit:
    def test_two_orbit_formula(self):
        inst = sample_instance(10, 3, 0.5, rng=4)
        w = inst.pi_star.apply(inst.x)
        for i, j in ((0, 1), (2, 7), (4, 9)):
            expected = float((w[j] - w[i]) @ inst.y[i] + (w[i] - w[j]) @ inst.y[j])
            assert theory.delta_orbit(inst, (i, j)) == pytest.approx(expected, abs=1e-12)

    def test_two_orbit_sign_matches_transposition_loglik(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            inst = sample_instance(8, 2, 0.8, rng=int(rng.integers(2**31)))
            i, j = rng.choice(8, size=2, replace=False)
            # pi differing from the truth by the 2-orbit (i, j).
            swap = Permutation.transposition(8, int(i), int(j))
            pi = inst.pi_star.compose(swap)
            delta = theory.delta_orbit(inst, (int(i), int(j)))
            loglik = theory.loglik_diff(inst, pi)
            assert delta == pytest.approx(loglik * inst.sigma**2, abs=1e-9)
            assert (delta >= 0) == (loglik >= 0)

    def test_noiseless_orbits_strictly_negative(self):
        rng = np.random.default_rng(6)
        inst = sample_instance(20, 2, 0.0, rng=7)
        for _ in range(100):
            size = int(rng.integers(2, 6))
            orbit = tuple(int(v) for v in rng.choice(20, size=size, replace=False))
            assert theory.delta_orbit(inst, orbit) < 0

    def test_rejects_duplicates(self):
        inst = sample_instance(6, 2, 0.1, rng=8)
        with pytest.raises(ValueError, match="distinct"):
            theory.delta_orbit(inst, (1, 1))


class TestAugmenting2Orbits:
    def test_noiseless_has_none(self):
        for seed in range(20):
            inst = sample_instance(30, 2, 0.0, rng=seed)
            pairs, disjoint = theory.augmenting_2orbits(inst)
            assert pairs == []
            assert disjoint == []

    def test_high_noise_has_many_disjoint(self):
        sizes = []
        for seed in range(10):
            inst = sample_instance(200, 2, 10.0, rng=seed)
            _, disjoint = theory.augmenting_2orbits(inst)
            sizes.append(len(disjoint))
        assert np.mean(sizes) >= 0.05 * 200

    def test_disjoint_pairs_share_no_vertex(self):
        inst = sample_instance(100, 2, 5.0, rng=9)
        pairs, disjoint = theory.augmenting_2orbits(inst)
        seen = set()
        for i, j in disjoint:
            assert i not in seen and j not in seen
            seen.update((i, j))
        assert set(disjoint) <= set(pairs)

    def test_pairs_match_delta_orbit(self):
        inst = sample_instance(15, 2, 1.0, rng=10)
        pairs, _ = theory.augmenting_2orbits(inst)
        expected = [
            (i, j)
            for i in range(15)
            for j in range(i + 1, 15)
            if theory.delta_orbit(inst, (i, j)) >= 0
        ]
        assert pairs == expected


class TestMgfClosedForm:
    def test_identity_cycle_type_is_one(self):
        for sigma in (0.05, 0.3, 1.0):
            val = theory.mgf_closed_form({1: 7}, [0.0, 0.0], sigma)
            assert val == pytest.approx(1.0, abs=1e-12)

    def test_invalid_cycle_type(self):
        with pytest.raises(ValueError):
            theory.mgf_closed_form({0: 3}, [0.1], 0.3)
        with pytest.raises(ValueError):
            theory.mgf_closed_form({}, [0.1], 0.3)

    def test_phase_sign_and_order_invariance(self):
        ct = {1: 2, 3: 1}
        base = theory.log_mgf_closed_form(ct, [0.4, -1.2], 0.25)
        assert theory.log_mgf_closed_form(ct, [-0.4, 1.2], 0.25) == pytest.approx(base)
        assert theory.log_mgf_closed_form(ct, [1.2, 0.4], 0.25) == pytest.approx(base)

    def test_bounded_by_identity_phase_and_ak_bound(self):
        # a_k(Q) <= a_k(I) <= (4 sigma)^{(k-1) d} on a grid of (k, theta, sigma).
        for sigma in (0.1, 0.3, 0.7):
            for k in (1, 2, 3, 5):
                for theta in np.linspace(0.0, np.pi, 7):
                    at_theta = theory.log_mgf_closed_form({k: 1}, [theta, theta], sigma)
                    at_zero = theory.log_mgf_closed_form({k: 1}, [0.0, 0.0], sigma)
                    assert at_theta <= at_zero + 1e-12
                    bound = (k - 1) * 2 * np.log(4 * sigma)
                    assert at_zero <= bound + 1e-12

    def test_strictly_below_one_unless_identity(self):
        assert theory.mgf_closed_form({1: 4}, [0.3, 0.0], 0.2) < 1.0
        assert theory.mgf_closed_form({1: 2, 2: 1}, [0.0, 0.0], 0.2) < 1.0

    def test_monotone_in_phase_for_fixed_point_type(self):
        # Pure fixed-point cycle types are nonincreasing in each |theta|.
        thetas = np.linspace(0.0, np.pi, 9)
        for sigma in (0.1, 0.5):
            vals = [
                theory.log_mgf_closed_form({1: 5}, [t, 0.7], sigma) for t in thetas
            ]
            assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))

    def test_not_monotone_for_longer_cycles(self):
        # Counterexample kept as a regression anchor: with a 2-cycle present
        # the closed form increases again as theta approaches pi, so the
        # monotonicity property is specific to fixed-point-only cycle types.
        ct = {1: 1, 2: 1}
        mid = theory.log_mgf_closed_form(ct, [np.pi / 2], 0.01)
        end = theory.log_mgf_closed_form(ct, [np.pi], 0.01)
        assert end > mid

    def test_matches_direct_product_formula(self):
        # Log-space evaluation agrees with the naive product at small sizes.
        sigma = 0.35
        p = np.sqrt(1 + 4 * sigma**2) + 2 * sigma
        for k, theta in ((1, 0.3), (2, 1.1), (4, 2.5)):
            direct = (4 * sigma) ** (2 * k) * np.prod(
                [
                    (p ** (2 * k) + p ** (-2 * k) - 2 * np.cos(k * t)) ** -0.5
                    for t in (theta, -theta)
                ]
            )
            via_log = theory.mgf_closed_form({k: 1}, [theta, -theta], sigma)
            assert via_log == pytest.approx(direct, rel=1e-12)


class TestMgfMonteCarlo:
    def test_identity_is_exactly_one(self):
        rng = np.random.default_rng(11)
        val = theory.mgf_monte_carlo(
            4, 2, Permutation.identity(4), np.eye(2), 0.3, 1000, rng
        )
        assert val == 1.0

    def test_estimates_in_unit_interval(self):
        rng = np.random.default_rng(12)
        pi = Permutation.random(4, rng)
        q = linalg.haar_orthogonal(2, rng)
        val = theory.mgf_monte_carlo(4, 2, pi, q, 0.4, 2000, rng)
        assert 0.0 < val <= 1.0

    def test_sample_floor(self):
        rng = np.random.default_rng(13)
        with pytest.raises(ValueError, match="samples"):
            theory.mgf_monte_carlo(4, 2, Permutation.identity(4), np.eye(2), 0.3, 10, rng)

    def test_closed_form_cross_validation(self):
        # Lemma-level oracle agreement at n=4, d=2 across random configs.
        rng = np.random.default_rng(14)
        for trial in range(5):
            pi = Permutation.random(4, np.random.default_rng(200 + trial))
            theta = float(rng.uniform(0, np.pi))
            reflect = bool(trial % 2)
            q = linalg.rotation2d(theta, reflect=reflect)
            sigma = float(rng.uniform(0.2, 0.5))
            phases = linalg.orthogonal_phases(q)
            closed = theory.mgf_closed_form(pi.cycle_type(), phases, sigma)
            mc = theory.mgf_monte_carlo(4, 2, pi, q, sigma, 200_000, rng)
            assert mc == pytest.approx(closed, rel=0.05)


class TestMgfDistanceCorrection:
    def test_zero_phases_give_unit_factor(self):
        assert theory.mgf_distance_correction([0.0, 0.0], 0.3) == 1.0

    def test_upper_bound_by_quadratic_phase(self):
        rng = np.random.default_rng(15)
        for _ in range(50):
            thetas = rng.uniform(-np.pi, np.pi, size=3)
            sigma = float(rng.uniform(0.05, 1.0))
            factor = theory.mgf_distance_correction(thetas, sigma)
            bound = float(np.sqrt(np.prod(1 + thetas**2 / (16 * sigma**2))))
            assert factor <= bound + 1e-12

    def test_centered_monte_carlo_cross_validation(self):
        rng = np.random.default_rng(16)
        for trial in range(3):
            pi = Permutation.random(4, np.random.default_rng(300 + trial))
            theta = float(rng.uniform(0, np.pi))
            q = linalg.rotation2d(theta)
            sigma = float(rng.uniform(0.2, 0.5))
            phases = linalg.orthogonal_phases(q)
            corrected = theory.mgf_closed_form(
                pi.cycle_type(), phases, sigma
            ) * theory.mgf_distance_correction(phases, sigma)
            mc = theory.mgf_monte_carlo(4, 2, pi, q, sigma, 200_000, rng, center=True)
            assert mc == pytest.approx(corrected, rel=0.05)


class TestNetLemma:
    def test_identity_holds(self):
        report = theory.check_net_lemma(np.eye(2), 0.3)
        assert report.holds
        assert report.lhs >= report.rhs

    def test_random_matrices_all_hold(self):
        rng = np.random.default_rng(17)
        for delta in (0.5, 0.1, 0.02):
            for _ in range(100):
                m = rng.standard_normal((2, 2))
                assert theory.check_net_lemma(m, delta).holds

    def test_quadratic_beats_linear_bound(self):
        for delta in (0.5, 0.1, 0.02):
            assert (1 - delta**2 / 2) > (1 - delta)


class TestThresholds:
    def test_arithmetic_values(self):
        rep = theory.thresholds(200, 2, 0.01)
        assert rep.perfect_threshold == pytest.approx(0.005)
        assert rep.almost_threshold == pytest.approx(0.0707107, rel=1e-5)
        rep4 = theory.thresholds(200, 4, 0.01)
        assert rep4.perfect_threshold == pytest.approx(0.0707107, rel=1e-5)

    def test_perfect_below_almost(self):
        for n in (10, 100, 5000):
            for d in (1, 2, 5):
                rep = theory.thresholds(n, d, 0.1)
                assert rep.perfect_threshold <= rep.almost_threshold

    def test_mi_statistic_sign_flip(self):
        # The mutual-information statistic changes sign within a factor two
        # of n^{-(1-eps)/d}.
        n, d, eps = 10_000, 2, 0.1
        pivot = n ** (-(1 - eps) / d)
        low = theory.thresholds(n, d, pivot, epsilon=eps).mi_almost_lhs
        high = theory.thresholds(n, d, 2 * pivot, epsilon=eps).mi_almost_lhs
        assert low > 0
        assert high < 0

    def test_exact_statistic_formula(self):
        n, d, sigma = 500, 3, 0.05
        rep = theory.thresholds(n, d, sigma)
        expected = 0.25 * d * np.log1p(sigma**-2) - np.log(n) + np.log(d)
        assert rep.exact_nec_lhs == pytest.approx(expected, rel=1e-12)


class TestOrbitDecomposition:
    def test_matches_relative_permutation_cycles(self):
        rng = np.random.default_rng(18)
        pi_star = Permutation.random(10, rng)
        pi = Permutation.random(10, rng)
        orbits = theory.orbit_decomposition(pi_star, pi)
        # Consecutive elements step through pi_star^{-1} o pi.
        for orbit in orbits:
            for a, b in zip(orbit, orbit[1:] + orbit[:1]):
                assert pi_star.inverse()(pi(a)) == b

    def test_truth_has_no_orbits(self):
        pi = Permutation.random(7, np.random.default_rng(19))
        assert theory.orbit_decomposition(pi, pi) == []
