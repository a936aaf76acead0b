import json
import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from lrdustat.errors import ParameterError, RegimeError
from lrdustat.hermite import c_constant, class_coeffs
from lrdustat.limit_law import (CriticalValueTable, critical_values,
                                default_grid, limit_thm1, limit_thm2,
                                simulate_fbm, simulate_hermite)
from lrdustat.lrd_sim import Subordinator
from lrdustat.ustat import Kernel, cusum_kernel, wilcoxon_kernel

H = 0.8  # corresponds to D = 0.4 at rank one


@pytest.fixture(scope="module")
def ensemble():
    return simulate_fbm(H, default_grid(64), reps=3000, seed=17,
                        resolution=256)


@pytest.fixture(scope="module")
def identity_class():
    return class_coeffs(Subordinator.identity(), 1,
                        np.linspace(-8.0, 8.0, 2001))


@pytest.fixture(scope="module")
def driver():
    return simulate_hermite(1, 0.4, default_grid(32), reps=60,
                            N_aux=2 ** 12, seed=21)


@pytest.fixture(scope="module")
def cv_ensemble():
    return simulate_fbm(H, default_grid(64), reps=500, seed=33,
                        resolution=256)


class TestFbm:
    def test_starts_at_zero(self, ensemble):
        assert np.all(ensemble.paths[:, 0] == 0.0)

    def test_mean_zero(self, ensemble):
        end = ensemble.paths[:, -1]
        assert abs(end.mean()) < 4 * end.std(ddof=1) / math.sqrt(ensemble.reps)

    def test_unit_variance_at_one(self, ensemble):
        # Var(B(1)) = 1 exactly in distribution; the sample variance of
        # R Gaussians has standard error sqrt(2/R) ~ 0.026
        assert np.var(ensemble.paths[:, -1], ddof=1) == pytest.approx(
            1.0, abs=0.08)

    def test_covariance_structure(self, ensemble):
        # brute oracle: Cov(B(s), B(t)) = (s^2H + t^2H - |t-s|^2H) / 2,
        # exact at grid points that are multiples of 1/resolution
        grid = ensemble.grid
        for i, j in [(32, 64), (16, 48), (8, 64)]:
            s, t = grid[i], grid[j]
            target = 0.5 * (s ** (2 * H) + t ** (2 * H)
                            - abs(t - s) ** (2 * H))
            est = np.mean(ensemble.paths[:, i] * ensemble.paths[:, j])
            assert est == pytest.approx(target, abs=0.1)

    def test_half_point_variance(self, ensemble):
        assert np.var(ensemble.paths[:, 32], ddof=1) == pytest.approx(
            0.5 ** (2 * H), abs=0.05)

    def test_self_similarity(self):
        a = simulate_fbm(H, np.array([0.0, 0.5]), reps=2000, seed=1)
        b = simulate_fbm(H, np.array([0.0, 1.0]), reps=2000, seed=2)
        rescaled = a.paths[:, -1] * 2.0 ** H
        assert ks_2samp(rescaled, b.paths[:, -1]).statistic <= 0.05

    def test_h_out_of_range(self):
        for h in (0.5, 1.0, 0.3):
            with pytest.raises(ParameterError):
                simulate_fbm(h, default_grid(8), reps=1, seed=0)

    def test_deterministic(self):
        a = simulate_fbm(H, default_grid(8), reps=3, seed=5, resolution=128)
        b = simulate_fbm(H, default_grid(8), reps=3, seed=5, resolution=128)
        assert np.array_equal(a.paths, b.paths)


class TestHermiteProcess:
    def test_starts_at_zero(self):
        ens = simulate_hermite(2, 0.3, default_grid(16), reps=5,
                               N_aux=2 ** 12, seed=0)
        assert np.all(ens.paths[:, 0] == 0.0)

    def test_order_one_unit_variance(self):
        ens = simulate_hermite(1, 0.4, np.array([0.0, 1.0]), reps=2000,
                               N_aux=2 ** 12, seed=3)
        assert np.var(ens.paths[:, -1], ddof=1) == pytest.approx(1.0,
                                                                 abs=0.1)

    def test_order_two_unit_variance(self):
        # the endpoint is normalized by the exact partial-sum standard
        # deviation, so E[Z_2(1)^2] = 1 exactly; the estimator is noisier
        # than in the Gaussian case because of heavier tails
        ens = simulate_hermite(2, 0.3, np.array([0.0, 1.0]), reps=1500,
                               N_aux=2 ** 12, seed=4)
        assert np.var(ens.paths[:, -1], ddof=1) == pytest.approx(1.0,
                                                                 abs=0.25)

    def test_regime_violation(self):
        with pytest.raises(RegimeError):
            simulate_hermite(2, 0.5, default_grid(8), reps=1)

    def test_n_aux_floor(self):
        with pytest.raises(ParameterError):
            simulate_hermite(1, 0.4, default_grid(8), reps=1, N_aux=100)


class TestThm1:
    def test_cusum_reduces_to_closed_combination(self):
        # for a rank-one kernel with a10 = 1, a01 = -1 the functional must
        # equal sqrt(c1) ((1-lam) Z(lam) - lam (Z(1) - Z(lam))) path by path
        d = 0.4
        grid = default_grid(32)
        reps, n_aux, seed = 50, 2 ** 12, 9
        ens = limit_thm1({(1, 0): 1.0, (0, 1): -1.0}, d, grid, reps=reps,
                         N_aux=n_aux, seed=seed)
        z = simulate_hermite(1, d, grid, reps=reps, N_aux=n_aux,
                             seed=seed).paths
        z1 = z[:, -1:]
        expected = math.sqrt(c_constant(d, 1)) * ((1.0 - grid) * z
                                                  - grid * (z1 - z))
        assert np.allclose(ens.paths, expected, atol=1e-12)

    def test_linearity_in_coefficients(self):
        d = 0.4
        grid = default_grid(16)
        one = limit_thm1({(1, 0): 1.0}, d, grid, reps=20, N_aux=2 ** 12,
                         seed=2)
        two = limit_thm1({(1, 0): 2.0}, d, grid, reps=20, N_aux=2 ** 12,
                         seed=2)
        assert np.allclose(two.paths, 2.0 * one.paths, atol=1e-14)

    def test_boundary_values(self):
        ens = limit_thm1({(1, 0): 1.0, (0, 1): -1.0}, 0.4, default_grid(16),
                         reps=10, N_aux=2 ** 12, seed=0)
        # Z_k(0) = 0 and the second factor vanishes at lam = 1
        assert np.allclose(ens.paths[:, 0], 0.0)
        assert np.allclose(ens.paths[:, -1], 0.0, atol=1e-12)

    def test_mixed_diagonals_rejected(self):
        with pytest.raises(ParameterError):
            limit_thm1({(1, 0): 1.0, (1, 1): 0.5}, 0.3, reps=1)

    def test_empty_rejected(self):
        with pytest.raises(ParameterError):
            limit_thm1({}, 0.3, reps=1)

    def test_regime_rejected(self):
        with pytest.raises(RegimeError):
            limit_thm1({(1, 1): 1.0}, 0.5, reps=1)


class TestThm2:
    def test_wilcoxon_integrals(self, identity_class, driver):
        ens = limit_thm2(wilcoxon_kernel(), Subordinator.identity(),
                         identity_class, driver)
        a = 1.0 / (2.0 * math.sqrt(math.pi))
        assert ens.descriptor["A"] == pytest.approx(a, abs=1e-3)
        assert ens.descriptor["B"] == pytest.approx(-a, abs=1e-3)

    def test_cusum_matches_formal_bridge(self, identity_class, driver):
        # for h(x, y) = x - y the functional collapses to Z(lam) - lam Z(1)
        ens = limit_thm2(cusum_kernel(), Subordinator.identity(),
                         identity_class, driver)
        lam = driver.grid
        z = driver.paths
        expected = z - lam * z[:, -1:]
        assert np.allclose(ens.paths, expected, atol=1e-4)
        # the CUSUM kernel is unbounded, so a TV warning must be attached
        assert ens.warnings

    def test_zero_kernel(self, identity_class, driver):
        zero = Kernel(name="zero",
                      eval=lambda x, y: np.zeros(np.broadcast(
                          np.asarray(x), np.asarray(y)).shape),
                      tv_bound=0.0)
        ens = limit_thm2(zero, Subordinator.identity(), identity_class,
                         driver)
        assert np.allclose(ens.paths, 0.0)

    def test_driver_order_mismatch(self, identity_class):
        driver2 = simulate_hermite(2, 0.3, default_grid(8), reps=5,
                                   N_aux=2 ** 12, seed=0)
        with pytest.raises(ParameterError):
            limit_thm2(wilcoxon_kernel(), Subordinator.identity(),
                       identity_class, driver2)

    def test_driver_grid_must_reach_one(self, identity_class):
        driver = simulate_hermite(1, 0.4, np.array([0.0, 0.5]), reps=5,
                                  N_aux=2 ** 12, seed=0)
        with pytest.raises(ParameterError):
            limit_thm2(wilcoxon_kernel(), Subordinator.identity(),
                       identity_class, driver)


class TestCriticalValues:
    def test_monotone_in_level(self, cv_ensemble):
        table = critical_values(cv_ensemble, [0.8, 0.9, 0.95, 0.99])
        assert all(a < b for a, b in zip(table.values, table.values[1:]))

    def test_value_at(self, cv_ensemble):
        table = critical_values(cv_ensemble, [0.9, 0.95])
        assert table.value_at(0.95) == table.values[1]
        with pytest.raises(ParameterError):
            table.value_at(0.5)

    def test_reps_floor(self):
        small = simulate_fbm(H, default_grid(8), reps=10, seed=0,
                             resolution=64)
        with pytest.raises(ParameterError):
            critical_values(small, [0.95])

    def test_levels_validated(self, cv_ensemble):
        with pytest.raises(ParameterError):
            critical_values(cv_ensemble, [0.95, 1.0])

    def test_seed_reproducible(self):
        a = simulate_fbm(H, default_grid(32), reps=200, seed=44,
                         resolution=128)
        b = simulate_fbm(H, default_grid(32), reps=200, seed=44,
                         resolution=128)
        ta = critical_values(a, [0.95])
        tb = critical_values(b, [0.95])
        assert ta.values == tb.values

    def test_grid_refinement_stability(self):
        # with matching seed/resolution, the same noise feeds both grids:
        # the coarse sup is dominated by the fine sup, and the 95% quantile
        # moves by only a small fraction
        coarse = simulate_fbm(H, default_grid(64), reps=400, seed=8,
                              resolution=512)
        fine = simulate_fbm(H, default_grid(256), reps=400, seed=8,
                            resolution=512)
        assert np.all(coarse.sup_abs() <= fine.sup_abs() + 1e-12)
        qc = critical_values(coarse, [0.95]).values[0]
        qf = critical_values(fine, [0.95]).values[0]
        assert qc <= qf <= 1.05 * qc

    def test_json_roundtrip(self, cv_ensemble, tmp_path):
        table = critical_values(cv_ensemble, [0.9, 0.95])
        out = tmp_path / "cv.json"
        table.dump(out)
        back = CriticalValueTable.from_json_dict(
            json.loads(out.read_text()))
        assert back.values == table.values
        assert back.levels == table.levels
        assert back.reps == table.reps

    def test_csv(self, cv_ensemble, tmp_path):
        table = critical_values(cv_ensemble, [0.9, 0.95])
        out = tmp_path / "cv.csv"
        table.write_csv(out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "level,critical_value"
        assert len(lines) == 3
