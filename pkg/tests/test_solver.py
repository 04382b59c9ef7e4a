import numpy as np
import pytest

import wavecs.solver as solver_mod
from wavecs.curvelet import fdct, ifdct, make_plan
from wavecs.errors import InvalidInputError, NumericalFailureError
from wavecs.hadamard import make_sensing_operator, sensing_adjoint, sensing_apply
from wavecs.solver import (
    OperatorPair,
    RecoveryConfig,
    SolveReport,
    build_cs_operator,
    recover_series,
    salsa,
    smw_apply,
    soft_threshold,
)


def phi_pair(op):
    return OperatorPair(
        apply=lambda f: sensing_apply(op, f),
        adjoint=lambda b: sensing_adjoint(op, b),
    )


def dense_pair(A):
    return OperatorPair(apply=lambda f: A @ f, adjoint=lambda b: A.T @ b)


def random_orthonormal_rows(m, n, seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, m)))
    return q[:, :m].T


class TestSoftThreshold:
    def test_direct_formula(self):
        np.testing.assert_allclose(soft_threshold(np.array([3.0, -1.0, 0.5]), 1.0), [2.0, 0.0, 0.0])

    def test_zero_threshold_identity(self):
        x = np.random.default_rng(0).standard_normal(10)
        np.testing.assert_array_equal(soft_threshold(x, 0.0), x)

    def test_negative_threshold_rejected(self):
        with pytest.raises(InvalidInputError):
            soft_threshold(np.zeros(3), -0.1)

    def test_is_prox_of_l1_by_grid_search(self):
        # argmin_v theta*|v| + 0.5*(v - x)^2 via brute force on a fine grid.
        grid = np.linspace(-5.0, 5.0, 100001)
        for x, theta in [(2.3, 1.0), (-0.7, 1.0), (0.4, 0.9), (-3.1, 0.25), (0.0, 0.5)]:
            vals = theta * np.abs(grid) + 0.5 * (grid - x) ** 2
            best = grid[np.argmin(vals)]
            out = float(soft_threshold(np.array([x]), theta)[0])
            assert abs(out - best) < 1e-4


class TestSmw:
    def test_nullspace_input_scales(self):
        A = random_orthonormal_rows(4, 16, seed=1)
        r = np.random.default_rng(2).standard_normal(16)
        r_null = r - A.T @ (A @ r)
        mu = 0.7
        np.testing.assert_allclose(smw_apply(dense_pair(A), mu, r_null), r_null / mu, atol=1e-12)

    @pytest.mark.parametrize("m,n", [(4, 16), (30, 100), (64, 256)])
    def test_matches_dense_inverse(self, m, n):
        A = random_orthonormal_rows(m, n, seed=m + n)
        r = np.random.default_rng(3).standard_normal(n)
        mu = 0.35
        expected = np.linalg.solve(A.T @ A + mu * np.eye(n), r)
        got = smw_apply(dense_pair(A), mu, r)
        assert np.linalg.norm(got - expected) / np.linalg.norm(expected) < 1e-10

    def test_forward_check(self):
        A = random_orthonormal_rows(10, 64, seed=9)
        r = np.random.default_rng(4).standard_normal(64)
        mu = 2.2
        x = smw_apply(dense_pair(A), mu, r)
        back = A.T @ (A @ x) + mu * x
        assert np.linalg.norm(back - r) / np.linalg.norm(r) < 1e-10

    def test_rejects_nonpositive_mu(self):
        A = random_orthonormal_rows(4, 8, seed=5)
        with pytest.raises(InvalidInputError):
            smw_apply(dense_pair(A), 0.0, np.zeros(8))


def make_sparse_problem(n, m, k, seed, log2n=None):
    rng = np.random.default_rng(seed)
    op = make_sensing_operator(int(np.log2(n)) if log2n is None else log2n, m, seed=seed)
    f_true = np.zeros(n)
    support = rng.choice(n, size=k, replace=False)
    f_true[support] = rng.standard_normal(k) + np.sign(rng.standard_normal(k))
    b = sensing_apply(op, f_true)
    return op, f_true, b


class TestSalsa:
    def test_zero_measurements(self):
        op = make_sensing_operator(6, 20, seed=0)
        f, report = salsa(phi_pair(op), np.zeros(20), RecoveryConfig())
        assert not f.any()
        assert report.iterations == 1
        assert report.stop_reason == "tolerance"
        assert len(report.objective_trace) == report.iterations + 1

    def test_trace_length_invariant(self):
        op, _, b = make_sparse_problem(64, 32, 3, seed=1)
        _, report = salsa(phi_pair(op), b, RecoveryConfig(max_iters=7, tol=1e-14))
        assert len(report.objective_trace) == report.iterations + 1

    def test_sparse_recovery_identity_frame(self):
        op, f_true, b = make_sparse_problem(64, 32, 3, seed=3)
        # mu comparable to tau: the shrinkage step then moves at the scale
        # of the coefficients and ADMM converges in a few hundred steps.
        cfg = RecoveryConfig(tau_factor=1e-4, mu_factor=0.05, tol=1e-12, max_iters=600)
        f, report = salsa(phi_pair(op), b, cfg)
        rel = np.linalg.norm(f - f_true) / np.linalg.norm(f_true)
        assert rel < 1e-3
        assert set(np.flatnonzero(np.abs(f) > 1e-6 * np.abs(f).max())) == set(
            np.flatnonzero(f_true)
        )

    def test_noiseless_recovery_at_six_times_sparsity(self):
        # 18% of n = 4096 measurements, six times a 3% sparsity.
        k, m = 123, 738
        errors = []
        for seed in range(5):
            op, f_true, b = make_sparse_problem(4096, m, k, seed=100 + seed)
            cfg = RecoveryConfig(tau_factor=1e-3, mu_factor=0.1, tol=1e-10, max_iters=300)
            f, _ = salsa(phi_pair(op), b, cfg)
            errors.append(np.linalg.norm(f - f_true) / np.linalg.norm(f_true))
        assert np.median(errors) < 1e-2

    def test_matches_cvxpy_oracle_objective(self):
        cp = pytest.importorskip("cvxpy")
        for seed in range(3):
            op, _, b = make_sparse_problem(64, 32, 3, seed=10 + seed)
            A = np.stack([sensing_apply(op, e) for e in np.eye(64)], axis=1)
            tau = 0.01 * float(np.abs(A.T @ b).max())
            fv = cp.Variable(64)
            problem = cp.Problem(
                cp.Minimize(0.5 * cp.sum_squares(A @ fv - b) + tau * cp.norm1(fv))
            )
            problem.solve(solver=cp.CLARABEL)
            cfg = RecoveryConfig(tau_factor=0.01, tol=1e-10, max_iters=500)
            f, report = salsa(phi_pair(op), b, cfg)
            zeta = report.objective_trace[-1]
            assert abs(zeta - problem.value) / problem.value < 1e-3

    def test_objective_trace_decreasing_after_burn_in(self):
        for seed in (5, 6, 7):
            op, _, b = make_sparse_problem(256, 96, 8, seed=seed)
            _, report = salsa(phi_pair(op), b, RecoveryConfig(tol=1e-14, max_iters=60))
            trace = np.array(report.objective_trace[5:])
            assert np.all(np.diff(trace) <= 1e-12 * trace[0])

    def test_determinism(self):
        op, _, b = make_sparse_problem(128, 48, 4, seed=8)
        cfg = RecoveryConfig()
        f1, _ = salsa(phi_pair(op), b, cfg)
        f2, _ = salsa(phi_pair(op), b, cfg)
        np.testing.assert_array_equal(f1, f2)

    def test_nonfinite_raises_with_iteration(self):
        bad = OperatorPair(apply=lambda f: np.full(4, np.nan), adjoint=lambda b: np.ones(8))
        with pytest.raises(NumericalFailureError) as err:
            salsa(bad, np.ones(4), RecoveryConfig(max_iters=3))
        assert err.value.iteration == 1

    def test_config_validation(self):
        with pytest.raises(InvalidInputError):
            RecoveryConfig(tau_factor=0.0)
        with pytest.raises(InvalidInputError):
            RecoveryConfig(max_iters=0)


@pytest.fixture(scope="module")
def small_setup():
    plan = make_plan(32, 32, 2, 8)
    op = make_sensing_operator(10, 1024, seed=4)
    return plan, op


class TestRecoverSeries:

    def test_full_sampling_matches_direct_inversion(self, small_setup):
        plan, op = small_setup
        rng = np.random.default_rng(11)
        nt = 3
        fields = rng.standard_normal((nt, 32, 32))
        B = np.stack([sensing_apply(op, fields[t].ravel()) for t in range(nt)], axis=1)
        cfg = RecoveryConfig(tau_factor=1e-7, tol=1e-13, max_iters=400)
        series, reports = recover_series(op, plan, B, cfg)
        for t in range(nt):
            direct = sensing_adjoint(op, B[:, t]).reshape(32, 32)
            assert np.abs(series[t] - direct).max() < 1e-6 * np.abs(direct).max()
        assert all(r.stop_reason in ("tolerance", "max_iters") for r in reports)

    def test_zero_measurements_zero_series(self, small_setup):
        plan, op = small_setup
        series, reports = recover_series(op, plan, np.zeros((1024, 4)), RecoveryConfig())
        assert not series.any()
        assert len(reports) == 4

    def test_concurrent_matches_serial(self, small_setup):
        plan, op = small_setup
        rng = np.random.default_rng(12)
        B = rng.standard_normal((1024, 4))
        cfg = RecoveryConfig(max_iters=8)
        s1, _ = recover_series(op, plan, B, cfg, workers=1)
        s2, _ = recover_series(op, plan, B, cfg, workers=3)
        np.testing.assert_array_equal(s1, s2)

    def test_failed_step_yields_zero_field_and_continues(self, small_setup, monkeypatch):
        plan, op = small_setup
        rng = np.random.default_rng(13)
        B = rng.standard_normal((1024, 3))
        real_salsa = solver_mod.salsa
        calls = {"n": 0}

        def flaky(A, b, cfg, **kw):
            calls["n"] += 1
            if calls["n"] == 2:
                raise NumericalFailureError("boom", iteration=5)
            return real_salsa(A, b, cfg, **kw)

        monkeypatch.setattr(solver_mod, "salsa", flaky)
        series, reports = recover_series(op, plan, B, RecoveryConfig(max_iters=5))
        assert not series[1].any()
        assert reports[1].stop_reason == "failed"
        assert series[0].any() and series[2].any()

    def test_shape_validation(self, small_setup):
        plan, op = small_setup
        with pytest.raises(InvalidInputError):
            recover_series(op, plan, np.zeros((7, 2)), RecoveryConfig())
        bad_plan = make_plan(64, 64, 3, 16)
        with pytest.raises(InvalidInputError):
            build_cs_operator(op, bad_plan)
