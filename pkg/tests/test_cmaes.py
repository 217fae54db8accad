import numpy as np
import pytest

from floodwalk.cmaes import CmaConfig, CmaError, CmaState, default_popsize, minimize


def sphere(x):
    return float(np.sum(x * x))


def rosenbrock(x):
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


class TestConfig:
    def test_default_popsize(self):
        assert default_popsize(7) == 4 + int(3 * np.log(7))
        assert default_popsize(2) == 6

    def test_dimension_mismatch(self):
        with pytest.raises(CmaError):
            CmaConfig(dimension=3, x0=np.zeros(2), sigma0=1.0)

    def test_bad_sigma(self):
        with pytest.raises(CmaError):
            CmaConfig(dimension=2, x0=np.zeros(2), sigma0=0.0)

    def test_small_popsize_rejected(self):
        with pytest.raises(CmaError):
            CmaConfig(dimension=2, x0=np.zeros(2), sigma0=1.0, popsize=3)


class TestBudgets:
    def test_sphere_n7(self):
        cfg = CmaConfig(dimension=7, x0=np.full(7, 3.0), sigma0=2.0,
                        max_evals=3000, target_f=1e-10, seed=0)
        _, f_best, _ = minimize(sphere, cfg)
        assert f_best < 1e-10

    def test_rosenbrock_n5(self):
        cfg = CmaConfig(dimension=5, x0=np.zeros(5), sigma0=0.5,
                        max_evals=30_000, target_f=1e-6, seed=0)
        x, f_best, _ = minimize(rosenbrock, cfg)
        assert f_best < 1e-6
        np.testing.assert_allclose(x, 1.0, atol=1e-2)

    def test_one_dimensional(self):
        cfg = CmaConfig(dimension=1, x0=np.array([10.0]), sigma0=3.0,
                        max_evals=2000, target_f=1e-14, seed=1)
        x, f_best, _ = minimize(lambda v: (v[0] - 3.0) ** 2, cfg)
        assert abs(x[0] - 3.0) < 1e-6

    def test_ill_conditioned_quadratic(self):
        scales = np.logspace(0, 3, 6)
        cfg = CmaConfig(dimension=6, x0=np.full(6, 2.0), sigma0=1.0,
                        max_evals=20_000, target_f=1e-10, seed=2)
        _, f_best, _ = minimize(lambda v: float(np.sum((scales * v) ** 2)), cfg)
        assert f_best < 1e-10


class TestDeterminism:
    def test_bit_reproducible(self):
        def run():
            cfg = CmaConfig(dimension=4, x0=np.full(4, 1.5), sigma0=1.0,
                            max_evals=600, seed=7)
            return minimize(sphere, cfg)

        x1, f1, h1 = run()
        x2, f2, h2 = run()
        assert f1 == f2
        assert np.array_equal(x1, x2)
        assert h1 == h2

    def test_seed_changes_draws(self):
        a = CmaState(CmaConfig(dimension=3, x0=np.zeros(3), sigma0=1.0, seed=0)).ask()
        b = CmaState(CmaConfig(dimension=3, x0=np.zeros(3), sigma0=1.0, seed=1)).ask()
        assert not np.array_equal(a, b)


class TestAskTell:
    def make(self, **kw):
        return CmaState(CmaConfig(dimension=3, x0=np.zeros(3), sigma0=1.0, seed=0, **kw))

    def test_ask_twice_rejected(self):
        st = self.make()
        st.ask()
        with pytest.raises(CmaError, match="twice"):
            st.ask()

    def test_tell_without_ask_rejected(self):
        st = self.make()
        with pytest.raises(CmaError, match="without"):
            st.tell(np.zeros((st.lam, 3)), np.zeros(st.lam))

    def test_tell_wrong_batch_rejected(self):
        st = self.make()
        xs = st.ask()
        with pytest.raises(CmaError, match="batch"):
            st.tell(xs + 1.0, np.zeros(st.lam))

    def test_tell_wrong_fitness_count_rejected(self):
        st = self.make()
        xs = st.ask()
        with pytest.raises(CmaError, match="fitness"):
            st.tell(xs, np.zeros(st.lam - 1))

    def test_manual_loop_equals_minimize(self):
        cfg = CmaConfig(dimension=3, x0=np.full(3, 2.0), sigma0=1.0,
                        max_evals=300, seed=5)
        st = CmaState(cfg)
        while st.should_stop() is None:
            xs = st.ask()
            st.tell(xs, [sphere(x) for x in xs])
        x_ref, f_ref, _ = minimize(sphere, cfg)
        assert f_ref == st.best_f
        assert np.array_equal(x_ref, st.best_x)

    def test_non_finite_fitness_resampled(self):
        cfg = CmaConfig(dimension=2, x0=np.full(2, 3.0), sigma0=1.0,
                        max_evals=400, target_f=1e-8, seed=3)

        def f(x):
            if x[0] < 0:
                return np.nan
            return sphere(x)

        _, f_best, _ = minimize(f, cfg)
        assert f_best < 1e-8


class TestInvariants:
    def test_covariance_spd_every_generation(self):
        st = CmaState(CmaConfig(dimension=4, x0=np.full(4, 1.0), sigma0=1.0, seed=9))
        for _ in range(60):
            xs = st.ask()
            st.tell(xs, [rosenbrock(x) for x in xs])
            np.linalg.cholesky((st.cov + st.cov.T) / 2.0)  # raises if not SPD

    def test_best_ever_monotone(self):
        st = CmaState(CmaConfig(dimension=4, x0=np.full(4, 2.0), sigma0=1.0, seed=4))
        prev = np.inf
        for _ in range(50):
            xs = st.ask()
            st.tell(xs, [sphere(x) for x in xs])
            assert st.best_f <= prev
            prev = st.best_f

    def test_history_length_matches_generations(self):
        cfg = CmaConfig(dimension=3, x0=np.full(3, 1.0), sigma0=1.0,
                        max_evals=210, seed=0)
        st = CmaState(cfg)
        _, _, history = minimize(sphere, cfg)
        gens = int(np.ceil(cfg.max_evals / st.lam))
        assert len(history) == gens

    def test_stop_reasons(self):
        st = CmaState(CmaConfig(dimension=2, x0=np.zeros(2), sigma0=1.0,
                                max_evals=default_popsize(2), seed=0))
        assert st.should_stop() is None
        xs = st.ask()
        st.tell(xs, [sphere(x) for x in xs])
        assert st.should_stop() == "evaluation budget exhausted"
