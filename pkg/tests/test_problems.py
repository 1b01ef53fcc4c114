import numpy as np
import pytest

from mfstack import autodiff as ad
from mfstack import oracles
from mfstack import problems as pb
from mfstack.autodiff import Jet
from mfstack.problems import T, X


def jet_xt(x, t, order=2):
    return Jet.seed(x, X, order=order), Jet.seed(t, T, order=order)


class TestPendulumResidual:
    def test_fixed_point_is_residual_free(self):
        z = Jet(np.zeros((4, 1)), {T: np.zeros((4, 1))})
        r1, r2 = pb.pendulum_residual(z, z)
        assert np.all(ad.value_of(r1) == 0.0)
        assert np.all(ad.value_of(r2) == 0.0)

    def test_hand_evaluated_point(self):
        s1 = Jet(np.array([[1.0]]), {T: np.array([[1.0]])})
        s2 = Jet(np.array([[1.0]]), {T: np.array([[0.0]])})
        r1, r2 = pb.pendulum_residual(s1, s2)
        assert ad.value_of(r1)[0, 0] == pytest.approx(0.0, abs=1e-15)
        expect = 0.05 + 9.81 * np.sin(1.0)
        assert ad.value_of(r2)[0, 0] == pytest.approx(expect, rel=1e-12)
        assert ad.value_of(r2)[0, 0] == pytest.approx(8.3048, abs=5e-5)

    def test_oracle_trajectory_satisfies_residual(self):
        # cubic Hermite interpolation of the RK4 trajectory, derivatives
        # from the ODE right-hand side
        t, traj = oracles.pendulum_oracle(T=20.0, dt=1e-3)
        rhs = np.stack([traj[:, 1],
                        -0.05 * traj[:, 1] - 9.81 * np.sin(traj[:, 0])], axis=1)
        rng = np.random.default_rng(0)
        tq = rng.uniform(0.0, 20.0 - 1e-9, size=400)
        idx = np.searchsorted(t, tq, side="right") - 1
        h = t[1] - t[0]
        u = ((tq - t[idx]) / h)[:, None]
        y0, y1 = traj[idx], traj[idx + 1]
        d0, d1 = rhs[idx] * h, rhs[idx + 1] * h
        # Hermite value and derivative on [0, 1]
        val = ((2 * u ** 3 - 3 * u ** 2 + 1) * y0 + (u ** 3 - 2 * u ** 2 + u) * d0
               + (-2 * u ** 3 + 3 * u ** 2) * y1 + (u ** 3 - u ** 2) * d1)
        der = ((6 * u ** 2 - 6 * u) * y0 + (3 * u ** 2 - 4 * u + 1) * d0
               + (-6 * u ** 2 + 6 * u) * y1 + (3 * u ** 2 - 2 * u) * d1) / h
        s1 = Jet(val[:, :1], {T: der[:, :1]})
        s2 = Jet(val[:, 1:], {T: der[:, 1:]})
        r1, r2 = pb.pendulum_residual(s1, s2)
        assert np.max(np.abs(ad.value_of(r1))) < 1e-3
        assert np.max(np.abs(ad.value_of(r2))) < 1e-3


class TestPendulumOracle:
    def test_initial_conditions(self):
        _, traj = oracles.pendulum_oracle(dt=1e-3)
        assert traj[0, 0] == 1.0 and traj[0, 1] == 1.0

    def test_energy_conservation_undamped(self):
        _, traj = oracles.pendulum_oracle(dt=1e-3, b=0.0)
        energy = traj[:, 1] ** 2 / 2.0 - 9.81 * np.cos(traj[:, 0])
        assert np.max(np.abs(energy - energy[0])) < 1e-7

    def test_step_halving_agreement(self):
        _, a = oracles.pendulum_oracle(dt=1e-3)
        _, b = oracles.pendulum_oracle(dt=5e-4)
        assert np.max(np.abs(a - b[::2])) < 1e-8

    def test_large_dt_rejected(self):
        with pytest.raises(ValueError):
            oracles.pendulum_oracle(dt=1e-2)


class TestMultiscale:
    def test_exact_satisfies_ic(self):
        assert pb.multiscale_exact(np.zeros(1))[0] == 0.0

    def test_exact_satisfies_residual(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 20, size=(1000, 1))
        xj = Jet.seed(x, X, order=1)
        s = ad.add(ad.sin(xj), ad.sin(ad.mul(15.0, xj)))
        r = pb.multiscale_residual(s, x)
        assert np.max(np.abs(ad.value_of(r))) < 1e-9

    def test_partial_solution_residual(self):
        x = np.zeros((1, 1))
        s = ad.sin(Jet.seed(x, X, order=1))
        r = pb.multiscale_residual(s, x)
        assert ad.value_of(r)[0, 0] == pytest.approx(-15.0, rel=1e-12)


class TestWave:
    def test_exact_satisfies_residual_c2(self):
        rng = np.random.default_rng(2)
        xt = rng.uniform(0, 1, size=(1000, 2))
        xj, tj = jet_xt(xt[:, :1], xt[:, 1:])
        c, a = 2.0, 0.5
        s = ad.add(ad.mul(ad.sin(ad.mul(np.pi, xj)), ad.cos(ad.mul(c * np.pi, tj))),
                   ad.mul(a, ad.mul(ad.sin(ad.mul(4 * np.pi, xj)),
                                    ad.cos(ad.mul(4 * c * np.pi, tj)))))
        r = pb.wave_residual(s, c)
        assert np.max(np.abs(ad.value_of(r))) < 1e-6

    @pytest.mark.parametrize("c", [1.0, 1.5, 4.0])
    def test_general_c_reference_satisfies_residual(self, c):
        rng = np.random.default_rng(3)
        xt = rng.uniform(0, 1, size=(200, 2))
        xj, tj = jet_xt(xt[:, :1], xt[:, 1:])
        s = ad.add(ad.mul(ad.sin(ad.mul(np.pi, xj)), ad.cos(ad.mul(c * np.pi, tj))),
                   ad.mul(0.5, ad.mul(ad.sin(ad.mul(4 * np.pi, xj)),
                                      ad.cos(ad.mul(4 * c * np.pi, tj)))))
        r = pb.wave_residual(s, c)
        assert np.max(np.abs(ad.value_of(r))) < 1e-6

    def test_zero_solution(self):
        z = Jet(np.zeros((5, 1)), {},
                {X: np.zeros((5, 1)), T: np.zeros((5, 1))},
                frozenset({X, T}))
        assert np.all(ad.value_of(pb.wave_residual(z, 2.0)) == 0.0)

    def test_initial_conditions_consistent(self):
        x = np.linspace(0, 1, 57).reshape(-1, 1)
        ref = pb.wave_exact(x, np.zeros_like(x), c=2.0, a=0.5)
        assert np.max(np.abs(ref - pb.wave_initial_displacement(x, 0.5))) < 1e-12
        # velocity at t = 0 vanishes
        h = 1e-6
        vel = (pb.wave_exact(x, np.full_like(x, h), 2.0, 0.5)
               - pb.wave_exact(x, np.full_like(x, -h), 2.0, 0.5)) / (2 * h)
        assert np.max(np.abs(vel)) < 1e-8

    def test_boundaries_vanish(self):
        t = np.linspace(0, 1, 31)
        for c in (1.0, 2.0, 4.0):
            assert np.max(np.abs(pb.wave_exact(np.zeros_like(t), t, c))) < 1e-12
            assert np.max(np.abs(pb.wave_exact(np.ones_like(t), t, c))) < 2e-12


class TestBurgersResidual:
    def test_constant_is_solution(self):
        s = Jet(np.full((4, 1), 0.7),
                {X: np.zeros((4, 1)), T: np.zeros((4, 1))},
                {X: np.zeros((4, 1))}, frozenset({X}))
        assert np.all(ad.value_of(pb.burgers_residual(s, 0.01)) == 0.0)

    def test_linear_profile(self):
        # s(x, t) = x gives r = s s_x = x
        x = np.array([[0.3]])
        xj = Jet.seed(x, X, order=2)
        s = ad.concat([xj], axis=1)
        r = pb.burgers_residual(xj, 0.01)
        assert ad.value_of(r)[0, 0] == pytest.approx(0.3, rel=1e-12)

    def test_reference_solution_fd_residual_convergence(self):
        # second-order finite differences of the solver output: residual
        # RMS should drop about 4x per grid doubling
        u0 = oracles.GrfSampler().sample(3)

        def fd_residual_rms(nx, nt):
            x, t, S = oracles.burgers_reference_solve(u0, 0.01, nx=nx, nt=nt)
            dx, dt = 1.0 / nx, t[1] - t[0]
            S_t = (S[:, 2:] - S[:, :-2]) / (2 * dt)
            S_x = (np.roll(S, -1, 0) - np.roll(S, 1, 0))[:, 1:-1] / (2 * dx)
            S_xx = ((np.roll(S, -1, 0) - 2 * S + np.roll(S, 1, 0))[:, 1:-1]
                    / dx ** 2)
            r = S_t + S[:, 1:-1] * S_x - 0.01 * S_xx
            return float(np.sqrt(np.mean(r ** 2)))

        coarse = fd_residual_rms(256, 2048)
        fine = fd_residual_rms(512, 8192)
        ratio = coarse / fine
        assert 2.5 < ratio < 8.0


class TestBurgersSolver:
    def test_constant_preserved(self):
        _, _, S = oracles.burgers_reference_solve(np.full(101, 0.4), 0.01, nx=256)
        assert np.max(np.abs(S - 0.4)) == 0.0

    def test_dissipation_monotone(self):
        u0 = np.sin(2 * np.pi * np.arange(256) / 256)
        _, _, S = oracles.burgers_reference_solve(u0, 1.0, nx=256)
        norms = np.linalg.norm(S, axis=0)
        alive = norms > 1e-12 * norms[0]
        assert np.all(np.diff(norms[alive]) < 0)

    def test_grid_doubling_agreement(self):
        u0 = oracles.GrfSampler().sample(7)
        _, _, S1 = oracles.burgers_reference_solve(u0, 0.01, nx=256, nt=4000)
        _, _, S2 = oracles.burgers_reference_solve(u0, 0.01, nx=512, nt=8000)
        a, b = S1[:, ::40], S2[::2, ::80]
        assert np.linalg.norm(a - b) / np.linalg.norm(b) < 1e-4

    def test_cfl_violation_names_nt(self):
        with pytest.raises(ValueError, match="nt >="):
            oracles.burgers_reference_solve(np.full(101, 0.4), 0.01, nx=256, nt=10)

    def test_parameter_validation(self):
        with pytest.raises(ValueError, match="viscosity"):
            oracles.burgers_reference_solve(np.full(101, 0.1), 1e-5)
        with pytest.raises(ValueError, match="power of two"):
            oracles.burgers_reference_solve(np.full(101, 0.1), 0.01, nx=300)


class TestGrf:
    def test_k0_mode_variance(self):
        g = oracles.GrfSampler()
        assert g.mode_variance(0) == pytest.approx(625.0 * 25.0 ** -4, rel=1e-12)
        assert g.mode_variance(0) == pytest.approx(1.6e-3, rel=1e-12)

    def test_periodicity(self):
        g = oracles.GrfSampler()
        for seed in range(5):
            u = g.sample(seed)
            assert abs(u[0] - u[100]) < 1e-12

    def test_deterministic_per_seed(self):
        assert np.array_equal(oracles.sample_grf(11), oracles.sample_grf(11))

    def test_monte_carlo_variance_matches_spectrum(self):
        g = oracles.GrfSampler()
        rng = np.random.default_rng(99)
        samples = g.sample_many(rng, 10000)
        vhat = float(np.var(samples[:, 50]))
        vref = g.total_variance()
        assert abs(vhat - vref) / vref < 0.05


class TestSamplers:
    def test_deterministic_batches(self):
        prob = pb.make_problem("wave")
        b1 = prob.sample_batch(np.random.default_rng(5), {"residual": 30, "bc": 20})
        b2 = prob.sample_batch(np.random.default_rng(5), {"residual": 30, "bc": 20})
        for key in b1:
            assert np.array_equal(b1[key], b2[key])

    def test_batch_counts(self):
        prob = pb.make_problem("wave")
        b = prob.sample_batch(np.random.default_rng(0), {"residual": 40, "bc": 20})
        assert b["xt_r"].shape == (40, 2)
        assert b["t_bc"].shape == (10, 1)
        assert b["x_ic"].shape == (5, 1)
        assert b["x_icv"].shape == (5, 1)

    def test_empty_residual_batch_rejected(self):
        prob = pb.make_problem("multiscale")
        with pytest.raises(ValueError, match="residual"):
            prob.sample_batch(np.random.default_rng(0), {"residual": 0})

    def test_deeponet_batch_shapes(self):
        prob = pb.make_problem("burgers-deeponet")
        rng = np.random.default_rng(1)
        prob.set_training_data(prob.make_inputs(rng, 4))
        b = prob.sample_batch(rng, {"residual": 12, "bc": 6, "ic": 8})
        assert b["u_r"].shape == (12, 101)
        assert b["xt_r"].shape == (12, 2)
        assert b["u_ic"].shape == (8, 101)
        assert b["target_ic"].shape == (8,)
        assert b["u_bc"].shape == (6, 101)

    def test_deeponet_requires_training_data(self):
        prob = pb.make_problem("burgers-deeponet")
        with pytest.raises(ValueError, match="training data"):
            prob.sample_batch(np.random.default_rng(0), {"residual": 4})

    def test_unknown_problem(self):
        with pytest.raises(ValueError, match="unknown problem"):
            pb.make_problem("navier-stokes")
