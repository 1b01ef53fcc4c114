"""Benchmark problems: residual operators, conditions, samplers, references.

Each problem exposes the same narrow protocol used by the trainer:

* ``sample_batch(rng, sizes)`` draws the collocation/condition points for
  one iteration (uniform over the stated domains, deterministic per rng).
* ``loss_terms(predict, batch, eq_params)`` evaluates the squared-error
  terms {"ic", "bc", "r"} as scalar graph nodes.  ``predict`` maps input
  payloads (arrays or jets) to prediction payloads and is supplied by the
  stacking chain.
* ``eval_reference(eq_params)`` / ``eval_predictions(predict, eq_params)``
  produce matching arrays on a fixed evaluation grid for relative l2
  error reporting.

Derivatives enter through jet seeding: residual points are seeded along
the ``X`` and/or ``T`` directions at the order each operator needs.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Jet
from . import oracles

__all__ = [
    "X",
    "T",
    "mse",
    "pendulum_residual",
    "multiscale_residual",
    "wave_residual",
    "burgers_residual",
    "multiscale_exact",
    "wave_exact",
    "PendulumProblem",
    "MultiscaleProblem",
    "WaveProblem",
    "BurgersOperatorProblem",
    "make_problem",
    "PROBLEM_IDS",
]

X = "x"
T = "t"


def mse(r):
    """Mean squared entries of a payload."""
    return ad.amean(ad.mul(r, r))


# ---------------------------------------------------------------------------
# residual operators


def pendulum_residual(s1, s2, b=0.05, g=9.81, m=1.0, L=1.0):
    """Damped pendulum system residuals.

    s1, s2 are jets of position and velocity carrying first derivatives
    along T.  Returns (r1, r2) with r1 = s1' - s2 and
    r2 = s2' + (b/m) s2 + (g/L) sin(s1).
    """
    r1 = ad.sub(s1.first(T), s2.f)
    r2 = ad.add(ad.add(s2.first(T), ad.mul(b / m, s2.f)),
                ad.mul(g / L, ad.sin(s1.f)))
    return r1, r2


def multiscale_residual(s, x, omega1=1.0, omega2=15.0):
    """r = s' - w1 cos(w1 x) - w2 cos(w2 x); forcing evaluated at plain x."""
    forcing = omega1 * np.cos(omega1 * x) + omega2 * np.cos(omega2 * x)
    return ad.sub(s.first(X), forcing)


def wave_residual(s, c):
    """r = s_tt - c^2 s_xx for a jet with order-2 X and T directions."""
    return ad.sub(s.second(T), ad.mul(c * c, s.second(X)))


def burgers_residual(s, nu):
    """r = s_t + s s_x - nu s_xx for a jet with order-2 X and order-1 T."""
    return ad.sub(ad.add(s.first(T), ad.mul(s.f, s.first(X))),
                  ad.mul(nu, s.second(X)))


# ---------------------------------------------------------------------------
# closed forms


def multiscale_exact(x, omega1=1.0, omega2=15.0):
    return np.sin(omega1 * x) + np.sin(omega2 * x)


def wave_exact(x, t, c, a=0.5):
    """Standing-wave solution sin(pi x) cos(c pi t) + a sin(4 pi x) cos(4 c pi t).

    At c = 2 this is the usual two-harmonic reference with cos(2 pi t)
    leading term; the same form satisfies the equation for any c.
    """
    return (np.sin(np.pi * x) * np.cos(c * np.pi * t)
            + a * np.sin(4.0 * np.pi * x) * np.cos(4.0 * c * np.pi * t))


def wave_initial_displacement(x, a=0.5):
    return np.sin(np.pi * x) + a * np.sin(4.0 * np.pi * x)


# ---------------------------------------------------------------------------
# problems


class PendulumProblem:
    id = "pendulum"
    kind = "pinn"
    coord_dim = 1
    output_dim = 2
    t_max = 20.0
    default_eq_params = {}
    anneal_key = None

    def __init__(self):
        self._oracle = None

    def sample_batch(self, rng, sizes):
        n_r = int(sizes.get("residual", 0))
        if n_r <= 0:
            raise ValueError("residual batch must be non-empty")
        return {"t_r": rng.uniform(0.0, self.t_max, size=(n_r, 1))}

    def loss_terms(self, predict, batch, eq_params):
        # one forward pass covers residual points plus the t=0 condition
        t_r = batch["t_r"]
        n = t_r.shape[0]
        t_all = np.concatenate([t_r, np.zeros((1, 1))])
        pred = predict(Jet.seed(t_all, T, order=1))
        pred_r = ad.rows(pred, 0, n)
        r1, r2 = pendulum_residual(ad.column(pred_r, 0), ad.column(pred_r, 1))
        loss_r = ad.add(mse(r1), mse(r2))
        ic = ad.sub(ad.rows(pred.f, n, n + 1), np.array([[1.0, 1.0]]))
        return {"ic": mse(ic), "r": loss_r}

    def oracle(self):
        if self._oracle is None:
            self._oracle = oracles.pendulum_oracle(T=self.t_max, dt=1e-4)
        return self._oracle

    def eval_inputs(self):
        return np.linspace(0.0, self.t_max, 2000).reshape(-1, 1)

    def eval_reference(self, eq_params):
        t_grid, traj = self.oracle()
        te = self.eval_inputs()[:, 0]
        return np.stack([np.interp(te, t_grid, traj[:, 0]),
                         np.interp(te, t_grid, traj[:, 1])], axis=1)

    def eval_predictions(self, predict, eq_params):
        return ad.value_of(predict(self.eval_inputs()))


class MultiscaleProblem:
    id = "multiscale"
    kind = "pinn"
    coord_dim = 1
    output_dim = 1
    x_max = 20.0
    omega1 = 1.0
    omega2 = 15.0
    default_eq_params = {}
    anneal_key = None

    def sample_batch(self, rng, sizes):
        n_r = int(sizes.get("residual", 0))
        if n_r <= 0:
            raise ValueError("residual batch must be non-empty")
        return {"x_r": rng.uniform(0.0, self.x_max, size=(n_r, 1))}

    def loss_terms(self, predict, batch, eq_params):
        x_r = batch["x_r"]
        n = x_r.shape[0]
        x_all = np.concatenate([x_r, np.zeros((1, 1))])
        pred = predict(Jet.seed(x_all, X, order=1))
        r = multiscale_residual(ad.rows(pred, 0, n), x_r, self.omega1, self.omega2)
        ic = ad.rows(pred.f, n, n + 1)
        return {"ic": mse(ic), "r": mse(r)}

    def eval_inputs(self):
        return np.linspace(0.0, self.x_max, 2000).reshape(-1, 1)

    def eval_reference(self, eq_params):
        x = self.eval_inputs()
        return multiscale_exact(x, self.omega1, self.omega2)

    def eval_predictions(self, predict, eq_params):
        return ad.value_of(predict(self.eval_inputs()))


class WaveProblem:
    """1-D wave equation on [0, 1] x [0, 1] with Dirichlet boundaries.

    The condition batch is split evenly: the two boundaries, the
    displacement IC and the velocity IC each receive a quarter of the
    configured "bc" count.
    """

    id = "wave"
    kind = "pinn"
    coord_dim = 2
    output_dim = 1
    amplitude = 0.5
    default_eq_params = {"c": 2.0}
    anneal_key = "c"

    def sample_batch(self, rng, sizes):
        n_r = int(sizes.get("residual", 0))
        n_bc = int(sizes.get("bc", 0))
        if n_r <= 0:
            raise ValueError("residual batch must be non-empty")
        quarter = max(n_bc // 4, 1)
        return {
            "xt_r": rng.uniform(0.0, 1.0, size=(n_r, 2)),
            "t_bc": rng.uniform(0.0, 1.0, size=(2 * quarter, 1)),
            "x_ic": rng.uniform(0.0, 1.0, size=(quarter, 1)),
            "x_icv": rng.uniform(0.0, 1.0, size=(quarter, 1)),
        }

    def loss_terms(self, predict, batch, eq_params):
        # two passes: order-2 jets on residual points only, a cheap
        # order-1 pass for every boundary/initial condition row
        c = float(eq_params["c"])
        xt = batch["xt_r"]
        pred_r = predict(ad.concat([Jet.seed(xt[:, :1], X, order=2),
                                    Jet.seed(xt[:, 1:], T, order=2)], axis=1))
        loss_r = mse(wave_residual(pred_r, c))

        t_bc = batch["t_bc"]
        x_ic = batch["x_ic"]
        x_icv = batch["x_icv"]
        n_bc, n_ic, n_icv = t_bc.shape[0], x_ic.shape[0], x_icv.shape[0]
        half = n_bc // 2
        xs = np.concatenate([np.zeros((half, 1)), np.ones((n_bc - half, 1)),
                             x_ic, x_icv])
        ts = np.concatenate([t_bc, np.zeros((n_ic + n_icv, 1))])
        pred = predict(ad.concat([Jet(xs), Jet.seed(ts, T, order=1)], axis=1))
        loss_bc = mse(ad.rows(pred.f, 0, n_bc))
        target = wave_initial_displacement(x_ic, self.amplitude)
        loss_disp = mse(ad.sub(ad.rows(pred.f, n_bc, n_bc + n_ic), target))
        loss_vel = mse(ad.rows(pred.first(T), n_bc + n_ic, n_bc + n_ic + n_icv))
        return {"ic": ad.add(loss_disp, loss_vel), "bc": loss_bc, "r": loss_r}

    def eval_inputs(self):
        g = np.linspace(0.0, 1.0, 101)
        xx, tt = np.meshgrid(g, g, indexing="ij")
        return np.stack([xx.ravel(), tt.ravel()], axis=1)

    def eval_reference(self, eq_params):
        xt = self.eval_inputs()
        return wave_exact(xt[:, :1], xt[:, 1:], float(eq_params["c"]), self.amplitude)

    def eval_predictions(self, predict, eq_params):
        return ad.value_of(predict(self.eval_inputs()))


class BurgersOperatorProblem:
    """Operator learning for viscous Burgers with GRF initial conditions.

    Training inputs are sensor vectors of GRF samples; references for
    evaluation come from the pseudospectral solver at the run's target
    viscosity.  ``set_training_data`` must be called before sampling
    batches.
    """

    id = "burgers-deeponet"
    kind = "deeponet"
    coord_dim = 2
    output_dim = 1
    n_sensors = 101
    default_eq_params = {"nu": 1e-4}
    anneal_key = "nu"

    def __init__(self):
        self.grf = oracles.GrfSampler(n_sensors=self.n_sensors)
        self.train_u = None
        self._test_cache = {}

    def set_training_data(self, u):
        u = np.asarray(u, dtype=np.float64)
        if u.ndim != 2 or u.shape[1] != self.n_sensors:
            raise ValueError(f"training data must be (n, {self.n_sensors})")
        self.train_u = u

    def make_inputs(self, rng, n):
        return self.grf.sample_many(rng, n)

    def sample_batch(self, rng, sizes):
        if self.train_u is None:
            raise ValueError("no training data: call set_training_data first")
        n = self.train_u.shape[0]
        n_r = int(sizes.get("residual", 0))
        n_bc = int(sizes.get("bc", 0))
        n_ic = int(sizes.get("ic", n_bc))
        if n_r <= 0:
            raise ValueError("residual batch must be non-empty")
        idx_r = rng.integers(0, n, size=n_r)
        idx_ic = rng.integers(0, n, size=n_ic)
        sensor_ic = rng.integers(0, self.n_sensors, size=n_ic)
        idx_bc = rng.integers(0, n, size=n_bc)
        return {
            "u_r": self.train_u[idx_r],
            "xt_r": rng.uniform(0.0, 1.0, size=(n_r, 2)),
            "u_ic": self.train_u[idx_ic],
            "x_ic": self.grf.sensors[sensor_ic].reshape(-1, 1),
            "target_ic": self.train_u[idx_ic, sensor_ic],
            "u_bc": self.train_u[idx_bc],
            "t_bc": rng.uniform(0.0, 1.0, size=(n_bc, 1)),
        }

    def _point_values(self, predict, batch, eq_params):
        """Per-point residual / condition values from two forward passes
        (order-2 jets on residual points, order-1 on condition rows)."""
        nu = float(eq_params["nu"])
        xt = batch["xt_r"]
        pred_r = predict(batch["u_r"],
                         ad.concat([Jet.seed(xt[:, :1], X, order=2),
                                    Jet.seed(xt[:, 1:], T, order=1)], axis=1))
        r = burgers_residual(pred_r, nu)

        x_ic, t_bc = batch["x_ic"], batch["t_bc"]
        n_ic, n_bc = x_ic.shape[0], t_bc.shape[0]
        xs = np.concatenate([x_ic, np.zeros((n_bc, 1)), np.ones((n_bc, 1))])
        ts = np.concatenate([np.zeros((n_ic, 1)), t_bc, t_bc])
        u_all = np.concatenate([batch["u_ic"], batch["u_bc"], batch["u_bc"]])
        pred = predict(u_all, ad.concat([Jet.seed(xs, X, order=1),
                                         Jet(ts)], axis=1))
        ic = ad.sub(ad.rows(pred.f, 0, n_ic), batch["target_ic"])
        left = ad.rows(pred, n_ic, n_ic + n_bc)
        right = ad.rows(pred, n_ic + n_bc, n_ic + 2 * n_bc)
        bc_val = ad.sub(left.f, right.f)
        bc_der = ad.sub(left.first(X), right.first(X))
        return {"r": r, "ic": ic, "bc_val": bc_val, "bc_der": bc_der}

    def loss_terms(self, predict, batch, eq_params):
        vals = self._point_values(predict, batch, eq_params)
        return {"ic": mse(vals["ic"]),
                "bc": ad.add(mse(vals["bc_val"]), mse(vals["bc_der"])),
                "r": mse(vals["r"])}

    def point_terms(self, predict, batch, eq_params):
        """Per-point loss operator values for NTK weighting: residual
        values and periodic-mismatch values, ungrouped and unsquared."""
        vals = self._point_values(predict, batch, eq_params)
        bc = ad.concat([ad.reshape(vals["bc_val"], (-1, 1)),
                        ad.reshape(vals["bc_der"], (-1, 1))], axis=0)
        return {"r": vals["r"], "bc": ad.reshape(bc, (-1,))}

    def test_set(self, seed, n_test):
        rng = np.random.default_rng([int(seed), 7919])
        return self.grf.sample_many(rng, n_test)

    def test_references(self, u_test, nu):
        key = (round(float(nu), 12), u_test.shape[0], hash(u_test.tobytes()))
        if key not in self._test_cache:
            self._test_cache[key] = np.stack(
                [oracles.burgers_eval_grid(u, nu) for u in u_test])
        return self._test_cache[key]

    def eval_coords(self):
        g = np.linspace(0.0, 1.0, 101)
        xx, tt = np.meshgrid(g, g, indexing="ij")
        return np.stack([xx.ravel(), tt.ravel()], axis=1)

    def eval_predictions_for(self, predict, u_sensor):
        coords = self.eval_coords()
        u_rep = np.broadcast_to(u_sensor, (coords.shape[0], self.n_sensors))
        out = ad.value_of(predict(u_rep, coords))
        return out.reshape(101, 101)


PROBLEM_IDS = ("pendulum", "multiscale", "wave", "burgers-deeponet")


def make_problem(problem_id):
    table = {
        "pendulum": PendulumProblem,
        "multiscale": MultiscaleProblem,
        "wave": WaveProblem,
        "burgers-deeponet": BurgersOperatorProblem,
    }
    if problem_id not in table:
        raise ValueError(
            f"unknown problem '{problem_id}'; choose one of {', '.join(PROBLEM_IDS)}")
    return table[problem_id]()
