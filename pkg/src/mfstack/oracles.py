"""Independent numerical references for the benchmark problems.

These never touch the network stack: a classical RK4 integrator for the
damped pendulum, a dealiased Fourier pseudospectral solver for viscous
Burgers, and a spectral sampler for the Gaussian random field that
generates Burgers initial conditions.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "pendulum_oracle",
    "GrfSampler",
    "sample_grf",
    "burgers_reference_solve",
    "burgers_eval_grid",
    "trig_interpolate",
]


def pendulum_oracle(T=20.0, dt=1e-4, s0=(1.0, 1.0), b=0.05, g=9.81, m=1.0, L=1.0):
    """Dense damped-pendulum trajectory by classical RK4.

    Returns (t, traj) with traj of shape (n_steps + 1, 2) holding
    (position, velocity).  Halving dt moves the trajectory by less than
    1e-8 in sup norm (checked in the test suite).
    """
    if dt > 1e-3:
        raise ValueError(f"dt must be <= 1e-3 for oracle accuracy, got {dt}")
    n = int(round(T / dt))
    bm = b / m
    gl = g / L
    out = np.empty((n + 1, 2))
    s1, s2 = float(s0[0]), float(s0[1])
    out[0] = (s1, s2)
    sin = math.sin
    for i in range(n):
        k1a = s2
        k1b = -bm * s2 - gl * sin(s1)
        y1a = s1 + 0.5 * dt * k1a
        y1b = s2 + 0.5 * dt * k1b
        k2a = y1b
        k2b = -bm * y1b - gl * sin(y1a)
        y2a = s1 + 0.5 * dt * k2a
        y2b = s2 + 0.5 * dt * k2b
        k3a = y2b
        k3b = -bm * y2b - gl * sin(y2a)
        y3a = s1 + dt * k3a
        y3b = s2 + dt * k3b
        k4a = y3b
        k4b = -bm * y3b - gl * sin(y3a)
        s1 += dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        s2 += dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        out[i + 1] = (s1, s2)
    t = np.linspace(0.0, n * dt, n + 1)
    return t, out


class GrfSampler:
    """Periodic Gaussian random field on [0, 1] by spectral synthesis.

    Mode k carries independent cos/sin coefficients with variance
    amplitude * ((2 pi k)^2 + shift)^(-exponent); defaults give the
    N(0, 25^2 (-Lap + 5^2 I)^(-4)) field truncated at K = 32 modes,
    sampled at 101 uniform sensor locations.
    """

    def __init__(self, n_sensors=101, K=32, amplitude=25.0 ** 2, shift=5.0 ** 2,
                 exponent=4.0):
        self.n_sensors = n_sensors
        self.K = K
        self.amplitude = amplitude
        self.shift = shift
        self.exponent = exponent
        self.sensors = np.linspace(0.0, 1.0, n_sensors)

    def mode_variance(self, k):
        return self.amplitude * ((2.0 * np.pi * k) ** 2 + self.shift) ** (-self.exponent)

    def total_variance(self):
        """Pointwise variance of u(x), identical for every x."""
        ks = np.arange(self.K + 1)
        return float(np.sum(self.mode_variance(ks)))

    def coefficients(self, rng):
        """Draw (cos_coeffs, sin_coeffs), each of length K + 1 (sin_0 unused)."""
        ks = np.arange(self.K + 1)
        std = np.sqrt(self.mode_variance(ks))
        a = rng.normal(size=self.K + 1) * std
        b = rng.normal(size=self.K + 1) * std
        b[0] = 0.0
        return a, b

    def evaluate(self, coeffs, x):
        a, b = coeffs
        x = np.asarray(x, dtype=np.float64)
        ks = np.arange(self.K + 1)
        phase = 2.0 * np.pi * np.multiply.outer(x, ks)
        return np.cos(phase) @ a + np.sin(phase) @ b

    def sample(self, seed):
        """Sensor vector u[n_sensors] for one seed; u[0] == u[-1] exactly."""
        rng = np.random.default_rng(seed)
        return self.evaluate(self.coefficients(rng), self.sensors)

    def sample_many(self, rng, n):
        return np.stack([self.evaluate(self.coefficients(rng), self.sensors)
                         for _ in range(n)])


def sample_grf(seed):
    return GrfSampler().sample(seed)


def trig_interpolate(values, n_out, duplicate_endpoint="auto"):
    """Exact trigonometric resampling of a periodic signal.

    ``values`` samples one period at uniform points, with or without the
    duplicated right endpoint; returns n_out samples (no duplicate).
    """
    values = np.asarray(values, dtype=np.float64)
    if duplicate_endpoint == "auto":
        duplicate_endpoint = values.size > 1 and abs(values[0] - values[-1]) < 1e-12
    if duplicate_endpoint:
        values = values[:-1]
    n_in = values.size
    spec = np.fft.rfft(values)
    out_spec = np.zeros(n_out // 2 + 1, dtype=complex)
    m = min(spec.size, out_spec.size)
    out_spec[:m] = spec[:m]
    return np.fft.irfft(out_spec, n_out) * (n_out / n_in)


def _cfl_steps(u0_grid, nu, nx):
    kmax = 2.0 * np.pi * (nx // 3)  # largest wavenumber kept by 2/3 dealiasing
    dt_diff = 2.78 / (nu * kmax ** 2)
    umax = float(np.max(np.abs(u0_grid)))
    dt_adv = 2.8 / (kmax * umax) if umax > 0 else np.inf
    dt_max = 0.9 * min(dt_diff, dt_adv)
    return int(math.ceil(1.0 / dt_max))


def burgers_reference_solve(u0, nu, nx=512, nt=None):
    """Viscous Burgers on [0, 1] x [0, 1], periodic, pseudospectral + RK4.

    ``u0`` is a sensor vector sampled uniformly on [0, 1] (duplicate
    endpoint allowed) or a callable on [0, 1).  ``nt`` is the RK4 step
    count; when omitted it is chosen from the CFL bound.  Returns
    (x, t, S) with x of shape (nx,), t of shape (nt + 1,) and S of shape
    (nx, nt + 1) holding every time level.
    """
    if nu < 1e-4:
        raise ValueError(f"viscosity must be >= 1e-4, got {nu}")
    if nx < 256 or nx & (nx - 1):
        raise ValueError(f"nx must be a power of two >= 256, got {nx}")
    x = np.arange(nx) / nx
    if callable(u0):
        u_grid = np.asarray(u0(x), dtype=np.float64)
    else:
        u_grid = trig_interpolate(u0, nx)
    needed = _cfl_steps(u_grid, nu, nx)
    if nt is None:
        nt = needed
    elif nt < needed:
        raise ValueError(
            f"CFL violation: nt={nt} is unstable for nu={nu}, nx={nx}; "
            f"use nt >= {needed}")
    dt = 1.0 / nt
    k = 2.0 * np.pi * np.fft.rfftfreq(nx, d=1.0 / nx)
    dealias = np.abs(np.fft.rfftfreq(nx, d=1.0 / nx)) <= nx // 3
    visc = -nu * k ** 2
    ik_half = 0.5j * k

    def rhs(u_hat):
        u = np.fft.irfft(u_hat, nx)
        conv = np.fft.rfft(u * u)
        return (-ik_half * conv + visc * u_hat) * dealias

    S = np.empty((nx, nt + 1))
    # project onto the dealiased band: modes above the 2/3 cutoff stay
    # exactly zero, so the CFL bound is set by the retained wavenumbers
    u_hat = np.fft.rfft(u_grid) * dealias
    u_grid = np.fft.irfft(u_hat, nx)
    S[:, 0] = u_grid
    for i in range(nt):
        k1 = rhs(u_hat)
        k2 = rhs(u_hat + 0.5 * dt * k1)
        k3 = rhs(u_hat + 0.5 * dt * k2)
        k4 = rhs(u_hat + dt * k3)
        u_hat = u_hat + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        S[:, i + 1] = np.fft.irfft(u_hat, nx)
    t = np.linspace(0.0, 1.0, nt + 1)
    return x, t, S


def burgers_eval_grid(u0, nu, n_eval=101, nx=256):
    """Reference solution resampled onto an (n_eval, n_eval) space-time
    grid covering [0, 1] x [0, 1] inclusive of both endpoints."""
    base = _cfl_steps(trig_interpolate(u0, nx) if not callable(u0)
                      else np.asarray(u0(np.arange(nx) / nx)), nu, nx)
    per = n_eval - 1
    nt = int(math.ceil(base / per)) * per
    _, _, S = burgers_reference_solve(u0, nu, nx=nx, nt=nt)
    cols = S[:, ::nt // per]
    out = np.empty((n_eval, n_eval))
    for j in range(n_eval):
        fine = trig_interpolate(cols[:, j], n_eval - 1, duplicate_endpoint=False)
        out[:-1, j] = fine
        out[-1, j] = fine[0]
    return out
