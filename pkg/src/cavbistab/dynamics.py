"""Mean-field (c-number) equations of motion, integration and linear stability.

For atoms at phases kz_j with field E_j = e^{ikz_j} a+ + e^{-ikz_j} a-:

    ds_j/dt  = (i delta_a - gamma/2) s_j - i g E_j z_j
    dz_j/dt  = 2i g E_j conj(s_j) - 2i g conj(E_j) s_j - gamma (1 + z_j)
    da+-/dt  = (i delta_c - kappa) a+- + i g sum_j s_j e^{-+ikz_j} + eta+-

where s_j is the atomic coherence and z_j the inversion.  The sign of the
collective source term in the field equation is the one whose fixed points
are the absorptive steady states of :mod:`cavbistab.steadystate`.

All atoms of a homogeneous cloud driven in one mode obey identical equations,
so the default state holds a single representative atom and a single mode
(five real coordinates: Re s, Im s, z, Re a, Im a).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .params import SystemParams
from .steadystate import SteadyStateSolution

MARGINAL_BAND = 1e-6
JACOBIAN_STEP = 1e-6


class IntegrationError(RuntimeError):
    """Integrator gave up; ``state`` and ``t`` hold the last valid point."""

    def __init__(self, message, state=None, t=None):
        super().__init__(message)
        self.state = state
        self.t = t


class NotSteadyError(ValueError):
    """Stability analysis was requested for a point that is not a fixed point."""


@dataclass(frozen=True)
class MeanFieldState:
    """Atomic coherences/inversions and the two field amplitudes.

    ``positions`` is ``None`` for the homogeneous reduction, in which case the
    atomic arrays have length one and ``alpha_minus`` is ignored.
    """

    sigma_minus: np.ndarray
    sigma_z: np.ndarray
    alpha_plus: complex
    alpha_minus: complex = 0j
    positions: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "sigma_minus", np.atleast_1d(np.asarray(self.sigma_minus, dtype=complex)))
        object.__setattr__(self, "sigma_z", np.atleast_1d(np.asarray(self.sigma_z, dtype=float)))
        if self.sigma_minus.shape != self.sigma_z.shape:
            raise ValueError("sigma_minus and sigma_z must have the same length")
        if self.positions is not None:
            pos = np.asarray(self.positions, dtype=float)
            if pos.shape != self.sigma_z.shape:
                raise ValueError("one position per atom is required")
            object.__setattr__(self, "positions", pos)
        elif self.sigma_z.shape != (1,):
            raise ValueError("homogeneous state carries exactly one representative atom")

    @property
    def homogeneous(self) -> bool:
        return self.positions is None

    @property
    def photon_number(self) -> float:
        return abs(self.alpha_plus) ** 2

    def bloch_excess(self) -> float:
        """max(|s|^2 - (1 - z^2)/4); positive values leave the Bloch ball."""
        return float(np.max(np.abs(self.sigma_minus) ** 2 - 0.25 * (1.0 - self.sigma_z**2)))

    def to_vector(self) -> np.ndarray:
        s, z = self.sigma_minus, self.sigma_z
        if self.homogeneous:
            return np.array([s[0].real, s[0].imag, z[0], self.alpha_plus.real, self.alpha_plus.imag])
        a_p, a_m = complex(self.alpha_plus), complex(self.alpha_minus)
        return np.concatenate([s.real, s.imag, z, [a_p.real, a_p.imag, a_m.real, a_m.imag]])

    @classmethod
    def from_vector(cls, y, positions=None) -> MeanFieldState:
        y = np.asarray(y, dtype=float)
        if positions is None:
            return cls(complex(y[0], y[1]), y[2], complex(y[3], y[4]))
        n = len(positions)
        return cls(y[:n] + 1j * y[n : 2 * n], y[2 * n : 3 * n], complex(y[3 * n], y[3 * n + 1]),
                   complex(y[3 * n + 2], y[3 * n + 3]), positions)

    @classmethod
    def ground(cls, positions=None) -> MeanFieldState:
        if positions is None:
            return cls(0j, -1.0, 0j)
        n = len(positions)
        return cls(np.zeros(n, complex), -np.ones(n), 0j, 0j, positions)

    @classmethod
    def from_steady(cls, params: SystemParams, solution: SteadyStateSolution) -> MeanFieldState:
        return cls(solution.sigma_minus, solution.sigma_z, solution.alpha_plus)


@dataclass(frozen=True)
class RampSpec:
    """Linear ramp of delta_a or of the forward pump rate eta_plus.

    For ``axis="delta_a"`` the cavity detuning follows so that ``hold``
    ("delta_ca" or "delta_c") stays at its value in the base parameters.
    After ``duration`` the ramp stays at ``stop``.
    """

    axis: str
    start: float
    stop: float
    duration: float
    hold: str = "delta_ca"

    def __post_init__(self):
        if self.axis not in ("delta_a", "pump"):
            raise ValueError("ramp axis must be 'delta_a' or 'pump'")
        if not self.duration > 0:
            raise ValueError("ramp duration must be positive")
        if self.hold not in ("delta_ca", "delta_c"):
            raise ValueError("hold must be 'delta_ca' or 'delta_c'")

    def value(self, t):
        frac = np.clip(np.asarray(t, dtype=float) / self.duration, 0.0, 1.0)
        return self.start + (self.stop - self.start) * frac

    def apply(self, params: SystemParams, t: float) -> tuple[float, float, float]:
        """(delta_a, delta_c, eta_plus) at time ``t``."""
        v = float(self.value(t))
        if self.axis == "pump":
            return params.delta_a, params.delta_c, v
        dc = v - params.delta_ca if self.hold == "delta_ca" else params.delta_c
        return v, dc, params.eta_plus


@dataclass(frozen=True)
class IntegratorControls:
    rtol: float = 1e-8
    atol: float = 1e-10
    method: str = "DOP853"
    n_samples: int = 201
    t_eval: np.ndarray | None = None
    max_step: float = np.inf


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray  # shape (len(t), dim)
    positions: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def state(self, k: int = -1) -> MeanFieldState:
        return MeanFieldState.from_vector(self.y[k], self.positions)

    @property
    def final_state(self) -> MeanFieldState:
        return self.state(-1)

    @property
    def photon_number(self) -> np.ndarray:
        if self.positions is None:
            return self.y[:, 3] ** 2 + self.y[:, 4] ** 2
        n = len(self.positions)
        return self.y[:, 3 * n] ** 2 + self.y[:, 3 * n + 1] ** 2


# ---------------------------------------------------------------------------
# right-hand sides


def homogeneous_rhs(y, g, n_atoms, gamma, kappa, delta_a, delta_c, eta):
    """Vectorized homogeneous-reduction derivative; ``y`` has shape (..., 5)."""
    y = np.asarray(y, dtype=float)
    s = y[..., 0] + 1j * y[..., 1]
    z = y[..., 2]
    a = y[..., 3] + 1j * y[..., 4]
    ds = (1j * delta_a - 0.5 * gamma) * s - 1j * g * a * z
    dz = (2j * g * a * np.conj(s) - 2j * g * np.conj(a) * s).real - gamma * (1.0 + z)
    da = (1j * delta_c - kappa) * a + 1j * g * n_atoms * s + eta
    return np.stack([ds.real, ds.imag, dz, da.real, da.imag], axis=-1)


def _per_atom_rhs(y, positions, params, delta_a, delta_c, eta_plus):
    n = len(positions)
    s = y[:n] + 1j * y[n : 2 * n]
    z = y[2 * n : 3 * n]
    a_p = complex(y[3 * n], y[3 * n + 1])
    a_m = complex(y[3 * n + 2], y[3 * n + 3])
    phase = np.exp(1j * positions)
    e = phase * a_p + np.conj(phase) * a_m
    g = params.g
    ds = (1j * delta_a - 0.5 * params.gamma) * s - 1j * g * e * z
    dz = (2j * g * e * np.conj(s) - 2j * g * np.conj(e) * s).real - params.gamma * (1.0 + z)
    loss = 1j * delta_c - params.kappa
    da_p = loss * a_p + 1j * g * np.sum(s * np.conj(phase)) + eta_plus
    da_m = loss * a_m + 1j * g * np.sum(s * phase) + params.eta_minus
    return np.concatenate([ds.real, ds.imag, dz, [da_p.real, da_p.imag, da_m.real, da_m.imag]])


def _controls_at(params: SystemParams, ramp: RampSpec | None, t: float):
    if ramp is None:
        return params.delta_a, params.delta_c, params.eta_plus
    return ramp.apply(params, t)


def rhs(state: MeanFieldState, params: SystemParams, t: float = 0.0, ramp: RampSpec | None = None) -> MeanFieldState:
    """Time derivative of ``state`` (returned as a state-shaped object)."""
    da, dc, eta = _controls_at(params, ramp, t)
    y = state.to_vector()
    if state.homogeneous:
        dy = homogeneous_rhs(y, params.g, params.n_atoms, params.gamma, params.kappa, da, dc, eta)
    else:
        if len(state.positions) != params.n_atoms:
            raise ValueError("state has a different atom number than params")
        dy = _per_atom_rhs(y, state.positions, params, da, dc, eta)
    return MeanFieldState.from_vector(dy, state.positions)


def rhs_norm(state: MeanFieldState, params: SystemParams) -> float:
    return float(np.max(np.abs(rhs(state, params).to_vector())))


# ---------------------------------------------------------------------------
# integration


def _solve(fun, y0, t_end, controls: IntegratorControls, positions=None):
    if controls.t_eval is not None:
        t_eval = np.asarray(controls.t_eval, dtype=float)
    else:
        t_eval = np.linspace(0.0, t_end, max(int(controls.n_samples), 2))
    sol = solve_ivp(
        fun,
        (0.0, t_end),
        y0,
        method=controls.method,
        t_eval=t_eval,
        rtol=controls.rtol,
        atol=controls.atol,
        max_step=controls.max_step,
    )
    if sol.status < 0:
        last = sol.y[:, -1] if sol.y.size else y0
        t_last = sol.t[-1] if sol.t.size else 0.0
        raise IntegrationError(f"integration failed at t={t_last:.6g}: {sol.message}", last, t_last)
    return Trajectory(sol.t, sol.y.T.copy(), positions, {"nfev": sol.nfev, "method": controls.method})


def integrate(
    state0: MeanFieldState,
    params: SystemParams,
    ramp: RampSpec | None = None,
    t_end: float = 100.0,
    controls: IntegratorControls | None = None,
) -> Trajectory:
    """Integrate the equations of motion from ``state0`` up to ``t_end`` (units of 1/kappa)."""
    controls = controls or IntegratorControls()
    y0 = state0.to_vector()
    if state0.homogeneous:
        base = (params.g, params.n_atoms, params.gamma, params.kappa)

        def fun(t, y):
            da, dc, eta = _controls_at(params, ramp, t)
            return homogeneous_rhs(y, *base, da, dc, eta)

    else:
        positions = state0.positions
        if len(positions) != params.n_atoms:
            raise ValueError("state has a different atom number than params")

        def fun(t, y):
            da, dc, eta = _controls_at(params, ramp, t)
            return _per_atom_rhs(y, positions, params, da, dc, eta)

    return _solve(fun, y0, t_end, controls, state0.positions)


def integrate_many(
    states: list[MeanFieldState],
    params: SystemParams,
    t_end: float,
    controls: IntegratorControls | None = None,
) -> list[Trajectory]:
    """Integrate several homogeneous states at once as one stacked system."""
    controls = controls or IntegratorControls()
    if not all(s.homogeneous for s in states):
        raise ValueError("integrate_many supports homogeneous states only")
    y0 = np.concatenate([s.to_vector() for s in states])
    base = (params.g, params.n_atoms, params.gamma, params.kappa, params.delta_a, params.delta_c, params.eta_plus)

    def fun(t, y):
        return homogeneous_rhs(y.reshape(-1, 5), *base).ravel()

    traj = _solve(fun, y0, t_end, controls)
    out = []
    for k in range(len(states)):
        out.append(Trajectory(traj.t, traj.y[:, 5 * k : 5 * k + 5], None, dict(traj.info)))
    return out


def random_states(rng: np.random.Generator, count: int, alpha_scale: float) -> list[MeanFieldState]:
    """Random homogeneous states inside the Bloch ball with |alpha| up to ``alpha_scale``."""
    out = []
    for _ in range(count):
        v = rng.normal(size=3)
        v *= rng.uniform() ** (1 / 3) / np.linalg.norm(v)
        # Bloch vector (x, y, z) with s = (x - i y) / 2
        s = 0.5 * complex(v[0], -v[1])
        a = alpha_scale * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
        out.append(MeanFieldState(s, v[2], a))
    return out


# ---------------------------------------------------------------------------
# linear stability


def fixed_point_vectors(g, gamma, delta_a, alpha):
    """Stationary atom for field ``alpha``: returns the 5-vector(s) of the fixed point."""
    alpha = np.asarray(alpha, dtype=complex)
    ratio = g / (np.asarray(delta_a, dtype=float) + 0.5j * gamma)
    z = -1.0 / (1.0 + 2.0 * np.abs(ratio) ** 2 * np.abs(alpha) ** 2)
    s = ratio * alpha * z
    return np.stack([s.real, s.imag, z, alpha.real, alpha.imag], axis=-1)


def jacobians(y, g, n_atoms, gamma, kappa, delta_a, delta_c, eta, step=JACOBIAN_STEP):
    """Central-difference Jacobians of the homogeneous flow, shape (..., 5, 5)."""
    y = np.asarray(y, dtype=float)
    jac = np.empty(y.shape + (5,))
    for k in range(5):
        e = np.zeros(5)
        e[k] = step
        fp = homogeneous_rhs(y + e, g, n_atoms, gamma, kappa, delta_a, delta_c, eta)
        fm = homogeneous_rhs(y - e, g, n_atoms, gamma, kappa, delta_a, delta_c, eta)
        jac[..., :, k] = (fp - fm) / (2 * step)
    return jac


def leading_real_part(jac) -> np.ndarray:
    return np.max(np.linalg.eigvals(jac).real, axis=-1)


def classify_growth(rate) -> np.ndarray:
    rate = np.asarray(rate, dtype=float)
    tags = np.where(rate < -MARGINAL_BAND, "stable", np.where(rate > MARGINAL_BAND, "unstable", "marginal"))
    return tags


def stability(params: SystemParams, solution: SteadyStateSolution | MeanFieldState) -> tuple[str, float]:
    """Linear stability of a homogeneous fixed point: (tag, leading eigenvalue real part)."""
    state = solution if isinstance(solution, MeanFieldState) else MeanFieldState.from_steady(params, solution)
    if not state.homogeneous:
        raise ValueError("stability analysis is defined on the homogeneous reduction")
    y = state.to_vector()
    args = (params.g, params.n_atoms, params.gamma, params.kappa, params.delta_a, params.delta_c, params.eta_plus)
    residual = float(np.max(np.abs(homogeneous_rhs(y, *args))))
    if residual > 1e-8 * params.kappa * (1.0 + params.eta_plus / params.kappa):
        raise NotSteadyError(f"state is not stationary (|rhs| = {residual:.3e})")
    rate = float(leading_real_part(jacobians(y, *args)))
    return str(classify_growth(rate)), rate
