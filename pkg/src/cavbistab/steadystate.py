"""Steady states of the driven atom-cavity system.

The single-mode homogeneous problem reduces to a cubic in the intracavity
photon number n.  With dimensionless detunings da = 2 delta_a / gamma and
dc = delta_c / kappa, h = N*upsilon/2 and X = 1 + s1 n + da^2, every steady
state satisfies the fixed-point relation

    n = n_eta / [(1 + h/X)^2 + (dc - da h/X)^2]

and the field amplitude is

    alpha = alpha_eta / (1 - i dc + h (1 + i da) / X).

The general two-mode problem with explicit atom positions is solved by a
damped Newton iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cubic import (
    DEFAULT_TOL,
    CubicCoefficients,
    Root,
    RootSet,
    _discriminant_test,
    _monic_scaled,
    closed_form_roots,
)
from .params import SystemParams, derive

# roots of a cubic flagged as near-degenerate are merged when closer than this
MERGE_RTOL = 1e-6


class SpuriousRootError(ValueError):
    """A candidate root does not reproduce its own photon number."""


class ConvergenceError(RuntimeError):
    """Iterative solver failed; ``residual`` holds the last residual norm."""

    def __init__(self, message: str, residual: float = float("nan"), state=None):
        super().__init__(message)
        self.residual = residual
        self.state = state


# ---------------------------------------------------------------------------
# cubic coefficients


def coefficient_arrays(s1, n_upsilon, n_eta, bar_da, bar_dc):
    """Cubic coefficients (a3, a2, a1, a0) for broadcastable inputs.

    ``n_upsilon`` is the bare product N*upsilon; the collective quantity
    N*upsilon + 2 is formed here.
    """
    s1 = np.asarray(s1, dtype=float)
    n_upsilon = np.asarray(n_upsilon, dtype=float)
    n_eta = np.asarray(n_eta, dtype=float)
    da2 = np.asarray(bar_da, dtype=float) ** 2
    bar_dc = np.asarray(bar_dc, dtype=float)
    ups_n = n_upsilon + 2.0
    s_eta = s1 * n_eta
    lorentz = 1.0 + da2
    shift = bar_dc * lorentz - 0.5 * n_upsilon * np.asarray(bar_da, dtype=float)
    width = da2 + 0.5 * ups_n
    a3 = s1 * s1 * (1.0 + bar_dc * bar_dc)
    a2 = 2.0 * s1 * width + 2.0 * s1 * bar_dc * shift - s1 * s_eta
    a1 = width * width + shift * shift - 2.0 * s_eta * lorentz
    a0 = -n_eta * lorentz * lorentz
    return np.broadcast_arrays(a3, a2, a1, a0)


def coefficients(params: SystemParams, bar_delta_a: float, bar_delta_c: float) -> CubicCoefficients:
    d = derive(params)
    a3, a2, a1, a0 = coefficient_arrays(
        d.s1, params.n_atoms * d.upsilon, d.n_eta, bar_delta_a, bar_delta_c
    )
    return CubicCoefficients(float(a3), float(a2), float(a1), float(a0))


def fixed_point_rhs(s1, n_upsilon, n_eta, bar_da, bar_dc, n):
    """Right-hand side of the photon-number fixed-point relation."""
    h = 0.5 * np.asarray(n_upsilon, dtype=float)
    x = 1.0 + s1 * np.asarray(n, dtype=float) + np.asarray(bar_da, dtype=float) ** 2
    ratio = h / x
    return n_eta / ((1.0 + ratio) ** 2 + (bar_dc - bar_da * ratio) ** 2)


# ---------------------------------------------------------------------------
# batch root extraction


@dataclass(frozen=True)
class RootGrid:
    """Roots of many cubics at once.

    ``real`` holds the distinct non-negative real roots in ascending order,
    padded with NaN; ``count`` is their number.  ``complex_pair_positive``
    marks cubics whose complex-conjugate pair has a positive real part.
    """

    real: np.ndarray
    count: np.ndarray
    complex_pair_positive: np.ndarray
    roots: np.ndarray

    @property
    def n_max(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.fmax.reduce(self.real, axis=-1)


def root_grid(s1, n_upsilon, n_eta, bar_da, bar_dc) -> RootGrid:
    """Distinct non-negative real photon numbers for broadcastable parameter arrays.

    Reality is decided by the sign of the discriminant, which is exact in
    floating point away from degeneracy; near-degenerate cubics fall back on a
    tolerance test and merge coincident roots.
    """
    a3, a2, a1, a0 = coefficient_arrays(s1, n_upsilon, n_eta, bar_da, bar_dc)
    shape = a3.shape
    linear = a3 == 0
    if np.any(linear):
        # decoupled limit (g = 0): the cubic collapses to a1 n + a0 = 0
        a3 = np.where(linear, 1.0, a3)
        a2 = np.where(linear, 0.0, a2)
    roots = closed_form_roots(a3, a2, a1, a0)
    b, c, d, _ = _monic_scaled(a3, a2, a1, a0)
    disc, degenerate = _discriminant_test(b, c, d)

    re = roots.real
    im = roots.imag
    mag = np.abs(roots)
    near_real = np.abs(im) <= 1e-7 * np.maximum(mag, 1e-300)
    three = (disc > 0) & ~degenerate
    one = (disc < 0) & ~degenerate
    smallest_im = np.argmin(np.abs(im), axis=-1)
    is_smallest = np.arange(3) == smallest_im[..., None]
    real_mask = np.where(
        three[..., None], True, np.where(one[..., None], is_smallest, near_real)
    )
    pair_positive = one & (np.where(is_smallest, 0.0, re).sum(axis=-1) > 0)

    if np.any(linear):
        lin = -np.asarray(a0, dtype=float) / np.where(a1 != 0, a1, 1.0)
        first = np.arange(3) == 0
        re = np.where(linear[..., None], np.where(first, lin[..., None], np.nan), re)
        real_mask = np.where(linear[..., None], first, real_mask)
        pair_positive = np.where(linear, False, pair_positive)

    scale_neg = -DEFAULT_TOL * mag
    keep = real_mask & (re >= scale_neg) & np.isfinite(re)
    vals = np.where(keep, np.maximum(re, 0.0), np.nan)
    vals = np.sort(vals, axis=-1)
    # merge duplicates (exact or within the degenerate tolerance)
    prev = vals[..., :-1]
    nxt = vals[..., 1:]
    dup = np.abs(nxt - prev) <= MERGE_RTOL * np.maximum(np.abs(nxt), 1e-300)
    dup = np.concatenate([np.zeros(shape + (1,), dtype=bool), dup], axis=-1)
    vals = np.where(dup, np.nan, vals)
    vals = np.sort(vals, axis=-1)
    count = np.sum(np.isfinite(vals), axis=-1)
    return RootGrid(vals, count, pair_positive, roots)


def _multiplicities(roots: np.ndarray, values: np.ndarray) -> list[int]:
    mult = []
    for v in values:
        close = np.abs(roots - v) <= max(MERGE_RTOL * abs(v), 1e-12)
        mult.append(max(1, int(np.count_nonzero(close))))
    return mult


def _param_arrays(params: SystemParams, delta_a, delta_c):
    d = derive(params)
    bar_da = 2.0 * np.asarray(delta_a, dtype=float) / params.gamma
    bar_dc = np.asarray(delta_c, dtype=float) / params.kappa
    return d.s1, params.n_atoms * d.upsilon, d.n_eta, bar_da, bar_dc


# ---------------------------------------------------------------------------
# single-mode API


def photon_numbers(params: SystemParams, delta_a: float | None = None, delta_c: float | None = None) -> RootSet:
    """All positive real steady-state photon numbers for a homogeneous cloud."""
    delta_a = params.delta_a if delta_a is None else delta_a
    delta_c = params.delta_c if delta_c is None else delta_c
    args = _param_arrays(params, delta_a, delta_c)
    grid = root_grid(*args)
    values = grid.real[np.isfinite(grid.real)]
    mult = _multiplicities(grid.roots, values)
    return RootSet(tuple(Root(float(v), m) for v, m in zip(values, mult)), DEFAULT_TOL)


def field_amplitude(params: SystemParams, n, delta_a: float | None = None, delta_c: float | None = None, check: bool = True):
    """Forward-mode field amplitude belonging to photon number ``n``."""
    delta_a = params.delta_a if delta_a is None else delta_a
    delta_c = params.delta_c if delta_c is None else delta_c
    s1, n_upsilon, _, bar_da, bar_dc = _param_arrays(params, delta_a, delta_c)
    n = np.asarray(n, dtype=float)
    x = 1.0 + s1 * n + bar_da**2
    denom = 1.0 - 1j * bar_dc + 0.5 * n_upsilon * (1.0 + 1j * bar_da) / x
    alpha = (params.eta_plus / params.kappa) / denom
    if check:
        err = np.abs(np.abs(alpha) ** 2 - n)
        if np.any(err > 1e-8 * np.maximum(n, 1e-300)):
            raise SpuriousRootError(f"|alpha|^2 does not reproduce n (max error {np.max(err):.3g})")
    return complex(alpha) if np.ndim(alpha) == 0 else alpha


def coupling_ratio(params: SystemParams, delta_a=None):
    """U_gamma / g = g / (delta_a + i gamma / 2); finite even for g = 0."""
    delta_a = params.delta_a if delta_a is None else delta_a
    return params.g / (np.asarray(delta_a, dtype=float) + 0.5j * params.gamma)


def atomic_observables(params: SystemParams, alpha_plus, alpha_minus=0.0, kz=0.0, delta_a=None):
    """Stationary (sigma_z, sigma_minus, p_excited) of an atom at phase ``kz``."""
    alpha_plus = np.asarray(alpha_plus, dtype=complex)
    alpha_minus = np.asarray(alpha_minus, dtype=complex)
    if not (np.all(np.isfinite(alpha_plus)) and np.all(np.isfinite(alpha_minus))):
        raise ValueError("field amplitudes must be finite")
    ratio = coupling_ratio(params, delta_a)
    phase = np.exp(1j * np.asarray(kz, dtype=float))
    field = phase * alpha_plus + np.conj(phase) * alpha_minus
    sigma_z = -1.0 / (1.0 + 2.0 * np.abs(ratio) ** 2 * np.abs(field) ** 2)
    sigma_minus = ratio * field * sigma_z
    p_excited = 0.5 * (1.0 + sigma_z)
    if sigma_z.ndim == 0:
        return float(sigma_z), complex(sigma_minus), float(p_excited)
    return sigma_z, sigma_minus, p_excited


def excited_population(s1, n, bar_da):
    """Excited-state population of a homogeneous atom for photon number ``n``."""
    s = s1 * np.asarray(n, dtype=float) / (1.0 + np.asarray(bar_da, dtype=float) ** 2)
    return 0.5 * s / (1.0 + s)


@dataclass(frozen=True)
class SteadyStateSolution:
    n: float
    alpha_plus: complex
    alpha_minus: complex
    transmission: float
    sigma_z: float
    sigma_minus: complex
    p_excited: float
    stability: str = "unknown"


def steady_states(
    params: SystemParams,
    delta_a: float | None = None,
    delta_c: float | None = None,
    with_stability: bool = False,
) -> list[SteadyStateSolution]:
    """Full single-mode steady states (field and atom) for every photon-number root."""
    delta_a = params.delta_a if delta_a is None else float(delta_a)
    delta_c = params.delta_c if delta_c is None else float(delta_c)
    local = params.with_detunings(delta_a, delta_c)
    n_eta = derive(local).n_eta
    out = []
    for root in photon_numbers(local):
        alpha = field_amplitude(local, root.value)
        sz, sm, p = atomic_observables(local, alpha, 0.0)
        t = root.value / n_eta if n_eta > 0 else float("nan")
        out.append(SteadyStateSolution(root.value, alpha, 0j, t, sz, sm, p))
    if with_stability:
        from .dynamics import stability

        out = [
            SteadyStateSolution(**{**s.__dict__, "stability": stability(local, s)[0]}) for s in out
        ]
    return out


# ---------------------------------------------------------------------------
# two-mode problem with explicit positions


@dataclass(frozen=True)
class AtomConfiguration:
    """Atom positions as phases kz_j, or ``None`` for a homogeneous cloud."""

    positions: np.ndarray | None = None

    @classmethod
    def homogeneous(cls) -> AtomConfiguration:
        return cls(None)

    @classmethod
    def from_phases(cls, phases) -> AtomConfiguration:
        return cls(np.mod(np.asarray(phases, dtype=float), 2.0 * np.pi))

    @classmethod
    def evenly_spread(cls, n_atoms: int) -> AtomConfiguration:
        return cls.from_phases(np.pi * np.arange(n_atoms) / max(n_atoms, 1))

    @classmethod
    def random(cls, n_atoms: int, rng: np.random.Generator) -> AtomConfiguration:
        return cls.from_phases(rng.uniform(0.0, 2.0 * np.pi, n_atoms))

    @classmethod
    def lattice(cls, n_atoms: int) -> AtomConfiguration:
        return cls.from_phases(np.zeros(n_atoms))

    @property
    def is_homogeneous(self) -> bool:
        return self.positions is None

    @property
    def bunching(self) -> float:
        if self.positions is None or len(self.positions) == 0:
            return 0.0
        return float(abs(np.mean(np.exp(2j * self.positions))))


def _positions(params: SystemParams, config: AtomConfiguration) -> np.ndarray:
    if config.is_homogeneous:
        raise ValueError("two-mode equations need explicit atom positions")
    kz = np.asarray(config.positions, dtype=float)
    if len(kz) != params.n_atoms:
        raise ValueError(f"{len(kz)} positions given for n_atoms={params.n_atoms}")
    return kz


def two_mode_residual(params: SystemParams, config: AtomConfiguration, alpha_plus: complex, alpha_minus: complex):
    """Left minus right side of the coupled steady-state equations for both modes."""
    kz = _positions(params, config)
    ratio = coupling_ratio(params)
    u = params.g * ratio
    dk = complex(params.delta_c, params.kappa)
    phase = np.exp(1j * kz)
    field = phase * alpha_plus + np.conj(phase) * alpha_minus
    weight = 1.0 / (1.0 + 2.0 * abs(ratio) ** 2 * np.abs(field) ** 2)
    # sum_j w_j (alpha_+ + e^{-2ikz_j} alpha_-) == sum_j w_j e^{-ikz_j} field_j
    res_plus = dk * alpha_plus - u * np.sum(weight * np.conj(phase) * field) - 1j * params.eta_plus
    res_minus = dk * alpha_minus - u * np.sum(weight * phase * field) - 1j * params.eta_minus
    return complex(res_plus), complex(res_minus)


def _residual_vector(params, config, z):
    rp, rm = two_mode_residual(params, config, complex(z[0], z[1]), complex(z[2], z[3]))
    return np.array([rp.real, rp.imag, rm.real, rm.imag])


def two_mode_solve(
    params: SystemParams,
    config: AtomConfiguration,
    initial_guess: tuple[complex, complex] = (0j, 0j),
    max_iter: int = 200,
    max_halvings: int = 8,
) -> tuple[complex, complex]:
    """Damped Newton solution of the two-mode equations nearest ``initial_guess``."""
    if params.n_atoms < 1:
        dk = complex(params.delta_c, params.kappa)
        return 1j * params.eta_plus / dk, 1j * params.eta_minus / dk
    target = 1e-10 * (1.0 + params.eta_plus / params.kappa)
    z = np.array(
        [initial_guess[0].real, initial_guess[0].imag, initial_guess[1].real, initial_guess[1].imag],
        dtype=float,
    )
    r = _residual_vector(params, config, z)
    norm = float(np.linalg.norm(r))
    for _ in range(max_iter):
        if norm <= target:
            return complex(z[0], z[1]), complex(z[2], z[3])
        jac = np.empty((4, 4))
        h = 1e-7 * (1.0 + np.linalg.norm(z))
        for k in range(4):
            e = np.zeros(4)
            e[k] = h
            jac[:, k] = (_residual_vector(params, config, z + e) - _residual_vector(params, config, z - e)) / (2 * h)
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        lam = 1.0
        for _ in range(max_halvings + 1):
            trial = z + lam * step
            r_trial = _residual_vector(params, config, trial)
            n_trial = float(np.linalg.norm(r_trial))
            if n_trial < norm:
                break
            lam *= 0.5
        z, r, norm = trial, r_trial, n_trial
    if norm <= target:
        return complex(z[0], z[1]), complex(z[2], z[3])
    raise ConvergenceError(
        f"two-mode Newton did not converge in {max_iter} iterations (residual {norm:.3e})",
        residual=norm,
        state=(complex(z[0], z[1]), complex(z[2], z[3])),
    )


def single_mode_guess(params: SystemParams, which: str = "max") -> tuple[complex, complex]:
    """Starting amplitudes for the two-mode solver taken from the homogeneous roots."""
    roots = photon_numbers(params).values
    if len(roots) == 0:
        return 0j, 0j
    n = roots[-1] if which == "max" else roots[0]
    return field_amplitude(params, n), 0j


def bunching_parameter(kz) -> float:
    kz = np.asarray(kz, dtype=float)
    return float(abs(np.mean(np.exp(2j * kz)))) if kz.size else 0.0


__all__ = [
    "AtomConfiguration",
    "ConvergenceError",
    "RootGrid",
    "SpuriousRootError",
    "SteadyStateSolution",
    "atomic_observables",
    "coefficient_arrays",
    "coefficients",
    "excited_population",
    "field_amplitude",
    "fixed_point_rhs",
    "photon_numbers",
    "root_grid",
    "steady_states",
    "two_mode_residual",
    "two_mode_solve",
]

