"""Parameter containers and derived dimensionless quantities.

Rates are stored in units of the cavity field decay rate, so ``kappa`` is 1 for
anything produced by :func:`from_physical`.  Arbitrary consistent rate units are
still accepted by :class:`SystemParams`; every formula is homogeneous in them.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Mapping


class ParameterError(ValueError):
    """Invalid or inconsistent physical parameters."""


@dataclass(frozen=True)
class SystemParams:
    """Physical inputs of the driven atom-cavity system.

    Parameters
    ----------
    g : single-atom coupling strength
    gamma : atomic (population) decay rate
    kappa : cavity field decay rate
    n_atoms : number of atoms
    eta_plus, eta_minus : pump rates of the two counter-propagating modes
    delta_a : laser-atom detuning
    delta_c : laser-cavity detuning
    """

    g: float
    gamma: float
    kappa: float = 1.0
    n_atoms: int = 0
    eta_plus: float = 0.0
    eta_minus: float = 0.0
    delta_a: float = 0.0
    delta_c: float = 0.0

    def __post_init__(self):
        for name in ("g", "gamma", "kappa", "eta_plus", "eta_minus", "delta_a", "delta_c"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        if self.g < 0:
            raise ParameterError("coupling g must be non-negative")
        if self.gamma <= 0:
            raise ParameterError("atomic decay rate gamma must be positive")
        if self.kappa <= 0:
            raise ParameterError("cavity decay rate kappa must be positive")
        if self.eta_plus < 0 or self.eta_minus < 0:
            raise ParameterError("pump rates must be non-negative")
        n = self.n_atoms
        if isinstance(n, bool) or int(n) != n or n < 0:
            raise ParameterError(f"n_atoms must be a non-negative integer, got {n!r}")
        object.__setattr__(self, "n_atoms", int(n))

    @property
    def delta_ca(self) -> float:
        """Cavity-atom detuning, always recomputed from the two laser detunings."""
        return self.delta_a - self.delta_c

    @property
    def g_n(self) -> float:
        """Collective coupling g*sqrt(N)."""
        return self.g * math.sqrt(self.n_atoms)

    def replace(self, **changes) -> SystemParams:
        return dataclasses.replace(self, **changes)

    def with_n_eta(self, n_eta: float) -> SystemParams:
        """Copy with the forward pump set so that (eta_plus/kappa)**2 == n_eta."""
        if n_eta < 0:
            raise ParameterError("n_eta must be non-negative")
        return self.replace(eta_plus=self.kappa * math.sqrt(n_eta))

    def with_detunings(self, delta_a: float, delta_c: float) -> SystemParams:
        return self.replace(delta_a=float(delta_a), delta_c=float(delta_c))


@dataclass(frozen=True)
class DerivedParams:
    upsilon: float
    s1: float
    upsilon_n: float
    n_eta: float
    s_eta: float
    omega_eta: float
    u_gamma: complex
    delta_kappa: complex
    alpha_eta: float
    bar_delta_a: float
    bar_delta_c: float

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def derive(params: SystemParams) -> DerivedParams:
    """Compute the dimensionless bundle used throughout the package."""
    g, gamma, kappa = params.g, params.gamma, params.kappa
    if gamma == 0 or kappa == 0:
        raise ParameterError("gamma and kappa must be non-zero")
    upsilon = 4.0 * g * g / (kappa * gamma)
    s1 = 8.0 * g * g / (gamma * gamma)
    n_eta = (params.eta_plus / kappa) ** 2
    return DerivedParams(
        upsilon=upsilon,
        s1=s1,
        upsilon_n=params.n_atoms * upsilon + 2.0,
        n_eta=n_eta,
        s_eta=s1 * n_eta,
        omega_eta=2.0 * g * params.eta_plus / kappa,
        u_gamma=g * g / complex(params.delta_a, gamma / 2.0),
        delta_kappa=complex(params.delta_c, kappa),
        alpha_eta=params.eta_plus / kappa,
        bar_delta_a=2.0 * params.delta_a / gamma,
        bar_delta_c=params.delta_c / kappa,
    )


def saturation_photon_number(params: SystemParams) -> float:
    """Photon number that saturates a resonant atom to s = 1, i.e. 1/s1."""
    if params.g <= 0:
        raise ParameterError("transition with g = 0 cannot be saturated")
    return params.gamma**2 / (8.0 * params.g**2)


_UNIT_FACTORS = {
    "ordinary": 2.0 * math.pi,  # cycles per second, multiply by 2*pi
    "angular": 1.0,
    "kappa": 1.0,
}


def from_physical(
    g: float | None = None,
    gamma: float | None = None,
    kappa: float = 1.0,
    *,
    units: str | Mapping[str, str] | None = None,
    n_atoms: int = 0,
    g_n: float | None = None,
    eta_plus: float = 0.0,
    eta_minus: float = 0.0,
    delta_a: float = 0.0,
    delta_c: float = 0.0,
) -> SystemParams:
    """Convert rates given in laboratory units to the internal kappa = 1 convention.

    ``units`` is mandatory.  A single string applies to every rate; a mapping
    assigns a unit to each rate that was supplied, which is how mixed input is
    declared.  Accepted units are ``"ordinary"`` (frequency nu, e.g. Gamma/2pi
    quoted in Hz), ``"angular"`` (rad/s) and ``"kappa"`` (already
    dimensionless).  The collective coupling ``g_n`` may replace ``g`` when
    ``n_atoms`` is given.
    """
    if units is None:
        raise ParameterError("units must be given explicitly ('ordinary', 'angular' or 'kappa')")
    if (g is None) == (g_n is None):
        raise ParameterError("give exactly one of g and g_n")
    if gamma is None:
        raise ParameterError("gamma is required")
    if g_n is not None and n_atoms <= 0:
        raise ParameterError("g_n requires a positive atom number")

    rates = {
        "g": g if g is not None else g_n,
        "gamma": gamma,
        "kappa": kappa,
        "eta_plus": eta_plus,
        "eta_minus": eta_minus,
        "delta_a": delta_a,
        "delta_c": delta_c,
    }
    if isinstance(units, str):
        unit_of = dict.fromkeys(rates, units)
    else:
        unit_of = {}
        for name, value in rates.items():
            key = "g_n" if name == "g" and g_n is not None else name
            unit = units.get(key, units.get(name))
            if unit is None:
                if value == 0 and name not in ("g", "gamma", "kappa"):
                    unit = "angular"
                else:
                    raise ParameterError(f"no unit declared for {key}")
            unit_of[name] = unit
    kinds = set(unit_of.values())
    unknown = kinds - set(_UNIT_FACTORS)
    if unknown:
        raise ParameterError(f"unknown unit(s): {sorted(unknown)}")
    if "kappa" in kinds and len(kinds) > 1:
        raise ParameterError("dimensionless and dimensional rates cannot be mixed")

    angular = {}
    for name, value in rates.items():
        if value is None or not math.isfinite(value):
            raise ParameterError(f"{name} must be finite")
        angular[name] = value * _UNIT_FACTORS[unit_of[name]]
    scale = angular["kappa"]
    if scale <= 0:
        raise ParameterError("kappa must be positive")

    coupling = angular["g"] / scale
    if g_n is not None:
        coupling /= math.sqrt(n_atoms)
    return SystemParams(
        g=coupling,
        gamma=angular["gamma"] / scale,
        kappa=1.0,
        n_atoms=n_atoms,
        eta_plus=angular["eta_plus"] / scale,
        eta_minus=angular["eta_minus"] / scale,
        delta_a=angular["delta_a"] / scale,
        delta_c=angular["delta_c"] / scale,
    )


def collective(g_n: float, gamma: float, n_atoms: int, **fields) -> SystemParams:
    """Build kappa = 1 parameters from the collective coupling g*sqrt(N)."""
    if n_atoms <= 0:
        raise ParameterError("collective coupling needs a positive atom number")
    return SystemParams(g=g_n / math.sqrt(n_atoms), gamma=gamma, n_atoms=n_atoms, **fields)


def laboratory_params(**overrides) -> SystemParams:
    """g/2pi = 9.1 kHz, Gamma/2pi = 7.5 kHz, kappa/2pi = 3.4 MHz with 2e5 atoms."""
    base = from_physical(9.1e3, 7.5e3, 3.4e6, units="ordinary", n_atoms=200_000)
    return base.replace(**overrides)
