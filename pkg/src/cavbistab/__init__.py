"""Mean-field optical bistability of N two-level atoms in a driven ring cavity.

All rates are expressed in units of the cavity field decay rate (kappa = 1)
unless converted explicitly with :func:`cavbistab.params.from_physical`.
"""

__version__ = "0.1.0"

from .params import (
    DerivedParams,
    ParameterError,
    SystemParams,
    collective,
    derive,
    from_physical,
    laboratory_params,
    saturation_photon_number,
)
from .cubic import CubicCoefficients, RootSet, solve_cubic_closed, solve_cubic_numeric, positive_real_roots
from .steadystate import (
    AtomConfiguration,
    SteadyStateSolution,
    atomic_observables,
    coefficients,
    field_amplitude,
    photon_numbers,
    steady_states,
    two_mode_residual,
    two_mode_solve,
)
from .spectra import (
    HysteresisTrace,
    SpectrumBranch,
    branch_follow,
    pump_bifurcation,
    scan_spectrum,
    solution_counts,
    zero_phase_curve,
)
from .phases import (
    PhaseBoundaries,
    PhaseDiagram,
    PhaseLabel,
    bistable_width,
    boundaries,
    classify_spectrum,
    max_population_map,
    phase_diagram,
    resonant_onset,
    resonant_root_count,
)
from .dynamics import MeanFieldState, RampSpec, integrate, rhs, stability

__all__ = [name for name in dir() if not name.startswith("_")]
