"""Phase classification, analytic phase boundaries and phase diagrams.

A spectrum is a scan of the atomic detuning with the cavity-atom detuning
held at zero.  It is classified from three features:

* center bistability: a multi-root interval containing delta_a = 0, or
  reaching it within one grid step;
* wing bistability: any other multi-root interval;
* normal-mode shape: the highest-transmission envelope has two local maxima
  separated by a dip below half of the lower one.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .params import ParameterError, SystemParams, derive
from .spectra import SpectrumBranch, upper_envelope
from .steadystate import excited_population, root_grid

DIP_RATIO = 0.5
AMBIGUITY_BAND = 0.02
DEFAULT_POINTS = 2001
SQRT3 = np.sqrt(3.0)


class PhaseLabel(str, enum.Enum):
    NMU = "NMU"
    NMBW = "NMBW"
    NMBC = "NMBC"
    NMBWC = "NMBWC"
    ECBC = "ECBC"
    ECU = "ECU"

    @property
    def bistable(self) -> bool:
        return self not in (PhaseLabel.NMU, PhaseLabel.ECU)

    @property
    def normal_mode(self) -> bool:
        return self.value.startswith("NM")

    @property
    def center(self) -> bool:
        return self in (PhaseLabel.NMBC, PhaseLabel.NMBWC, PhaseLabel.ECBC)

    @property
    def wing(self) -> bool:
        return self in (PhaseLabel.NMBW, PhaseLabel.NMBWC)

    def __str__(self) -> str:
        return self.value


# ---------------------------------------------------------------------------
# analytic boundaries


@dataclass(frozen=True)
class PhaseBoundaries:
    """Closed-form thresholds; ``None`` marks a boundary that does not exist."""

    center_onset_n_eta: float | None
    wing_onset_n_eta: float | None
    merge_n_eta: float | None
    max_three_n_eta: float | None
    max_two_s_eta: float | None
    min_center_s_eta: float | None
    peak_merge_pump: float | None

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def center_threshold_upsilon() -> float:
    """Smallest collective cooperativity that admits resonant bistability (8 + 4 sqrt 3)."""
    return 8.0 + 4.0 * SQRT3


def boundaries(params: SystemParams) -> PhaseBoundaries:
    if params.n_atoms < 1:
        raise ParameterError("phase boundaries need at least one atom")
    if params.g <= 0:
        raise ParameterError("phase boundaries need g > 0")
    d = derive(params)
    n, g, gamma, kappa = params.n_atoms, params.g, params.gamma, params.kappa
    ups_n = d.upsilon_n
    center_possible = ups_n > center_threshold_upsilon()
    center_onset = n * gamma * (1.0 + SQRT3 / 2.0) / (2.0 * kappa)
    wing_onset = 4.0 * np.sqrt(n) / (3.0 * SQRT3) * (kappa + gamma / 2.0) ** 3 / (g * kappa**2)
    merge = n * (kappa + 2.0 * gamma) / (2.0 * kappa)  # empirical
    peak_merge = (n * g * g - gamma * gamma / 4.0) / (2.0 * g * g)
    return PhaseBoundaries(
        center_onset_n_eta=float(center_onset) if center_possible else None,
        wing_onset_n_eta=float(wing_onset),
        merge_n_eta=float(merge),
        max_three_n_eta=float(ups_n**2 / (16.0 * d.s1)) if center_possible else None,
        max_two_s_eta=float(ups_n**2 / 8.0) if center_possible else None,
        min_center_s_eta=float(ups_n * (1.0 + SQRT3 / 2.0)) if center_possible else None,
        peak_merge_pump=float(peak_merge) if peak_merge > 0 else None,
    )


def analytic_curves(g_n: float, n_atoms: int, gamma_over_2kappa, kappa: float = 1.0) -> dict[str, np.ndarray]:
    """Boundary curves in the (gamma/2kappa, n_eta) plane, keyed by name.

    ``center_onset`` and ``max_three`` use N*upsilon in place of the
    collective cooperativity, as is appropriate for large atom numbers.
    """
    h = np.asarray(gamma_over_2kappa, dtype=float)
    gamma = 2.0 * kappa * h
    g = g_n / np.sqrt(n_atoms)
    return {
        "center_onset": n_atoms * gamma * (1.0 + SQRT3 / 2.0) / (2.0 * kappa),
        "max_three": np.full_like(h, n_atoms**2 * g * g / (8.0 * kappa**2)),
        "wing_onset": 4.0 * np.sqrt(n_atoms) / (3.0 * SQRT3) * (kappa + gamma / 2.0) ** 3 / (g * kappa**2),
        "merge": n_atoms * (kappa + 2.0 * gamma) / (2.0 * kappa),
    }


@dataclass(frozen=True)
class ResonantOnset:
    n_atoms: float
    n_eta: float
    n_photons: float


def resonant_onset(params: SystemParams) -> ResonantOnset:
    """Smallest atom number and pump for resonant bistability (a triple root)."""
    d = derive(params)
    if d.s1 <= 0:
        raise ParameterError("onset needs g > 0")
    return ResonantOnset(16.0 / d.upsilon, 27.0 / d.s1, 3.0 / d.s1)


def resonant_root_count(params: SystemParams) -> int:
    """Distinct positive real photon numbers at delta_a = delta_c = 0."""
    d = derive(params)
    grid = root_grid(d.s1, params.n_atoms * d.upsilon, d.n_eta, 0.0, 0.0)
    return int(grid.count)


def bistable_width(params: SystemParams) -> float:
    """Large-detuning estimate of the resonant bistable half-width at delta_c = 0."""
    d = derive(params)
    if d.s_eta <= d.upsilon_n:
        return 0.0
    return 0.25 * params.gamma * float(np.sqrt(d.s_eta - d.upsilon_n))


def center_window(params: SystemParams, delta_c: float = 0.0, points: int = 4001, span: float | None = None):
    """Exact extent (lo, hi) of the multi-root interval around delta_a = 0, or None.

    Found by root counting on a fine grid followed by bisection of both edges.
    """
    d = derive(params)
    nu = params.n_atoms * d.upsilon

    def count(da):
        return root_grid(d.s1, nu, d.n_eta, 2.0 * np.asarray(da) / params.gamma, delta_c / params.kappa).count

    if count(0.0) < 2:
        return None
    span = span if span is not None else 2.0 * params.g_n + 5.0 * params.gamma
    xs = np.linspace(-span, span, points)
    c = count(xs)
    zero = int(np.argmin(np.abs(xs)))
    lo_i = zero
    while lo_i > 0 and c[lo_i - 1] >= 2:
        lo_i -= 1
    hi_i = zero
    while hi_i < len(xs) - 1 and c[hi_i + 1] >= 2:
        hi_i += 1

    def edge(inside, outside):
        for _ in range(60):
            mid = 0.5 * (inside + outside)
            if count(mid) >= 2:
                inside = mid
            else:
                outside = mid
        return inside

    lo = edge(xs[lo_i], xs[lo_i - 1]) if lo_i > 0 else xs[0]
    hi = edge(xs[hi_i], xs[hi_i + 1]) if hi_i < len(xs) - 1 else xs[-1]
    return float(lo), float(hi)


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class SpectrumFeatures:
    center: bool
    wing: bool
    normal_mode: bool
    ambiguous: bool
    intervals: tuple[tuple[float, float], ...]
    label: PhaseLabel


def _intervals(multi: np.ndarray) -> list[tuple[int, int]]:
    idx = np.flatnonzero(multi)
    if len(idx) == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.r_[idx[0], idx[breaks + 1]]
    ends = np.r_[idx[breaks], idx[-1]]
    return list(zip(starts.tolist(), ends.tolist()))


def _normal_mode_shape(t: np.ndarray) -> tuple[bool, bool]:
    """(two peaks with a deep dip, whether the deepest dip ratio sits on the threshold).

    For every sample the best pair of peaks around it is the highest peak on
    each side, so one pass with prefix/suffix maxima finds the deepest
    relative dip.
    """
    if len(t) < 3:
        return False, False
    is_peak = np.zeros(len(t), dtype=bool)
    is_peak[1:-1] = (t[1:-1] >= t[:-2]) & (t[1:-1] > t[2:])
    if np.count_nonzero(is_peak) < 2:
        return False, False
    peak_vals = np.where(is_peak, t, -np.inf)
    left = np.maximum.accumulate(peak_vals)
    right = np.maximum.accumulate(peak_vals[::-1])[::-1]
    # strictly between peaks: shift so a sample is not its own neighbour peak
    lower = np.minimum(left[:-2], right[2:])
    inner = t[1:-1]
    ok = lower > 0
    if not np.any(ok):
        return False, False
    best = float(np.min(inner[ok] / lower[ok]))
    nm = best < DIP_RATIO
    ambiguous = abs(best - DIP_RATIO) <= AMBIGUITY_BAND * DIP_RATIO
    return bool(nm or ambiguous), bool(ambiguous)


def classify_arrays(x, multi, transmission) -> SpectrumFeatures:
    """Classify a spectrum given on a sorted grid (root-count flag and top transmission)."""
    x = np.asarray(x, dtype=float)
    multi = np.asarray(multi, dtype=bool)
    t = np.asarray(transmission, dtype=float)
    step = float(np.median(np.diff(x))) if len(x) > 1 else 0.0
    center = wing = edge_case = False
    spans = []
    for i, j in _intervals(multi):
        lo, hi = x[i], x[j]
        spans.append((float(lo), float(hi)))
        gap = max(lo, -hi, 0.0)
        if gap <= step * (1.0 + 1e-9):
            center = True
            edge_case |= abs(gap - step) <= 1e-9 * step and gap > 0
        else:
            wing = True
    nm, dip_edge = _normal_mode_shape(t)
    if nm:
        label = {
            (False, False): PhaseLabel.NMU,
            (False, True): PhaseLabel.NMBW,
            (True, False): PhaseLabel.NMBC,
            (True, True): PhaseLabel.NMBWC,
        }[(center, wing)]
    else:
        label = PhaseLabel.ECBC if (center or wing) else PhaseLabel.ECU
    return SpectrumFeatures(center, wing, nm, dip_edge or edge_case, tuple(spans), label)


def spectrum_features(branches: list[SpectrumBranch]) -> SpectrumFeatures:
    if not branches:
        return SpectrumFeatures(False, False, False, False, (), PhaseLabel.ECU)
    xs, _, t_max, _, count = upper_envelope(branches)
    return classify_arrays(xs, count >= 2, t_max)


def classify_spectrum(branches: list[SpectrumBranch]) -> PhaseLabel:
    """Phase label of a full multi-branch delta_a scan taken at delta_ca = 0."""
    return spectrum_features(branches).label


# ---------------------------------------------------------------------------
# phase diagrams


def default_gamma_grid(count: int = 50) -> np.ndarray:
    return np.logspace(-3.0, 1.0, count)


def default_pump_grid(count: int = 50) -> np.ndarray:
    return np.logspace(0.0, 7.0, count)


def scan_halfwidth(g_n: float, gamma: float) -> float:
    return 2.0 * g_n + 5.0 * gamma


@dataclass(frozen=True)
class CellResult:
    label: PhaseLabel
    max_roots: int
    max_population: float
    ambiguous: bool


def evaluate_cell(g: float, n_atoms: int, gamma: float, n_eta: float, points: int = DEFAULT_POINTS, kappa: float = 1.0) -> CellResult:
    """Classify one diagram cell from a direct scan at delta_ca = 0 (no stitching needed)."""
    g_n = g * np.sqrt(n_atoms)
    half = scan_halfwidth(g_n, gamma)
    x = np.linspace(-half, half, points)
    s1 = 8.0 * g * g / gamma**2
    nu = n_atoms * 4.0 * g * g / (kappa * gamma)
    bar_da = 2.0 * x / gamma
    grid = root_grid(s1, nu, n_eta, bar_da, x / kappa)
    n_max = grid.n_max
    pop = excited_population(s1, n_max, bar_da)
    feats = classify_arrays(x, grid.count >= 2, n_max / n_eta)
    return CellResult(feats.label, int(grid.count.max()), float(np.max(pop)), feats.ambiguous)


def _column(args):
    g, n_atoms, gamma, pumps, points, kappa = args
    return [evaluate_cell(g, n_atoms, gamma, ne, points, kappa) for ne in pumps]


@dataclass
class PhaseDiagram:
    """Cells indexed as [gamma index, pump index]."""

    gamma_over_2kappa: np.ndarray
    n_eta: np.ndarray
    labels: np.ndarray
    max_roots: np.ndarray
    max_population: np.ndarray
    ambiguous: np.ndarray
    g: float
    n_atoms: int
    metadata: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def phases_present(self) -> set[PhaseLabel]:
        return set(self.labels.ravel().tolist())


def resolve_workers(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("CAVBISTAB_THREADS", "1") or 1)
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


def phase_diagram(
    params_template: SystemParams,
    gamma_grid=None,
    pump_grid=None,
    points: int = DEFAULT_POINTS,
    threads: int | None = None,
) -> PhaseDiagram:
    """Classify every (gamma/2kappa, n_eta) cell for the template's g and N.

    Rows are evaluated by a pool of ``threads`` worker processes (``0`` means
    one per CPU); results are assembled by index so the output does not
    depend on scheduling.
    """
    p = params_template
    if p.n_atoms < 1 or p.g <= 0:
        raise ParameterError("phase diagrams need g > 0 and at least one atom")
    gamma_grid = default_gamma_grid() if gamma_grid is None else np.asarray(gamma_grid, dtype=float)
    pump_grid = default_pump_grid() if pump_grid is None else np.asarray(pump_grid, dtype=float)
    if np.any(np.diff(gamma_grid) <= 0) or np.any(np.diff(pump_grid) <= 0):
        raise ValueError("grids must be strictly increasing")
    tasks = [(p.g, p.n_atoms, 2.0 * p.kappa * h, pump_grid.tolist(), points, p.kappa) for h in gamma_grid]
    workers = min(resolve_workers(threads), len(tasks))
    if workers <= 1:
        columns = [_column(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            columns = list(pool.map(_column, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    shape = (len(gamma_grid), len(pump_grid))
    labels = np.empty(shape, dtype=object)
    roots = np.zeros(shape, dtype=int)
    pop = np.zeros(shape)
    amb = np.zeros(shape, dtype=bool)
    for i, col in enumerate(columns):
        for j, cell in enumerate(col):
            labels[i, j] = cell.label
            roots[i, j] = cell.max_roots
            pop[i, j] = cell.max_population
            amb[i, j] = cell.ambiguous
    return PhaseDiagram(gamma_grid, pump_grid, labels, roots, pop, amb, p.g, p.n_atoms)


def max_population_map(params_template: SystemParams, gamma_grid=None, pump_grid=None, points: int = DEFAULT_POINTS, threads: int | None = None) -> np.ndarray:
    """Maximum excited-state population on the top branch for every diagram cell."""
    return phase_diagram(params_template, gamma_grid, pump_grid, points, threads).max_population
