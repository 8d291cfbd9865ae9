"""Multi-branch spectra, pump bifurcation curves and quasi-static hysteresis.

A scan evaluates every steady-state photon number on a grid and stitches the
roots into continuous branches.  Between neighbouring grid points whose root
count differs (or whose roots jump suspiciously far) the interval is refined
by a factor of 8, at most three times, before branches are ended or started.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .dynamics import classify_growth, fixed_point_vectors, jacobians, leading_real_part
from .params import SystemParams, derive
from .steadystate import excited_population, root_grid

AXES = ("delta_a", "delta_ca", "pump")
REFINE_FACTOR = 8
REFINE_LEVELS = 3
# a log-change of n above this between neighbours triggers refinement
JUMP_LOG = 0.5


@dataclass
class SpectrumBranch:
    """One continuous solution branch; all arrays share the sample index."""

    axis: str
    branch_id: int
    x: np.ndarray
    n: np.ndarray
    T: np.ndarray
    p_excited: np.ndarray
    stability: np.ndarray

    @property
    def samples(self) -> list[tuple]:
        return list(zip(self.x.tolist(), self.n.tolist(), self.T.tolist(), self.p_excited.tolist(), self.stability.tolist()))

    def __len__(self) -> int:
        return len(self.x)


@dataclass
class HysteresisTrace:
    direction: str
    x: np.ndarray
    n: np.ndarray
    branch_ids: np.ndarray
    jump_points: list[float] = field(default_factory=list)

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.n.tolist()))


@dataclass(frozen=True)
class Transition:
    x_before: float
    x_after: float
    count_before: int
    count_after: int

    @property
    def location(self) -> float:
        if self.x_before > 0 and self.x_after > 0:
            return float(np.sqrt(self.x_before * self.x_after))
        return 0.5 * (self.x_before + self.x_after)


# ---------------------------------------------------------------------------
# grid evaluation


class _Evaluator:
    """Maps axis coordinates to (delta_a, delta_c, n_eta) and solves the cubic."""

    def __init__(self, params: SystemParams, axis: str, fixed, hold: str):
        if axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        if hold not in ("delta_ca", "delta_c"):
            raise ValueError("hold must be 'delta_ca' or 'delta_c'")
        self.params = params
        self.axis = axis
        self.hold = hold
        d = derive(params)
        self.s1 = d.s1
        self.n_upsilon = params.n_atoms * d.upsilon
        self.n_eta = d.n_eta
        if axis == "delta_a":
            if fixed is None:
                fixed = params.delta_ca if hold == "delta_ca" else params.delta_c
        elif axis == "delta_ca":
            fixed = params.delta_a if fixed is None else fixed
        elif self.s1 <= 0:
            raise ValueError("pump axis is measured in s1*n_eta and needs g > 0")
        self.fixed = float(fixed) if fixed is not None else None

    def controls(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.axis == "delta_a":
            da = x
            dc = x - self.fixed if self.hold == "delta_ca" else np.full_like(x, self.fixed)
            n_eta = np.full_like(x, self.n_eta)
        elif self.axis == "delta_ca":
            da = np.full_like(x, self.fixed)
            dc = self.fixed - x
            n_eta = np.full_like(x, self.n_eta)
        else:
            da = np.full_like(x, p.delta_a)
            dc = np.full_like(x, p.delta_c)
            n_eta = x / self.s1
        return da, dc, n_eta

    def roots(self, x):
        da, dc, n_eta = self.controls(x)
        grid = root_grid(self.s1, self.n_upsilon, n_eta, 2.0 * da / self.params.gamma, dc / self.params.kappa)
        return grid.real


def _log_gap(a, b):
    tiny = 1e-300
    return np.abs(np.log(np.maximum(a, tiny)) - np.log(np.maximum(b, tiny)))


def _suspicious(prev_vals, vals) -> bool:
    a = prev_vals[np.isfinite(prev_vals)]
    b = vals[np.isfinite(vals)]
    if len(a) != len(b):
        return True
    return bool(len(a) and np.any(_log_gap(a, b) > JUMP_LOG))


def _match(old: np.ndarray, new: np.ndarray) -> list[tuple[int, int]]:
    """Order-preserving matching of two sorted root lists minimizing total log distance."""
    if len(old) == len(new):
        return list(zip(range(len(old)), range(len(new))))
    k = min(len(old), len(new))
    best, best_cost = [], np.inf
    for oi in itertools.combinations(range(len(old)), k):
        for ni in itertools.combinations(range(len(new)), k):
            cost = float(np.sum(_log_gap(old[list(oi)], new[list(ni)])))
            if cost < best_cost:
                best, best_cost = list(zip(oi, ni)), cost
    return best


def _refined_points(ev: _Evaluator, x0, v0, x1, v1, level: int):
    """Points in (x0, x1] with their roots, refining where the root set jumps."""
    if level >= REFINE_LEVELS or not _suspicious(v0, v1):
        return [(x1, v1)]
    xs = np.linspace(x0, x1, REFINE_FACTOR + 1)[1:-1]
    vs = ev.roots(xs)
    pts_x = [x0, *xs.tolist(), x1]
    pts_v = [v0, *list(vs), v1]
    out = []
    for i in range(1, len(pts_x)):
        out.extend(_refined_points(ev, pts_x[i - 1], pts_v[i - 1], pts_x[i], pts_v[i], level + 1))
    return out


def _stitch(ev: _Evaluator, grid: np.ndarray):
    vals = ev.roots(grid)
    points = [(float(grid[0]), vals[0])]
    for k in range(1, len(grid)):
        points.extend(_refined_points(ev, float(grid[k - 1]), vals[k - 1], float(grid[k]), vals[k], 0))

    branches: list[tuple[list, list]] = []
    active: list[int] = []  # branch index for each root of the previous point
    prev = np.empty(0)
    for x, v in points:
        cur = v[np.isfinite(v)]
        new_active = [-1] * len(cur)
        for i, j in _match(prev, cur):
            new_active[j] = active[i]
        for j in range(len(cur)):
            if new_active[j] < 0:
                branches.append(([], []))
                new_active[j] = len(branches) - 1
            branches[new_active[j]][0].append(x)
            branches[new_active[j]][1].append(cur[j])
        active, prev = new_active, cur
    return branches


def _observables(ev: _Evaluator, x, n, with_stability: bool):
    p = ev.params
    da, dc, n_eta = ev.controls(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = n / n_eta
    bar_da = 2.0 * da / p.gamma
    pop = excited_population(ev.s1, n, bar_da)
    if not with_stability:
        return t, pop, np.full(len(x), "unknown")
    eta = p.kappa * np.sqrt(n_eta)
    xx = 1.0 + ev.s1 * n + bar_da**2
    alpha = (eta / p.kappa) / (1.0 - 1j * dc / p.kappa + 0.5 * ev.n_upsilon * (1.0 + 1j * bar_da) / xx)
    y = fixed_point_vectors(p.g, p.gamma, da, alpha)
    rate = leading_real_part(jacobians(y, p.g, p.n_atoms, p.gamma, p.kappa, da, dc, eta))
    return t, pop, classify_growth(rate)


def scan_spectrum(
    params: SystemParams,
    axis: str,
    grid,
    fixed_other_detuning: float | None = None,
    hold: str = "delta_ca",
    with_stability: bool = True,
) -> list[SpectrumBranch]:
    """All steady-state branches along ``grid``.

    ``axis`` is ``"delta_a"`` (cavity detuning follows according to
    ``hold``), ``"delta_ca"`` (atomic detuning fixed) or ``"pump"`` (grid in
    units of s1*n_eta, detunings from ``params``).  ``fixed_other_detuning``
    overrides the held detuning; by default it is taken from ``params``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise ValueError("grid needs at least two points")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    ev = _Evaluator(params, axis, fixed_other_detuning, hold)
    out = []
    for bid, (xs, ns) in enumerate(_stitch(ev, grid)):
        x = np.array(xs)
        n = np.array(ns)
        t, pop, tags = _observables(ev, x, n, with_stability)
        out.append(SpectrumBranch(axis, bid, x, n, t, pop, np.asarray(tags, dtype=str)))
    return out


def pump_bifurcation(
    params: SystemParams, pump_grid, delta_a: float = 0.0, delta_c: float = 0.0, with_stability: bool = True
) -> list[SpectrumBranch]:
    """Photon number versus s1*n_eta at fixed detunings (the S-curve)."""
    return scan_spectrum(params.with_detunings(delta_a, delta_c), "pump", pump_grid, with_stability=with_stability)


# ---------------------------------------------------------------------------
# solution counting


def solution_counts(params: SystemParams, pump_grid, delta_a: float = 0.0, delta_c: float = 0.0, complex_pairs: bool = True):
    """Number of solutions along a pump grid (s1*n_eta units).

    Distinct positive real roots are counted.  With ``complex_pairs`` a
    complex-conjugate pair whose real part is positive counts as one more
    (such a pair marks a solution that has just left through a fold).
    """
    ev = _Evaluator(params.with_detunings(delta_a, delta_c), "pump", None, "delta_ca")
    da, dc, n_eta = ev.controls(pump_grid)
    grid = root_grid(ev.s1, ev.n_upsilon, n_eta, 2.0 * da / params.gamma, dc / params.kappa)
    counts = grid.count.astype(int)
    if complex_pairs:
        counts = counts + grid.complex_pair_positive.astype(int)
    return counts


def count_transitions(grid, counts) -> list[Transition]:
    grid = np.asarray(grid, dtype=float)
    counts = np.asarray(counts)
    idx = np.flatnonzero(np.diff(counts) != 0)
    return [Transition(float(grid[i]), float(grid[i + 1]), int(counts[i]), int(counts[i + 1])) for i in idx]


# ---------------------------------------------------------------------------
# zero-phase curve


def zero_phase_curve(params: SystemParams, delta_a):
    """Cavity-atom detuning at which the intracavity light picks up no phase."""
    d = derive(params)
    da = np.asarray(delta_a, dtype=float)
    ng2 = params.n_atoms * params.g**2
    return da - ng2 * da / (da**2 + 0.25 * params.gamma**2 + 0.5 * d.omega_eta**2)


def zero_phase_radicand(params: SystemParams) -> float:
    d = derive(params)
    return params.n_atoms * params.g**2 - 0.25 * params.gamma**2 - 0.5 * d.omega_eta**2


def zero_phase_crossings(params: SystemParams) -> np.ndarray:
    """Non-zero atomic detunings where the zero-phase curve crosses delta_ca = 0."""
    r = zero_phase_radicand(params)
    if r <= 0:
        return np.empty(0)
    root = np.sqrt(r)
    return np.array([-root, root])


# ---------------------------------------------------------------------------
# quasi-static hysteresis


def branch_follow(
    branches: list[SpectrumBranch],
    direction: str = "up",
    start_hint: str | float = "max",
    start_x: float | None = None,
) -> HysteresisTrace:
    """Adiabatic sweep over the branches of one scan.

    The followed root is kept as long as its branch exists; when the branch
    ends (a fold) the trace jumps to the nearest remaining root and the last
    abscissa on the old branch is recorded as a jump point.  ``start_hint``
    picks the initial root ("max", "min" or a photon number to approach) at
    the first abscissa in the sweep direction, or at ``start_x`` if given.
    """
    if direction not in ("up", "down"):
        raise ValueError("direction must be 'up' or 'down'")
    if not branches:
        return HysteresisTrace(direction, np.empty(0), np.empty(0), np.empty(0, int), [])
    xs = np.unique(np.concatenate([b.x for b in branches]))
    lookup = [dict(zip(b.x.tolist(), b.n.tolist())) for b in branches]
    order = xs if direction == "up" else xs[::-1]
    if start_x is not None:
        k0 = int(np.argmin(np.abs(order - start_x)))
        order = order[k0:]

    def present(x):
        return [(i, lk[x]) for i, lk in enumerate(lookup) if x in lk]

    first = present(order[0])
    if start_hint == "max":
        current = max(first, key=lambda c: c[1])[0]
    elif start_hint == "min":
        current = min(first, key=lambda c: c[1])[0]
    else:
        target = float(start_hint)
        current = min(first, key=lambda c: abs(c[1] - target))[0]

    out_x, out_n, out_b, jumps = [], [], [], []
    last_n, last_x = None, None
    for x in order.tolist():
        if x in lookup[current]:
            n = lookup[current][x]
        else:
            options = present(x)
            if not options:
                break
            current, n = min(options, key=lambda c: abs(c[1] - last_n))
            jumps.append(last_x)
        out_x.append(x)
        out_n.append(n)
        out_b.append(branches[current].branch_id)
        last_n, last_x = n, x
    return HysteresisTrace(direction, np.array(out_x), np.array(out_n), np.array(out_b), jumps)


def upper_envelope(branches: list[SpectrumBranch]):
    """Abscissae, maximum photon number and its population over all branches."""
    xs = np.unique(np.concatenate([b.x for b in branches])) if branches else np.empty(0)
    n_max = np.full(len(xs), -np.inf)
    pop = np.zeros(len(xs))
    t_max = np.zeros(len(xs))
    count = np.zeros(len(xs), dtype=int)
    for b in branches:
        idx = np.searchsorted(xs, b.x)
        count[idx] += 1
        better = b.n > n_max[idx]
        n_max[idx[better]] = b.n[better]
        pop[idx[better]] = b.p_excited[better]
        t_max[idx[better]] = b.T[better]
    return xs, n_max, t_max, pop, count
