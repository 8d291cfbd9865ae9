"""Roots of the steady-state cubic a3 n^3 + a2 n^2 + a1 n + a0 = 0.

Two independent routes are provided.  The radical route evaluates the
classical Cardano-type expressions in terms of an auxiliary cube root R and
the two combinations X+ and X-.  The trigonometric route works on the
depressed cubic and never forms R.  Both operate on a monic, rescaled copy of
the polynomial so that the coefficients are O(1) whatever the physical scale.

The batch functions accept broadcastable arrays and return an array with a
trailing axis of length 3; the scalar wrappers take a :class:`CubicCoefficients`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-9
DEGENERATE_DISC = 1e-12
NEWTON_STEPS = 5
SQRT3 = np.sqrt(3.0)
EPS = np.finfo(float).eps

STABILITY_TAGS = ("stable", "unstable", "marginal", "unknown")


@dataclass(frozen=True)
class CubicCoefficients:
    a3: float
    a2: float
    a1: float
    a0: float

    def __call__(self, n):
        return ((self.a3 * n + self.a2) * n + self.a1) * n + self.a0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.a3, self.a2, self.a1, self.a0)

    def residual_scale(self, n: float) -> float:
        """Largest individual term at ``n``; the natural yardstick for residuals."""
        n = abs(n)
        return max(abs(self.a3) * n**3, abs(self.a2) * n**2, abs(self.a1) * n, abs(self.a0), 1.0)


@dataclass(frozen=True)
class Root:
    value: float
    multiplicity: int = 1
    stability: str = "unknown"


@dataclass(frozen=True)
class RootSet:
    roots: tuple[Root, ...] = ()
    tolerance: float = DEFAULT_TOL

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.roots], dtype=float)

    @property
    def total_multiplicity(self) -> int:
        return sum(r.multiplicity for r in self.roots)

    def __len__(self) -> int:
        return len(self.roots)

    def __iter__(self):
        return iter(self.roots)

    def with_stability(self, tags) -> RootSet:
        roots = tuple(Root(r.value, r.multiplicity, t) for r, t in zip(self.roots, tags))
        return RootSet(roots, self.tolerance)


# ---------------------------------------------------------------------------
# preconditioning


def _monic_scaled(a3, a2, a1, a0):
    """Return (b, c, d, scale) with n = scale * x and x^3 + b x^2 + c x + d = 0."""
    a3 = np.asarray(a3, dtype=float)
    b0 = np.asarray(a2, dtype=float) / a3
    c0 = np.asarray(a1, dtype=float) / a3
    d0 = np.asarray(a0, dtype=float) / a3
    scale = np.maximum(np.maximum(np.abs(b0), np.sqrt(np.abs(c0))), np.cbrt(np.abs(d0)))
    # power-of-two scale keeps the rescaling exact; dividing one factor at a
    # time avoids underflow of scale**3 for very small scales
    scale = np.where(scale > 0, np.exp2(np.round(np.log2(np.where(scale > 0, scale, 1.0)))), 1.0)
    return b0 / scale, c0 / scale / scale, d0 / scale / scale / scale, scale


def _poly(x, b, c, d):
    return ((x + b) * x + c) * x + d


def _dpoly(x, b, c):
    return (3.0 * x + 2.0 * b) * x + c


def _newton_polish(x, b, c, d, steps=NEWTON_STEPS):
    """Up to ``steps`` Newton updates per root.

    A step is kept only if it lowers |p|, and roots whose residual is already at
    the rounding floor are left alone (this protects exact multiple roots).
    """
    b = b[..., None]
    c = c[..., None]
    d = d[..., None]
    x = np.array(x, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        p = _poly(x, b, c, d)
        for _ in range(steps):
            ax = np.abs(x)
            floor = 8 * EPS * (((ax + np.abs(b)) * ax + np.abs(c)) * ax + np.abs(d))
            dp = _dpoly(x, b, c)
            trial = x - p / dp
            pt = _poly(trial, b, c, d)
            better = np.isfinite(trial) & (np.abs(pt) < np.abs(p)) & (np.abs(p) > floor)
            if not better.any():
                break
            x = np.where(better, trial, x)
            p = np.where(better, pt, p)
    return x


def _discriminant_test(b, c, d):
    """Scaled discriminant of the monic cubic and a flag for near-degeneracy."""
    terms = np.stack(
        [
            18.0 * b * c * d,
            -4.0 * b**3 * d,
            b * b * c * c,
            -4.0 * c**3,
            -27.0 * d * d,
        ]
    )
    disc = terms.sum(axis=0)
    size = np.abs(terms).sum(axis=0)
    degenerate = np.abs(disc) < DEGENERATE_DISC * np.maximum(size, 1e-300)
    return disc, degenerate


# ---------------------------------------------------------------------------
# radical route


def _closed_monic(b, c, d):
    # With A = 1 the auxiliary quantities are
    #   R^3 = 36 C B - 108 D - 8 B^3 + 12 sqrt(3) sqrt(4 C^3 - C^2 B^2 - 18 C B D + 27 D^2 + 4 D B^3)
    #   X+- = R / 6 +- (6 C - 2 B^2) / (3 R)
    # Branch choice: the sign in front of the inner square root only swaps the
    # two Cardano terms, so we take the sign that makes |R^3| largest (no
    # cancellation, R = 0 only for a triple root) and the principal complex
    # cube root.  Any of the three cube roots yields the same root set.
    inner = 4 * c**3 - c * c * b * b - 18 * c * b * d + 27 * d * d + 4 * d * b**3
    sq = np.sqrt(inner.astype(complex))
    t = 36 * c * b - 108 * d - 8 * b**3
    plus = t + 12 * SQRT3 * sq
    minus = t - 12 * SQRT3 * sq
    r3 = np.where(np.abs(plus) >= np.abs(minus), plus, minus)
    r = np.power(r3, 1.0 / 3.0)
    q = 6 * c - 2 * b * b
    tiny = np.abs(r) < 1e-150
    safe_r = np.where(tiny, 1.0, r)
    x_plus = np.where(tiny, 0.0, r / 6 + q / (3 * safe_r))
    x_minus = np.where(tiny, 0.0, r / 6 - q / (3 * safe_r))
    shift = -b / 3
    n1 = x_minus + shift
    n2 = -x_minus / 2 + shift + 0.5j * SQRT3 * x_plus
    n3 = -x_minus / 2 + shift - 0.5j * SQRT3 * x_plus
    return np.stack([n1, n2, n3], axis=-1)


def closed_form_roots(a3, a2, a1, a0) -> np.ndarray:
    """Batch radical-formula roots, shape ``broadcast(...) + (3,)``, complex."""
    b, c, d, scale = _monic_scaled(a3, a2, a1, a0)
    with np.errstate(all="ignore"):
        x = _closed_monic(b, c, d)
    _, degenerate = _discriminant_test(b, c, d)
    if np.any(degenerate):
        x = np.where(degenerate[..., None], _trig_monic(b, c, d), x)
    x = _newton_polish(x, b, c, d)
    return _sorted(x * scale[..., None])


# ---------------------------------------------------------------------------
# trigonometric / hyperbolic route


def _quadratic_pair(total, prod):
    """Roots of x^2 - total x + prod without cancellation."""
    disc = total * total - 4.0 * prod
    root_disc = np.sqrt(np.abs(disc))
    sgn = np.where(total >= 0, 1.0, -1.0)
    u = 0.5 * (total + sgn * root_disc)
    real_pair = disc >= 0
    u_safe = np.where(u == 0, 1.0, u)
    x2 = np.where(real_pair, u, 0.5 * total + 0.5j * root_disc)
    x3 = np.where(real_pair, np.where(u == 0, 0.0, prod / u_safe), 0.5 * total - 0.5j * root_disc)
    return x2, x3


def _trig_monic(b, c, d):
    b, c, d = np.broadcast_arrays(b, c, d)
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    shift = -b / 3.0
    delta = -(4.0 * p**3 + 27.0 * q * q)

    with np.errstate(all="ignore"):
        # three real roots: t_k = m cos(theta - 2 pi k / 3); keep the largest |x|
        three = (delta > 0) & (p < 0)
        m = 2.0 * np.sqrt(np.abs(p) / 3.0)
        arg = np.clip(3.0 * q / (p * np.where(m > 0, m, 1.0)), -1.0, 1.0)
        theta = np.arccos(arg) / 3.0
        k = np.arange(3)
        trig = m[..., None] * np.cos(theta[..., None] - 2.0 * np.pi * k / 3.0) + shift[..., None]
        big = np.take_along_axis(trig, np.argmax(np.abs(trig), axis=-1)[..., None], axis=-1)[..., 0]

        # one real root: hyperbolic forms
        neg = p < 0
        ch_arg = np.maximum(-3.0 * np.abs(q) / (2.0 * p) * np.sqrt(-3.0 / np.where(neg, p, -1.0)), 1.0)
        t_neg = -2.0 * np.sign(q) * np.sqrt(np.abs(p) / 3.0) * np.cosh(np.arccosh(ch_arg) / 3.0)
        pos = p > 0
        sh_arg = 3.0 * q / (2.0 * np.where(pos, p, 1.0)) * np.sqrt(3.0 / np.where(pos, p, 1.0))
        t_pos = -2.0 * np.sqrt(np.abs(p) / 3.0) * np.sinh(np.arcsinh(sh_arg) / 3.0)
        t0 = np.where(neg, t_neg, np.where(pos, t_pos, np.cbrt(-q)))
        # |p| negligible against q: both hyperbolic forms tend to cbrt(-q)
        huge = np.where(neg, ch_arg, np.abs(sh_arg)) > 1e50
        t0 = np.where(huge | ~np.isfinite(t0), np.cbrt(-q), t0)

        r = np.where(three, big, t0 + shift)
        r = _newton_polish(r[..., None] + 0j, b, c, d)[..., 0].real

        # deflate with Vieta.  Backward identities (P = -d / r, S = (c - P) / r)
        # are accurate when r dominates the pair, forward ones (S = -b - r,
        # P = c - r S) when it is the smaller root; both pairs are formed and
        # the one with the smaller residual is kept.
        zero = r == 0
        safe = np.where(zero, 1.0, r)
        prod_b = np.where(zero, c, -d / safe)
        sum_b = np.where(zero, -b, (c - prod_b) / safe)
        sum_f = -b - r
        prod_f = c - r * sum_f
        pair_b = _quadratic_pair(sum_b, prod_b)
        pair_f = _quadratic_pair(sum_f, prod_f)
        res_b = np.abs(_poly(pair_b[0], b, c, d)) + np.abs(_poly(pair_b[1], b, c, d))
        res_f = np.abs(_poly(pair_f[0], b, c, d)) + np.abs(_poly(pair_f[1], b, c, d))
        use_b = (res_b <= res_f) | ~np.isfinite(res_f)
        x2 = np.where(use_b, pair_b[0], pair_f[0])
        x3 = np.where(use_b, pair_b[1], pair_f[1])
    return np.stack([r + 0j, x2, x3], axis=-1)


def trigonometric_roots(a3, a2, a1, a0) -> np.ndarray:
    """Batch roots from the depressed cubic via cos/cosh/sinh, shape ``... + (3,)``."""
    b, c, d, scale = _monic_scaled(a3, a2, a1, a0)
    x = _trig_monic(b, c, d)
    x = _newton_polish(x, b, c, d)
    return _sorted(x * scale[..., None])


def _sorted(roots: np.ndarray) -> np.ndarray:
    order = np.lexsort((roots.imag, roots.real), axis=-1)
    return np.take_along_axis(roots, order, axis=-1)


# ---------------------------------------------------------------------------
# scalar API


def _check(c: CubicCoefficients):
    values = np.array(c.as_tuple(), dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("cubic coefficients must be finite")
    if c.a3 == 0:
        raise ValueError("leading coefficient a3 must be non-zero")


def solve_cubic_closed(c: CubicCoefficients) -> np.ndarray:
    """Three complex roots from the radical formulas (numeric fallback when degenerate)."""
    _check(c)
    return closed_form_roots(*c.as_tuple())


def solve_cubic_numeric(c: CubicCoefficients) -> np.ndarray:
    """Three complex roots from the trigonometric method; independent of the radicals."""
    _check(c)
    return trigonometric_roots(*c.as_tuple())


def positive_real_roots(roots, tol: float = DEFAULT_TOL, scale: float | None = None) -> RootSet:
    """Keep the (numerically) real, non-negative roots and merge coincident ones.

    A root counts as real when ``|Im| <= tol * (scale + |Re|)``; ``scale``
    defaults to 1 (kappa = 1 units).  Roots closer than
    ``tol * (scale + |value|)`` are merged into one entry with multiplicity.
    """
    roots = np.asarray(roots, dtype=complex).ravel()
    unit = 1.0 if scale is None else float(scale)
    keep = (np.abs(roots.imag) <= tol * (unit + np.abs(roots.real))) & (roots.real >= -tol * unit)
    vals = np.sort(np.maximum(roots.real[keep], 0.0))
    merged: list[list[float]] = []
    for v in vals:
        if merged and abs(v - merged[-1][-1]) <= tol * (unit + abs(v)):
            merged[-1].append(v)
        else:
            merged.append([v])
    return RootSet(tuple(Root(float(np.mean(g)), len(g)) for g in merged), tol)
