"""Piecewise-smooth functions with jumps and point masses.

A :class:`PiecewiseFunction1D` is a smooth function on each interval
between sorted breakpoints plus a weight for a Dirac mass sitting at
some of the breakpoints. This is enough to carry variations of shocked
solutions exactly: mean values and jumps at breakpoints, Volpert ratios,
and the mean-value product rule

    d(rho u) = (d rho) mean(u) + mean(rho) du

under which the Dirac weights on both sides agree.

Pieces are numpy ``Polynomial`` objects whenever possible (degree <= 8)
so identities hold to rounding; anything else is wrapped as a callable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

MAX_POLY_DEGREE = 8


class StructureError(ValueError):
    """Incompatible breakpoints, overlapping shifts and similar."""


class TabulatedPiece:
    """Linear interpolant of tabulated samples; constant extrapolation."""

    def __init__(self, xs, ys):
        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        if self.xs.ndim != 1 or self.xs.shape != self.ys.shape or np.any(np.diff(self.xs) <= 0):
            raise StructureError("tabulated piece needs matching increasing samples")

    def __call__(self, x):
        return np.interp(x, self.xs, self.ys)


class _Composite:
    def __init__(self, fn: Callable):
        self.fn = fn

    def __call__(self, x):
        return self.fn(x)


def _as_piece(p):
    if isinstance(p, Polynomial):
        return p
    if isinstance(p, (int, float, np.floating, np.integer)):
        return Polynomial([float(p)])
    if isinstance(p, (list, tuple, np.ndarray)):
        return Polynomial(np.asarray(p, dtype=float))
    if callable(p):
        return p
    raise TypeError(f"cannot use {type(p).__name__} as a smooth piece")


def _combine(p, q, op):
    if isinstance(p, Polynomial) and isinstance(q, Polynomial):
        if op == "add":
            return p + q
        if op == "sub":
            return p - q
        r = p * q
        if r.degree() <= MAX_POLY_DEGREE:
            return r
    if op == "add":
        return _Composite(lambda x: p(x) + q(x))
    if op == "sub":
        return _Composite(lambda x: p(x) - q(x))
    return _Composite(lambda x: p(x) * q(x))


def _scale(p, c):
    if isinstance(p, Polynomial):
        return p * c
    return _Composite(lambda x: c * p(x))


def _derivative(p, h=1e-6):
    if isinstance(p, Polynomial):
        return p.deriv()
    return _Composite(lambda x: (p(np.asarray(x) + h) - p(np.asarray(x) - h)) / (2 * h))


@dataclass(frozen=True)
class PiecewiseFunction1D:
    """Smooth pieces between breakpoints plus Dirac weights at breakpoints.

    ``pieces[k]`` lives on ``(breakpoints[k-1], breakpoints[k])`` with the
    obvious conventions at the ends. A value *at* a breakpoint is the right
    limit (so the Heaviside function is 1 at 0).
    """

    breakpoints: tuple = ()
    pieces: tuple = (Polynomial([0.0]),)
    dirac_weights: dict = field(default_factory=dict)
    domain: tuple = (-math.inf, math.inf)

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "pieces", tuple(_as_piece(p) for p in self.pieces))
        w = {float(k): float(v) for k, v in dict(self.dirac_weights).items() if v != 0.0}
        object.__setattr__(self, "dirac_weights", w)
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise StructureError("breakpoints must be strictly increasing")
        if len(self.pieces) != len(bp) + 1:
            raise StructureError(
                f"{len(bp)} breakpoints need {len(bp) + 1} pieces, got {len(self.pieces)}")
        lo, hi = self.domain
        if lo >= hi:
            raise StructureError("empty domain")
        for x in w:
            if x not in bp:
                raise StructureError(f"Dirac mass at {x} is not on a breakpoint")

    # --- constructors -------------------------------------------------
    @classmethod
    def constant(cls, c, **kw):
        return cls((), (Polynomial([float(c)]),), {}, **kw)

    @classmethod
    def polynomial(cls, coeffs, **kw):
        return cls((), (Polynomial(np.asarray(coeffs, dtype=float)),), {}, **kw)

    @classmethod
    def heaviside(cls, x0=0.0, left=0.0, right=1.0, **kw):
        """``left + (right - left) H(x - x0)``."""
        return cls((x0,), (left, right), {}, **kw)

    @classmethod
    def dirac(cls, x0, weight=1.0, **kw):
        return cls((x0,), (0.0, 0.0), {x0: weight}, **kw)

    # --- evaluation ---------------------------------------------------
    def _check_domain(self, x):
        lo, hi = self.domain
        if np.any(np.asarray(x) < lo) or np.any(np.asarray(x) > hi):
            raise ValueError(f"x outside domain [{lo}, {hi}]")

    def _interval(self, x):
        return np.searchsorted(np.asarray(self.breakpoints), x, side="right")

    def __call__(self, x):
        self._check_domain(x)
        x = np.asarray(x, dtype=float)
        idx = self._interval(x)
        out = np.empty_like(x)
        for k, p in enumerate(self.pieces):
            m = idx == k
            if np.any(m):
                out[m] = p(x[m])
        return out if out.ndim else float(out)

    def left(self, x) -> float:
        """Left limit f(x-)."""
        self._check_domain(x)
        k = int(np.searchsorted(np.asarray(self.breakpoints), x, side="left"))
        return float(self.pieces[k](x))

    def right(self, x) -> float:
        """Right limit f(x+)."""
        self._check_domain(x)
        return float(self.pieces[int(self._interval(x))](x))

    def dirac_at(self, x) -> float:
        return self.dirac_weights.get(float(x), 0.0)

    # --- algebra ------------------------------------------------------
    def _merged(self, other):
        bp = tuple(sorted(set(self.breakpoints) | set(other.breakpoints)))
        lo = max(self.domain[0], other.domain[0])
        hi = min(self.domain[1], other.domain[1])
        probes = _probe_points(bp)
        mine = [self.pieces[int(self._interval(p))] for p in probes]
        theirs = [other.pieces[int(other._interval(p))] for p in probes]
        return bp, mine, theirs, (lo, hi)

    def __add__(self, other):
        if not isinstance(other, PiecewiseFunction1D):
            other = PiecewiseFunction1D.constant(other)
        bp, a, b, dom = self._merged(other)
        w = dict(self.dirac_weights)
        for x, v in other.dirac_weights.items():
            w[x] = w.get(x, 0.0) + v
        return PiecewiseFunction1D(bp, [_combine(p, q, "add") for p, q in zip(a, b)], w, dom)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        if not isinstance(other, PiecewiseFunction1D):
            other = PiecewiseFunction1D.constant(other)
        return self + (-other)

    def __mul__(self, other):
        """Product. Point masses are weighted by the *mean value* of the
        other factor; two masses at the same point cannot be multiplied."""
        if not isinstance(other, PiecewiseFunction1D):
            c = float(other)
            return PiecewiseFunction1D(
                self.breakpoints, [_scale(p, c) for p in self.pieces],
                {x: c * v for x, v in self.dirac_weights.items()}, self.domain)
        common = set(self.dirac_weights) & set(other.dirac_weights)
        if common:
            raise StructureError(f"product of two Dirac masses at {sorted(common)}")
        bp, a, b, dom = self._merged(other)
        w = {x: v * mean_value(other, x) for x, v in self.dirac_weights.items()}
        for x, v in other.dirac_weights.items():
            w[x] = w.get(x, 0.0) + v * mean_value(self, x)
        return PiecewiseFunction1D(bp, [_combine(p, q, "mul") for p, q in zip(a, b)], w, dom)

    __rmul__ = __mul__

    def smooth_part(self) -> "PiecewiseFunction1D":
        return PiecewiseFunction1D(self.breakpoints, self.pieces, {}, self.domain)

    def derivative(self, distributional=True) -> "PiecewiseFunction1D":
        """Piecewise derivative; with ``distributional`` each jump adds a
        Dirac mass of weight equal to the jump. Existing masses would need
        dipoles and are rejected."""
        if self.dirac_weights:
            raise StructureError("derivative of a Dirac mass is not representable")
        w = {}
        if distributional:
            w = {x: jump(self, x) for x in self.breakpoints}
        return PiecewiseFunction1D(self.breakpoints, [_derivative(p) for p in self.pieces],
                                   w, self.domain)

    def integral(self, lo, hi, n=2001) -> float:
        """Integral over [lo, hi] including point masses strictly inside.

        Polynomial pieces are integrated exactly, others by Gauss-Legendre.
        """
        if hi < lo:
            return -self.integral(hi, lo, n)
        edges = [lo] + [b for b in self.breakpoints if lo < b < hi] + [hi]
        total = 0.0
        xg, wg = np.polynomial.legendre.leggauss(min(n, 64))
        for a, b in zip(edges[:-1], edges[1:]):
            if b <= a:
                continue
            p = self.pieces[int(self._interval(0.5 * (a + b)))]
            if isinstance(p, Polynomial):
                P = p.integ()
                total += float(P(b) - P(a))
            else:
                xm, xr = 0.5 * (a + b), 0.5 * (b - a)
                total += float(xr * np.sum(wg * p(xm + xr * xg)))
        total += sum(v for x, v in self.dirac_weights.items() if lo < x < hi)
        return total

    def compose(self, f: Callable) -> "PiecewiseFunction1D":
        """Pointwise f(self); point masses are not allowed."""
        if self.dirac_weights:
            raise StructureError("cannot compose a function with a Dirac mass")
        return PiecewiseFunction1D(self.breakpoints,
                                   [_Composite(lambda x, p=p: f(p(x))) for p in self.pieces],
                                   {}, self.domain)


def _probe_points(bp):
    if not bp:
        return [0.0]
    probes = [bp[0] - 1.0]
    probes += [0.5 * (a + b) for a, b in zip(bp[:-1], bp[1:])]
    probes.append(bp[-1] + 1.0)
    return probes


def mean_value(f: PiecewiseFunction1D, x) -> float:
    """(f(x+) + f(x-)) / 2; equals f(x) where f is smooth."""
    return 0.5 * (f.right(x) + f.left(x))


def jump(f: PiecewiseFunction1D, x) -> float:
    """f(x+) - f(x-)."""
    return f.right(x) - f.left(x)


def _pointwise_derivative(f, x, df=None):
    if df is not None:
        return float(df(x))
    try:
        h = 1e-30
        val = f(complex(x, h))
        if np.iscomplexobj(val) and np.imag(val) != 0:
            return float(np.imag(val) / h)
    except (TypeError, ValueError):
        pass
    h = 1e-6 * max(1.0, abs(x))
    return float((f(x + h) - f(x - h)) / (2 * h))


def volpert_ratio(f: Callable, rho_minus, rho_plus, df: Callable | None = None) -> float:
    """[f(rho)] / [rho] at a jump, f'(rho) when the two values coincide."""
    if rho_plus != rho_minus:
        return float((f(rho_plus) - f(rho_minus)) / (rho_plus - rho_minus))
    return _pointwise_derivative(f, rho_minus, df)


def heaviside_variation(rho_minus_dot, rho_plus_dot, x_s, rho_minus, rho_plus, shock_speed_da,
                        da=1.0, **kw) -> PiecewiseFunction1D:
    """Variation of ``rho- + (rho+ - rho-) H(x - x_s(a))`` for a change ``da``.

    ``rho_minus_dot``, ``rho_plus_dot`` are the derivatives of the two
    states (constants or polynomial coefficients), ``shock_speed_da`` is
    dx_s/da. The Dirac weight is ``-x_s' [rho] da``.
    """
    left = _scale(_as_piece(rho_minus_dot), da)
    right = _scale(_as_piece(rho_plus_dot), da)
    return PiecewiseFunction1D((x_s,), (left, right),
                               {x_s: -shock_speed_da * (rho_plus - rho_minus) * da}, **kw)


def extended_product_variation(rho: PiecewiseFunction1D, u: PiecewiseFunction1D,
                               drho: PiecewiseFunction1D, du: PiecewiseFunction1D
                               ) -> PiecewiseFunction1D:
    """Variation of the product rho*u by the mean-value rule
    ``(d rho) mean(u) + mean(rho) du``."""
    if drho.breakpoints != rho.breakpoints or du.breakpoints != u.breakpoints:
        raise StructureError("a variation must share the breakpoints of its function")
    return drho * u + rho * du


def extended_chain_variation(f: Callable, rho: PiecewiseFunction1D, drho: PiecewiseFunction1D,
                             df: Callable | None = None) -> PiecewiseFunction1D:
    """Variation of f(rho): ``f'(rho) d rho`` off the jumps and the Volpert
    ratio times the Dirac weight of ``d rho`` at them."""
    if drho.breakpoints != rho.breakpoints:
        raise StructureError("a variation must share the breakpoints of its function")
    if df is None:
        def df(x):
            x = np.asarray(x, dtype=float)
            return np.vectorize(lambda s: _pointwise_derivative(f, float(s)))(x)
    smooth = rho.compose(df) * drho.smooth_part()
    w = {}
    for x, v in drho.dirac_weights.items():
        w[x] = v * volpert_ratio(f, rho.left(x), rho.right(x), df)
    return PiecewiseFunction1D(smooth.breakpoints, smooth.pieces, w, smooth.domain)


@dataclass(frozen=True)
class ShiftVariation:
    """Smooth variation plus shifts of discontinuity positions.

    ``shift_points`` holds ``(position, jump, shift)`` triples.
    """

    smooth_part: PiecewiseFunction1D
    shift_points: tuple = ()

    def __post_init__(self):
        if self.smooth_part.dirac_weights:
            raise StructureError("the smooth part of a shift-variation carries no Dirac mass")
        pts = tuple((float(a), float(j), float(d)) for a, j, d in self.shift_points)
        object.__setattr__(self, "shift_points", pts)

    @classmethod
    def from_function(cls, rho: PiecewiseFunction1D, smooth_part, shifts: dict):
        """Build from the jumps of ``rho`` at the positions in ``shifts``."""
        pts = []
        for a, d in shifts.items():
            if float(a) not in rho.breakpoints:
                raise StructureError(f"shift position {a} is not a breakpoint")
            pts.append((a, jump(rho, a), d))
        return cls(smooth_part, tuple(pts))

    def to_function(self) -> PiecewiseFunction1D:
        boxes = _boxes([(a, -np.sign(d) * j, d) for a, j, d in self.shift_points])
        return self.smooth_part + boxes


def _boxes(specs) -> PiecewiseFunction1D:
    """Sum of boxes of given height on (a, a+d) (or (a+d, a) for d < 0)."""
    intervals = []
    for a, height, d in specs:
        if d == 0 or height == 0:
            continue
        lo, hi = (a, a + d) if d > 0 else (a + d, a)
        intervals.append((lo, hi, height))
    intervals.sort()
    for (l1, h1, _), (l2, h2, _) in zip(intervals, intervals[1:]):
        if l2 < h1:
            raise StructureError(f"shifted intervals ({l1}, {h1}) and ({l2}, {h2}) overlap")
    bp, pieces = [], [Polynomial([0.0])]
    for lo, hi, height in intervals:
        if bp and bp[-1] == lo:
            pieces[-1] = Polynomial([height])
        else:
            bp.append(lo)
            pieces.append(Polynomial([height]))
        bp.append(hi)
        pieces.append(Polynomial([0.0]))
    return PiecewiseFunction1D(tuple(bp), tuple(pieces), {})


def shift_variation_apply(rho: PiecewiseFunction1D, shifts) -> PiecewiseFunction1D:
    """Finite-width version of moving the jumps of ``rho``.

    ``shifts`` maps breakpoint -> displacement (or is a sequence of pairs).
    Moving a jump by ``d > 0`` changes rho by ``-[rho]`` on ``(a, a+d)``;
    for ``d < 0`` by ``+[rho]`` on ``(a+d, a)``. The integral is
    ``-[rho] d`` in both cases, the weight of the matching Dirac mass.
    """
    items = shifts.items() if isinstance(shifts, dict) else shifts
    specs = []
    for a, d in items:
        a = float(a)
        if a not in rho.breakpoints:
            raise StructureError(f"{a} is not a breakpoint of the function")
        d = float(d)
        specs.append((a, -np.sign(d) * jump(rho, a), d))
    return _boxes(specs)


def negative_part_jump(rho: PiecewiseFunction1D, a) -> float:
    """[rho]^- = -min(0, rho(a+) - rho(a-))."""
    return -min(0.0, jump(rho, a))


def ulbrich_shift_variation(rho: PiecewiseFunction1D, a, d) -> PiecewiseFunction1D:
    """``sign(d) [rho(a)]^- 1_(a - d^-, a + d^+)``: only downward jumps move.

    Coincides with :func:`shift_variation_apply` for downward jumps and is
    zero for upward ones.
    """
    a = float(a)
    if a not in rho.breakpoints:
        raise StructureError(f"{a} is not a breakpoint of the function")
    height = math.copysign(1.0, d) * negative_part_jump(rho, a) if d else 0.0
    return _boxes([(a, height, float(d))])


def polynomial_pieces(breakpoints: Sequence[float], coeffs: Sequence[Sequence[float]],
                      dirac: dict | None = None) -> PiecewiseFunction1D:
    return PiecewiseFunction1D(tuple(breakpoints), tuple(Polynomial(c) for c in coeffs),
                               dirac or {})
