"""Principal symbols, characteristic sets and their separation.

Classical symbols live on the unit circle ``tau^2 + xi^2 = 1``; parabolic ones
on the ellipse ``P: tau^2 + xi^2/2 = 1`` reached by projecting along the
parabolas ``tau = a xi^2``.  Both curves are parametrized by an angle:
``(cos t, sin t)`` and ``(cos t, sqrt(2) sin t)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq, minimize_scalar

from .errors import OriginProjection
from .evolution import EvolutionSpec
from .grid import CoefficientField

TWO_PI = 2 * math.pi
ZERO_RTOL = 1e-9


@dataclass(frozen=True)
class PrincipalSymbol:
    spec: EvolutionSpec
    scaling: str = "classical"

    @property
    def coeff(self) -> CoefficientField:
        return self.spec.coeff

    def value(self, c, tau, xi):
        """Symbol at coefficient value(s) ``c``, vectorized."""
        if self.scaling == "classical":
            return classical_symbol(self.spec, c, tau, xi)
        return parabolic_symbol(self.spec, c, tau, xi)

    def __call__(self, x, tau, xi):
        return self.value(self.spec.scale * self.coeff(x), tau, xi)


def classical_symbol(spec: EvolutionSpec, c, tau, xi):
    c, tau, xi = np.broadcast_arrays(np.asarray(c, float), np.asarray(tau, float), np.asarray(xi, float))
    k = spec.order
    if spec.kind == "wave" or (spec.kind == "evolution" and k == 2):
        return (tau ** 2 - c * xi ** 2).astype(complex)
    if k == 1:
        return (c * xi ** 2).astype(complex)
    return (tau ** k).astype(complex)


def parabolic_symbol(spec: EvolutionSpec, c, tau, xi):
    c, tau, xi = np.broadcast_arrays(np.asarray(c, float), np.asarray(tau, float), np.asarray(xi, float))
    if spec.kind == "schrodinger":
        return (TWO_PI * tau + TWO_PI ** 2 * c * xi ** 2).astype(complex)
    if spec.order == 1:
        return 1j * TWO_PI * tau + TWO_PI ** 2 * c * xi ** 2
    return (1j * TWO_PI * tau) ** spec.order


def eval_classical(p: PrincipalSymbol, x, tau, xi):
    return classical_symbol(p.spec, p.spec.scale * p.coeff(x), tau, xi)


def eval_parabolic(p: PrincipalSymbol, x, tau, xi):
    return parabolic_symbol(p.spec, p.spec.scale * p.coeff(x), tau, xi)


def curve_point(theta, scaling: str):
    theta = np.asarray(theta, dtype=float)
    if scaling == "classical":
        return np.cos(theta), np.sin(theta)
    return np.cos(theta), math.sqrt(2.0) * np.sin(theta)


def curve_angle(tau, xi, scaling: str):
    """Inverse of :func:`curve_point`, in ``[0, 2 pi)``."""
    if scaling == "parabolic":
        xi = np.asarray(xi) / math.sqrt(2.0)
    return np.mod(np.arctan2(xi, tau), TWO_PI)


def parabolic_project(tau, xi):
    """Project ``(tau, xi) != 0`` onto ``P`` along the parabola ``tau = a xi^2``.

    Vectorized; raises :class:`OriginProjection` if any point is the origin.
    """
    tau = np.asarray(tau, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if np.any((tau == 0) & (xi == 0)):
        raise OriginProjection("the origin has no parabolic projection")
    # Parabolic rescaling (tau, xi) -> (tau / r^2, xi / r) keeps the meridian and
    # brings both coordinates into [-1, 1].
    r = np.maximum(np.abs(xi), np.sqrt(np.abs(tau)))
    t, x = tau / r ** 2, xi / r
    # With a = t / x^2, xi_P^2 solves a^2 s^2 + s/2 - 1 = 0; multiplied through by
    # x^2 the root needs no division by x and stays finite at the poles.
    d = 0.5 * x * x + np.sqrt(0.25 * x ** 4 + 4.0 * t * t)
    xi_p = np.sign(x) * np.sqrt(2.0 * x * x / d)
    tau_p = 2.0 * t / d
    if tau_p.ndim == 0:
        return float(tau_p), float(xi_p)
    return tau_p, xi_p


def parabolic_gauge(tau, xi):
    """``((2 pi tau)^2 + (2 pi xi)^4)^(1/4)``, homogeneous of degree 1 in (tau^(1/2), xi)."""
    return ((TWO_PI * np.asarray(tau)) ** 2 + (TWO_PI * np.asarray(xi)) ** 4) ** 0.25


def _real_roots(f, grid):
    """Roots of a real function sampled on a periodic grid: sign changes plus exact zeros."""
    vals = f(grid)
    roots = list(grid[vals == 0])
    nxt = np.roll(vals, -1)
    nxt_t = np.roll(grid, -1)
    nxt_t[-1] += TWO_PI
    for i in np.flatnonzero(vals * nxt < 0):
        roots.append(brentq(f, grid[i], nxt_t[i], xtol=1e-15, rtol=4 * np.finfo(float).eps) % TWO_PI)
    return roots


def characteristic_angles(symbol: PrincipalSymbol, c: float, n_angle: int = 720) -> np.ndarray:
    """Curve angles where the symbol with coefficient ``c`` vanishes."""
    n_angle = 4 * math.ceil(n_angle / 4)
    grid = np.arange(n_angle) * (TWO_PI / n_angle)
    vals = symbol.value(c, *curve_point(grid, symbol.scaling))
    scale = np.abs(vals).max()
    if scale == 0:
        return grid
    part = np.real if np.abs(vals.real).max() >= np.abs(vals.imag).max() else np.imag

    def f(th):
        return part(symbol.value(c, *curve_point(th, symbol.scaling)))

    roots = _real_roots(f, grid)
    # Even-order zeros touch without a sign change: refine local minima of |p|.
    mod = np.abs(vals)
    for i in np.flatnonzero((mod <= np.roll(mod, 1)) & (mod <= np.roll(mod, -1))):
        res = minimize_scalar(
            lambda th: abs(symbol.value(c, *curve_point(th, symbol.scaling))),
            bounds=(grid[i] - TWO_PI / n_angle, grid[i] + TWO_PI / n_angle),
            method="bounded",
            options={"xatol": 1e-13},
        )
        roots.append(res.x % TWO_PI)
    cand = np.mod(np.array(roots, dtype=float), TWO_PI)
    if cand.size == 0:
        return cand
    resid = np.abs(symbol.value(c, *curve_point(cand, symbol.scaling)))
    order = np.argsort(resid, kind="stable")
    kept: list = []
    for i in order[resid[order] <= ZERO_RTOL * scale]:
        gap = np.abs(np.array(kept) - cand[i])
        if not kept or np.min(np.minimum(gap, TWO_PI - gap)) > 1e-7:
            kept.append(cand[i])
    return np.sort(np.array(kept))


@dataclass
class SeparationReport:
    margin: float
    witness: dict | None
    hypersurface: str
    empty: tuple = ()
    zero_counts: tuple = (0, 0)
    samples: dict = field(default_factory=dict, repr=False)

    def to_json(self) -> dict:
        return {
            "margin": self.margin,
            "witness": self.witness,
            "hypersurface": self.hypersurface,
            "empty_characteristic_sets": list(self.empty),
            "zero_counts": list(self.zero_counts),
        }


def window_samples(omega, length: float, n_x: int = 100, lattice: int = 4096) -> np.ndarray:
    """Points of the fixed lattice ``length * i / lattice`` in ``[a, b]`` plus both ends.

    Refines the lattice by factors of 2 until at least ``n_x`` points fall inside.
    """
    a, b = omega
    while True:
        step = length / lattice
        i0, i1 = math.ceil(a / step - 1e-9), math.floor(b / step + 1e-9)
        xs = step * np.arange(i0, i1 + 1)
        if xs.size >= n_x:
            break
        lattice *= 2
    return np.unique(np.concatenate([[a], xs, [b]]))


def separation_margin(p1: PrincipalSymbol, p2: PrincipalSymbol, omega, length: float = 1.0,
                      n_angle: int = 360, n_x: int = 100) -> SeparationReport:
    """Normalized distance between the characteristic sets of two symbols over ``omega``.

    ``margin = min(min_{Z1} |p2| / max|p2|, min_{Z2} |p1| / max|p1|)``; a
    symbol without zeros contributes nothing and is listed in ``empty``.
    """
    if p1.scaling != p2.scaling:
        raise ValueError("symbols must share the scaling")
    if n_angle < 360 or n_x < 100:
        raise ValueError("need n_angle >= 360 and n_x >= 100")
    scaling = p1.scaling
    xs = window_samples(omega, length, n_x)
    n_angle = 4 * math.ceil(n_angle / 4)
    th = np.arange(n_angle) * (TWO_PI / n_angle)
    tau, xi = curve_point(th, scaling)

    cs = [p.spec.scale * p.coeff(xs) for p in (p1, p2)]
    peaks = [
        max(float(np.abs(p.value(c, tau, xi)).max()) for c in np.unique(cv))
        for p, cv in zip((p1, p2), cs)
    ]

    margin = math.inf
    witness = None
    counts = []
    empty = []
    for name, (p, q), (cp, cq), peak_q in (
        ("p1", (p1, p2), (cs[0], cs[1]), peaks[1]),
        ("p2", (p2, p1), (cs[1], cs[0]), peaks[0]),
    ):
        n_zero = 0
        zeros_by_c = {}
        for c in np.unique(cp):
            zeros_by_c[c] = characteristic_angles(p, c, n_angle)
        for x, c, cq_x in zip(xs, cp, cq):
            z = zeros_by_c[c]
            n_zero += z.size
            if z.size == 0:
                continue
            zt, zx = curve_point(z, scaling)
            vals = np.abs(q.value(cq_x, zt, zx)) / peak_q
            i = int(np.argmin(vals))
            if vals[i] < margin:
                margin = float(vals[i])
                witness = {"zero_of": name, "x": float(x), "tau": float(zt[i]), "xi": float(zx[i])}
        counts.append(n_zero)
        if n_zero == 0:
            empty.append(name)
    if margin <= ZERO_RTOL:
        # A zero of one symbol where the other is below the membership threshold.
        margin = 0.0
    return SeparationReport(
        margin=margin,
        witness=witness,
        hypersurface="S1" if scaling == "classical" else "P",
        empty=tuple(empty),
        zero_counts=tuple(counts),
        samples={"x": xs, "theta": th},
    )


def sampled_modulus(p: PrincipalSymbol, omega, length: float = 1.0, n_angle: int = 360,
                    n_x: int = 100) -> list:
    """Rows ``(x, theta, tau, xi, |p|)`` over the window and the curve."""
    xs = window_samples(omega, length, n_x)
    th = np.arange(n_angle) * (TWO_PI / n_angle)
    tau, xi = curve_point(th, p.scaling)
    rows = []
    for x in xs:
        vals = np.abs(p(np.full_like(th, x), tau, xi))
        rows.extend(zip(np.full_like(th, x), th, tau, xi, vals))
    return rows


def gcc_time_closed_form(c: CoefficientField, omega, length: float) -> float:
    """Longest round trip through a gap: ``max(2 int_0^a dx/sqrt(c), 2 int_b^L dx/sqrt(c))``."""
    a, b = omega
    breaks = list(c.breaks) if c.kind == "piecewise" else []

    def travel(lo, hi):
        if hi <= lo:
            return 0.0
        pts = [t for t in breaks if lo < t < hi] or None
        return quad(lambda x: 1.0 / math.sqrt(float(c(x))), lo, hi, points=pts, limit=200)[0]

    left, right = 2 * travel(0.0, a), 2 * travel(b, length)
    return max(left, right)


def gcc_time(c: CoefficientField, omega, length: float = 1.0, h: float | None = None,
             n_start: int = 200) -> float:
    """Time for every reflected ray ``x' = +-sqrt(c(x))`` to enter ``omega``.

    Rays start from points of the uncovered gaps in both directions and are
    integrated with classical RK4, step ``h / (10 sqrt(c_max))``; the entry
    time is located by linear interpolation inside the last step.
    """
    a, b = omega
    if a <= 0 and b >= length:
        return 0.0
    if h is None:
        h = length / 100
    cmin, cmax = c.bounds(0.0, length)
    if cmin <= 0:
        raise ValueError("wave speed coefficient must be positive")
    ds = h / (10 * math.sqrt(cmax))
    starts = []
    if a > 0:
        starts.append(np.linspace(0.0, a, n_start))
    if b < length:
        starts.append(np.linspace(b, length, n_start))
    x0 = np.concatenate(starts)
    x = np.concatenate([x0, x0])
    d = np.concatenate([np.ones_like(x0), -np.ones_like(x0)])

    def speed(y):
        return np.sqrt(c(np.clip(y, 0.0, length)))

    inside = lambda y: (y > a) & (y < b)
    T = np.where(inside(x), 0.0, np.nan)
    live = np.isnan(T)
    s = 0.0
    t_cap = 4 * length / math.sqrt(cmin) + 10 * ds
    while live.any() and s < t_cap:
        xl, dl = x[live], d[live]
        k1 = dl * speed(xl)
        k2 = dl * speed(xl + 0.5 * ds * k1)
        k3 = dl * speed(xl + 0.5 * ds * k2)
        k4 = dl * speed(xl + ds * k3)
        xn = xl + ds / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        # Specular reflection at the Dirichlet ends.
        lo, hi = xn < 0, xn > length
        xn = np.where(lo, -xn, np.where(hi, 2 * length - xn, xn))
        dl = np.where(lo | hi, -dl, dl)
        entered = inside(xn)
        if entered.any():
            edge = np.where(dl[entered] > 0, a, b)
            frac = np.abs(edge - xl[entered]) / np.maximum(np.abs(xn[entered] - xl[entered]), 1e-300)
            ids = np.flatnonzero(live)[entered]
            T[ids] = s + np.clip(frac, 0.0, 1.0) * ds
        x[live], d[live] = xn, dl
        live = np.isnan(T)
        s += ds
    if live.any():
        return math.inf
    return float(T.max())
