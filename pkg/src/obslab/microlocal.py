"""Finite-n surrogates of (parabolic) H-measures.

A space-time field is tapered, zero padded and Fourier transformed; the energy
``|u_hat(tau, xi)|^2`` is then accumulated by direction, either along rays
through the origin (classical) or along the parabolas ``tau = a xi^2``
(parabolic).  Low dual radii are kept apart as ``excluded_mass``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft
from scipy.signal.windows import tukey

from .errors import WindowTooSmall
from .evolution import EvolutionSpec, SpaceTimeField, default_nt, modal_frequency, synthesize
from .grid import Grid1D, build_elliptic, eigendecompose
from .symbols import (
    TWO_PI,
    PrincipalSymbol,
    characteristic_angles,
    curve_angle,
    curve_point,
    parabolic_gauge,
    parabolic_project,
)

TAPER_FRACTION = 0.25
EXCLUSION_STEPS = 4


@dataclass(frozen=True)
class WindowedField:
    data: np.ndarray = field(repr=False)  # (nt_pad, nx_pad), taper applied
    dt: float
    dx: float
    extent: tuple = (0.0, 0.0)  # (T, L) spanned by the unpadded samples

    @property
    def grid_frequency(self) -> tuple:
        """Natural frequency steps ``(1/T, 1/L)`` of the unpadded window."""
        T, L = self.extent
        return (1.0 / T if T else self.dtau, 1.0 / L if L else self.dxi)

    @property
    def tau(self) -> np.ndarray:
        return fft.fftfreq(self.data.shape[0], self.dt)

    @property
    def xi(self) -> np.ndarray:
        return fft.fftfreq(self.data.shape[1], self.dx)

    @property
    def dtau(self) -> float:
        return 1.0 / (self.data.shape[0] * self.dt)

    @property
    def dxi(self) -> float:
        return 1.0 / (self.data.shape[1] * self.dx)

    def spectrum(self) -> np.ndarray:
        return fft.fft2(self.data) * (self.dt * self.dx)

    def energy(self) -> float:
        return float(np.sum(np.abs(self.data) ** 2) * self.dt * self.dx)


def window(f: SpaceTimeField, taper_fraction: float = TAPER_FRACTION, pad: int = 2) -> WindowedField:
    """Raised-cosine taper in ``t`` and ``x``, zero padded to FFT-friendly sizes."""
    nt, nx = f.values.shape
    if nt < 16 or nx < 16:
        raise WindowTooSmall(f"window needs at least 16 x 16 samples, got {nt} x {nx}")
    w = np.outer(tukey(nt, 2 * taper_fraction), tukey(nx, 2 * taper_fraction))
    shape = (fft.next_fast_len(pad * nt), fft.next_fast_len(pad * nx))
    data = np.zeros(shape, dtype=complex)
    data[:nt, :nx] = w * f.values
    dx = float(f.x[1] - f.x[0]) if f.x.size > 1 else f.h
    return WindowedField(data, f.dt, dx, (nt * f.dt, nx * dx))


def _as_windowed(f) -> WindowedField:
    return f if isinstance(f, WindowedField) else window(f)


@dataclass
class AngularDensity:
    scaling: str
    masses: np.ndarray
    excluded_mass: float
    total: float

    @property
    def n_bins(self) -> int:
        return self.masses.size

    @property
    def centers(self) -> np.ndarray:
        """Bin-center angles of the curve parametrization."""
        return (np.arange(self.n_bins) + 0.5) * (TWO_PI / self.n_bins)

    def center_points(self):
        return curve_point(self.centers, self.scaling)

    @property
    def nonexcluded(self) -> float:
        return float(self.masses.sum())

    def fraction(self, mask) -> float:
        tot = self.nonexcluded
        return float(self.masses[mask].sum() / tot) if tot > 0 else 0.0

    def direction_mask(self, angle: float, halfwidth_bins: int = 2) -> np.ndarray:
        """Bins within ``halfwidth_bins`` of the bin containing curve angle ``angle``."""
        b = int(np.floor(np.mod(angle, TWO_PI) / (TWO_PI / self.n_bins)))
        d = np.abs(np.arange(self.n_bins) - b)
        d = np.minimum(d, self.n_bins - d)
        return d <= halfwidth_bins

    def coarsen(self, factor: int) -> "AngularDensity":
        if self.n_bins % factor:
            raise ValueError("bin count must be divisible by the coarsening factor")
        return AngularDensity(
            self.scaling, self.masses.reshape(-1, factor).sum(axis=1), self.excluded_mass, self.total
        )

    def to_rows(self) -> list:
        return list(zip(self.centers.tolist(), self.masses.tolist()))


def _bin_index(wf: WindowedField, scaling: str, n_bins: int, r0: float | None):
    tau, xi = np.meshgrid(wf.tau, wf.xi, indexing="ij")
    if scaling == "classical":
        radius = np.hypot(tau, xi)
        if r0 is None:
            r0 = EXCLUSION_STEPS * max(wf.grid_frequency)
        excluded = radius < r0
        ang = curve_angle(tau, xi, "classical")
    elif scaling == "parabolic":
        radius = parabolic_gauge(tau, xi)
        if r0 is None:
            ft, fx = wf.grid_frequency
            r0 = max(parabolic_gauge(EXCLUSION_STEPS * ft, 0.0), parabolic_gauge(0.0, EXCLUSION_STEPS * fx))
        excluded = radius < r0
        safe = np.where(excluded, 1.0, tau), np.where(excluded, 1.0, xi)
        tp, xp = parabolic_project(*safe)
        ang = curve_angle(tp, xp, "parabolic")
    else:
        raise ValueError(f"unknown scaling {scaling!r}")
    idx = np.minimum((ang / (TWO_PI / n_bins)).astype(int), n_bins - 1)
    return idx, excluded


def angular_density(f, scaling: str = "classical", n_bins: int = 72,
                    r0: float | None = None) -> AngularDensity:
    """Windowed energy binned by dual direction.

    ``r0`` is the exclusion radius: Euclidean for classical scaling,
    parabolic gauge for parabolic scaling.  The default keeps out the first
    four dual grid steps.
    """
    if n_bins < 36:
        raise ValueError("need at least 36 bins")
    wf = _as_windowed(f)
    e = np.abs(wf.spectrum()) ** 2 * (wf.dtau * wf.dxi)
    idx, excluded = _bin_index(wf, scaling, n_bins, r0)
    masses = np.bincount(idx[~excluded], weights=e[~excluded], minlength=n_bins)
    return AngularDensity(scaling, masses, float(e[excluded].sum()), float(e.sum()))


def cross_angular_density(f1, f2, scaling: str = "classical", n_bins: int = 72,
                          r0: float | None = None):
    """Per-bin cross mass ``sum u1_hat conj(u2_hat)`` and the two diagonal densities."""
    w1, w2 = _as_windowed(f1), _as_windowed(f2)
    if w1.data.shape != w2.data.shape:
        raise ValueError("fields must share their grids")
    s1, s2 = w1.spectrum(), w2.spectrum()
    cell = w1.dtau * w1.dxi
    idx, excluded = _bin_index(w1, scaling, n_bins, r0)
    keep = ~excluded
    cross = np.bincount(idx[keep], weights=(s1 * s2.conj())[keep].real, minlength=n_bins) \
        + 1j * np.bincount(idx[keep], weights=(s1 * s2.conj())[keep].imag, minlength=n_bins)
    return cross * cell, angular_density(w1, scaling, n_bins, r0), angular_density(w2, scaling, n_bins, r0)


def kp_weight(tau, xi):
    """``(1 + (2 pi tau)^2 + (2 pi |xi|)^4)^(1/4)``."""
    return (1.0 + (TWO_PI * np.asarray(tau)) ** 2 + (TWO_PI * np.abs(xi)) ** 4) ** 0.25


def aniso_norm(f, s: float) -> float:
    """Norm in the anisotropic space ``H^{s/2, s}`` on the padded dual grid."""
    wf = _as_windowed(f)
    tau, xi = np.meshgrid(wf.tau, wf.xi, indexing="ij")
    e = np.abs(wf.spectrum()) ** 2 * kp_weight(tau, xi) ** (2 * s)
    return float(np.sqrt(e.sum() * wf.dtau * wf.dxi))


def frac_dt(f, s: int = 1) -> WindowedField:
    """``s`` applications of the half time derivative, symbol ``sqrt(2 pi i tau)``."""
    wf = _as_windowed(f)
    mult = np.sqrt(1j * TWO_PI * wf.tau) ** s
    out = fft.ifft(mult[:, None] * fft.fft(wf.data, axis=0), axis=0)
    return WindowedField(out, wf.dt, wf.dx, wf.extent)


def spectral_dx(f, order: int = 1) -> WindowedField:
    wf = _as_windowed(f)
    mult = (1j * TWO_PI * wf.xi) ** order
    out = fft.ifft(mult[None, :] * fft.fft(wf.data, axis=1), axis=1)
    return WindowedField(out, wf.dt, wf.dx, wf.extent)


@dataclass
class SequenceFamily:
    """Members ``u^n`` of a solution sequence with their initial energies."""

    members: list
    labels: list
    energies: list
    spec: EvolutionSpec | None = None


def mode_family(spec: EvolutionSpec, grid: Grid1D, modes, T: float, omega=None,
                nt: int | None = None) -> SequenceFamily:
    """Solutions started from the single unit-energy eigenmodes ``phi_m``."""
    modes = list(modes)
    basis = eigendecompose(build_elliptic(grid, spec.coeff), max(modes))
    idx = grid.window_indices(*(omega or (0.0, grid.length)))
    members = []
    for m in modes:
        data = np.zeros((spec.slots, basis.count))
        data[0, m - 1] = 1.0
        n = nt or default_nt(T, float(modal_frequency(spec, basis.eigenvalues[m - 1])))
        t = np.linspace(0.0, T, n)
        vals = synthesize(spec, basis, data, t, idx)
        members.append(SpaceTimeField(vals, t, grid.nodes[idx], grid.h))
    return SequenceFamily(members, modes, [1.0] * len(modes), spec)


def characteristic_points(symbol: PrincipalSymbol, coeff_values) -> np.ndarray:
    """Zeros ``(tau, xi)`` on the scaling's curve for the given coefficient values."""
    pts = []
    for c in np.unique(np.asarray(coeff_values, dtype=float)):
        th = characteristic_angles(symbol, float(c))
        if th.size:
            pts.append(np.column_stack(curve_point(th, symbol.scaling)))
    return np.concatenate(pts) if pts else np.empty((0, 2))


def neighborhood_mask(density: AngularDensity, points: np.ndarray, eps: float) -> np.ndarray:
    """Bins whose center lies within Euclidean distance ``eps`` of any point."""
    if points.size == 0:
        return np.zeros(density.n_bins, dtype=bool)
    ct, cx = density.center_points()
    d = np.hypot(ct[:, None] - points[None, :, 0], cx[:, None] - points[None, :, 1])
    return d.min(axis=1) <= eps


def level_mask(density: AngularDensity, symbol: PrincipalSymbol, coeff_values, rel: float) -> np.ndarray:
    """Bins whose center satisfies ``|p| <= rel * max|p|`` for some coefficient value."""
    tau, xi = density.center_points()
    mask = np.zeros(density.n_bins, dtype=bool)
    ref = curve_point(np.linspace(0.0, TWO_PI, 1441), symbol.scaling)
    for c in np.unique(np.asarray(coeff_values, dtype=float)):
        top = np.abs(symbol.value(c, *ref)).max()
        mask |= np.abs(symbol.value(c, tau, xi)) <= rel * top
    return mask


def localisation_test(family: SequenceFamily, symbol: PrincipalSymbol, eps: float = 0.1,
                      n_bins: int = 180, criterion: str = "distance") -> list:
    """Rows ``(label, fraction, nonexcluded / initial energy)``.

    With ``criterion="distance"`` the fraction counts bins whose center lies
    within ``eps`` of a characteristic point; with ``criterion="level"`` it
    counts bins where ``|p| <= eps * max|p|``.  ``fraction`` is ``nan`` when the
    selected set is empty (heat under parabolic scaling); the relative
    non-excluded mass is then the quantity of interest.
    """
    if criterion not in ("distance", "level"):
        raise ValueError(f"unknown criterion {criterion!r}")
    rows = []
    for label, f, e0 in zip(family.labels, family.members, family.energies):
        dens = angular_density(f, symbol.scaling, n_bins)
        cvals = symbol.spec.scale * symbol.coeff(f.x)
        if criterion == "distance":
            pts = characteristic_points(symbol, cvals)
            mask = neighborhood_mask(dens, pts, eps) if pts.size else None
        else:
            mask = level_mask(dens, symbol, cvals, eps)
            mask = mask if mask.any() else None
        frac = float("nan") if mask is None else dens.fraction(mask)
        rows.append((label, frac, dens.nonexcluded / e0))
    return rows


def heat_residuals(family: SequenceFamily, c: float = 1.0) -> list:
    """``|sqrt(d_t)^2 u - c u_xx|`` in ``H^{-1,-2}`` for each windowed member."""
    out = []
    for f in family.members:
        wf = window(f)
        r = frac_dt(wf, 2).data - c * spectral_dx(wf, 2).data
        out.append(aniso_norm(WindowedField(r, wf.dt, wf.dx, wf.extent), -2.0))
    return out


def plane_wave(k: float, direction: int, T: float = 1.0, L: float = 1.0, nt: int = 129,
               nx: int = 129) -> SpaceTimeField:
    """``exp(2 pi i k (x - direction * t))`` sampled on ``[0, T] x [0, L]``."""
    t = np.linspace(0.0, T, nt)
    x = np.linspace(0.0, L, nx)
    vals = np.exp(TWO_PI * 1j * k * (x[None, :] - direction * t[:, None]))
    return SpaceTimeField(vals, t, x, float(x[1] - x[0]))


@dataclass
class CounterexampleResult:
    fixed_index: list  # rows (n, f-fraction of v_i^n)
    superposed: list  # rows (n, f-fraction of sum_i v_i^n)
    compliant: list  # rows (n, f-fraction of sum_i theta_i u^n)
    index: int

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "fixed_index": [list(r) for r in self.fixed_index],
            "superposed": [list(r) for r in self.superposed],
            "compliant": [list(r) for r in self.compliant],
        }


def counterexample_demo(theta, n_max: int, index: int = 1, k0: float = 6.0, n_bins: int = 72,
                        halfwidth_bins: int = 2, **grid_kw) -> CounterexampleResult:
    """Index-diagonal swap ``v_i^n = f^n if i == n else theta_i u^n``.

    ``u^n`` and ``f^n`` are plane waves of wavenumber ``k0 n`` travelling along
    ``tau = -xi`` and ``tau = +xi``.  Reports the share of non-excluded mass
    near the ``f`` direction for a fixed index, for the superposition and for
    the swap-free family ``v_i^n = theta_i u^n``.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0) or abs(theta.sum() - 1.0) > 1e-12:
        from .errors import SequenceNotAveraging

        raise SequenceNotAveraging("theta must be positive and sum to 1")
    f_angle = curve_angle(1.0, 1.0, "classical")

    def f_frac(field_):
        d = angular_density(field_, "classical", n_bins)
        return d.fraction(d.direction_mask(f_angle, halfwidth_bins))

    fixed, sup, comp = [], [], []
    for n in range(1, n_max + 1):
        u = plane_wave(k0 * n, +1, **grid_kw)
        fn = plane_wave(k0 * n, -1, **grid_kw)
        v_fixed = fn if n == index else theta[index - 1] * u
        fixed.append((n, f_frac(v_fixed)))
        others = theta.sum() - (theta[n - 1] if n <= theta.size else 0.0)
        v_sum = others * u + fn if n <= theta.size else theta.sum() * u
        sup.append((n, f_frac(v_sum)))
        comp.append((n, f_frac(theta.sum() * u)))
    return CounterexampleResult(fixed, sup, comp, index)
