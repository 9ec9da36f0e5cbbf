"""Modal time evolution of wave, Schrödinger, heat and ``d^k/dt^k + c A`` equations.

Each component is expanded in the eigenbasis of its elliptic operator; every
mode then obeys a scalar ODE ``y^(k) + mu y = 0`` (``i y' - mu y = 0`` for
Schrödinger) with ``mu = scale * lambda_j``, solved in closed form through its
characteristic roots.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import CutoffMismatch, UnsupportedOrder
from .grid import CoefficientField, Grid1D, ModeBasis, build_elliptic

if TYPE_CHECKING:
    from .scenario import Scenario

KINDS = ("wave", "schrodinger", "heat", "evolution")
GROWTH_WARN = 1e6


@dataclass(frozen=True)
class EvolutionSpec:
    """One system component.

    ``kind="evolution"`` is the generic ``(d/dt)^k + scale * A`` operator; wave,
    heat and Schrödinger fix ``k``.  ``coeff`` defines the component's own
    elliptic operator ``A = -d/dx(coeff d/dx)``.
    """

    kind: str
    order: int | None = None
    scale: float = 1.0
    coeff: CoefficientField = field(default_factory=lambda: CoefficientField.constant(1.0))

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown evolution kind {self.kind!r}")
        fixed = {"wave": 2, "schrodinger": 1, "heat": 1}.get(self.kind)
        if fixed is not None:
            if self.order not in (None, fixed):
                raise ValueError(f"{self.kind} has time order {fixed}, got {self.order}")
            object.__setattr__(self, "order", fixed)
        elif self.order is None or self.order < 1:
            raise ValueError("evolution kind needs an order k >= 1")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @property
    def is_complex(self) -> bool:
        return self.kind == "schrodinger"

    @property
    def slots(self) -> int:
        return self.order


def _unit_roots(spec: EvolutionSpec) -> np.ndarray:
    """Characteristic roots divided by ``rho`` (``rho = mu`` or ``mu^(1/k)``)."""
    if spec.kind == "schrodinger":
        return np.array([-1j])
    k = spec.order
    return np.exp(1j * np.pi * (2 * np.arange(k) + 1) / k)


def _rho(spec: EvolutionSpec, mu):
    mu = np.asarray(mu, dtype=float)
    if spec.kind == "schrodinger" or spec.order == 1:
        return mu
    return mu ** (1.0 / spec.order)


def modal_frequency(spec: EvolutionSpec, lam) -> np.ndarray:
    """Modulus of the characteristic roots of each mode."""
    return _rho(spec, spec.scale * np.asarray(lam, dtype=float))


def modal_propagator(spec: EvolutionSpec, lam: float, t: float) -> np.ndarray:
    """``k x k`` matrix mapping ``(y, y', ..., y^(k-1))`` at 0 to its value at ``t``."""
    if not lam > 0 or t < 0:
        raise ValueError("need lam > 0 and t >= 0")
    rho = float(_rho(spec, spec.scale * lam))
    w = _unit_roots(spec)
    k = w.size
    U = np.vander(w, k, increasing=True).T  # U[d, m] = w_m ** d
    Uinv = np.linalg.inv(U)
    d = np.arange(k)
    P = (U * np.exp(rho * w * t)[None, :]) @ Uinv
    P = P * (rho ** d)[:, None] / (rho ** d)[None, :]
    return P if spec.is_complex else P.real


def modal_signals(spec: EvolutionSpec, lam, t) -> np.ndarray:
    """Responses ``z[s, j, :]`` of mode ``j`` to a unit datum in slot ``s``.

    Slot ``s`` holds the ``s``-th time derivative at ``t = 0``.
    """
    mu = spec.scale * np.asarray(lam, dtype=float)
    t = np.asarray(t, dtype=float)
    if spec.kind == "schrodinger":
        return np.exp(-1j * mu[:, None] * t[None, :])[None]
    k = spec.order
    if k == 1:
        return np.exp(-mu[:, None] * t[None, :])[None]
    if k == 2:
        om = np.sqrt(mu)[:, None]
        return np.stack([np.cos(om * t), np.sin(om * t) / om])
    rho = _rho(spec, mu)
    w = _unit_roots(spec)
    Uinv = np.linalg.inv(np.vander(w, k, increasing=True).T)
    expo = np.exp(rho[:, None, None] * w[None, :, None] * t[None, None, :])  # (M, k, nt)
    z = np.einsum("jmt,ms->sjt", expo, Uinv)
    z = z / rho[None, :, None] ** np.arange(k)[:, None, None]
    z = z.real
    peak = np.abs(z).max(initial=0.0)
    if peak > GROWTH_WARN:
        warnings.warn(
            f"order-{k} modal solutions grow to {peak:.3e}; Gramian conditioning is degraded",
            RuntimeWarning,
            stacklevel=2,
        )
    return z


def simpson_weights(nt: int, dt: float) -> np.ndarray:
    if nt < 3 or nt % 2 == 0:
        raise ValueError(f"Simpson quadrature needs an odd node count >= 3, got {nt}")
    w = np.full(nt, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * dt / 3.0


def default_nt(T: float, omega_max: float) -> int:
    """Eight samples per period of the fastest retained modal frequency."""
    return 8 * max(1, math.ceil(T * omega_max / (2 * math.pi))) + 1


@dataclass(frozen=True)
class SpaceTimeField:
    """Samples ``values[t_idx, x_idx]`` on the observation window."""

    values: np.ndarray = field(repr=False)
    t: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    h: float

    def __post_init__(self):
        if self.values.shape != (self.t.size, self.x.size):
            raise ValueError("field shape does not match its time and space grids")
        if self.t.size % 2 == 0:
            raise ValueError("time node count must be odd (Simpson quadrature)")

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def time_weights(self) -> np.ndarray:
        return simpson_weights(self.t.size, self.dt)

    def integral_sq(self) -> float:
        """Quadrature of the squared modulus over the window."""
        return float(self.time_weights @ (np.abs(self.values) ** 2).sum(axis=1) * self.h)

    def l2_in_time(self) -> np.ndarray:
        """Discrete L2(window) norm at each time node."""
        return np.sqrt(self.h * (np.abs(self.values) ** 2).sum(axis=1))

    def __add__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        return SpaceTimeField(self.values + other.values, self.t, self.x, self.h)

    def __rmul__(self, s) -> "SpaceTimeField":
        return SpaceTimeField(s * self.values, self.t, self.x, self.h)


def synthesize(spec: EvolutionSpec, basis: ModeBasis, data, t, idx) -> np.ndarray:
    """Field values at times ``t`` on node indices ``idx`` for modal data ``(k, M)``."""
    data = np.asarray(data)
    z = modal_signals(spec, basis.eigenvalues, t)  # (k, M, nt)
    amp = np.einsum("sj,sjt->tj", data, z)
    return amp @ basis.vectors[idx].T


def modal_states(spec: EvolutionSpec, basis: ModeBasis, data, t) -> np.ndarray:
    """State ``(y, y', ..., y^(k-1))`` of every mode, shape ``(k, M, nt)``."""
    data = np.asarray(data)
    t = np.atleast_1d(t)
    out = np.empty((spec.slots,) + (basis.count, t.size), dtype=complex)
    for j, lam in enumerate(basis.eigenvalues):
        for n, tn in enumerate(t):
            out[:, j, n] = modal_propagator(spec, lam, tn) @ data[:, j]
    return out if spec.is_complex or np.iscomplexobj(data) else out.real


def solve(scenario: "Scenario", data: Sequence[np.ndarray]) -> list[SpaceTimeField]:
    """Fields of every component on ``omega x [0, T]``, one per component."""
    if len(data) != len(scenario.components):
        raise CutoffMismatch("need one initial-data array per component")
    t = scenario.times
    idx = scenario.window_idx
    out = []
    for comp, basis, d in zip(scenario.components, scenario.bases, data):
        d = np.asarray(d)
        if d.shape != (comp.spec.slots, scenario.cutoff):
            raise CutoffMismatch(
                f"initial data shape {d.shape} != ({comp.spec.slots}, {scenario.cutoff})"
            )
        vals = synthesize(comp.spec, basis, d, t, idx)
        out.append(SpaceTimeField(vals, t, scenario.grid.nodes[idx], scenario.grid.h))
    return out


def timestep_scaled(
    grid: Grid1D,
    coeff: CoefficientField,
    c2: CoefficientField,
    order: int,
    basis: ModeBasis,
    data,
    T: float,
    dt: float,
    window: tuple[float, float] | None = None,
) -> SpaceTimeField:
    """Implicit time stepping of ``(d/dt)^k u + c2(x) A u = 0`` for ``k`` in {1, 2}.

    ``A`` is built from ``coeff`` and shared with ``basis``; ``data`` holds the
    ``(k, M)`` modal initial jet in that basis.  ``k = 1`` uses the trapezoidal
    rule, ``k = 2`` the implicit midpoint rule on ``(u, u')``.
    """
    if order not in (1, 2):
        raise UnsupportedOrder(f"variable-coefficient stepping supports k in (1, 2), got {order}")
    data = np.asarray(data, dtype=float)
    if data.shape != (order, basis.count):
        raise CutoffMismatch(f"initial data shape {data.shape} != ({order}, {basis.count})")
    steps = int(round(T / dt))
    if abs(steps * dt - T) > 1e-9 * T or steps % 2:
        raise ValueError("T / dt must be an even integer")
    cmax = c2.bounds(0.0, grid.length)[1]
    dt_max = 0.1 / (cmax * basis.eigenvalues[-1]) ** (1.0 / order)
    if dt > dt_max * (1 + 1e-12):
        raise ValueError(f"dt = {dt} does not resolve the stiffest retained mode (dt <= {dt_max:.3e})")

    op = build_elliptic(grid, coeff)
    cx = c2(grid.nodes)
    if np.min(cx) <= 0:
        raise ValueError("c2 must be positive")
    n = grid.n_interior
    # Banded storage of C*A: row i scaled by c2(x_i).
    CA = np.zeros((3, n))
    CA[0, 1:] = op.offdiag * cx[:-1]
    CA[1] = op.diag * cx
    CA[2, :-1] = op.offdiag * cx[1:]

    def ca_apply(u):
        out = CA[1] * u
        out[:-1] += CA[0, 1:] * u[1:]
        out[1:] += CA[2, :-1] * u[:-1]
        return out

    idx = grid.window_indices(*(window or (0.0, grid.length)))
    vals = np.empty((steps + 1, idx.size))
    u = basis.synthesize(data[0])
    vals[0] = u[idx]
    if order == 1:
        lhs = dt / 2 * CA
        lhs[1] += 1.0
        for i in range(steps):
            u = solve_banded((1, 1), lhs, u - dt / 2 * ca_apply(u))
            vals[i + 1] = u[idx]
    else:
        v = basis.synthesize(data[1])
        lhs = dt * dt / 4 * CA
        lhs[1] += 1.0
        for i in range(steps):
            v_new = solve_banded((1, 1), lhs, v - dt * ca_apply(u) - dt * dt / 4 * ca_apply(v))
            u = u + dt / 2 * (v + v_new)
            v = v_new
            vals[i + 1] = u[idx]
    t = np.linspace(0.0, T, steps + 1)
    return SpaceTimeField(vals, t, grid.nodes[idx], grid.h)
