"""Observation Gramians and observability constants.

The squared observation ``int_0^T int_omega |sum_i theta_i u_i|^2`` is a
Hermitian form in the free initial-data coordinates.  Its smallest eigenvalue
relative to the (diagonal) energy form is ``sigma_min`` and ``1/sigma_min`` the
observability constant at the chosen frequency cutoff.

Free coordinates are ordered component-major, then slot-major, then mode:
index ``(s * M + j)`` inside a component block.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .errors import (
    CouplingSingular,
    DimensionGuard,
    EnergyNotPD,
    SequenceNotAveraging,
    ValidationError,
)
from .evolution import EvolutionSpec, modal_signals, simpson_weights, solve
from .scenario import Scenario

MAX_FREE_DIM = 2000
ZERO_TOL = 1e-12
KERNEL_TOL = 1e-8
MATCH_DELTA = 1e-6


def energy_weights(spec: EvolutionSpec, lam: np.ndarray) -> np.ndarray:
    """Diagonal energy weights, slot ``s`` weighted by ``mu^-s`` (H^-s norm)."""
    mu = spec.scale * np.asarray(lam)
    return np.concatenate([mu ** (-float(s)) for s in range(spec.slots)])


def compact_weights(spec: EvolutionSpec, lam: np.ndarray) -> np.ndarray:
    """Weights of the compact remainder: slot ``s`` in ``H^-(s+1)``."""
    mu = spec.scale * np.asarray(lam)
    return np.concatenate([mu ** (-float(s) - 1.0) for s in range(spec.slots)])


@dataclass(frozen=True)
class FreeLayout:
    """Labels of the free data coordinates."""

    component: np.ndarray
    slot: np.ndarray
    mode: np.ndarray  # 1-based mode index

    @property
    def dim(self) -> int:
        return self.component.size


@dataclass
class Gramian:
    G: np.ndarray
    E: np.ndarray  # diagonal of the energy form
    K: np.ndarray  # diagonal of the compact remainder form
    layout: FreeLayout
    compact_terms: bool = False
    cutoff: int = 0

    def rayleigh(self, v) -> float:
        v = np.asarray(v)
        return float(np.real(np.conj(v) @ self.G @ v))


@dataclass
class ObservabilityReport:
    sigma_min: float
    sigma_max: float
    c_obs: float
    vector: np.ndarray = field(repr=False)
    m0: int = 1
    cutoff: int = 0
    compact_terms: bool = False
    sigma_min_raw: float = 0.0
    sweep: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "sigma_min": self.sigma_min,
            "sigma_min_raw": self.sigma_min_raw,
            "sigma_max": self.sigma_max,
            "c_obs": self.c_obs,
            "m0": self.m0,
            "cutoff": self.cutoff,
            "compact_terms": self.compact_terms,
            "sweep": self.sweep,
            "diagnostics": self.diagnostics,
        }


def _linked(scenario: Scenario) -> bool:
    return scenario.coupling.linked or scenario.mode == "super"


def free_layout(scenario: Scenario) -> FreeLayout:
    M = scenario.cutoff
    comps = [0] if _linked(scenario) else range(len(scenario.components))
    parts = []
    for i in comps:
        k = scenario.components[i].spec.slots
        parts.append((np.full(k * M, i), np.repeat(np.arange(k), M), np.tile(np.arange(1, M + 1), k)))
    return FreeLayout(*(np.concatenate(p) for p in zip(*parts)))


def _same_basis(b1, b2) -> bool:
    return b1 is b2


def coupling_maps(scenario: Scenario) -> list:
    """Per component, the matrix mapping free coordinates to its modal data.

    ``None`` stands for an exact identity (kept symbolic so that identical
    components cancel bit-for-bit).
    """
    M = scenario.cutoff
    comps = scenario.components
    layout = free_layout(scenario)
    P = layout.dim
    dtype = complex if scenario.is_complex else float
    maps = []
    if not _linked(scenario):
        offset = 0
        for c in comps:
            n = c.spec.slots * M
            if len(comps) == 1:
                maps.append(None)
            else:
                C = np.zeros((n, P), dtype=dtype)
                C[:, offset:offset + n] = np.eye(n)
                maps.append(C)
            offset += n
        return maps

    k1 = comps[0].spec.slots
    b1 = scenario.bases[0]
    mats = scenario.coupling.matrices if scenario.coupling.mode == "linked_operator" else ()
    for i, (c, basis) in enumerate(zip(comps, scenario.bases)):
        k = c.spec.slots
        if i == 0 or (k == k1 and not mats and _same_basis(basis, b1)):
            maps.append(None)
            continue
        if _same_basis(basis, b1):
            change = np.eye(M)
        else:
            change = scenario.grid.h * (basis.vectors.T @ b1.vectors)
        C = np.zeros((k * M, P), dtype=dtype)
        for s in range(min(k, k1)):
            R = change
            if mats and i == 1:
                R = np.asarray(mats[s] if s < len(mats) else mats[-1])
                if R.shape != (M, M):
                    raise ValidationError(f"coupling matrix must be {M}x{M}, got {R.shape}")
                R = change @ R
            C[s * M:(s + 1) * M, s * M:(s + 1) * M] = R
        maps.append(C)
    return maps


def check_linked_operator(scenario: Scenario, rtol: float = 1e-10) -> float:
    """Gap ratio certifying the vanishing implication of a linked-operator coupling.

    Returns ``min |theta1 u1(0) + theta2 u2(0)|_omega / |(u1(0), u2(0))|_omega``
    over the retained data; raises :class:`CouplingSingular` if it is zero.
    """
    if len(scenario.components) < 2:
        return 1.0
    maps = coupling_maps(scenario)
    M = scenario.cutoff
    idx = scenario.window_idx
    sq = np.sqrt(scenario.grid.h)
    th1, th2 = scenario.weights[:2]
    ratios = []
    for s in range(min(c.spec.slots for c in scenario.components[:2])):
        F1 = sq * scenario.bases[0].vectors[idx]
        R = np.eye(M) if maps[1] is None else maps[1][s * M:(s + 1) * M, s * M:(s + 1) * M]
        F2 = sq * scenario.bases[1].vectors[idx] @ R
        stacked = np.vstack([F1, F2])
        U, sv, Vh = np.linalg.svd(stacked, full_matrices=False)
        keep = sv > rtol * sv[0]
        B = (th1 * F1 + th2 * F2) @ (Vh[keep].conj().T / sv[keep])
        ratios.append(np.linalg.svd(B, compute_uv=False).min())
    ratio = float(min(ratios))
    if ratio <= rtol:
        raise CouplingSingular("theta1*I + theta2*R annihilates nonzero data on the window")
    return ratio


def _signal_groups(scenario: Scenario):
    """Unique (spec, basis) pairs; identical components share one group."""
    groups: list = []
    of: list = []
    for c, basis in zip(scenario.components, scenario.bases):
        for g, (spec, b) in enumerate(groups):
            if spec == c.spec and b is basis:
                of.append(g)
                break
        else:
            groups.append((c.spec, basis))
            of.append(len(groups) - 1)
    return groups, of


def _time_gram(scenario: Scenario, groups) -> np.ndarray:
    t = scenario.times
    w = simpson_weights(t.size, t[1] - t[0])
    sizes = [spec.slots * basis.count for spec, basis in groups]
    D = sum(sizes)
    complex_ = any(spec.is_complex for spec, _ in groups)
    out = np.zeros((D, D), dtype=complex if complex_ else float)
    chunk = max(64, int(4e6 // max(D, 1)))
    for start in range(0, t.size, chunk):
        sl = slice(start, start + chunk)
        Z = np.concatenate(
            [modal_signals(spec, basis.eigenvalues, t[sl]).reshape(-1, t[sl].size) for spec, basis in groups]
        )
        out += (Z * w[sl]) @ Z.conj().T
    return out


def pair_blocks(scenario: Scenario) -> dict:
    """``B[(i, i')]`` with ``v* B v = int <u_i(v), u_i'(v)>`` over the window.

    Gramian of weights ``theta`` is ``sum theta_i theta_i' B[(i, i')]``.
    """
    layout = free_layout(scenario)
    if layout.dim > MAX_FREE_DIM:
        raise DimensionGuard(f"free-data dimension {layout.dim} exceeds {MAX_FREE_DIM}")
    if scenario.coupling.mode == "linked_operator":
        check_linked_operator(scenario)
    groups, of = _signal_groups(scenario)
    Tg = _time_gram(scenario, groups)
    sizes = [spec.slots * basis.count for spec, basis in groups]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    idx = scenario.window_idx
    h = scenario.grid.h
    maps = coupling_maps(scenario)
    I = len(scenario.components)

    def block(g1, g2):
        (s1, b1), (s2, b2) = groups[g1], groups[g2]
        S = h * b1.vectors[idx].T @ b2.vectors[idx]
        T = Tg[offs[g1]:offs[g1 + 1], offs[g2]:offs[g2 + 1]]
        return np.tile(S, (s1.slots, s2.slots)) * T

    cache = {}
    blocks = {}
    for i in range(I):
        for j in range(I):
            key = (of[i], of[j])
            if key not in cache:
                cache[key] = block(*key)
            X = cache[key]
            if maps[i] is not None:
                X = maps[i].conj().T @ X
            if maps[j] is not None:
                X = X @ maps[j]
            blocks[(i, j)] = X
    return blocks


def _energy(scenario: Scenario, layout: FreeLayout, weights_fn) -> np.ndarray:
    out = np.empty(layout.dim)
    for i in np.unique(layout.component):
        sel = layout.component == i
        out[sel] = weights_fn(scenario.components[i].spec, scenario.bases[i].eigenvalues)
    return out


def gramian_from_blocks(scenario: Scenario, blocks: dict, weights=None) -> Gramian:
    theta = np.asarray(scenario.weights if weights is None else weights, dtype=float)
    layout = free_layout(scenario)
    G = None
    for i in range(theta.size):
        for j in range(theta.size):
            term = (theta[i] * theta[j]) * blocks[(i, j)]
            G = term if G is None else G + term
    G = 0.5 * (G + G.conj().T)
    return Gramian(
        G=G,
        E=_energy(scenario, layout, energy_weights),
        K=_energy(scenario, layout, compact_weights),
        layout=layout,
        compact_terms=scenario.compact_terms,
        cutoff=scenario.cutoff,
    )


def assemble_gramian(scenario: Scenario) -> Gramian:
    return gramian_from_blocks(scenario, pair_blocks(scenario))


def couple(scenario: Scenario, v) -> list:
    """Per-component modal data ``(k_i, M)`` generated by free vector ``v``."""
    v = np.asarray(v)
    M = scenario.cutoff
    out = []
    for c, C in zip(scenario.components, coupling_maps(scenario)):
        d = v if C is None else C @ v
        out.append(np.asarray(d[: c.spec.slots * M]).reshape(c.spec.slots, M))
    return out


def observation_field(scenario: Scenario, v):
    fields = solve(scenario, couple(scenario, v))
    obs = None
    for th, f in zip(scenario.weights, fields):
        obs = th * f if obs is None else obs + th * f
    return obs


def observation_integral(scenario: Scenario, v) -> float:
    """Direct simulation of the squared observation of free datum ``v``."""
    return observation_field(scenario, v).integral_sq()


def observability_constants(gram: Gramian, m0: int = 1, m1: int | None = None,
                            compact: bool | None = None) -> ObservabilityReport:
    """Smallest generalized eigenvalue of ``(G [+ K], E)`` on modes ``m0..m1``."""
    compact = gram.compact_terms if compact is None else compact
    m1 = gram.cutoff if m1 is None else m1
    sel = np.flatnonzero((gram.layout.mode >= m0) & (gram.layout.mode <= m1))
    if sel.size == 0:
        raise ValidationError(f"empty mode range {m0}..{m1}")
    E = gram.E[sel]
    if not np.all(np.isfinite(E)) or np.any(E <= 0):
        raise EnergyNotPD("energy form is not positive definite on the selected modes")
    A = gram.G[np.ix_(sel, sel)]
    if compact:
        A = A + np.diag(gram.K[sel])
    s = 1.0 / np.sqrt(E)
    vals, vecs = eigh(s[:, None] * A * s[None, :])
    smin_raw, smax = float(vals[0]), float(vals[-1])
    zero = smin_raw <= ZERO_TOL * max(abs(smax), np.finfo(float).tiny)
    smin = 0.0 if zero else smin_raw
    vec = np.zeros(gram.layout.dim, dtype=vecs.dtype)
    vec[sel] = s * vecs[:, 0]
    return ObservabilityReport(
        sigma_min=smin,
        sigma_max=smax,
        c_obs=float("inf") if zero else 1.0 / smin,
        vector=vec,
        m0=m0,
        cutoff=m1,
        compact_terms=bool(compact),
        sigma_min_raw=smin_raw,
    )


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("OBSLAB_THREADS", "1")))
    except ValueError:
        return 1


def weak_constant_sweep(scenario: Scenario, m0s, gram: Gramian | None = None,
                        compact: bool | None = None) -> list:
    """Rows ``(m0, sigma_min, C_obs)`` on the high-frequency subspaces ``m0..M``."""
    m0s = list(m0s)
    if scenario.cutoff < max(m0s) + 5:
        raise ValidationError(f"cutoff {scenario.cutoff} must be >= max(m0) + 5 = {max(m0s) + 5}")
    gram = assemble_gramian(scenario) if gram is None else gram
    with ThreadPoolExecutor(_threads()) as ex:
        reps = list(ex.map(lambda m: observability_constants(gram, m, compact=compact), m0s))
    return [(m, r.sigma_min, r.c_obs) for m, r in zip(m0s, reps)]


def simultaneous_constants(scenario: Scenario, m0: int = 1) -> ObservabilityReport:
    """Constants with free data per component.

    Cone coupling reuses the independent Gramian and reports whether the
    minimising data lies inside the admissible cone.
    """
    if scenario.coupling.mode not in ("independent", "cone"):
        raise ValidationError("simultaneous observability needs independent or cone coupling")
    gram = assemble_gramian(scenario)
    rep = observability_constants(gram, m0)
    if scenario.coupling.mode == "cone":
        d1, d2 = (rep.vector[gram.layout.component == i].reshape(scenario.components[i].spec.slots, -1)
                  for i in (0, 1))
        rep.diagnostics["cone_feasible_minimiser"] = cone_feasible(scenario, d1, d2)
    return rep


@dataclass
class KernelScan:
    sigma: np.ndarray
    vectors: list
    residuals: list
    lemma_case: str
    matches: list
    min_match_residual: float | None
    sigma_max: float

    @property
    def empty(self) -> bool:
        return not self.vectors

    def to_json(self) -> dict:
        return {
            "near_kernel_sigma": [float(s) for s in self.sigma],
            "residuals": self.residuals,
            "lemma_case": self.lemma_case,
            "matches": self.matches,
            "min_match_residual": self.min_match_residual,
            "sigma_max": self.sigma_max,
            "empty": self.empty,
        }


def _l2_window(scenario: Scenario, u) -> float:
    u = np.asarray(u)[scenario.window_idx]
    return float(np.sqrt(scenario.grid.h * np.sum(np.abs(u) ** 2)))


def kernel_scan(scenario: Scenario, tol: float = KERNEL_TOL, delta: float = MATCH_DELTA) -> KernelScan:
    """Near-kernel data of the averaged observation and the eigenfunction criterion.

    The criterion pairs modes whose frequencies coincide,
    ``mu1_j^(k/2) == mu2_l`` (relative tolerance ``delta``), and reports the
    smallest ``|theta1 phi_j + theta2 phi_l|`` on the window over such pairs.
    For odd ``k`` no pairing is possible and the list stays empty.
    """
    if scenario.coupling.mode != "independent":
        raise ValidationError("kernel_scan needs independent coupling")
    gram = assemble_gramian(scenario)
    if np.any(gram.E <= 0):
        raise EnergyNotPD("energy form is not positive definite")
    s = 1.0 / np.sqrt(gram.E)
    vals, vecs = eigh(s[:, None] * gram.G * s[None, :])
    smax = float(vals[-1])
    near = np.flatnonzero(vals <= tol * smax)
    th = scenario.weights
    vectors, residuals = [], []
    for n in near:
        v = s * vecs[:, n]
        data = couple(scenario, v)
        u = th[0] * scenario.bases[0].synthesize(data[0][0])
        if len(data) > 1:
            u = u + th[1] * scenario.bases[1].synthesize(data[1][0])
        vectors.append(v)
        residuals.append(_l2_window(scenario, u))

    matches, best = [], None
    case = "single"
    if len(scenario.components) >= 2:
        (c1, c2), (b1, b2) = scenario.components[:2], scenario.bases[:2]
        k = c2.spec.order
        case = "a" if k % 2 else "b"
        if k % 2 == 0:
            f1 = (c1.spec.scale * b1.eigenvalues) ** (k / 2)
            f2 = c2.spec.scale * b2.eigenvalues
            for j in range(f1.size):
                for l in range(f2.size):
                    if abs(f1[j] - f2[l]) <= delta * max(f1[j], f2[l]):
                        r = _l2_window(scenario, th[0] * b1.vectors[:, j] + th[1] * b2.vectors[:, l])
                        matches.append((j + 1, l + 1, r))
            if matches:
                best = min(m[2] for m in matches)
    return KernelScan(vals[near], vectors, residuals, case, matches, best, smax)


def cone_feasible(scenario: Scenario, d1, d2) -> bool:
    """Whether ``|u2(0)|_omega <= c |u1(0)|_omega`` for modal data ``d1``, ``d2``.

    For ``c > theta1/theta2`` the reverse inequality is the admissible cone.
    """
    c = scenario.coupling.cone_c
    n1 = _l2_window(scenario, scenario.bases[0].synthesize(np.asarray(d1)[0]))
    n2 = _l2_window(scenario, scenario.bases[1].synthesize(np.asarray(d2)[0]))
    th1, th2 = scenario.weights[:2]
    if th2 != 0 and c > th1 / th2:
        return n2 >= c * n1
    return n2 <= c * n1


def geometric_weights(ratio: float, count: int) -> np.ndarray:
    w = ratio ** np.arange(count)
    return w / w.sum()


def _check_averaging(theta) -> None:
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0) or abs(theta.sum() - 1.0) > 1e-12:
        raise SequenceNotAveraging(f"weights must be positive and sum to 1 (sum = {theta.sum():.15g})")


@dataclass
class SuperpositionResult:
    report: ObservabilityReport
    table: list  # (I, family index, theta1, sigma_min)
    uniform_bounds: list  # per component, sup |u_i|_window / E1^(1/2)

    def band(self) -> float:
        s = [row[3] for row in self.table]
        return max(s) / min(s) if min(s) > 0 else float("inf")

    def to_json(self) -> dict:
        return {
            "report": self.report.to_json(),
            "table": [list(r) for r in self.table],
            "uniform_bounds": self.uniform_bounds,
            "band": self.band(),
        }


def superposition_constants(scenario: Scenario, families=(), truncations=(), m0: int = 1,
                            compact: bool | None = None) -> SuperpositionResult:
    """Averaged constants for ``sum_i theta_i u_i`` with linked data.

    ``families`` is a list of weight sequences (length >= max truncation);
    each truncation ``I`` uses the first ``I`` weights renormalized to sum 1.
    """
    _check_averaging(scenario.weights)
    if len(scenario.components) > 32:
        raise DimensionGuard("superposition supports at most 32 components")
    if scenario.mode != "super" and not scenario.coupling.linked:
        raise ValidationError("superposition needs linked data")
    blocks = pair_blocks(scenario)
    base = gramian_from_blocks(scenario, blocks)
    report = observability_constants(base, m0, compact=compact)

    E = base.E
    bounds = []
    s = 1.0 / np.sqrt(E)
    for i in range(len(scenario.components)):
        Bi = blocks[(i, i)]
        top = np.linalg.eigvalsh(0.5 * (Bi + Bi.conj().T) * s[:, None] * s[None, :])[-1]
        bounds.append(float(np.sqrt(max(top, 0.0))))
    report.diagnostics["uniform_bound"] = max(bounds)

    I_all = len(scenario.components)
    table = []
    jobs = []
    for I in truncations:
        if not 1 <= I <= I_all:
            raise ValidationError(f"truncation {I} outside 1..{I_all}")
        for f, fam in enumerate(families):
            th = np.zeros(I_all)
            th[:I] = np.asarray(fam, dtype=float)[:I]
            th[:I] /= th[:I].sum()
            _check_averaging(th[:I])
            jobs.append((I, f, th))

    def run(job):
        I, f, th = job
        g = gramian_from_blocks(scenario, blocks, th)
        return (I, f, float(th[0]), observability_constants(g, m0, compact=compact).sigma_min)

    with ThreadPoolExecutor(_threads()) as ex:
        table = list(ex.map(run, jobs))
    return SuperpositionResult(report, table, bounds)
