"""Experiment description: grid, observation window, components and data coupling."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import AlignmentError, SchemaError, SequenceNotAveraging
from .evolution import EvolutionSpec, default_nt, modal_frequency
from .grid import CoefficientField, Grid1D, build_elliptic, eigendecompose

COUPLING_MODES = ("linked_identity", "linked_operator", "independent", "cone")


@dataclass(frozen=True)
class Component:
    spec: EvolutionSpec
    weight: float


@dataclass(frozen=True)
class DataCoupling:
    """How initial data of the components relate.

    ``linked_identity`` feeds component 1's data to every component,
    ``linked_operator`` maps it through one matrix per data slot,
    ``independent`` leaves every component's data free and ``cone`` is
    ``independent`` plus a feasibility test on given data pairs.
    """

    mode: str = "linked_identity"
    matrices: tuple = ()
    cone_c: float | None = None

    def __post_init__(self):
        if self.mode not in COUPLING_MODES:
            raise SchemaError(f"coupling.mode: unknown mode {self.mode!r}")

    @property
    def linked(self) -> bool:
        return self.mode.startswith("linked")


@dataclass(frozen=True)
class Scenario:
    grid: Grid1D
    a: float
    b: float
    T: float
    components: tuple
    coupling: DataCoupling = field(default_factory=DataCoupling)
    cutoff: int | None = None
    nt: int | None = None
    compact_terms: bool = False
    scaling: str = "classical"
    seed: int = 0
    mode: str = "averaged"
    options: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        g = self.grid
        if not 0 <= self.a < self.b <= g.length:
            raise SchemaError(f"window: need 0 <= a < b <= L, got ({self.a}, {self.b})")
        for name, v in (("a", self.a), ("b", self.b)):
            r = v / g.h
            if abs(r - round(r)) > 1e-9 * max(1.0, abs(r)):
                raise AlignmentError(f"window.{name} = {v} is not a multiple of h = {g.h}")
        if not self.T > 0:
            raise SchemaError("window.T must be positive")
        if not self.components:
            raise SchemaError("components: at least one component is required")
        if self.cutoff is None:
            object.__setattr__(self, "cutoff", max(1, min(60, g.n_interior // 4)))
        if not 1 <= self.cutoff <= g.n_interior:
            raise SchemaError(f"cutoff must lie in [1, {g.n_interior}]")
        if self.nt is not None and (self.nt < 3 or self.nt % 2 == 0):
            raise SchemaError("window.nt must be odd and >= 3")
        if self.scaling not in ("classical", "parabolic"):
            raise SchemaError(f"scaling: unknown scaling {self.scaling!r}")
        w = np.array(self.weights)
        if self.mode == "super":
            if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
                raise SequenceNotAveraging(
                    f"superposition weights must be positive and sum to 1 (sum = {w.sum():.15g})"
                )
        elif self.coupling.linked and w[0] == 0:
            raise SchemaError("components[0].weight must be nonzero for averaged observation")
        if self.coupling.mode == "cone":
            c = self.coupling.cone_c
            if c is None or (len(w) > 1 and w[1] != 0 and math.isclose(c, w[0] / w[1])):
                raise SchemaError("coupling.c must be given and differ from theta1/theta2")

    @property
    def weights(self) -> tuple:
        return tuple(c.weight for c in self.components)

    @property
    def is_complex(self) -> bool:
        return any(c.spec.is_complex for c in self.components)

    @cached_property
    def bases(self) -> tuple:
        cache: dict = {}
        out = []
        for comp in self.components:
            key = comp.spec.coeff
            if key not in cache:
                cache[key] = eigendecompose(build_elliptic(self.grid, key), self.cutoff)
            out.append(cache[key])
        return tuple(out)

    @cached_property
    def omega_max(self) -> float:
        return max(
            float(modal_frequency(c.spec, basis.eigenvalues).max())
            for c, basis in zip(self.components, self.bases)
        )

    @cached_property
    def n_times(self) -> int:
        return self.nt if self.nt is not None else default_nt(self.T, self.omega_max)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_times)

    @cached_property
    def window_idx(self) -> np.ndarray:
        return self.grid.window_indices(self.a, self.b)

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def to_json(self) -> dict:
        out = {
            "domain": {"length": self.grid.length, "n_interior": self.grid.n_interior},
            "window": {"a": self.a, "b": self.b, "T": self.T, "nt": self.n_times},
            "components": [
                {
                    "kind": c.spec.kind,
                    "k": c.spec.order,
                    "scale": c.spec.scale,
                    "coeff": c.spec.coeff.to_json(),
                    "weight": c.weight,
                }
                for c in self.components
            ],
            "coupling": {"mode": self.coupling.mode},
            "cutoff": self.cutoff,
            "compact_terms": self.compact_terms,
            "scaling": self.scaling,
            "seed": self.seed,
            "mode": self.mode,
        }
        if self.coupling.cone_c is not None:
            out["coupling"]["c"] = self.coupling.cone_c
        return out


def _require(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    if key not in obj:
        raise SchemaError(f"{where}.{key}: missing key")
    return obj[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _normalize_mode(mode: str) -> str:
    key = str(mode).replace("_", "").replace("-", "").lower()
    table = {m.replace("_", ""): m for m in COUPLING_MODES}
    if key not in table:
        raise SchemaError(f"coupling.mode: unknown mode {mode!r}")
    return table[key]


def _load_matrices(path: Path) -> tuple:
    if path.suffix == ".npy":
        return (np.load(path),)
    doc = json.loads(path.read_text())
    if "matrices" in doc:
        return tuple(np.asarray(m, dtype=float) for m in doc["matrices"])
    if "matrix" in doc:
        return (np.asarray(doc["matrix"], dtype=float),)
    raise SchemaError("coupling.matrix_path: file needs a 'matrix' or 'matrices' key")


def scenario_from_dict(doc: dict, base_dir: Path | None = None) -> Scenario:
    dom = _require(doc, "domain", "scenario")
    grid = Grid1D(
        _number(_require(dom, "length", "domain"), "domain.length"),
        int(_number(_require(dom, "n_interior", "domain"), "domain.n_interior")),
    )
    win = _require(doc, "window", "scenario")
    a = _number(_require(win, "a", "window"), "window.a")
    b = _number(_require(win, "b", "window"), "window.b")
    T = _number(_require(win, "T", "window"), "window.T")
    nt = win.get("nt")
    comps_doc = _require(doc, "components", "scenario")
    if not isinstance(comps_doc, list) or not comps_doc:
        raise SchemaError("components: expected a non-empty list")
    comps = []
    for i, c in enumerate(comps_doc):
        where = f"components[{i}]"
        kind = _require(c, "kind", where)
        coeff = CoefficientField.from_json(c.get("coeff", 1.0), grid)
        try:
            spec = EvolutionSpec(
                kind=str(kind).lower(),
                order=c.get("k"),
                scale=float(c.get("scale", 1.0)),
                coeff=coeff,
            )
        except ValueError as exc:
            raise SchemaError(f"{where}: {exc}") from None
        comps.append(Component(spec, _number(c.get("weight", 1.0), f"{where}.weight")))

    cdoc = doc.get("coupling", {"mode": "linked_identity"})
    mode = _normalize_mode(_require(cdoc, "mode", "coupling"))
    matrices = ()
    if mode == "linked_operator":
        p = Path(_require(cdoc, "matrix_path", "coupling"))
        if not p.is_absolute() and base_dir is not None:
            p = base_dir / p
        matrices = _load_matrices(p)
    cone_c = cdoc.get("c")
    coupling = DataCoupling(mode, matrices, None if cone_c is None else float(cone_c))

    known = {
        "domain", "window", "components", "coupling", "cutoff", "compact_terms",
        "scaling", "seed", "mode",
    }
    return Scenario(
        grid=grid,
        a=a,
        b=b,
        T=T,
        components=tuple(comps),
        coupling=coupling,
        cutoff=doc.get("cutoff"),
        nt=None if nt is None else int(nt),
        compact_terms=bool(doc.get("compact_terms", False)),
        scaling=doc.get("scaling", "classical"),
        seed=int(doc.get("seed", 0)),
        mode=doc.get("mode", "averaged"),
        options={k: v for k, v in doc.items() if k not in known},
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from None
    return scenario_from_dict(doc, base_dir=path.parent)
