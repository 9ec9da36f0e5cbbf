"""Command-line entry point: ``obslab <command> --config scenario.json``.

Reports are JSON with sorted keys; non-finite floats are written as the
strings ``"inf"``, ``"-inf"`` and ``"nan"``.  Wall time goes to stderr so the
report itself is byte-stable.  Exit codes: 0 ok, 2 validation error, 3
numerical failure; on failure a JSON error object is printed to stdout.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericalFailure, ValidationError
from .evolution import solve
from .grid import build_elliptic
from .microlocal import angular_density, localisation_test, mode_family
from .observability import (
    KERNEL_TOL,
    MATCH_DELTA,
    ZERO_TOL,
    assemble_gramian,
    energy_weights,
    geometric_weights,
    kernel_scan,
    observability_constants,
    simultaneous_constants,
    superposition_constants,
    weak_constant_sweep,
)
from .scenario import Scenario, load_scenario
from .symbols import ZERO_RTOL, PrincipalSymbol, gcc_time, sampled_modulus, separation_margin

COMMANDS = ("modes", "solve", "symbols", "gramian", "obsconst", "sweep", "simul", "super", "kernel", "hmeasure")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="obslab", description="Observability constants, symbols and microlocal densities.")
    p.add_argument("command", help=", ".join(COMMANDS))
    p.add_argument("--config", required=True, type=Path, help="scenario JSON file")
    p.add_argument("--out", type=Path, help="write the JSON report here instead of stdout")
    p.add_argument("--csv-dir", type=Path, help="directory for CSV tables")
    p.add_argument("--m0", help="mode range A..B (or a single A)")
    p.add_argument("--bins", type=int, default=72, help="angular bins for hmeasure")
    p.add_argument("--scaling", choices=("classical", "parabolic"), help="override the scenario scaling")
    return p


# -- serialization -----------------------------------------------------------

def to_jsonable(obj):
    """Plain JSON tree; floats stay exact, non-finite values become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(float(obj.real)), to_jsonable(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def dumps(report: dict) -> str:
    return json.dumps(to_jsonable(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _write_csv(csv_dir: Path | None, name: str, header, rows) -> str | None:
    if csv_dir is None:
        return None
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_csv_cell(v) for v in r])
    path = csv_dir / name
    _atomic_write(path, buf.getvalue())
    return str(path)


def _csv_cell(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    return v


def parse_range(text: str | None, default: tuple[int, int]) -> tuple[int, int]:
    if text is None:
        return default
    parts = text.split("..")
    try:
        if len(parts) == 1:
            a = b = int(parts[0])
        elif len(parts) == 2:
            a, b = int(parts[0]), int(parts[1])
        else:
            raise ValueError
    except ValueError:
        raise UsageError(f"--m0 expects A..B, got {text!r}") from None
    if not 1 <= a <= b:
        raise UsageError(f"--m0 range must satisfy 1 <= A <= B, got {text!r}")
    return a, b


# -- commands ----------------------------------------------------------------

def _symbols(sc: Scenario, scaling: str) -> list:
    return [PrincipalSymbol(c.spec, scaling) for c in sc.components]


def _diagnostics(sc: Scenario) -> dict:
    out = {"gcc_time": [gcc_time(c.spec.coeff.scaled(c.spec.scale), (sc.a, sc.b), sc.grid.length, sc.grid.h)
                        for c in sc.components if c.spec.order == 2]}
    if len(sc.components) >= 2:
        p = _symbols(sc, sc.scaling)
        out["separation_margin"] = separation_margin(p[0], p[1], (sc.a, sc.b), sc.grid.length).margin
    return out


def _random_data(sc: Scenario) -> list:
    """Seeded data of unit energy per component."""
    rng = np.random.default_rng(sc.seed)
    data = []
    for c, basis in zip(sc.components, sc.bases):
        d = rng.standard_normal((c.spec.slots, sc.cutoff))
        if c.spec.is_complex:
            d = d + 1j * rng.standard_normal(d.shape)
        w = energy_weights(c.spec, basis.eigenvalues).reshape(c.spec.slots, sc.cutoff)
        data.append(d / math.sqrt(float(np.sum(w * np.abs(d) ** 2))))
    return data


def cmd_modes(sc, args):
    rows, comps = [], []
    for i, (c, basis) in enumerate(zip(sc.components, sc.bases)):
        op = build_elliptic(sc.grid, c.spec.coeff)
        resid = float(np.abs(op.apply(basis.vectors) - basis.vectors * basis.eigenvalues).max())
        ortho = float(np.abs(sc.grid.h * basis.vectors.T @ basis.vectors - np.eye(basis.count)).max())
        comps.append({"eigenvalues": basis.eigenvalues, "residual": resid, "orthogonality_defect": ortho})
        rows += [(i, j + 1, lam) for j, lam in enumerate(basis.eigenvalues)]
    csvs = [_write_csv(args.csv_dir, "modes.csv", ("component", "mode", "lambda"), rows)]
    return {"components": comps}, csvs


def cmd_solve(sc, args):
    data = sc.options.get("data")
    data = _random_data(sc) if data is None else [np.asarray(d) for d in data]
    fields = solve(sc, data)
    obs = sum((th * f for th, f in zip(sc.weights[1:], fields[1:])), sc.weights[0] * fields[0])
    res = {
        "observation_integral": obs.integral_sq(),
        "components": [{"l2_start": f.l2_in_time()[0], "l2_end": f.l2_in_time()[-1]} for f in fields],
        "nt": sc.n_times,
    }
    norms = np.column_stack([f.l2_in_time() for f in fields])
    rows = [(t, *r) for t, r in zip(sc.times, norms)]
    header = ("t", *(f"l2_component_{i}" for i in range(len(fields))))
    return res, [_write_csv(args.csv_dir, "solve_l2.csv", header, rows)]


def cmd_symbols(sc, args):
    scaling = args.scaling or sc.scaling
    syms = _symbols(sc, scaling)
    res = {"scaling": scaling, "gcc_time": _diagnostics(sc)["gcc_time"]}
    if len(syms) >= 2:
        res["separation"] = separation_margin(syms[0], syms[1], (sc.a, sc.b), sc.grid.length).to_json()
    csvs = []
    for i, p in enumerate(syms):
        rows = sampled_modulus(p, (sc.a, sc.b), sc.grid.length)
        csvs.append(_write_csv(args.csv_dir, f"symbol_{i}.csv", ("x", "theta", "tau", "xi", "abs_p"), rows))
    return res, csvs


def cmd_gramian(sc, args):
    g = assemble_gramian(sc)
    ev = np.linalg.eigvalsh(g.G)
    layout = g.layout
    res = {
        "dim": layout.dim,
        "eig_min": float(ev[0]),
        "eig_max": float(ev[-1]),
        "trace": float(np.real(np.trace(g.G))),
        "hermitian_defect": float(np.abs(g.G - g.G.conj().T).max()),
    }
    rows = zip(range(layout.dim), layout.component, layout.slot, layout.mode, np.real(np.diag(g.G)), g.E, g.K)
    header = ("index", "component", "slot", "mode", "G_diag", "E", "K")
    return res, [_write_csv(args.csv_dir, "gramian_diag.csv", header, rows)]


def _vector_json(v):
    return {"real": np.real(v), "imag": np.imag(v)} if np.iscomplexobj(v) else v


def cmd_obsconst(sc, args):
    m0, m1 = parse_range(args.m0, (1, sc.cutoff))
    rep = observability_constants(assemble_gramian(sc), m0, m1)
    rep.diagnostics.update(_diagnostics(sc))
    out = rep.to_json()
    out["extremal_vector"] = _vector_json(rep.vector)
    return out, []


def cmd_sweep(sc, args):
    m0a, m0b = parse_range(args.m0, (1, 10))
    rows = weak_constant_sweep(sc, range(m0a, m0b + 1))
    csvs = [_write_csv(args.csv_dir, "sweep.csv", ("m0", "sigma_min", "C_obs"), rows)]
    return {"sweep": [list(r) for r in rows], "compact_terms": sc.compact_terms}, csvs


def cmd_simul(sc, args):
    m0, _ = parse_range(args.m0, (1, sc.cutoff))
    rep = simultaneous_constants(sc, m0)
    rep.diagnostics.update(_diagnostics(sc))
    out = rep.to_json()
    out["extremal_vector"] = _vector_json(rep.vector)
    return out, []


def cmd_super(sc, args):
    m0, _ = parse_range(args.m0, (1, sc.cutoff))
    n = len(sc.components)
    fams = sc.options.get("families")
    if fams is None:
        ratios = sc.options.get("family_ratios")
        fams = [sc.weights] if ratios is None else [geometric_weights(r, n) for r in ratios]
    truncs = sc.options.get("truncations", [n])
    result = superposition_constants(sc, fams, truncs, m0)
    rows = [(I, f, th1, s) for I, f, th1, s in result.table]
    csvs = [_write_csv(args.csv_dir, "super.csv", ("I", "family", "theta1", "sigma_min"), rows)]
    return result.to_json(), csvs


def cmd_kernel(sc, args):
    opts = sc.options.get("kernel", {})
    scan = kernel_scan(sc, float(opts.get("tol", KERNEL_TOL)), float(opts.get("delta", MATCH_DELTA)))
    return scan.to_json(), []


def cmd_hmeasure(sc, args):
    scaling = args.scaling or sc.scaling
    opts = sc.options.get("hmeasure", {})
    comp = sc.components[int(opts.get("component", 0))]
    modes = [int(m) for m in opts.get("modes", [10 * n for n in range(1, 7)])]
    eps = float(opts.get("eps", 0.1))
    criterion = opts.get("criterion", "distance")
    fam = mode_family(comp.spec, sc.grid, modes, sc.T, (sc.a, sc.b), sc.nt)
    sym = PrincipalSymbol(comp.spec, scaling)
    table = localisation_test(fam, sym, eps, args.bins, criterion)
    members, csvs = [], []
    for m, f in zip(modes, fam.members):
        d = angular_density(f, scaling, args.bins)
        members.append({"mode": m, "excluded_mass": d.excluded_mass, "nonexcluded_mass": d.nonexcluded,
                        "total": d.total})
        csvs.append(_write_csv(args.csv_dir, f"hmeasure_m{m}.csv", ("bin_center_angle_or_arc", "mass"),
                               d.to_rows()))
    res = {
        "scaling": scaling,
        "bins": args.bins,
        "eps": eps,
        "criterion": criterion,
        "localisation": [{"mode": m, "fraction": fr, "nonexcluded_relative": rel} for m, fr, rel in table],
        "members": members,
    }
    return res, csvs


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def dispatch(command: str, sc: Scenario, args) -> dict:
    if command not in HANDLERS:
        raise UsageError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    result, csvs = HANDLERS[command](sc, args)
    return {
        "tool": "obslab",
        "version": __version__,
        "command": command,
        "scenario": sc.to_json(),
        "result": result,
        "csv": [c for c in csvs if c],
        "tolerances": {"zero": ZERO_TOL, "kernel": KERNEL_TOL, "match_delta": MATCH_DELTA,
                       "symbol_zero": ZERO_RTOL},
    }


def _error(kind: str, exc: BaseException, code: int) -> int:
    sys.stdout.write(dumps({"error": {"type": kind, "class": type(exc).__name__, "message": str(exc)},
                            "exit_code": code}))
    return code


def main(argv=None) -> int:
    start = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        if args.command not in COMMANDS:
            raise UsageError(f"unknown command {args.command!r}; expected one of {', '.join(COMMANDS)}")
        if args.bins < 36:
            raise UsageError("--bins must be at least 36")
        sc = load_scenario(args.config)
        report = dispatch(args.command, sc, args)
        text = dumps(report)
        if args.out:
            _atomic_write(args.out, text)
        else:
            sys.stdout.write(text)
    except (ValidationError, ValueError, OSError) as exc:
        return _error("validation", exc, EXIT_VALIDATION)
    except (NumericalFailure, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _error("numerical", exc, EXIT_NUMERICAL)
    print(f"obslab: {args.command} finished in {time.perf_counter() - start:.3f} s", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
