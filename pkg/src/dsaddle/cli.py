"""Configuration-driven command line for assembly, solves, and analysis.

Subcommands: assemble, solve, analyze, reproduce <table-id>, export-mm.
Experiments are described by a flat key=value file with dotted keys (see
KEY_HELP); every run writes results.csv, convergence.csv, spectrum.csv,
and bound_report.txt into a fresh timestamped directory so that reruns
never clobber earlier artifacts.

Exit codes: 0 success, 1 error (bad config or any module failure, reported
with a stage label and the config echo), 2 analysis ran but a bound
verification check failed.
"""

import argparse
import csv
import sys
import time
import warnings
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from . import krylov, spectral
from .assembly import (DspSystem, MaterialProps, StructuredMesh,
                       build_mfe_system, build_mhfe_system, manufactured_rhs)
from .errors import ConfigError
from .precond import BlockDiagonal, BlockTriangular, PrecondSpec, realize
from .sparse_core import mm_write, mm_write_vector

_DISCRETIZATIONS = ("mfe2d", "mhfe2d", "mhfe3d")
_SOLVERS = ("gmres", "minres", "pcg-block11")
_RHS_MODES = ("manufactured", "ones")
_ANALYSES = ("none", "indicators", "bounds", "spectrum", "verify")
_OPERATORS = ("assembled", "identity")
_TABLES = ("eigen-bounds", "iterations", "sizes", "scalability")

KEY_HELP = """\
name                 run label (default: config file stem)
discretization       mfe2d | mhfe2d | mhfe3d
h                    grid spacing, decimal or fraction like 1/10
operator             assembled | identity (identity: stub solve on I)
size                 identity stub order
props.young          drained Young modulus [Pa]
props.poisson        Poisson ratio
props.biot           Biot coefficient
props.storage        constrained specific storage [1/Pa]
props.permeability   intrinsic permeability [m^2]
props.viscosity      fluid viscosity [Pa s]
props.dt             time-step size [s]
props.traction       top traction magnitude [Pa]
recipe.a             jacobi | ic0 | exact | inner-pcg
recipe.s_variant     s1 | s2-physical | s2-algebraic
recipe.s             ic0 | diag | exact
recipe.x             ic0 | exact
recipe.omega         pressure-block relaxation factor
solver               gmres | minres | pcg-block11
tol                  relative residual stopping tolerance
maxit                iteration cap
rhs.mode             manufactured | ones
rhs.seed             seed for the manufactured right-hand side
analysis             none | indicators | bounds | spectrum | verify
"""


@dataclass
class ExperimentConfig:
    """One experiment: what to assemble, how to solve, what to analyze."""

    name: str = "adhoc"
    discretization: str = "mfe2d"
    h: float = 0.1
    cells: int = 10
    operator: str = "assembled"
    size: int = 64
    props: MaterialProps = field(default_factory=MaterialProps)
    recipe: PrecondSpec = field(default_factory=PrecondSpec)
    solver: str = "gmres"
    tol: float = 1e-8
    maxit: int = 1000
    rhs_mode: str = "manufactured"
    rhs_seed: int = 0
    analysis: str = "none"

    def echo_pairs(self) -> List[Tuple[str, str]]:
        pairs = [("name", self.name),
                 ("discretization", self.discretization),
                 ("h", f"1/{self.cells}"),
                 ("operator", self.operator)]
        if self.operator == "identity":
            pairs.append(("size", str(self.size)))
        for f in fields(MaterialProps):
            pairs.append((f"props.{f.name}",
                          repr(getattr(self.props, f.name))))
        pairs += [("recipe.a", self.recipe.a_kind),
                  ("recipe.s_variant", self.recipe.s_variant),
                  ("recipe.s", self.recipe.s_kind),
                  ("recipe.x", self.recipe.x_kind),
                  ("recipe.omega", repr(self.recipe.omega)),
                  ("solver", self.solver),
                  ("tol", repr(self.tol)),
                  ("maxit", str(self.maxit)),
                  ("rhs.mode", self.rhs_mode),
                  ("rhs.seed", str(self.rhs_seed)),
                  ("analysis", self.analysis)]
        return pairs


def _parse_h(text: str, where: str) -> Tuple[float, int]:
    try:
        if "/" in text:
            num, den = text.split("/")
            h = float(num) / float(den)
        else:
            h = float(text)
    except (ValueError, ZeroDivisionError) as err:
        raise ConfigError(f"{where}: malformed spacing {text!r}") from err
    if not 0 < h <= 0.5:
        raise ConfigError(f"{where}: spacing must be in (0, 0.5], got {h}")
    cells = round(1.0 / h)
    if abs(cells * h - 1.0) > 1e-9:
        raise ConfigError(
            f"{where}: 1/h must be an integer number of cells, got {text!r}")
    return h, cells


def _parse_enum(text: str, allowed: Sequence[str], where: str) -> str:
    if text not in allowed:
        raise ConfigError(
            f"{where}: expected one of {'|'.join(allowed)}, got {text!r}")
    return text


def _parse_float(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError as err:
        raise ConfigError(f"{where}: expected a number, got {text!r}") from err


def _parse_int(text: str, where: str) -> int:
    try:
        return int(text)
    except ValueError as err:
        raise ConfigError(
            f"{where}: expected an integer, got {text!r}") from err


def config_from_pairs(pairs: Iterable[Tuple[str, str, str]],
                      name: str = "adhoc") -> ExperimentConfig:
    """Build a config from (key, value, location) triples.

    The location string names the source line so diagnostics carry a key
    path the user can act on.
    """
    cfg = ExperimentConfig(name=name)
    props: Dict[str, float] = {}
    recipe: Dict[str, object] = {}
    prop_names = {f.name for f in fields(MaterialProps)}
    for key, value, where in pairs:
        at = f"{where}, key {key!r}"
        if key == "name":
            cfg.name = value
        elif key == "discretization":
            cfg.discretization = _parse_enum(value, _DISCRETIZATIONS, at)
        elif key == "h":
            cfg.h, cfg.cells = _parse_h(value, at)
        elif key == "operator":
            cfg.operator = _parse_enum(value, _OPERATORS, at)
        elif key == "size":
            cfg.size = _parse_int(value, at)
        elif key.startswith("props."):
            sub = key[len("props."):]
            if sub not in prop_names:
                raise ConfigError(f"{at}: unknown material property")
            props[sub] = _parse_float(value, at)
        elif key == "recipe.a":
            recipe["a_kind"] = value
        elif key == "recipe.s_variant":
            recipe["s_variant"] = value
        elif key == "recipe.s":
            recipe["s_kind"] = value
        elif key == "recipe.x":
            recipe["x_kind"] = value
        elif key == "recipe.omega":
            recipe["omega"] = _parse_float(value, at)
        elif key == "solver":
            cfg.solver = _parse_enum(value, _SOLVERS, at)
        elif key == "tol":
            cfg.tol = _parse_float(value, at)
        elif key == "maxit":
            cfg.maxit = _parse_int(value, at)
        elif key == "rhs.mode":
            cfg.rhs_mode = _parse_enum(value, _RHS_MODES, at)
        elif key == "rhs.seed":
            cfg.rhs_seed = _parse_int(value, at)
        elif key == "analysis":
            cfg.analysis = _parse_enum(value, _ANALYSES, at)
        else:
            raise ConfigError(f"{at}: unknown config key")
    if props:
        cfg.props = replace(MaterialProps(), **props)
    if recipe:
        cfg.recipe = replace(PrecondSpec(), **recipe)
    try:
        cfg.recipe.validate()
    except Exception as err:
        raise ConfigError(f"key 'recipe.*': {err}") from err
    if cfg.size < 1:
        raise ConfigError("key 'size': must be positive")
    if cfg.maxit < 1:
        raise ConfigError("key 'maxit': must be positive")
    if not cfg.tol > 0:
        raise ConfigError("key 'tol': must be positive")
    if cfg.operator == "identity":
        if cfg.analysis != "none":
            raise ConfigError(
                "key 'analysis': the identity stub has no blocks to analyze")
        if cfg.solver == "pcg-block11":
            raise ConfigError(
                "key 'solver': the identity stub has no displacement block")
    return cfg


def parse_config(path) -> ExperimentConfig:
    """Parse a flat key=value config file with dotted keys."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    triples = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(
                f"{path.name} line {ln}: expected 'key = value', "
                f"got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(
                f"{path.name} line {ln}: empty key or value")
        triples.append((key, value, f"{path.name} line {ln}"))
    return config_from_pairs(triples, name=path.stem)


# ---------------------------------------------------------------- running


class StageError(Exception):
    """Wraps a module failure with the pipeline stage that hit it."""

    def __init__(self, stage: str, err: Exception):
        self.stage = stage
        self.err = err
        super().__init__(f"{stage}: {err}")


def _assemble(cfg: ExperimentConfig) -> DspSystem:
    dim = 3 if cfg.discretization == "mhfe3d" else 2
    mesh = StructuredMesh(dim, cfg.cells)
    if cfg.discretization == "mfe2d":
        return build_mfe_system(mesh, cfg.props)
    return build_mhfe_system(mesh, cfg.props)


def _rhs(cfg: ExperimentConfig, system: DspSystem,
         seed: Optional[int]) -> np.ndarray:
    if cfg.rhs_mode == "ones":
        return manufactured_rhs(system, kind="ones")
    return manufactured_rhs(system,
                            seed=cfg.rhs_seed if seed is None else seed)


def _solve(cfg: ExperimentConfig, system: Optional[DspSystem],
           rhs: Optional[np.ndarray], rp) -> Tuple[krylov.SolveResult, str]:
    if cfg.operator == "identity":
        op = sp.identity(cfg.size, format="csr")
        b = np.ones(cfg.size)
        if cfg.solver == "minres":
            return krylov.minres(op, b, tol=cfg.tol, maxit=cfg.maxit), \
                "identity"
        return krylov.gmres(op, b, tol=cfg.tol, maxit=cfg.maxit), "identity"
    label = (f"{cfg.recipe.a_kind},{cfg.recipe.s_variant}+"
             f"{cfg.recipe.s_kind},{cfg.recipe.x_kind}")
    if cfg.recipe.omega != 1.0:
        label += f",omega={cfg.recipe.omega:g}"
    K = system.full_matrix()
    if cfg.solver == "gmres":
        prec = BlockTriangular(system, rp)
        return krylov.gmres(K, rhs, prec_inv=prec.apply_inv, tol=cfg.tol,
                            maxit=cfg.maxit), f"triangular({label})"
    if cfg.solver == "minres":
        prec = BlockDiagonal(system, rp)
        return krylov.minres(K, rhs, prec_inv=prec.apply_inv, tol=cfg.tol,
                             maxit=cfg.maxit), f"diagonal({label})"
    # pcg-block11: conjugate gradients on the displacement block alone,
    # preconditioned by the realized displacement stand-in
    return krylov.pcg(system.A, rhs[:system.n], prec_inv=rp.a_hat.apply_inv,
                      tol=cfg.tol, maxit=cfg.maxit), \
        f"block11({cfg.recipe.a_kind})"


def _layout_for(cfg: ExperimentConfig) -> str:
    return "diagonal" if cfg.solver == "minres" else "triangular"


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_csv(path: Path, header: Sequence[str],
               rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _indicator_rows(ind: spectral.IndicatorSet) -> List[Tuple]:
    rows = []
    for nm, band in sorted(ind.as_dict().items()):
        rows.append(("indicator", f"{nm}_min", _fmt(band[0]), "", ""))
        rows.append(("indicator", f"{nm}_max", _fmt(band[1]), "", ""))
    for label, note in sorted(ind.meta.items()):
        rows.append(("indicator", f"note_{label}", note, "", ""))
    return rows


def _bound_rows(report: spectral.BoundReport) -> List[Tuple]:
    tb, db = report.triangular, report.diagonal
    radius = "" if tb.all_real else _fmt(tb.complex_radius)
    return [
        ("bound", "triangular_lo", _fmt(tb.lo), "", ""),
        ("bound", "triangular_hi", _fmt(tb.hi), "", ""),
        ("bound", "triangular_window_lo", _fmt(tb.window[0]), "", ""),
        ("bound", "triangular_window_hi", _fmt(tb.window[1]), "", ""),
        ("bound", "triangular_radius", radius, "", ""),
        ("bound", "triangular_all_real", str(tb.all_real).lower(), "", ""),
        ("bound", "diagonal_neg_lo", _fmt(db.neg[0]), "", ""),
        ("bound", "diagonal_neg_hi", _fmt(db.neg[1]), "", ""),
        ("bound", "diagonal_pos_lo", _fmt(db.pos[0]), "", ""),
        ("bound", "diagonal_pos_hi", _fmt(db.pos[1]), "", ""),
        ("bound", "diagonal_neg_lo_split", _fmt(db.neg_lo_split), "", ""),
    ]


def _bound_report_text(cfg: ExperimentConfig,
                       ind: spectral.IndicatorSet,
                       report: spectral.BoundReport,
                       verification=None) -> str:
    lines = [f"bound report for run '{cfg.name}'",
             f"operator dims (n, m, p) = {ind.dims}", "",
             "indicator intervals:"]
    for nm, band in sorted(ind.as_dict().items()):
        lines.append(f"  {nm}: [{band[0]:.6g}, {band[1]:.6g}]")
    for label, note in sorted(ind.meta.items()):
        lines.append(f"  note ({label}): {note}")
    tb, db = report.triangular, report.diagonal
    lines += ["", "triangular layout:",
              f"  real interval    [{tb.lo:.6g}, {tb.hi:.6g}]",
              f"  exclusion window [{tb.window[0]:.6g}, "
              f"{tb.window[1]:.6g}]"]
    if tb.all_real:
        lines.append("  complex disc     none (all eigenvalues real)")
    else:
        lines.append(f"  complex disc     |lambda - 1| <= "
                     f"{tb.complex_radius:.6g}")
    lines.append(f"  corner cubic     a2={tb.cubic.a2:.6g} "
                 f"a1={tb.cubic.a1:.6g} a0={tb.cubic.a0:.6g} "
                 f"bracket [{tb.cubic_bracket[0]:.6g}, "
                 f"{tb.cubic_bracket[1]:.6g}]")
    lines += ["", "diagonal layout:",
              f"  clusters         [{db.neg[0]:.6g}, {db.neg[1]:.6g}] u "
              f"[{db.pos[0]:.6g}, {db.pos[1]:.6g}]",
              f"  split-rule floor {db.neg_lo_split:.6g}"]
    if verification is not None:
        lines += ["", f"verification ({verification.layout} layout):"]
        for chk in verification.checks:
            status = "pass" if chk.passed else "FAIL"
            lines.append(f"  {status:4s} {chk.name}: {chk.detail}")
        lines.append(f"  diagnostics: {verification.diagnostics}")
    lines.append("")
    return "\n".join(lines)


def run_experiment(cfg: ExperimentConfig, out_root="out",
                   seed: Optional[int] = None,
                   max_dense_n: Optional[int] = None,
                   stages: Sequence[str] = ("assemble", "solve",
                                            "analysis")) -> Tuple[int, Path]:
    """Run one experiment and write its artifacts.

    Returns (exit_code, run_directory).  All four artifact files are
    always created so downstream tooling can rely on their presence;
    stages that did not run leave header-only CSV files behind.
    """
    out_dir = _fresh_run_dir(Path(out_root), cfg.name)
    results: List[Tuple] = [("meta", k, v, "", "")
                            for k, v in cfg.echo_pairs()]
    conv_rows: List[Tuple] = []
    spec_rows: List[Tuple] = []
    report_text = "no bound analysis requested\n"
    exit_code = 0

    system = None
    rhs = None
    rp = None
    if cfg.operator == "identity":
        results.append(("size", "N", str(cfg.size), "", ""))
    else:
        if "assemble" in stages or "solve" in stages or \
                ("analysis" in stages and cfg.analysis != "none"):
            try:
                system = _assemble(cfg)
            except Exception as err:
                raise StageError("assembly", err) from err
            K = system.full_matrix()
            for nm, val in (("n", system.n), ("m", system.m),
                            ("p", system.p), ("N", system.total),
                            ("nnz", K.nnz)):
                results.append(("size", nm, str(val), "", ""))

    needs_prec = system is not None and (
        "solve" in stages or
        ("analysis" in stages and cfg.analysis != "none"))
    if needs_prec:
        try:
            rp = realize(system, cfg.recipe)
        except Exception as err:
            raise StageError("precond", err) from err

    if "solve" in stages:
        if system is not None:
            rhs = _rhs(cfg, system, seed)
        try:
            t0 = time.perf_counter()
            res, label = _solve(cfg, system, rhs, rp)
            wall = time.perf_counter() - t0
        except Exception as err:
            raise StageError("solve", err) from err
        results += [
            ("solve", "prec", label, "", ""),
            ("solve", "solver", cfg.solver, "", ""),
            ("solve", "iterations", str(res.iterations), "", ""),
            ("solve", "converged", str(res.converged).lower(), "", ""),
            ("solve", "final_residual", _fmt(res.residuals[-1]), "", ""),
            ("solve", "wall", "", "", f"{wall:.6f}"),
        ]
        conv_rows = [(i, _fmt(r)) for i, r in enumerate(res.residuals)]

    if "analysis" in stages and cfg.analysis != "none":
        try:
            ind = spectral.compute_indicators(system, rp)
            results += _indicator_rows(ind)
            if cfg.analysis != "indicators":
                report = spectral.bound_report(ind)
                results += _bound_rows(report)
                report_text = _bound_report_text(cfg, ind, report)
            if cfg.analysis in ("spectrum", "verify"):
                cap_kw = {} if max_dense_n is None else {"cap": max_dense_n}
                layout = _layout_for(cfg)
                spectrum = spectral.preconditioned_spectrum(
                    system, rp, layout, **cap_kw)
                for lam in spectrum.values:
                    re, im = float(np.real(lam)), float(np.imag(lam))
                    cls = ("complex"
                           if abs(im) > 1e-8 * max(1.0, abs(lam)) else
                           "real")
                    spec_rows.append((_fmt(re), _fmt(im), cls))
            if cfg.analysis == "verify":
                verdict = spectral.verify_bounds(system, rp, spectrum,
                                                 report, layout)
                for chk in verdict.checks:
                    results.append(("verdict", f"{layout}:{chk.name}",
                                    "pass" if chk.passed else "fail",
                                    chk.detail, ""))
                report_text = _bound_report_text(cfg, ind, report, verdict)
                if not verdict.ok:
                    exit_code = 2
        except StageError:
            raise
        except Exception as err:
            raise StageError("analysis", err) from err

    _write_csv(out_dir / "results.csv",
               ("kind", "name", "value", "detail", "time_s"), results)
    _write_csv(out_dir / "convergence.csv", ("iter", "residual"), conv_rows)
    _write_csv(out_dir / "spectrum.csv", ("re", "im", "class"), spec_rows)
    (out_dir / "bound_report.txt").write_text(report_text, encoding="utf-8")
    return exit_code, out_dir


def _fresh_run_dir(root: Path, name: str) -> Path:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S.%fZ")
    out = root / name / stamp
    k = 1
    while out.exists():
        out = root / name / f"{stamp}-{k}"
        k += 1
    out.mkdir(parents=True)
    return out


# ----------------------------------------------------------------- tables


def _load_runs(results_dir: Path) -> List[Dict]:
    runs = []
    for path in sorted(results_dir.rglob("results.csv")):
        rows: Dict[Tuple[str, str], Tuple[str, str, str]] = {}
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                continue
            for row in reader:
                kind, name, value, detail, time_s = row
                rows[(kind, name)] = (value, detail, time_s)
        runs.append({"path": path, "rows": rows})
    return runs


def _cell(run: Dict, kind: str, name: str) -> Optional[str]:
    hit = run["rows"].get((kind, name))
    return None if hit is None else hit[0]


def _table_lines(header: Sequence[str],
                 rows: List[Sequence[str]]) -> List[str]:
    # rows are compared verbatim against published tables, so cells are
    # never padded for alignment
    lines = [" | ".join(header),
             "-+-".join("-" * len(h) for h in header)]
    lines += [" | ".join(row) for row in rows]
    return lines


def emit_table(results_dir, which: str) -> str:
    """Build one of the summary tables from runs under results_dir."""
    if which not in _TABLES:
        raise ConfigError(
            f"table id must be one of {'|'.join(_TABLES)}, got {which!r}")
    results_dir = Path(results_dir)
    runs = _load_runs(results_dir)

    # missing cells from partial runs are flagged with "?" rather than
    # dropping the row, so gaps in an experiment set stay visible
    gaps = False

    def take(run: Dict, kind: str, name: str, fmt=None) -> str:
        nonlocal gaps
        val = _cell(run, kind, name)
        if val is None or val == "":
            gaps = True
            return "?"
        return val if fmt is None else fmt(val)

    def g5(text: str) -> str:
        return f"{float(text):.5g}"

    if which == "sizes":
        header = ("1/h", "n", "m", "p", "N")
        rows = []
        for run in runs:
            if _cell(run, "meta", "operator") == "identity":
                continue
            if _cell(run, "size", "N") is None and \
                    _cell(run, "size", "n") is None:
                continue
            rows.append([take(run, "meta", "h").split("/")[-1],
                         take(run, "size", "n"), take(run, "size", "m"),
                         take(run, "size", "p"), take(run, "size", "N")])
        rows.sort(key=lambda r: (len(r[0]), r[0]))
    elif which == "iterations":
        header = ("prec", "n_it", "T")
        rows = []
        for run in runs:
            if _cell(run, "solve", "prec") is None:
                continue
            wall = run["rows"].get(("solve", "wall"))
            rows.append([take(run, "solve", "prec"),
                         take(run, "solve", "iterations"),
                         "?" if wall is None else f"{float(wall[2]):.3f}"])
    elif which == "eigen-bounds":
        header = ("prec", "bounds")
        rows = []
        for run in runs:
            if _cell(run, "bound", "triangular_lo") is None:
                continue
            name = take(run, "meta", "name")
            rows.append([
                f"triangular {name}",
                f"[{take(run, 'bound', 'triangular_lo', g5)}, "
                f"{take(run, 'bound', 'triangular_hi', g5)}]"])
            rows.append([
                f"diagonal {name}",
                f"[{take(run, 'bound', 'diagonal_neg_lo_split', g5)}, "
                f"{take(run, 'bound', 'diagonal_neg_hi', g5)}] u "
                f"[{take(run, 'bound', 'diagonal_pos_lo', g5)}, "
                f"{take(run, 'bound', 'diagonal_pos_hi', g5)}]"])
    else:  # scalability
        header = ("1/h", "N", "n_it", "T")
        rows = []
        for run in runs:
            if _cell(run, "meta", "h") is None or \
                    _cell(run, "meta", "operator") == "identity":
                continue
            wall = run["rows"].get(("solve", "wall"))
            rows.append([take(run, "meta", "h").split("/")[-1],
                         take(run, "size", "N"),
                         take(run, "solve", "iterations"),
                         "?" if wall is None else f"{float(wall[2]):.3f}"])
        rows.sort(key=lambda r: (len(r[0]), r[0]))

    if not rows:
        warnings.warn(f"no usable {which} rows under {results_dir}",
                      stacklevel=2)
    if gaps:
        warnings.warn(f"{which} table has gaps (cells marked '?')",
                      stacklevel=2)
    return "\n".join(_table_lines(header, rows)) + "\n"


# -------------------------------------------------------------- reproduce


def _recipe_presets() -> Dict[str, PrecondSpec]:
    first = PrecondSpec(a_kind="ic0", s_variant="s1", s_kind="ic0",
                        x_kind="ic0")
    return {
        "first": first,
        "first-relaxed": replace(first, omega=0.1),
        "fixed-stress": PrecondSpec(a_kind="ic0", s_variant="s2-physical",
                                    s_kind="exact", x_kind="ic0"),
    }


def _reproduce_configs(table: str) -> List[ExperimentConfig]:
    presets = _recipe_presets()
    cfgs = []
    if table == "sizes":
        for disc, cells in (("mhfe3d", 10), ("mhfe3d", 20), ("mfe2d", 40)):
            cfgs.append(ExperimentConfig(
                name=f"sizes-{disc}-{cells}", discretization=disc,
                h=1.0 / cells, cells=cells))
        return cfgs
    if table == "eigen-bounds":
        for disc, rec in (("mfe2d", "first"), ("mfe2d", "first-relaxed"),
                          ("mfe2d", "fixed-stress"), ("mhfe2d", "first")):
            cfgs.append(ExperimentConfig(
                name=f"bounds-{disc}-{rec}", discretization=disc,
                h=1.0 / 40, cells=40, recipe=presets[rec],
                analysis="bounds"))
        return cfgs
    if table == "iterations":
        for disc, rec in (("mfe2d", "first"), ("mfe2d", "first-relaxed"),
                          ("mfe2d", "fixed-stress"), ("mhfe2d", "first")):
            for solver in ("gmres", "minres"):
                cfgs.append(ExperimentConfig(
                    name=f"iters-{disc}-{rec}-{solver}",
                    discretization=disc, h=1.0 / 40, cells=40,
                    recipe=presets[rec], solver=solver, tol=1e-8,
                    maxit=1000))
        return cfgs
    # scalability: one recipe across refinements, iteration cap 500
    for cells in (10, 20, 40):
        cfgs.append(ExperimentConfig(
            name=f"scal-mfe2d-{cells}", discretization="mfe2d",
            h=1.0 / cells, cells=cells, recipe=presets["first"],
            solver="gmres", tol=1e-8, maxit=500))
    return cfgs


def _reproduce(table: str, out_root: str, seed: Optional[int],
               max_dense_n: Optional[int],
               from_dir: Optional[str]) -> Tuple[int, str]:
    if from_dir is not None:
        return 0, emit_table(from_dir, table)
    root = Path(out_root) / f"table-{table}"
    stages = ("assemble",) if table == "sizes" else \
        ("assemble", "solve") if table in ("iterations", "scalability") \
        else ("assemble", "analysis")
    worst = 0
    for cfg in _reproduce_configs(table):
        code, _ = run_experiment(cfg, out_root=root, seed=seed,
                                 max_dense_n=max_dense_n, stages=stages)
        worst = max(worst, code)
    text = emit_table(root, table)
    (root / f"{table}.txt").write_text(text, encoding="utf-8")
    return worst, text


def _export_mm(cfg: ExperimentConfig, out_root: str,
               seed: Optional[int]) -> Path:
    try:
        system = _assemble(cfg)
    except Exception as err:
        raise StageError("assembly", err) from err
    out_dir = _fresh_run_dir(Path(out_root), f"{cfg.name}-mm")
    for nm, M, symmetric in (("A", system.A, True), ("B", system.B, False),
                             ("C", system.C, False), ("D", system.D, True),
                             ("E", system.E, True)):
        mm_write(out_dir / f"{nm}.mtx", M, symmetric=symmetric)
    mm_write_vector(out_dir / "rhs.mtx", _rhs(cfg, system, seed))
    return out_dir


# --------------------------------------------------------------- the CLI


class _ArgumentParser(argparse.ArgumentParser):
    # exit code 2 is reserved for failed bound verification, so usage
    # errors are routed through the config-error path (exit 1) instead
    def error(self, message):
        raise ConfigError(f"usage: {message}")


def _build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="dsaddle",
        description="Assemble, solve, and analyze block three-by-three "
                    "poroelastic systems.",
        epilog="config keys:\n" + KEY_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", help="key=value experiment file")
    parser.add_argument("--out", default="out",
                        help="output root directory (default: out)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the manufactured right-hand-side "
                             "seed")
    parser.add_argument("--max-dense-n", type=int, default=None,
                        help="override the dense-spectrum size cap")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("assemble", help="assemble only; record problem sizes")
    sub.add_parser("solve", help="assemble and run the configured solver")
    sub.add_parser("analyze", help="assemble and run the configured "
                                   "analysis")
    rep = sub.add_parser("reproduce", help="run a canned experiment set "
                                           "and print its table")
    rep.add_argument("table", choices=_TABLES)
    rep.add_argument("--from-dir", default=None,
                     help="emit the table from existing runs instead of "
                          "recomputing")
    sub.add_parser("export-mm", help="write the assembled blocks in "
                                     "Matrix Market format")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    cfg = None
    try:
        args = _build_parser().parse_args(argv)
        cfg = (parse_config(args.config) if args.config
               else ExperimentConfig())
        if args.command == "assemble":
            code, out_dir = run_experiment(cfg, args.out, args.seed,
                                           args.max_dense_n,
                                           stages=("assemble",))
        elif args.command == "solve":
            code, out_dir = run_experiment(cfg, args.out, args.seed,
                                           args.max_dense_n,
                                           stages=("assemble", "solve"))
        elif args.command == "analyze":
            code, out_dir = run_experiment(cfg, args.out, args.seed,
                                           args.max_dense_n,
                                           stages=("assemble", "analysis"))
        elif args.command == "export-mm":
            out_dir = _export_mm(cfg, args.out, args.seed)
            code = 0
        else:
            code, text = _reproduce(args.table, args.out, args.seed,
                                    args.max_dense_n, args.from_dir)
            print(text, end="")
            return code
        print(f"artifacts: {out_dir}")
        return code
    except StageError as err:
        print(f"error[{err.stage}]: {err.err}", file=sys.stderr)
        _echo_config(cfg)
        return 1
    except ConfigError as err:
        print(f"error[config]: {err}", file=sys.stderr)
        _echo_config(cfg)
        return 1
    except Exception as err:  # pragma: no cover - last-resort labeling
        print(f"error[internal]: {type(err).__name__}: {err}",
              file=sys.stderr)
        _echo_config(cfg)
        return 1


def _echo_config(cfg: Optional[ExperimentConfig]) -> None:
    if cfg is None:
        return
    print("config:", file=sys.stderr)
    for key, value in cfg.echo_pairs():
        print(f"  {key} = {value}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
