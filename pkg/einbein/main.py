# -*- coding: utf-8 -*-

"""
Command line for the einbein thimble solver.

Every command reads one JSON experiment document (see RunConfig) and writes its
files to the output directory together with run.log.

Exit codes:
    0  success
    2  configuration error (bad JSON, unsupported model/source combination)
    3  numerical failure
"""

# Imports
import argparse
import json
import logging
import math
import os
import sys
from collections import Counter
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from einbein import __version__
from einbein.core.asymptotics import arrival_times
from einbein.core.critical import astroid_caustic, caustic_locus, linear_z_caustic
from einbein.core.laurent import laurent_model
from einbein.core.monodromy import (
    Basis,
    MonodromyMatrix,
    basis_for,
    confirmation_wavefunction,
    coordinate_loop,
    loop_for,
    route_word,
    transport,
)
from einbein.core.quadrature import decompose_at, samples_to_array
from einbein.core.rational import fit_rational, riemann_hurwitz_count
from einbein.schemas.objects import GridSpec, ModelKind, RunConfig, SourceKind
from einbein.schemas.results import ArrivalRow, CausticRow, CommandResult, FieldStats
from einbein.utils import export
from einbein.utils.errors import ConfigurationError, DimensionMismatch, EinbeinError, NumericalError
from einbein.worker.field_worker import FieldWorker

__software__ = 'einbein'
__copyright__ = 'einbein: proper-time thimble solver for the Helmholtz equation'

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
LOG_FORMAT = "[%(levelname)s] %(asctime)s %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

logger = logging.getLogger(__name__)


# Set logging level and format
def setLogging(debug: bool, out_dir: Optional[str] = None) -> None:
    level = logging.DEBUG if debug else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, datefmt=DATE_FORMAT)
    root = logging.getLogger()
    root.setLevel(level)
    # one run.log per invocation
    for handler in [h for h in root.handlers if getattr(h, "einbein_run_log", False)]:
        root.removeHandler(handler)
        handler.close()
    if out_dir:
        handler = logging.FileHandler(os.path.join(export.ensure_dir(out_dir), "run.log"), mode="w")
        handler.setFormatter(logging.Formatter(LOG_FORMAT, DATE_FORMAT))
        handler.setLevel(level)
        handler.einbein_run_log = True
        root.addHandler(handler)


# Argparser config and argument setup
def setArgs(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog=__software__,
        description=__copyright__,
        epilog="exit codes: 0 success, 2 configuration error, 3 numerical failure",
    )
    parser.add_argument('command', choices=sorted(COMMANDS), help="Experiment to run")
    parser.add_argument('--config', required=True, help="JSON experiment document")
    parser.add_argument('-o', '--out', dest="out", help="Output directory (overrides out_dir)")
    parser.add_argument('--k0', help="Wavenumber list F[,F...] (overrides k0)")
    parser.add_argument('--grid', help="Resolution NX,NZ (overrides grid.resolution)")
    parser.add_argument('--point', help="Observation point X,Z (thimbles, laurent)")
    parser.add_argument('--order', type=int, help="Laurent order (laurent, default 6)")
    parser.add_argument('--N', dest="pade_n", type=int, help="Pade numerator degree (pade, default 6)")
    parser.add_argument('--M', dest="pade_m", type=int, help="Pade pole count (pade, default 6)")
    parser.add_argument('--loop', help="Monodromy loop: nu, a, a_full, coord, ghost, trivial")
    parser.add_argument('--no-confirm', action='store_true', help="Skip numerical confirmation (monodromy)")
    parser.add_argument('--c0', type=float, help="Reference speed for arrival times (arrivals, default 1)")
    parser.add_argument('--debug', action='store_true', help="Set the log level to DEBUG")
    parser.add_argument('--version', action='version', version=f"{__software__} {__version__}")
    return parser.parse_args(argv)


def _floats(text: str, name: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"{name} must be a comma-separated list of numbers, got {text!r}")


def load_config(args: argparse.Namespace) -> RunConfig:
    """Read the JSON document and apply the flag overrides."""
    try:
        with open(args.config, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"cannot read config {args.config}: {e}")
    if args.k0:
        raw["k0"] = _floats(args.k0, "--k0")
    if args.grid:
        res = [int(v) for v in _floats(args.grid, "--grid")]
        if len(res) != 2:
            raise ConfigurationError("--grid takes NX,NZ")
        if not raw.get("grid"):
            raise ConfigurationError("--grid needs a grid section in the config")
        raw["grid"]["resolution"] = res
    if args.point:
        raw["point"] = _floats(args.point, "--point")
    if args.out:
        raw["out_dir"] = args.out
    options = raw.setdefault("options", {})
    for key, value in (("order", args.order), ("N", args.pade_n), ("M", args.pade_m),
                       ("loop", args.loop), ("c0", args.c0)):
        if value is not None:
            options[key] = value
    if args.no_confirm:
        options["confirm"] = False
    return RunConfig.model_validate(raw)


def _embed(cfg: RunConfig, point: Tuple[float, float]) -> Tuple[float, ...]:
    """(x, z) grid point in the source's dimension."""
    if cfg.source.dimension == 3:
        return (point[0], 0.0, point[1])
    return tuple(point)


def _require_grid(cfg: RunConfig) -> GridSpec:
    if cfg.grid is None:
        raise ConfigurationError("this command needs a grid section")
    return cfg.grid


def _point(cfg: RunConfig) -> Tuple[float, ...]:
    if cfg.point is None:
        raise ConfigurationError("this command needs an observation point (point or --point)")
    point = tuple(float(v) for v in cfg.point)
    if len(point) == 2 and cfg.source.dimension == 3:
        point = _embed(cfg, point)
    if len(point) != cfg.source.dimension:
        raise DimensionMismatch(f"point has {len(point)} components, source has {cfg.source.dimension}")
    return point


def _tag(k0: float) -> str:
    return f"k{k0:g}".replace(".", "p")


def _closed_form_caustic(cfg: RunConfig) -> Optional[Callable[[float, float], float]]:
    if cfg.source.kind == SourceKind.PHASE_SHEET:
        return astroid_caustic(cfg.model, cfg.source)
    if cfg.model.kind == ModelKind.LINEAR_Z and cfg.model.a != 0:
        return linear_z_caustic(cfg.model, cfg.source)
    return None


def cmd_field(cfg: RunConfig, out: str) -> CommandResult:
    """Field CSV/JSON and |phi| heat map for every k0."""
    grid = _require_grid(cfg)
    nx, nz = grid.resolution
    xs = np.linspace(*grid.x_range, nx)
    zs = np.linspace(*grid.z_range, nz)
    points = [_embed(cfg, p) for p in grid.points()]
    result = CommandResult(command="field")
    for k0 in cfg.k0:
        worker = FieldWorker(cfg.model, cfg.source, k0)
        samples = worker.run_points(points, cell=max(grid.spacing))
        for s in samples:
            if s.diagnostic:
                logger.warning(f"Point {s.x}: {s.diagnostic}")
        values = samples_to_array(samples, (nx, nz))
        finite = np.abs(values[np.isfinite(values)])
        stats = FieldStats(
            points=len(samples),
            failed=sum(1 for s in samples if s.decomposition_id == ""),
            oracle_fallbacks=sum(1 for s in samples if s.decomposition_id == "oracle"),
            decompositions=len({s.decomposition_id for s in samples} - {"", "oracle"}),
            zones=dict(sorted(Counter(s.zone or "failed" for s in samples).items())),
            max_abs=float(finite.max()) if finite.size else 0.0,
            grid_shape=(nx, nz),
        )
        tag = _tag(k0)
        result.outputs.append(export.write_field_csv(os.path.join(out, f"field_{tag}.csv"), samples))
        result.outputs.append(export.write_json(os.path.join(out, f"field_{tag}.json"), {
            "k0": k0,
            "model": cfg.model.model_dump(mode="json"),
            "source": cfg.source.model_dump(mode="json"),
            "stats": stats.model_dump(mode="json"),
            "points": [r.model_dump(mode="json", include={"x", "z", "re", "im", "abs", "zone"})
                       for r in export.field_rows(samples)],
        }))
        result.outputs.append(export.field_heatmap_svg(
            os.path.join(out, f"field_{tag}.svg"), values, xs, zs, _closed_form_caustic(cfg),
            title=f"|phi|, k0 = {k0:g}"))
        result.details[f"{tag} failed / oracle"] = f"{stats.failed} / {stats.oracle_fallbacks}"
        result.details[f"{tag} zones"] = stats.zones
    return result


def cmd_thimbles(cfg: RunConfig, out: str) -> CommandResult:
    """Thimble polylines, coefficients and a contour plot at one point."""
    point = _point(cfg)
    k0 = cfg.k0[0]
    wf, decomposition = decompose_at(cfg.model, cfg.source, point, k0)
    thimbles = []
    for th, c in zip(decomposition.thimbles, decomposition.coefficients):
        cp = th.critical_point
        thimbles.append({
            "critical_point": complex(cp.lam), "value": complex(cp.value), "real": cp.is_real,
            "start": th.start.describe(), "end": th.end.describe(), "coefficient": int(c),
            "drift": th.drift, "path": np.asarray(th.path),
        })
    branches = [{"beta": complex(b.beta), "end": b.end.describe(), "coefficient": int(c), "path": np.asarray(b.path)}
                for b, c in zip(decomposition.branch_contours, decomposition.branch_coefficients)]
    result = CommandResult(command="thimbles")
    result.outputs.append(export.write_json(os.path.join(out, "thimbles.json"), {
        "point": point, "k0": k0, "residual": decomposition.residual,
        "thimbles": thimbles, "branch_contours": branches,
    }))
    result.outputs.append(export.write_thimbles_csv(
        os.path.join(out, "thimbles.csv"), decomposition.thimbles, lambda lam: wf.action.value(lam, check=False)))
    poles = [complex(p.location) for p in wf.action.poles()]
    reach = [abs(complex(th.critical_point.lam)) for th in decomposition.thimbles] + [abs(p) for p in poles]
    extent = 1.5 * max(reach + [wf.action.scale])
    result.outputs.append(export.thimbles_svg(
        os.path.join(out, "thimbles.svg"), lambda lam: wf.action.value(lam, check=False), extent,
        decomposition.thimbles, decomposition.branch_contours, poles, k0))
    result.details["coefficients"] = [int(c) for c in decomposition.coefficients + decomposition.branch_coefficients]
    return result


def cmd_caustics(cfg: RunConfig, out: str) -> CommandResult:
    """Zone classification grid, refined crossings and the closed-form caustic."""
    grid = _require_grid(cfg)
    caustic_map = caustic_locus(cfg.model, cfg.source, grid)
    rows = [CausticRow(x=c.point[0], z=c.point[-1], zone=c.zone, caustic_type=c.caustic_type,
                       ghost_source=c.ghost_source, n_real=c.n_real, diagnostic=c.diagnostic)
            for c in caustic_map.classifications]
    result = CommandResult(command="caustics")
    result.outputs.append(export.write_rows(os.path.join(out, "caustics.csv"), rows))
    result.outputs.append(export.write_json(os.path.join(out, "caustics.json"), {
        "closed_form": caustic_map.closed_form_name,
        "crossings": [list(c) for c in caustic_map.crossings],
        "cusp_points": [list(p) for p in caustic_map.cusp_points],
        "expected_cusp_points": [list(p) for p in caustic_map.expected_cusp_points],
        "ghost_lines": [{"description": g.description, "axis": g.axis, "offset": g.offset}
                        for g in caustic_map.ghost_lines],
    }))
    xs = np.linspace(*grid.x_range, grid.resolution[0])
    zs = np.linspace(*grid.z_range, grid.resolution[1])
    result.outputs.append(export.caustics_svg(os.path.join(out, "caustics.svg"), caustic_map, xs, zs))
    result.details["crossings"] = len(caustic_map.crossings)
    if caustic_map.cusp_points:
        result.details["cusp points"] = caustic_map.cusp_points
    return result


def _series(cfg: RunConfig, order: int):
    if cfg.source.kind != SourceKind.POINT_DELTA:
        raise ConfigurationError("Laurent series are built for point sources")
    point = _point(cfg) if cfg.point is not None else tuple(cfg.source.location)
    return laurent_model(cfg.model, cfg.source.location, point, cfg.k0[0], order)


def cmd_laurent(cfg: RunConfig, out: str) -> CommandResult:
    """Coefficient table about the source pole."""
    order = int(cfg.options.get("order", 6))
    series = _series(cfg, order)
    result = CommandResult(command="laurent")
    result.outputs.append(export.write_json(os.path.join(out, "laurent.json"), series.to_json()))
    table = {str(m): series.numeric(m, grade=0).real for m in range(-1, order + 1)}
    result.outputs.append(export.write_json(os.path.join(out, "laurent_values.json"), {
        "point": list(series.x), "exact": series.exact, "gamma_leading": table,
    }))
    result.details["order"] = order
    result.details["exact"] = series.exact
    return result


def cmd_pade(cfg: RunConfig, out: str) -> CommandResult:
    """Rational approximant and ghost-pole report."""
    n = int(cfg.options.get("N", 6))
    m = int(cfg.options.get("M", 6))
    series = _series(cfg, n + m)
    approximant = fit_rational(series, n, m)
    ghosts = [g for g in approximant.ghost_poles() if not g.spurious]
    report = {"approximant": json.loads(approximant.to_json()), "fit_residual": approximant.fit_residual}
    if cfg.model.kind == ModelKind.QUADRATIC_Z:
        expected = math.pi / (2.0 * math.sqrt(cfg.model.alpha))
        real = [g for g in ghosts if g.beta.real > 0]
        if real:
            nearest = min(real, key=lambda g: abs(g.beta - expected))
            report["first_ghost_pole"] = {
                "beta": complex(nearest.beta), "expected": expected,
                "relative_error": abs(nearest.beta - expected) / expected, "residue": complex(nearest.residue),
            }
            result_pole = f"{nearest.beta.real:.7g} (expected {expected:.7g})"
        else:
            result_pole = "none found"
    else:
        result_pole = None
        try:
            report["riemann_hurwitz"] = riemann_hurwitz_count(approximant)
        except EinbeinError as e:
            logger.warning(f"Riemann-Hurwitz count unavailable: {e}")
    result = CommandResult(command="pade")
    result.outputs.append(export.write_json(os.path.join(out, "pade.json"), report))
    result.details["ghost poles"] = [f"{g.beta:.7g}" for g in ghosts]
    if result_pole is not None:
        result.details["first ghost pole"] = result_pole
    return result


def _default_loop(cfg: RunConfig) -> str:
    return {ModelKind.CONSTANT: "nu", ModelKind.LINEAR_Z: "a", ModelKind.QUADRATIC_Z: "ghost"}.get(
        cfg.model.kind, "trivial")


def _routes(basis: Basis, matrix: MonodromyMatrix, wf) -> Tuple[List[np.ndarray], List[str]]:
    radius = 1.5 * wf.action.scale
    routes, labels = [], []
    for c, moved in zip(basis.contours, matrix.transported):
        routes.append(route_word(wf, c.word, radius)[0])
        labels.append(c.label)
        if moved.canonical().stops:
            routes.append(route_word(wf, moved, radius)[0])
            labels.append(f"{c.label} transported")
    return routes, labels


def cmd_monodromy(cfg: RunConfig, out: str) -> CommandResult:
    """Integer monodromy matrix of the supplied basis round one loop."""
    name = str(cfg.options.get("loop", _default_loop(cfg)))
    confirm = bool(cfg.options.get("confirm", True))
    basis = basis_for(cfg.model, cfg.source)
    wf = confirmation_wavefunction(cfg.model, cfg.source) if basis.single_center else None
    check = wf if confirm and basis.single_center else None
    if name == "coord":
        matrix = coordinate_loop(basis, wavefunction=check)
    else:
        matrix = transport(basis, loop_for(name, cfg.model), wavefunction=check)
    result = CommandResult(command="monodromy")
    result.outputs.append(export.write_json(os.path.join(out, f"monodromy_{name}.json"), matrix.to_json()))
    if wf is not None:
        routes, labels = _routes(basis, matrix, wf)
        result.outputs.append(export.words_svg(os.path.join(out, f"monodromy_{name}.svg"), routes, labels))
    result.details["basis"] = basis.labels
    result.details["matrix"] = matrix.matrix.tolist()
    result.details["det"] = matrix.det
    if matrix.confirmation_residual is not None:
        result.details["confirmation residual"] = f"{matrix.confirmation_residual:.2e}"
    return result


def _transect(cfg: RunConfig) -> List[Tuple[float, ...]]:
    if "transect" in cfg.options:
        return [_embed(cfg, tuple(p)) if len(p) == 2 else tuple(p) for p in cfg.options["transect"]]
    return [_embed(cfg, p) for p in _require_grid(cfg).points()]


def cmd_arrivals(cfg: RunConfig, out: str) -> CommandResult:
    """Arrival-time table along a transect; failing points are logged and skipped."""
    c0 = float(cfg.options.get("c0", 1.0))
    k0 = cfg.k0[0]
    rows: List[ArrivalRow] = []
    failed = 0
    points = _transect(cfg)
    for i, point in enumerate(points):
        try:
            _, decomposition = decompose_at(cfg.model, cfg.source, point, k0)
        except NumericalError as e:
            failed += 1
            logger.warning(f"No arrivals at {point}: {e}", exc_info=True)
            continue
        for a in arrival_times(decomposition, c0):
            rows.append(ArrivalRow(x=point[0], z=point[-1], t=a.t, smear=a.smear, label=a.label,
                                   coefficient=a.coefficient))
        logger.info(f"Processed {i + 1}/{len(points)} points")
    result = CommandResult(command="arrivals")
    result.outputs.append(export.write_arrivals_csv(os.path.join(out, "arrivals.csv"), rows))
    result.details["points"] = len(points)
    result.details["arrivals"] = len(rows)
    result.details["failed points"] = failed
    return result


COMMANDS: Dict[str, Callable[[RunConfig, str], CommandResult]] = {
    "field": cmd_field,
    "thimbles": cmd_thimbles,
    "caustics": cmd_caustics,
    "laurent": cmd_laurent,
    "pade": cmd_pade,
    "monodromy": cmd_monodromy,
    "arrivals": cmd_arrivals,
}


def run(argv: Optional[Sequence[str]] = None) -> CommandResult:
    """Parse, configure, dispatch; errors come back as a failed CommandResult with its exit code."""
    args = setArgs(argv)
    out = args.out
    logging_ready = False
    try:
        cfg = load_config(args)
        out = export.ensure_dir(cfg.out_dir)
        setLogging(args.debug, out)
        logging_ready = True
        logger.info(f"{__software__} v{__version__}: {args.command} on "
                    f"{cfg.model.kind.value} / {cfg.source.kind.value}")
        result = COMMANDS[args.command](cfg, out)
    except (ConfigurationError, ValidationError) as e:
        if not logging_ready:
            setLogging(args.debug, out)
        logger.error(f"Configuration error: {e}", exc_info=args.debug)
        return CommandResult(command=args.command, success=False, error_message=str(e), exit_code=EXIT_CONFIG)
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}", exc_info=True)
        return CommandResult(command=args.command, success=False, error_message=f"{type(e).__name__}: {e}",
                             exit_code=EXIT_NUMERICAL)
    result.outputs.append(os.path.join(out, "run.log"))
    return result


def main(argv: Optional[Sequence[str]] = None) -> int:
    result = run(argv)
    print(result.to_summary())
    return result.exit_code


if __name__ == '__main__':
    sys.exit(main())
