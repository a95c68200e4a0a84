"""
File writers for the CLI: field and arrival tables (CSV), reports (JSON) and
schematic figures (SVG).
"""

import json
import logging
import os
from typing import Callable, Iterable, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from ..schemas.results import ArrivalRow, FieldRow  # noqa: E402

logger = logging.getLogger(__name__)

# keeps the SVG byte-identical between reruns
_SVG_META = {"Date": None, "Creator": "einbein"}


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def write_json(path: str, payload) -> str:
    """Write a dict, a pydantic model or an already-encoded JSON string."""
    if hasattr(payload, "model_dump_json"):
        text = payload.model_dump_json(indent=2)
    elif isinstance(payload, str):
        text = payload
    else:
        text = json.dumps(payload, indent=2, sort_keys=True, default=_default)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
        f.write("\n")
    logger.info(f"Wrote {path}")
    return path


def _default(value):
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot encode {type(value).__name__}")


def write_rows(path: str, rows: Sequence, columns: Optional[List[str]] = None) -> str:
    """CSV of pydantic rows, fixed float format."""
    frame = pd.DataFrame([r.model_dump() for r in rows], columns=columns)
    frame.to_csv(path, index=False, float_format="%.12e")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def field_rows(samples: Iterable) -> List[FieldRow]:
    rows = []
    for s in samples:
        value = complex(s.value)
        rows.append(FieldRow(x=s.x[0], z=s.x[-1], re=value.real, im=value.imag, abs=abs(value),
                             zone=s.zone, decomposition_id=s.decomposition_id, diagnostic=s.diagnostic))
    return rows


def write_field_csv(path: str, samples: Iterable) -> str:
    return write_rows(path, field_rows(samples),
                      ["x", "z", "re", "im", "abs", "zone", "decomposition_id", "diagnostic"])


def write_arrivals_csv(path: str, rows: Sequence[ArrivalRow]) -> str:
    return write_rows(path, rows, ["x", "z", "t", "smear", "label", "coefficient"])


THIMBLE_COLUMNS = ["thimble", "critical_point", "tau", "re_lambda", "im_lambda", "re_action", "im_action"]


def write_thimbles_csv(path: str, thimbles: Sequence, action_value: Callable[[np.ndarray], np.ndarray]) -> str:
    """One row per polyline sample: flow time, Lambda and the action there."""
    frames = []
    for i, th in enumerate(thimbles):
        lam = np.asarray(th.path, dtype=complex)
        with np.errstate(all="ignore"):
            s = np.asarray(action_value(lam), dtype=complex)
        cp = complex(th.critical_point.lam)
        frames.append(pd.DataFrame({
            "thimble": i,
            "critical_point": f"{cp.real:.6g}{cp.imag:+.6g}j",
            "tau": np.asarray(th.t, dtype=float),
            "re_lambda": lam.real, "im_lambda": lam.imag,
            "re_action": s.real, "im_action": s.imag,
        }))
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=THIMBLE_COLUMNS)
    frame.to_csv(path, index=False, columns=THIMBLE_COLUMNS, float_format="%.12e")
    logger.info(f"Wrote {len(frame)} thimble samples to {path}")
    return path


def _finish(fig, path: str) -> str:
    fig.savefig(path, format="svg", metadata=_SVG_META, bbox_inches="tight")
    plt.close(fig)
    logger.info(f"Wrote {path}")
    return path


def field_heatmap_svg(path: str, values: np.ndarray, xs: Sequence[float], zs: Sequence[float],
                      caustic: Optional[Callable[[float, float], float]] = None,
                      crossings: Sequence = (), title: str = "|phi|") -> str:
    """
    |phi| heat map on the (x, z) grid with the caustic overlaid.

    Args:
        path: output file
        values: complex field, shape (nz, nx)
        xs, zs: grid axes
        caustic: closed-form residual whose zero set is drawn as a contour
        crossings: refined (x, z, kind) points drawn as markers
    """
    fig, ax = plt.subplots(figsize=(6, 5))
    mesh = ax.pcolormesh(xs, zs, np.abs(values), shading="auto", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=title)
    if caustic is not None:
        fx = np.linspace(min(xs), max(xs), 200)
        fz = np.linspace(min(zs), max(zs), 200)
        grid = np.array([[caustic(x, z) for x in fx] for z in fz])
        ax.contour(fx, fz, grid, levels=[0.0], colors="white", linewidths=0.8)
    if len(crossings):
        pts = np.array([(c[0], c[1]) for c in crossings])
        ax.plot(pts[:, 0], pts[:, 1], "r.", markersize=3)
    ax.set_xlabel("x")
    ax.set_ylabel("z")
    ax.set_title(title)
    return _finish(fig, path)


def thimbles_svg(path: str, action_value: Callable[[np.ndarray], np.ndarray], extent: float,
                 thimbles: Sequence = (), branch_contours: Sequence = (), poles: Sequence[complex] = (),
                 k0: float = 1.0) -> str:
    """Im S contours over the Lambda plane with thimbles, branch contours and poles."""
    re = np.linspace(-extent, extent, 241)
    im = np.linspace(-extent, extent, 241)
    grid = re[None, :] + 1j * im[:, None]
    with np.errstate(all="ignore"):
        height = np.imag(k0 * action_value(grid))
    height = np.clip(np.nan_to_num(height, nan=0.0, posinf=50.0, neginf=-50.0), -50.0, 50.0)
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.contourf(re, im, height, levels=30, cmap="RdBu_r")
    for t in thimbles:
        ax.plot(t.path.real, t.path.imag, "k-", linewidth=1.2)
        cp = t.critical_point.lam
        ax.plot([cp.real], [cp.imag], "ko", markersize=4)
    for b in branch_contours:
        ax.plot(b.path.real, b.path.imag, "m--", linewidth=1.0)
    for p in poles:
        ax.plot([p.real], [p.imag], "rx", markersize=6)
    ax.axhline(0.0, color="grey", linewidth=0.5)
    ax.set_xlim(-extent, extent)
    ax.set_ylim(-extent, extent)
    ax.set_aspect("equal")
    ax.set_xlabel("Re Lambda")
    ax.set_ylabel("Im Lambda")
    return _finish(fig, path)


def caustics_svg(path: str, caustic_map, xs: Sequence[float], zs: Sequence[float]) -> str:
    """Zone map with refined crossings, ghost-source lines, closed-form caustic and cusp points."""
    codes = {"illuminated": 0, "shadow": 1, "on-caustic": 2}
    zone = np.array([codes.get(c.zone, 2) for c in caustic_map.classifications], dtype=float)
    zone = zone.reshape(len(zs), len(xs))
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.pcolormesh(xs, zs, zone, shading="auto", cmap="Pastel1", vmin=0, vmax=8)
    if caustic_map.closed_form is not None:
        fx = np.linspace(min(xs), max(xs), 200)
        fz = np.linspace(min(zs), max(zs), 200)
        grid = np.array([[caustic_map.closed_form(x, z) for x in fx] for z in fz])
        ax.contour(fx, fz, grid, levels=[0.0], colors="k", linewidths=0.8)
    if caustic_map.crossings:
        pts = np.array([(c[0], c[1]) for c in caustic_map.crossings])
        ax.plot(pts[:, 0], pts[:, 1], "b.", markersize=3)
    for locus in caustic_map.ghost_lines:
        if locus.axis == 0:
            ax.axvline(locus.offset, color="m", linestyle="--", linewidth=0.8)
        else:
            ax.axhline(locus.offset, color="m", linestyle="--", linewidth=0.8)
    for x, z in caustic_map.cusp_points:
        ax.plot([x], [z], "r*", markersize=9)
    ax.set_xlabel("x")
    ax.set_ylabel("z")
    ax.set_title(caustic_map.closed_form_name or "caustics")
    return _finish(fig, path)


def words_svg(path: str, routes: Sequence, labels: Sequence[str]) -> str:
    """Routed basis words (polylines) in the Lambda plane."""
    fig, ax = plt.subplots(figsize=(6, 6))
    for route, label in zip(routes, labels):
        route = np.asarray(route)
        ax.plot(route.real, route.imag, linewidth=1.0, label=label)
    ax.plot([0.0], [0.0], "rx")
    ax.set_aspect("equal")
    ax.legend(fontsize=7)
    ax.set_xlabel("Re Lambda")
    ax.set_ylabel("Im Lambda")
    return _finish(fig, path)
