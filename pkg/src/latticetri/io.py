"""File formats: constraints, snapshots, run manifests, CSV time series.

All JSON documents carry a `format` tag and an explicit coordinate
`convention` field ("(vertical,horizontal)"): a point [v, h] has vertical
coordinate v and horizontal coordinate h.  Loaders reject unknown format
versions and re-validate every structural invariant.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

from .geometry import Edge, GridSpec, LatticePoint
from .triangulation import ConstraintSet, Triangulation

CONSTRAINTS_FORMAT = "latticetri.constraints/1"
SNAPSHOT_FORMAT = "latticetri.snapshot/1"
MANIFEST_FORMAT = "latticetri.manifest/1"
STATES_FORMAT = "latticetri.states/1"
CONVENTION = "(vertical,horizontal)"


class ParseError(ValueError):
    """Malformed file: names the offending field."""


def _edge_to_json(e: Edge):
    return [[e.p.v, e.p.h], [e.q.v, e.q.h]]


def _edge_from_json(obj, where: str) -> Edge:
    try:
        (pv, ph), (qv, qh) = obj
        return Edge(LatticePoint(int(pv), int(ph)), LatticePoint(int(qv), int(qh)))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: bad edge {obj!r}: {exc}") from None


def _check_format(doc: dict, expected: str, path) -> None:
    got = doc.get("format")
    if got != expected:
        raise ParseError(f"{path}: format {got!r}, expected {expected!r}")


def _grid_from_json(doc: dict, path) -> GridSpec:
    try:
        m, n = doc["grid"]
        return GridSpec(int(m), int(n))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: bad grid field: {exc}") from None


def save_constraints(path, c: ConstraintSet) -> None:
    doc = {
        "format": CONSTRAINTS_FORMAT,
        "convention": CONVENTION,
        "grid": [c.grid.m, c.grid.n],
        "edges": [_edge_to_json(e) for e in c.edges()],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_constraints(path) -> ConstraintSet:
    doc = json.loads(Path(path).read_text())
    _check_format(doc, CONSTRAINTS_FORMAT, path)
    grid = _grid_from_json(doc, path)
    edges = [_edge_from_json(e, f"{path}: edges[{i}]")
             for i, e in enumerate(doc.get("edges", []))]
    return ConstraintSet(grid, edges)  # validates (crossings, primitivity)


def save_snapshot(path, t: Triangulation) -> None:
    doc = {
        "format": SNAPSHOT_FORMAT,
        "convention": CONVENTION,
        "grid": [t.grid.m, t.grid.n],
        "constraints": [_edge_to_json(e) for e in t.constraints.edges()],
        "edges": [_edge_to_json(e) for e in t.edges()],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_snapshot(path) -> Triangulation:
    doc = json.loads(Path(path).read_text())
    _check_format(doc, SNAPSHOT_FORMAT, path)
    grid = _grid_from_json(doc, path)
    cons = ConstraintSet(grid, [_edge_from_json(e, f"{path}: constraints[{i}]")
                                for i, e in enumerate(doc.get("constraints", []))])
    edges = [_edge_from_json(e, f"{path}: edges[{i}]")
             for i, e in enumerate(doc.get("edges", []))]
    return Triangulation.from_edges(grid, edges, constraints=cons,
                                    check_crossings=True)


def save_states(path, space) -> None:
    """Canonically serialized state list of an enumerated space."""
    doc = {
        "format": STATES_FORMAT,
        "convention": CONVENTION,
        "grid": [space.grid.m, space.grid.n],
        "constraints": [_edge_to_json(e) for e in space.constraints.edges()],
        "states": [[_edge_to_json(e) for e in space.serialize_state(i)]
                   for i in range(len(space))],
    }
    Path(path).write_text(json.dumps(doc))


TRIANGLES_FORMAT = "latticetri.triangles/1"


def save_triangles(path, triangles, label: str = "") -> None:
    """Export a region (B-components, influence regions) as a JSON list of
    triangles, each a list of three [v, h] points."""
    doc = {
        "format": TRIANGLES_FORMAT,
        "convention": CONVENTION,
        "label": label,
        "triangles": [[[p.v, p.h] for p in tri] for tri in sorted(triangles)],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_triangles(path):
    from .triangulation import make_triangle

    doc = json.loads(Path(path).read_text())
    _check_format(doc, TRIANGLES_FORMAT, path)
    out = []
    for i, tri in enumerate(doc.get("triangles", [])):
        try:
            a, b, c = (LatticePoint(int(v), int(h)) for v, h in tri)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{path}: triangles[{i}]: {exc}") from None
        out.append(make_triangle(a, b, c))
    return out


def write_csv(path, header: list[str], rows: Iterable[Iterable]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(list(row))


# ---------------------------------------------------------------------------
# run manifests
# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    """Everything needed to reproduce a CLI run bit-exactly."""

    command: str
    argv: list[str]
    outputs: dict[str, str]
    code_version: str
    rng: str
    created_utc: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def to_json(self) -> dict:
        return {"format": MANIFEST_FORMAT, **asdict(self)}


def save_manifest(path, manifest: RunManifest) -> None:
    Path(path).write_text(json.dumps(manifest.to_json(), indent=1))


def load_manifest(path) -> RunManifest:
    doc = json.loads(Path(path).read_text())
    _check_format(doc, MANIFEST_FORMAT, path)
    try:
        return RunManifest(command=doc["command"], argv=list(doc["argv"]),
                           outputs=dict(doc["outputs"]),
                           code_version=doc["code_version"], rng=doc["rng"],
                           created_utc=doc["created_utc"])
    except KeyError as exc:
        raise ParseError(f"{path}: missing manifest field {exc}") from None


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
