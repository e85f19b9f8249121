"""Persistence round-trips, SVG rendering, CLI dispatch and manifests."""

import json

import pytest

from latticetri.geometry import Edge, GridSpec, LatticePoint
from latticetri.triangulation import ConstraintSet, ground_state
from latticetri.io import (
    ParseError,
    file_sha256,
    load_constraints,
    load_manifest,
    load_snapshot,
    save_constraints,
    save_snapshot,
)
from latticetri.render import Overlays, render_svg
from latticetri.cli import EXIT_CAP, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, main

E = Edge.of
P = LatticePoint


# ------------------------------------------------------------ formats

def test_snapshot_roundtrip(tmp_path):
    t = ground_state(ConstraintSet(GridSpec(3, 3))).triangulation
    p = tmp_path / "gs.json"
    save_snapshot(p, t)
    t2 = load_snapshot(p)
    assert t2.assignment == t.assignment
    save_snapshot(tmp_path / "gs2.json", t2)
    assert (tmp_path / "gs.json").read_text() == (tmp_path / "gs2.json").read_text()


def test_snapshot_missing_edge_rejected(tmp_path):
    t = ground_state(ConstraintSet(GridSpec(2, 2))).triangulation
    p = tmp_path / "bad.json"
    save_snapshot(p, t)
    doc = json.loads(p.read_text())
    doc["edges"] = doc["edges"][:-1]
    p.write_text(json.dumps(doc))
    with pytest.raises(Exception, match="not maximal"):
        load_snapshot(p)


def test_snapshot_unknown_format_rejected(tmp_path):
    t = ground_state(ConstraintSet(GridSpec(1, 1))).triangulation
    p = tmp_path / "v9.json"
    save_snapshot(p, t)
    doc = json.loads(p.read_text())
    doc["format"] = "latticetri.snapshot/9"
    p.write_text(json.dumps(doc))
    with pytest.raises(ParseError, match="format"):
        load_snapshot(p)


def test_constraints_roundtrip(tmp_path):
    c = ConstraintSet(GridSpec(2, 3), [E(0, 0, 2, 3), E(1, 0, 2, 1)])
    p = tmp_path / "c.json"
    save_constraints(p, c)
    c2 = load_constraints(p)
    assert c2 == c


def test_constraints_crossing_rejected(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({
        "format": "latticetri.constraints/1",
        "convention": "(vertical,horizontal)",
        "grid": [1, 1],
        "edges": [[[0, 0], [1, 1]], [[0, 1], [1, 0]]],
    }))
    with pytest.raises(Exception, match="cross"):
        load_constraints(p)


# ------------------------------------------------------------ svg

def test_svg_1x1_has_five_lines():
    t = ground_state(ConstraintSet(GridSpec(1, 1))).triangulation
    svg = render_svg(t)
    assert svg.count("<line ") == 5


def test_svg_5x7_has_117_lines():
    from latticetri.triangulation import complete
    t = complete(ConstraintSet(GridSpec(5, 7)))
    svg = render_svg(t)
    assert svg.count("<line ") == 117


def test_svg_overlays():
    from latticetri.structure import classify, influence_region_branching
    from test_triangulation import unique_triangulation_with
    t = unique_triangulation_with(GridSpec(1, 2), E(0, 0, 1, 2))
    dec = classify(t)
    ups = influence_region_branching(E(0, 0, 1, 2), ConstraintSet(GridSpec(1, 2)))
    svg = render_svg(t, Overlays(b_shading=dec, influence=ups, slope_coloring=True))
    assert svg.count("<polygon ") == len(dec.b_triangles) + len(ups.triangles)
    assert "#c0392b" in svg  # positively oriented long edge gets slope color


# ------------------------------------------------------------ cli

def test_cli_enumerate_count(capsys):
    assert main(["enumerate", "--grid", "1x3", "--count-only"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "20"


def test_cli_enumerate_cap(capsys):
    assert main(["enumerate", "--grid", "2x3", "--count-only", "--cap", "10"]) == EXIT_CAP


def test_cli_usage_errors():
    assert main(["enumerate"]) == EXIT_USAGE              # missing --grid
    assert main(["no-such-command"]) == EXIT_USAGE
    assert main(["enumerate", "--grid", "banana"]) == EXIT_USAGE


def test_cli_mix_exact_1x1(capsys):
    assert main(["mix-exact", "--grid", "1x1", "--lambda", "0.7"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "T_mix = 4" in out
    assert "full" in out


def test_cli_ground_state_and_render(tmp_path, capsys):
    snap = tmp_path / "gs.json"
    svg = tmp_path / "gs.svg"
    assert main(["ground-state", "--grid", "3x3", "--out", str(snap),
                 "--svg", str(svg)]) == EXIT_OK
    assert snap.exists() and svg.exists()
    svg2 = tmp_path / "re.svg"
    assert main(["render", str(snap), "--svg", str(svg2), "--overlay", "b"]) == EXIT_OK
    assert svg2.read_text().count("<line ") == 3 * 9 + 6


def test_cli_flip_dist(tmp_path, capsys):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert main(["ground-state", "--grid", "1x2", "--out", str(a)]) == EXIT_OK
    from test_triangulation import unique_triangulation_with
    t = unique_triangulation_with(GridSpec(1, 2), E(0, 0, 1, 2))
    save_snapshot(b, t)
    # gs differs from the fan at the center (1 flip) and both tied cells
    # carry the opposite diagonals (1 flip each)
    assert main(["flip-dist", str(a), str(b), "--verify-bfs"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "flip distance = 3" in out
    assert "agrees" in out


def test_cli_sample_with_outputs(tmp_path, capsys):
    csv_p = tmp_path / "traj.csv"
    snap_p = tmp_path / "final.json"
    svg_p = tmp_path / "final.svg"
    man_p = tmp_path / "run.manifest.json"
    code = main(["sample", "--grid", "3x3", "--lambda", "0.9", "--steps", "20000",
                 "--seed", "5", "--record-every", "1000", "--out", str(csv_p),
                 "--snapshot", str(snap_p), "--svg", str(svg_p),
                 "--manifest", str(man_p)])
    assert code == EXIT_OK
    assert csv_p.read_text().startswith("step,total_length,acceptance_rate,b_triangle_count")
    assert len(csv_p.read_text().strip().splitlines()) == 21
    load_snapshot(snap_p)  # validates
    man = load_manifest(man_p)
    assert man.command == "sample"
    assert set(man.outputs) == {"timeseries", "snapshot", "svg"}


def test_cli_manifest_replay_reproduces(tmp_path):
    csv_p = tmp_path / "t.csv"
    snap_p = tmp_path / "f.json"
    man_p = tmp_path / "m.json"
    assert main(["sample", "--grid", "2x2", "--lambda", "1/2", "--steps", "50000",
                 "--seed", "42", "--record-every", "500", "--out", str(csv_p),
                 "--snapshot", str(snap_p), "--manifest", str(man_p)]) == EXIT_OK
    replay_dir = tmp_path / "replay"
    assert main(["replay", str(man_p), "--out-dir", str(replay_dir)]) == EXIT_OK
    assert file_sha256(replay_dir / "t.csv") == file_sha256(csv_p)
    assert file_sha256(replay_dir / "f.json") == file_sha256(snap_p)


def test_cli_tails_and_spatial_and_bottleneck(tmp_path, capsys):
    assert main(["tails", "--grid", "2x2", "--lambda", "0.4",
                 "--x", "1,1", "--out", str(tmp_path / "t.csv")]) == EXIT_OK
    # midpoints in doubled coordinates must not be lattice points
    assert main(["tails", "--grid", "2x2", "--lambda", "0.4",
                 "--x", "2,2"]) == EXIT_VALIDATION
    assert main(["spatial", "--grid", "2x2", "--lambda", "0.1",
                 "--edge", "0,0:1,2", "--out", str(tmp_path / "s.csv")]) == EXIT_OK
    assert main(["bottleneck", "--grid", "2x2", "--lambda", "2",
                 "--out", str(tmp_path / "b.csv")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "Z(dA)/Z(A)" in out and "[exact]" in out


def test_cli_coupling_check(capsys):
    assert main(["coupling-check", "--grid", "2x2", "--lambda", "1/8",
                 "--alpha", "8"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "holds" in out


def test_cli_validation_error_exit(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({
        "format": "latticetri.constraints/1",
        "convention": "(vertical,horizontal)",
        "grid": [2, 2],
        "edges": [[[0, 0], [2, 2]]],
    }))
    assert main(["ground-state", "--grid", "2x2",
                 "--constraints", str(bad)]) == EXIT_VALIDATION


def test_cli_hitting(capsys):
    assert main(["hitting", "--grid", "1x4", "--lambda", "1", "--seed", "3",
                 "--cap", "500000"]) == EXIT_OK
    assert "hitting time" in capsys.readouterr().out
    assert main(["hitting", "--grid", "2x6", "--lambda", "2", "--seed", "1",
                 "--cap", "100"]) == EXIT_CAP


def test_cli_sample_50x50_smoke(tmp_path, capsys):
    # the figure-scale command path: completes and emits SVG + manifest
    svg_p = tmp_path / "big.svg"
    man_p = tmp_path / "big.manifest.json"
    code = main(["sample", "--grid", "50x50", "--lambda", "1.1", "--steps",
                 "1000000", "--seed", "42", "--svg", str(svg_p),
                 "--manifest", str(man_p)])
    assert code == EXIT_OK
    assert svg_p.read_text().count("<line ") == 3 * 2500 + 100
    man = load_manifest(man_p)
    assert man.outputs["svg"] == str(svg_p)
    assert "xoshiro256**" in man.rng


def test_cli_sample_checkpoints(tmp_path):
    code = main(["sample", "--grid", "2x2", "--lambda", "1", "--steps", "3000",
                 "--seed", "1", "--snapshot-every", "1000",
                 "--snapshot-dir", str(tmp_path)])
    assert code == EXIT_OK
    for k in (1000, 2000, 3000):
        load_snapshot(tmp_path / f"checkpoint_{k}.json")  # valid at each checkpoint


def test_triangles_json_roundtrip(tmp_path):
    from latticetri.io import load_triangles, save_triangles
    from latticetri.structure import classify, influence_region_branching
    from test_triangulation import unique_triangulation_with
    t = unique_triangulation_with(GridSpec(1, 2), E(0, 0, 1, 2))
    dec = classify(t)
    p = tmp_path / "b.json"
    save_triangles(p, dec.b_triangles, label="b-components")
    assert set(load_triangles(p)) == set(dec.b_triangles)
    ups = influence_region_branching(E(0, 0, 1, 2), ConstraintSet(GridSpec(1, 2)))
    p2 = tmp_path / "ups.json"
    save_triangles(p2, ups.triangles, label="influence")
    assert set(load_triangles(p2)) == set(ups.triangles)
