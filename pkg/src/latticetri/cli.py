"""Command-line interface.

Subcommands: enumerate, ground-state, flip-dist, sample, mix-exact,
coupling-check, spatial, tails, bottleneck, hitting, render, replay.
Every run that produces output writes a RunManifest alongside it, and
`replay` re-executes a manifest with outputs redirected to a new directory.

Exit codes: 0 success, 1 usage error, 2 validation/parse error,
3 cap exceeded.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .geometry import Edge, GeometryError, GridSpec, LatticePoint, Midpoint, MidpointKind, midpoints
from .triangulation import ConstraintSet, ValidationError, ground_state
from .flipgraph import (
    EnumerationCapExceeded,
    bfs_distance,
    build_flip_graph,
    enumerate_triangulations,
    flip_distance,
)
from .gibbs import (
    GibbsParams,
    MidpointPolicy,
    conditional,
    conductance_ratio,
    exact_distribution,
    herringbone_set,
    mixing_time_exact,
    tail_laws,
    transition_matrix,
    tv_marginal,
)
from .structure import INFINITE_DISTANCE, classify, distance_d
from .sampler import (
    RNG_ALGORITHM,
    hitting_time_experiment,
    one_d_contraction_criterion,
    path_coupling_check,
    path_coupling_check_1d,
    run,
)
from .io import (
    ParseError,
    RunManifest,
    load_constraints,
    load_manifest,
    load_snapshot,
    save_manifest,
    save_snapshot,
    save_states,
    write_csv,
)
from .render import Overlays, render_svg

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_CAP = 3


class CapExceeded(RuntimeError):
    pass


def _parse_grid(text: str) -> GridSpec:
    try:
        m, n = text.lower().split("x")
        return GridSpec(int(m), int(n))
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(f"grid must look like MxN: {exc}")


def _parse_lambda(text: str):
    """Rational inputs ('2', '1/8', '3/10') get exact arithmetic; anything
    with a decimal point is a float."""
    if "/" in text:
        return Fraction(text)
    if "." in text or "e" in text or "E" in text:
        return float(text)
    return Fraction(int(text))


def _parse_edge(text: str) -> Edge:
    try:
        a, b = text.split(":")
        pv, ph = (int(v) for v in a.split(","))
        qv, qh = (int(v) for v in b.split(","))
        return Edge(LatticePoint(pv, ph), LatticePoint(qv, qh))
    except (ValueError, GeometryError) as exc:
        raise argparse.ArgumentTypeError(f"edge must look like v,h:v,h ({exc})")


def _parse_midpoint(text: str) -> Midpoint:
    try:
        dv, dh = (int(v) for v in text.split(","))
        return Midpoint(dv, dh)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"midpoint must be doubled coordinates dv,dh ({exc})")


def _constraints(args) -> ConstraintSet:
    if getattr(args, "constraints", None):
        c = load_constraints(args.constraints)
        if (c.grid.m, c.grid.n) != (args.grid.m, args.grid.n):
            raise ValidationError(
                f"constraints file is for {c.grid.m}x{c.grid.n}, not "
                f"{args.grid.m}x{args.grid.n}")
        return c
    return ConstraintSet(args.grid)


def _policy(args) -> MidpointPolicy:
    return MidpointPolicy(args.policy)


# ---------------------------------------------------------------------------
# subcommand handlers: each returns a dict of named output paths
# ---------------------------------------------------------------------------


def cmd_enumerate(args) -> dict:
    c = _constraints(args)
    try:
        if args.count_only:
            count = enumerate_triangulations(c, cap=args.cap, count_only=True)
            print(count)
            return {}
        space = enumerate_triangulations(c, cap=args.cap)
        print(f"{len(space)} triangulations of {args.grid.m}x{args.grid.n} "
              f"({len(c)} constraints)")
        outputs = {}
        if args.out:
            save_states(args.out, space)
            outputs["states"] = str(args.out)
        return outputs
    except EnumerationCapExceeded as exc:
        raise CapExceeded(str(exc)) from None


def cmd_ground_state(args) -> dict:
    c = _constraints(args)
    gs = ground_state(c)
    t = gs.triangulation
    print(f"ground state of {args.grid.m}x{args.grid.n}: total length "
          f"{t.total_length}, {len(gs.tied_midpoints)} tied unit-diagonal cells")
    outputs = {}
    if args.out:
        save_snapshot(args.out, t)
        outputs["snapshot"] = str(args.out)
    if args.svg:
        Path(args.svg).write_text(render_svg(t, Overlays(slope_coloring=True)))
        outputs["svg"] = str(args.svg)
    return outputs


def cmd_flip_dist(args) -> dict:
    a = load_snapshot(args.first)
    b = load_snapshot(args.second)
    d = flip_distance(a, b)
    print(f"flip distance = {d}")
    if args.verify_bfs:
        space = enumerate_triangulations(a.constraints, cap=args.cap)
        g = build_flip_graph(space)
        d2 = bfs_distance(g, space.find(a), space.find(b))
        print(f"BFS distance  = {d2} ({'agrees' if d == d2 else 'MISMATCH'})")
        if d != d2:
            raise ValidationError("flip-distance formula disagrees with BFS")
    return {}


def cmd_sample(args) -> dict:
    c = _constraints(args)
    if args.start:
        t0 = load_snapshot(args.start)
    else:
        t0 = ground_state(c).triangulation
    params = GibbsParams(args.lam)
    outputs = {}
    if args.snapshot_every:
        # checkpointed run: segments continue from each other, each segment
        # on its own derived stream so the whole run is seed-deterministic
        from .sampler import derive_stream_seed
        import numpy as _np
        cur = t0
        n_seg = args.steps // args.snapshot_every
        parts = []
        for k in range(n_seg):
            seg = run(cur, params, args.snapshot_every,
                      derive_stream_seed(args.seed, k),
                      record_every=args.record_every, policy=_policy(args))
            cur = seg.final
            parts.append(seg)
            ck_path = Path(args.snapshot_dir or ".") / f"checkpoint_{(k + 1) * args.snapshot_every}.json"
            save_snapshot(ck_path, cur)
            outputs[f"checkpoint_{k + 1}"] = str(ck_path)
        res = parts[-1]
        res = type(res)(cur, args.steps, sum(p.flips for p in parts), args.seed,
                        res.backend, res.policy, res.lam, args.record_every,
                        _np.concatenate([p.rec_steps + i * args.snapshot_every
                                         for i, p in enumerate(parts)]) if args.record_every else res.rec_steps,
                        _np.concatenate([p.rec_length for p in parts]) if args.record_every else res.rec_length,
                        _np.concatenate([p.rec_acceptance for p in parts]) if args.record_every else res.rec_acceptance,
                        _np.concatenate([p.rec_b_count for p in parts]) if args.record_every else res.rec_b_count,
                        sum(p.elapsed for p in parts))
    else:
        res = run(t0, params, args.steps, args.seed,
                  record_every=args.record_every, policy=_policy(args))
    print(f"{res.steps} steps, {res.flips} flips accepted, final length "
          f"{res.final.total_length}, mean edge length "
          f"{res.mean_edge_length:.4f}, {res.throughput / 1e6:.1f}M steps/s")
    if args.out:
        write_csv(args.out, ["step", "total_length", "acceptance_rate",
                             "b_triangle_count"],
                  zip(res.rec_steps.tolist(), res.rec_length.tolist(),
                      [f"{a:.6f}" for a in res.rec_acceptance],
                      res.rec_b_count.tolist()))
        outputs["timeseries"] = str(args.out)
    if args.snapshot:
        save_snapshot(args.snapshot, res.final)
        outputs["snapshot"] = str(args.snapshot)
    if args.svg:
        Path(args.svg).write_text(render_svg(res.final,
                                             Overlays(slope_coloring=True)))
        outputs["svg"] = str(args.svg)
    return outputs


def cmd_mix_exact(args) -> dict:
    c = _constraints(args)
    try:
        space = enumerate_triangulations(c, cap=args.cap)
    except EnumerationCapExceeded as exc:
        raise CapExceeded(str(exc)) from None
    params = GibbsParams(args.lam)
    pm = transition_matrix(space, params, _policy(args))
    d = exact_distribution(space, params)
    rep = mixing_time_exact(pm, d)
    print(f"T_mix = {rep.t_mix} (threshold {rep.threshold}, policy "
          f"{rep.policy.value}, |Lambda| = {rep.n_active}, "
          f"{len(space)} states)")
    if rep.relaxation_time is not None:
        print(f"relaxation time ~= {rep.relaxation_time:.3f}")
    outputs = {}
    if args.out:
        write_csv(args.out, ["t", "worst_start_tv"],
                  [(t, f"{tv:.12f}") for t, tv in rep.tv_curve])
        outputs["tv_curve"] = str(args.out)
    return outputs


def cmd_coupling_check(args) -> dict:
    c = _constraints(args)
    try:
        space = enumerate_triangulations(c, cap=args.cap)
    except EnumerationCapExceeded as exc:
        raise CapExceeded(str(exc)) from None
    params = GibbsParams(args.lam)
    if args.one_d:
        rep = path_coupling_check_1d(space, params, args.alpha)
        value, ok = one_d_contraction_criterion(float(args.lam), float(args.alpha))
        print(f"1d criterion max(2al^2/(1+l^2), 2/(a(1+l^2))) = {value:.6f} "
              f"({'<1: contraction predicted' if ok else '>=1: no contraction predicted'})")
    else:
        rep = path_coupling_check(space, params, args.alpha)
    print(rep)
    return {}


def cmd_spatial(args) -> dict:
    c = _constraints(args)
    try:
        space = enumerate_triangulations(c, cap=args.cap)
    except EnumerationCapExceeded as exc:
        raise CapExceeded(str(exc)) from None
    params = GibbsParams(args.lam)
    d = exact_distribution(space, params)
    sigma_x = args.edge
    cond = conditional(d, sigma_x.midpoint, sigma_x)
    rows = []
    for x in midpoints(args.grid):
        if x.kind is MidpointKind.BOUNDARY or c.is_constrained(x):
            continue
        if x == sigma_x.midpoint:
            continue
        dist = distance_d([x], sigma_x, c)
        tv = tv_marginal(d, cond, [x])
        rows.append((x.dv, x.dh, "inf" if dist == INFINITE_DISTANCE else dist,
                     f"{tv:.12f}"))
    rows.sort(key=lambda r: (r[2] if isinstance(r[2], int) else 10 ** 9))
    for dv, dh, dist, tv in rows:
        print(f"midpoint ({dv}/2,{dh}/2)  d = {dist}  tv = {float(tv):.6g}")
    outputs = {}
    if args.out:
        write_csv(args.out, ["midpoint_dv", "midpoint_dh", "distance", "tv"], rows)
        outputs["spatial"] = str(args.out)
    return outputs


def cmd_tails(args) -> dict:
    from .geometry import classify_midpoint
    c = _constraints(args)
    classify_midpoint(args.grid, args.x.dv, args.x.dh)  # validates
    try:
        space = enumerate_triangulations(c, cap=args.cap)
    except EnumerationCapExceeded as exc:
        raise CapExceeded(str(exc)) from None
    d = exact_distribution(space, GibbsParams(args.lam))
    laws = tail_laws(d, args.x)
    rows = [(k, f"{lp:.12g}", f"{pp:.12g}")
            for k, (lp, pp) in sorted(laws.as_pairs().items())]
    for k, lp, pp in rows:
        print(f"k={k}  mu(len=ground+k)={float(lp):.6g}  mu(phi=k)={float(pp):.6g}")
    outputs = {}
    if args.out:
        write_csv(args.out, ["k", "prob_length_excess", "prob_phi"], rows)
        outputs["tails"] = str(args.out)
    return outputs


def cmd_bottleneck(args) -> dict:
    c = _constraints(args)
    if len(c):
        raise ValidationError("herringbone bottleneck is defined without constraints")
    try:
        space = enumerate_triangulations(c, cap=args.cap)
    except EnumerationCapExceeded as exc:
        raise CapExceeded(str(exc)) from None
    hb = herringbone_set(args.grid, epsilon=args.epsilon)
    rep = conductance_ratio(space, GibbsParams(args.lam), hb,
                            description=f"herringbone eps={args.epsilon}")
    ratio = float(rep.ratio)
    print(f"A: {rep.n_states_in_a} states, mu(A) = {rep.mu_a:.6g} "
          f"({'<=1/2 ok' if rep.mu_a_at_most_half else 'exceeds 1/2'})")
    print(f"Z(dA)/Z(A) = {ratio:.6g}" + (" [exact]" if rep.exact else ""))
    outputs = {}
    if args.out:
        write_csv(args.out, ["m", "n", "epsilon", "lambda", "mu_a", "ratio"],
                  [(args.grid.m, args.grid.n, args.epsilon, str(args.lam),
                    f"{rep.mu_a:.12g}", f"{ratio:.12g}")])
        outputs["bottleneck"] = str(args.out)
    return outputs


def cmd_hitting(args) -> dict:
    if getattr(args, "constraints", None):
        raise ValidationError("the hitting-time experiment runs without constraints")
    ht = hitting_time_experiment(args.grid, GibbsParams(args.lam), args.seed,
                                 args.cap, policy=_policy(args))
    if ht is None:
        print(f"cap {args.cap} exceeded without hitting the target set")
        raise CapExceeded("hitting time cap exceeded")
    print(f"hitting time = {ht}")
    return {}


def cmd_render(args) -> dict:
    t = load_snapshot(args.snapshot)
    ov = Overlays(slope_coloring=args.overlay in ("slope", "all"),
                  bold_constraints=True)
    if args.overlay in ("b", "all"):
        ov.b_shading = classify(t)
    Path(args.svg).write_text(render_svg(t, ov))
    print(f"wrote {args.svg}")
    return {"svg": str(args.svg)}


def cmd_replay(args) -> dict:
    manifest = load_manifest(args.manifest)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    argv = list(manifest.argv)
    if "--manifest" in argv:  # do not overwrite the manifest being replayed
        k = argv.index("--manifest")
        del argv[k:k + 2]
    # redirect every recorded output path into out_dir
    for name, old in manifest.outputs.items():
        new = str(out_dir / Path(old).name)
        argv = [new if a == old else a for a in argv]
    code = main(argv)
    if code != EXIT_OK:
        raise RuntimeError(f"replayed command exited {code}")
    return {}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(p, grid=True, lam=False, cap=True):
    if grid:
        p.add_argument("--grid", type=_parse_grid, required=True,
                       help="grid size MxN (M vertical, N horizontal)")
        p.add_argument("--constraints", help="constraints JSON file")
    if lam:
        p.add_argument("--lambda", dest="lam", type=_parse_lambda, required=True,
                       help="weight parameter; fractions like 1/8 enable exact mode")
    if cap:
        p.add_argument("--cap", type=int, default=5_000_000,
                       help="state enumeration cap")
    p.add_argument("--manifest", help="where to write the run manifest")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="latticetri",
        description="lambda-weighted lattice triangulations: sampling, "
                    "enumeration and exact analysis")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="enumerate all triangulations")
    _add_common(p)
    p.add_argument("--count-only", action="store_true")
    p.add_argument("--out", help="write canonical state list (JSON)")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("ground-state", help="greedy minimum-length triangulation")
    _add_common(p, cap=False)
    p.add_argument("--out", help="snapshot JSON path")
    p.add_argument("--svg", help="SVG render path")
    p.set_defaults(func=cmd_ground_state)

    p = sub.add_parser("flip-dist", help="flip distance between two snapshots")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--verify-bfs", action="store_true",
                   help="cross-check against BFS on the explicit flip graph")
    p.add_argument("--cap", type=int, default=5_000_000)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_flip_dist)

    p = sub.add_parser("sample", help="run the heat-bath dynamics")
    _add_common(p, lam=True, cap=False)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--policy", choices=["full", "interior"], default="full")
    p.add_argument("--record-every", type=int, default=0)
    p.add_argument("--start", help="starting snapshot (default: ground state)")
    p.add_argument("--out", help="trajectory CSV path")
    p.add_argument("--snapshot", help="final snapshot JSON path")
    p.add_argument("--snapshot-every", type=int, default=0,
                   help="write checkpoint snapshots every N steps")
    p.add_argument("--snapshot-dir", help="directory for checkpoint snapshots")
    p.add_argument("--svg", help="final SVG render path")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("mix-exact", help="exact mixing time on an enumerable instance")
    _add_common(p, lam=True)
    p.add_argument("--policy", choices=["full", "interior"], default="full")
    p.add_argument("--out", help="TV curve CSV path")
    p.set_defaults(func=cmd_mix_exact)

    p = sub.add_parser("coupling-check", help="exact path-coupling contraction check")
    _add_common(p, lam=True)
    p.add_argument("--alpha", type=_parse_lambda, required=True)
    p.add_argument("--one-d", action="store_true",
                   help="use the 1D horizontal-length metric")
    p.set_defaults(func=cmd_coupling_check)

    p = sub.add_parser("spatial", help="conditional marginal TV vs triangle distance")
    _add_common(p, lam=True)
    p.add_argument("--edge", type=_parse_edge, required=True,
                   help="conditioned edge, v,h:v,h")
    p.add_argument("--out", help="CSV path")
    p.set_defaults(func=cmd_spatial)

    p = sub.add_parser("tails", help="exact length/phi tail laws at a midpoint")
    _add_common(p, lam=True)
    p.add_argument("--x", type=_parse_midpoint, required=True,
                   help="midpoint in doubled coordinates dv,dh")
    p.add_argument("--out", help="CSV path")
    p.set_defaults(func=cmd_tails)

    p = sub.add_parser("bottleneck", help="herringbone conductance ratio")
    _add_common(p, lam=True)
    p.add_argument("--epsilon", type=float, default=None,
                   help="restrict the herringbone rule to the central window")
    p.add_argument("--out", help="CSV path")
    p.set_defaults(func=cmd_bottleneck)

    p = sub.add_parser("hitting", help="orientation-reversal hitting time")
    _add_common(p, lam=True, cap=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=10_000_000)
    p.add_argument("--policy", choices=["full", "interior"], default="full")
    p.set_defaults(func=cmd_hitting)

    p = sub.add_parser("render", help="render a snapshot to SVG")
    p.add_argument("snapshot")
    p.add_argument("--svg", required=True)
    p.add_argument("--overlay", choices=["none", "slope", "b", "all"],
                   default="slope")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("replay", help="re-run a manifest into a new directory")
    p.add_argument("manifest")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_replay)

    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 for --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        outputs = args.func(args)
    except (ValidationError, ParseError, GeometryError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CapExceeded as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    if getattr(args, "manifest", None) and args.command != "replay":
        save_manifest(args.manifest,
                      RunManifest(command=args.command, argv=argv,
                                  outputs=outputs, code_version=__version__,
                                  rng=RNG_ALGORITHM))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
