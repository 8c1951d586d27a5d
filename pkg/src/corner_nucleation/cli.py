"""Command-line entry point: ``corner-nucleation <subcommand> ...``."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import scaling
from .branching import build_layout
from .corner_geometry import (
    DEFAULT_CORNER,
    DegenerateCornerError,
    find_habit_normal,
    frame_for_domain,
    mu,
    validate_corner,
)
from .covering import CoveringConfig, certify, read_vox, voxelize_layout, write_vox
from .displacement import energy_density, evaluate
from .strain_algebra import algebra_report, compatibility_check, recovered_normals_match, variant_strain

DEGENERATE_MESSAGE = ("degenerate corner: no twin plane cuts off this corner, so the construction "
                      "does not apply (the coordinate octant is the standard example)")

NAMED_CORNERS = {
    "default": DEFAULT_CORNER,
    "coordinate": ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)),
}


def _vec(text: str):
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}")
    return tuple(vals)


def _corner_arg(text: str):
    if text in NAMED_CORNERS:
        return NAMED_CORNERS[text]
    try:
        return scaling._parse_corner(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _add_corner(p):
    p.add_argument("--corner", type=_corner_arg, default=None,
                   help="'default', 'coordinate' or nine comma-separated numbers a,b,c")
    p.add_argument("--a", type=_vec, default=None)
    p.add_argument("--b", type=_vec, default=None)
    p.add_argument("--c", type=_vec, default=None)


def _corner(args):
    base = list(args.corner if args.corner is not None else DEFAULT_CORNER)
    for i, key in enumerate("abc"):
        if getattr(args, key) is not None:
            base[i] = getattr(args, key)
    return tuple(base)


def _emit(doc, path=None):
    text = scaling.dumps(doc)
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_verify_algebra(args) -> int:
    residuals = algebra_report()
    pairs = {}
    ok = all(v < 1e-12 for v in residuals.values())
    for i, j in ((1, 2), (1, 3), (2, 3)):
        res = compatibility_check(variant_strain(i), variant_strain(j))
        match = res.compatible and recovered_normals_match(res, i, j)
        pairs[f"{i}{j}"] = {"compatible": res.compatible, "normals_match": match}
        ok &= res.compatible and match
    for i in (1, 2, 3):
        res = compatibility_check(variant_strain(0), variant_strain(i))
        pairs[f"0{i}"] = {"compatible": res.compatible, "middle_eigenvalue": float(res.eigenvalues[1])}
        ok &= not res.compatible
    _emit({"residuals": residuals, "pairs": pairs, "passed": bool(ok)}, args.output)
    return 0 if ok else 1


def cmd_inspect_corner(args) -> int:
    domain = validate_corner(*_corner(args))
    n = find_habit_normal(domain)
    doc = {"a": domain.a.tolist(), "b": domain.b.tolist(), "c": domain.c.tolist(), "mu": mu(domain)}
    if n is None:
        doc["habit_normal"] = "none: degenerate corner"
    else:
        f = frame_for_domain(domain)
        doc.update({"habit_normal": f.n.tolist(), "variants": list(f.variants),
                    "frame": {k: getattr(f, k).tolist() for k in ("b1", "b2", "b3")},
                    "det_B": f.det})
    _emit(doc, args.output)
    return 0


def _layout(args):
    domain = validate_corner(*_corner(args))
    frame_for_domain(domain)
    if args.volume <= 1:
        raise SystemExit("build needs V > 1; smaller volumes use the single-ball construction")
    return build_layout(domain, args.volume)


def cmd_build(args) -> int:
    layout = _layout(args)
    doc = layout.summary()
    if args.voxels:
        vs = voxelize_layout(layout, args.resolution)
        write_vox(args.voxels, vs)
        doc["voxels"] = {"path": args.voxels, "dims": list(vs.dims), "spacing": vs.spacing,
                         "volume": vs.volume}
    _emit(doc, args.output)
    return 0


def cmd_probe(args) -> int:
    layout = _layout(args)
    x = np.asarray(args.point, dtype=float)[None, :]
    s = evaluate(layout, x, clip=not args.box)
    phase = int(layout.phase(x, clip=not args.box)[0])
    doc = {"point": list(args.point), "chi": [int(phase == k) for k in (1, 2, 3)],
           "chart": layout.to_chart(x)[0].tolist(), "u": s.u[0].tolist(),
           "grad": s.grad[0].tolist(), "elastic_density": float(energy_density(layout, s)[0])}
    _emit(doc, args.output)
    return 0


def cmd_energy(args) -> int:
    domain = validate_corner(*_corner(args))
    frame_for_domain(domain)
    rows = scaling.evaluate_volume(args.volume, domain, args.method, args.grid, args.seed)
    lines = ["V,R,method,interfacial,elastic,interior,layer,total"]
    for b in rows:
        lines.append(",".join([repr(float(b.V)), repr(float(b.R)), b.method]
                              + [repr(float(getattr(b, k))) for k in
                                 ("interfacial", "elastic", "interior", "layer", "total")]))
    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_sweep(args) -> int:
    over = dict(method=args.method, grid=args.grid, seed=args.seed, output=args.output,
                workers=args.workers)
    if args.volumes:
        over["volumes"] = scaling._parse_volumes(args.volumes)
    if args.corner is not None or args.a is not None or args.b is not None or args.c is not None:
        over["corner"] = _corner(args)
    cfg = (scaling.load_config(args.config, **over) if args.config
           else scaling.config_from_mapping({}, **over))
    text = scaling.sweep_csv_text(scaling.sweep(cfg))
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_fit(args) -> int:
    rows = scaling.read_sweep_csv(args.input)
    fr = scaling.fit_exponent(rows, args.component, tuple(args.window), args.method)
    _emit(fr.as_dict(), args.output)
    return 0


def cmd_cover(args) -> int:
    vs = read_vox(args.input)
    domain = validate_corner(*_corner(args))
    cfg = CoveringConfig(kappa=args.kappa, window=args.window, max_seeds=args.max_seeds,
                         seed=args.seed, workers=args.workers)
    rep = certify(vs, domain, cfg)
    _emit(rep.as_dict(), args.output)
    return 0 if rep.ok else 1


def cmd_report(args) -> int:
    doc, ok = scaling.report(args.sweep, args.cover or ())
    _emit(doc, args.output)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="corner-nucleation",
                                 description="Branching construction for martensite nucleation in a corner.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-algebra", help="check the strain identities")
    p.add_argument("--output")
    p.set_defaults(func=cmd_verify_algebra)

    p = sub.add_parser("inspect-corner", help="habit normal and frame of a corner")
    _add_corner(p)
    p.add_argument("--output")
    p.set_defaults(func=cmd_inspect_corner)

    p = sub.add_parser("build", help="layout summary, optionally voxelised")
    p.add_argument("--volume", type=float, required=True)
    _add_corner(p)
    p.add_argument("--voxels", help="write the martensite set as a VOX3 file")
    p.add_argument("--resolution", type=int, default=128)
    p.add_argument("--output")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("probe", help="fields at one point")
    p.add_argument("--volume", type=float, required=True)
    p.add_argument("--point", type=_vec, required=True)
    p.add_argument("--box", action="store_true", help="use the unclipped construction box")
    _add_corner(p)
    p.add_argument("--output")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("energy", help="energy breakdown at one volume")
    p.add_argument("--volume", type=float, required=True)
    p.add_argument("--method", choices=scaling.METHODS, default="analytic")
    p.add_argument("--grid", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    _add_corner(p)
    p.add_argument("--output")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("sweep", help="energies over a range of volumes (CSV)")
    p.add_argument("--config", help="key = value file")
    p.add_argument("--volumes", help="'logspace:lo:hi:n' or comma list; ';' joins ranges")
    p.add_argument("--method", choices=scaling.METHODS)
    p.add_argument("--grid", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    _add_corner(p)
    p.add_argument("--output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="log-log slope of one component")
    p.add_argument("--input", required=True)
    p.add_argument("--component", choices=scaling.COMPONENTS, default="total")
    p.add_argument("--window", type=float, nargs=2, metavar=("VMIN", "VMAX"), default=(0.0, float("inf")))
    p.add_argument("--method", default="analytic")
    p.add_argument("--output")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cover", help="certify a ball covering of a voxel set")
    p.add_argument("--input", required=True)
    p.add_argument("--kappa", type=float, default=0.25)
    p.add_argument("--window", type=int, default=2)
    p.add_argument("--max-seeds", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    _add_corner(p)
    p.add_argument("--output")
    p.set_defaults(func=cmd_cover)

    p = sub.add_parser("report", help="summarise sweeps and coverings; exit 0 iff all checks pass")
    p.add_argument("--sweep", required=True)
    p.add_argument("--cover", nargs="*", help="covering JSON files")
    p.add_argument("--output")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DegenerateCornerError:
        print(DEGENERATE_MESSAGE, file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
