"""``geomlab`` command-line interface.

Exit codes: 0 when every asserted check passes, 1 when one fails, 2 for
argument errors and 3 for file errors. Reports are JSON with a top-level
``"schema"`` key; scans write CSV. Output files are written atomically.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from . import SCHEMA, __version__
from .errors import GeomlabError, InvalidArgument, ParseError, ValidationError

EXIT_OK, EXIT_CHECK, EXIT_ARGS, EXIT_FILE = 0, 1, 2, 3

HM_RTOL = 1e-8
ROWSUM_RTOL = 1e-10
VARIATION_ORDER = 1.9
SECOND_VARIATION_RTOL = 0.01
CONSTANCY_FOR_SECOND = 1e-3
IDENTITY_RTOL = 1e-12


def threads_from_env() -> int:
    raw = os.environ.get("GEOMLAB_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise InvalidArgument(f"GEOMLAB_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise InvalidArgument("GEOMLAB_THREADS must be >= 1")
    return min(n, os.cpu_count() or 1)


# -- serialization --------------------------------------------------------------


def to_jsonable(obj):
    """Plain-Python copy with numpy scalars unwrapped and non-finite floats as None."""
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
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dump_json(payload) -> str:
    body = {"schema": SCHEMA, **payload}
    return json.dumps(to_jsonable(body), indent=2, sort_keys=True) + "\n"


def emit(text: str, out):
    from .surface.io import atomic_write_text

    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        atomic_write_text(out, text)


def check(name, passed, asserted=True, **values):
    return {"name": name, "passed": bool(passed), "asserted": bool(asserted), **values}


def failed(checks) -> bool:
    return any(c["asserted"] and not c["passed"] for c in checks)


# -- argument helpers -------------------------------------------------------------


def parse_floats(text: str):
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise InvalidArgument(f"expected comma-separated numbers, got {text!r}") from None
    return vals


def tensor_selector(text: str) -> str:
    t = text.strip().lower()
    if t in ("id", "identity"):
        return "id"
    for prefix in ("tr", "t"):
        if t.startswith(prefix) and t[len(prefix):].isdigit():
            return f"t{int(t[len(prefix):])}"
    raise argparse.ArgumentTypeError(f"tensor selector must be id or t<r>, got {text!r}")


def load_mesh(path):
    from .surface.io import load_off

    return load_off(path)


def _require(cond, message):
    if not cond:
        raise InvalidArgument(message)


# -- commands ---------------------------------------------------------------------


def cmd_gen(args):
    from .surface import gen_ellipsoid, gen_icosphere, perturbed_sphere, save_off

    if args.kind == "icosphere":
        mesh = gen_icosphere(args.level, args.radius)
    elif args.kind == "ellipsoid":
        _require(args.axes is not None, "ellipsoid needs --axes a,b,c")
        mesh = gen_ellipsoid(parse_floats(args.axes), args.level)
    else:
        mesh = perturbed_sphere(args.t, args.lmax, args.seed, args.level)
    if args.out is None:
        raise InvalidArgument("gen needs an output path (-o/--out)")
    save_off(mesh, args.out)
    meta = {
        "command": "gen",
        "kind": args.kind,
        "vertices": mesh.nv,
        "faces": mesh.nf,
        "area": mesh.area,
        "volume": mesh.enclosed_volume,
        "path": str(args.out),
    }
    sys.stdout.write(dump_json(meta))
    return EXIT_OK


def cmd_curvature(args):
    from .context import SurfaceContext
    from .curvature import maclaurin_check, mean_curvature_hr

    ctx = SurfaceContext(load_mesh(args.mesh))
    f = ctx.curvature
    k = f.principal
    H = f.mean_curvature
    K = mean_curvature_hr(f, 2)
    if args.format == "csv":
        lines = ["vertex,k1,k2,H,K"]
        for i in range(f.npoints):
            lines.append(f"{i},{k[i, 0]:.17g},{k[i, 1]:.17g},{H[i]:.17g},{K[i]:.17g}")
        emit("\n".join(lines) + "\n", args.out)
        return EXIT_OK
    mac = maclaurin_check(k)
    w = f.weights
    payload = {
        "command": "curvature",
        "mesh": ctx.metadata(),
        "mean_H": float(w @ H / w.sum()),
        "min_H": float(H.min()),
        "max_H": float(H.max()),
        "mean_K": float(w @ K / w.sum()),
        "total_K": float(w @ K),
        "min_kappa": float(k.min()),
        "max_kappa": float(k.max()),
        "maclaurin": {"newton_ok": mac.newton_ok, "chain_ok": mac.chain_ok, "max_violation": mac.max_violation},
        "checks": [check("newton_inequalities", mac.newton_ok)],
    }
    emit(dump_json(payload), args.out)
    return EXIT_CHECK if failed(payload["checks"]) else EXIT_OK


def cmd_spectrum(args):
    from .context import SurfaceContext
    from .spectral import lambda1

    ctx = SurfaceContext(load_mesh(args.mesh), k=args.k)
    P = ctx.pair(args.T)
    sp = ctx.spectrum(args.T)
    if args.format == "csv":
        lines = ["index,eigenvalue,residual"]
        for i, (lam, res) in enumerate(zip(sp.eigenvalues, sp.residuals)):
            lines.append(f"{i},{lam:.17g},{res:.17g}")
        emit("\n".join(lines) + "\n", args.out)
        return EXIT_OK
    fam = lambda1(P, sp)
    rows = np.abs(P.stiffness.sum(axis=1)).max() / abs(P.stiffness.diagonal()).max()
    checks = [check("row_sums", rows <= ROWSUM_RTOL, value=float(rows), tol=ROWSUM_RTOL)]
    payload = {
        "command": "spectrum",
        "mesh": ctx.metadata(),
        "T": P.label,
        "elliptic": P.elliptic,
        "eigenvalues": sp.eigenvalues,
        "residuals": sp.residuals,
        "kernel_dimension": sp.kernel_dimension,
        "lambda1": fam,
        "checks": checks,
    }
    emit(dump_json(payload), args.out)
    return EXIT_CHECK if failed(checks) else EXIT_OK


def cmd_verify(args):
    from .calculus import hsiung_minkowski_residual
    from .context import SurfaceContext
    from .inequalities import verify_suite

    ctx = SurfaceContext(load_mesh(args.mesh))
    tensors = tuple(dict.fromkeys(args.tensors or ["id", "t1"]))
    rep = verify_suite(ctx, tensors=tensors, threads=threads_from_env())
    entries = rep.entries
    if args.suite != "all":
        entries = [e for e in entries if e["name"].startswith(args.suite)]
        _require(entries, f"suite {args.suite!r} selects no entries")
    checks = []
    for T in tensors:
        P = ctx.pair(T)
        if not P.elliptic:
            continue
        hm = hsiung_minkowski_residual(ctx.mesh, ctx.tensor(T), curvature=ctx.curvature, pair=P)
        checks.append(check(f"hsiung_minkowski_weak(T={T})", hm.weak_relative <= HM_RTOL, value=hm.weak_relative, tol=HM_RTOL))
        checks.append(check(f"hsiung_minkowski_algebraic(T={T})", True, asserted=False, value=hm.algebraic_relative))
    ok = all(e.get("certified", False) for e in entries if e.get("asserted", True)) and not failed(checks)
    payload = {
        "command": "verify",
        "suite": args.suite,
        "p": args.p,
        "q": args.q,
        "mesh": rep.mesh,
        "entries": entries,
        "checks": checks,
        "all_certified": ok,
    }
    emit(dump_json(payload), args.out)
    return EXIT_OK if ok else EXIT_CHECK


def cmd_pinch(args):
    from .pinching import pinch_report

    _require(args.p > 1, f"--p must exceed 1 for pinching, got {args.p}")
    mesh = load_mesh(args.mesh)
    _require(args.q > 2, f"--q must exceed n = 2, got {args.q}")
    rep = pinch_report(mesh, args.S, args.T, args.p, args.q)
    applicable = rep.hypotheses.get("epsilon_lt_1", False)
    checks = [
        check("epsilon_nonnegative", rep.epsilon >= -1e-9, value=rep.epsilon),
        check("lemma_XL2", all(rep.lemma_XL2.values()), asserted=applicable),
        check("lemma_TangL2", rep.lemma_TangL2, asserted=applicable),
        check("lemma_L1L2", rep.lemma_L1L2, asserted=applicable),
        check("iteration_constants", True, asserted=False, gamma_hat=rep.gamma_hat, c_hat=rep.c_hat),
    ]
    payload = {"command": "pinch", "report": rep.to_dict(), "checks": checks}
    emit(dump_json(payload), args.out)
    return EXIT_CHECK if failed(checks) else EXIT_OK


def cmd_stability(args):
    from .context import SurfaceContext
    from .stability import smooth_test_function, stability_deficit, variation_check

    ctx = SurfaceContext(load_mesh(args.mesh))
    n = ctx.curvature.n
    _require(0 <= args.r <= n - 1, f"--r must be in [0, {n - 1}], got {args.r}")
    rep = stability_deficit(ctx, args.r)
    g = smooth_test_function(ctx.mesh, seed=args.seed)
    first = variation_check(ctx, args.r, f=1.0 + g, h=args.h, second=False)
    second = variation_check(ctx, args.r, f=g, h=args.h)
    constant = rep.constancy < CONSTANCY_FOR_SECOND
    checks = [
        check("deficit_nonnegative", rep.deficit >= 0, value=rep.deficit),
        check("first_variation_order_A", first.order_A >= VARIATION_ORDER, value=first.order_A),
        check("first_variation_order_V", first.order_V >= VARIATION_ORDER, value=first.order_V),
        check("first_variation_error_A", True, asserted=False, value=first.first_error_A),
        check("first_variation_error_V", True, asserted=False, value=first.first_error_V),
        check(
            "second_variation_vs_jacobi",
            second.second_rel_error <= SECOND_VARIATION_RTOL,
            asserted=constant,
            value=second.second_rel_error,
            tol=SECOND_VARIATION_RTOL,
        ),
        check("eigenvalue_chain_weighted", rep.chain_weighted_ok),
        check(
            "eigenvalue_chain_constant",
            rep.chain_constant_ok,
            asserted=False,
            lhs=rep.chain_constant_lhs,
            rhs=rep.chain_constant_rhs,
        ),
    ]
    payload = {
        "command": "stability",
        "report": rep.to_dict(),
        "variation": {"first": first.to_dict(), "second": second.to_dict()},
        "checks": checks,
    }
    emit(dump_json(payload), args.out)
    return EXIT_CHECK if failed(checks) else EXIT_OK


def cmd_einstein(args):
    from .curvature import shape_operator
    from .einstein import almost_schur_check, einstein_report, ricci_from_gauss
    from .surface.analytic import gen_analytic_ellipsoid

    if args.axes is not None:
        if args.mesh is not None:
            raise InvalidArgument("give either a mesh or --axes, not both")
        surface = gen_analytic_ellipsoid(parse_floats(args.axes), args.resolution)
    elif args.mesh is not None:
        surface = load_mesh(args.mesh)
    else:
        raise InvalidArgument("einstein needs a mesh path or --axes")
    rep = einstein_report(surface, args.p, args.q)
    checks = [
        check("gauss_identity", rep.gauss_identity_error <= IDENTITY_RTOL, value=rep.gauss_identity_error),
        check("decomposition", rep.decomposition_violation <= IDENTITY_RTOL, value=rep.decomposition_violation),
        check("chain_H1", rep.chain_H1_ok),
    ]
    if rep.n == 2:
        checks.append(check("traceless_ricci_2d", rep.traceless_deficit <= IDENTITY_RTOL * rep.mean_scalar, value=rep.traceless_deficit))
    schur = None
    if rep.n >= 3:
        field = shape_operator(surface)
        s2 = almost_schur_check(ricci_from_gauss(field), 2.0)
        schur = s2.to_dict()
        checks.append(check("almost_schur_p2", s2.certified, asserted=s2.hypotheses_ok, ratio=s2.ratio))
    payload = {"command": "einstein", "report": rep.to_dict(), "almost_schur": schur, "checks": checks}
    emit(dump_json(payload), args.out)
    return EXIT_CHECK if failed(checks) else EXIT_OK


def cmd_scan(args):
    from .einstein import einstein_scan
    from .pinching import family_scan
    from .surface.generate import FamilySpec, load_family_spec, parse_amplitudes

    if args.config is not None:
        spec = load_family_spec(args.config)
    else:
        _require(args.family is not None and args.amplitudes is not None, "scan needs --family and --amplitudes, or --config")
        spec = FamilySpec(args.family, parse_amplitudes(args.amplitudes), args.lmax, args.seed)
    threads = threads_from_env()
    if args.p is None:
        args.p = 4.0 if args.kind == "einstein" else 2.0
    if args.kind == "einstein":
        _require(args.p > 2, f"--p must exceed max(2, n/2) = 2 for einstein scans, got {args.p}")
        res = einstein_scan(spec, args.p, args.q, args.level, threads)
    else:
        _require(args.p > 1, f"--p must exceed 1 for pinching, got {args.p}")
        res = family_scan(spec, args.S, args.T, args.p, args.q, args.level, threads)
    summary = {"command": "scan", "kind": args.kind, "level": args.level, "p": args.p, "q": args.q, **res.summary()}
    if args.format == "json":
        emit(dump_json({**summary, "rows": res.rows}), args.out)
    else:
        emit(res.to_csv(), args.out)
        sys.stdout.write(dump_json(summary))
    return EXIT_OK if res.passed else EXIT_CHECK


# -- parser -------------------------------------------------------------------------


def add_common(p: argparse.ArgumentParser, p_default: Optional[float] = 2.0, format_default: str = "json"):
    """Global flags; added per subcommand so each keeps its own defaults."""
    p.add_argument("--level", type=int, default=4, help="icosphere refinement level")
    p.add_argument("--p", type=float, default=p_default, help="pinching / Einstein norm exponent")
    p.add_argument("--q", type=float, default=4.0, help="curvature norm exponent (q > n)")
    p.add_argument("--r", type=int, default=0, help="order of the r-area functional")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("-o", "--out", default=None, help="output path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=format_default)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geomlab", description="Spectral and curvature checks on closed surfaces.")
    parser.add_argument("--version", action="version", version=f"geomlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = add_common(sub.add_parser("gen", help="generate a test mesh as OFF"))
    g.add_argument("kind", choices=("icosphere", "ellipsoid", "perturbed-sphere"))
    g.add_argument("--radius", type=float, default=1.0)
    g.add_argument("--axes", default=None, help="semi-axes a,b,c")
    g.add_argument("--t", type=float, default=0.05, help="perturbation amplitude")
    g.add_argument("--lmax", type=int, default=4)
    g.set_defaults(func=cmd_gen)

    c = add_common(sub.add_parser("curvature", help="shape operator summary or per-vertex CSV"))
    c.add_argument("mesh")
    c.set_defaults(func=cmd_curvature)

    s = add_common(sub.add_parser("spectrum", help="lowest eigenvalues of L_T"))
    s.add_argument("mesh")
    s.add_argument("--T", type=tensor_selector, default="id")
    s.add_argument("--k", type=int, default=6)
    s.set_defaults(func=cmd_spectrum)

    v = add_common(sub.add_parser("verify", help="run the eigenvalue-bound suite"))
    v.add_argument("mesh")
    v.add_argument("--suite", default="all", help="'all' or an entry-name prefix such as reilly_h")
    v.add_argument("--tensor", dest="tensors", action="append", type=tensor_selector, help="tensor for the S/T entries (repeatable)")
    v.set_defaults(func=cmd_verify)

    pn = add_common(sub.add_parser("pinch", help="pinching report"))
    pn.add_argument("mesh")
    pn.add_argument("--S", type=tensor_selector, default="id")
    pn.add_argument("--T", type=tensor_selector, default="id")
    pn.set_defaults(func=cmd_pinch)

    st = add_common(sub.add_parser("stability", help="Jacobi form, stability deficit and variation checks"))
    st.add_argument("mesh")
    st.add_argument("--h", type=float, default=1e-3, help="finite-difference step")
    st.set_defaults(func=cmd_stability)

    e = add_common(sub.add_parser("einstein", help="almost-Einstein report"), p_default=4.0)
    e.add_argument("mesh", nargs="?", default=None)
    e.add_argument("--axes", default=None, help="analytic ellipsoid semi-axes instead of a mesh")
    e.add_argument("--resolution", type=int, default=48, help="quadrature resolution for --axes")
    e.set_defaults(func=cmd_einstein)

    sc = add_common(sub.add_parser("scan", help="family sweep with exponent fit"), p_default=None, format_default="csv")
    sc.add_argument("--family", default=None, help="ellipsoid | harmonic")
    sc.add_argument("--amplitudes", default=None, help="start:stop:count or a comma list")
    sc.add_argument("--config", default=None, help="key=value family file")
    sc.add_argument("--lmax", type=int, default=4)
    sc.add_argument("--kind", choices=("pinch", "einstein"), default="pinch")
    sc.add_argument("--S", type=tensor_selector, default="id")
    sc.add_argument("--T", type=tensor_selector, default="id")
    sc.set_defaults(func=cmd_scan)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidArgument as exc:
        print(f"geomlab {args.command}: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (OSError, ParseError, ValidationError) as exc:
        print(f"geomlab {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FILE
    except GeomlabError as exc:
        print(f"geomlab {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
