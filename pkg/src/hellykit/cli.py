"""Command-line interface.

Subcommands: john, sparsify, select-volume, select-diameter, verify,
lowerbound, report.  Exit codes: 0 success, 2 failed assertion/audit, 1
fatal error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .bodies import HPolytope, VPolytope
from .errors import HellyKitError
from .harness import (
    REPORT_CONSTANT_DEFAULT,
    emit_report,
    run_diameter_experiment,
    run_lowerbound_experiment,
    run_volume_experiment,
)
from .john import JohnDecomposition, extract_contacts, normalize, recover_weights, validate_decomposition
from .select import (
    certify_containment_factor,
    select_diameter_subfamily,
    select_volume_subfamily,
)
from .sparsify import SparseDecomposition, audit_sparsification, sparsify


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def _read_json(path: str) -> dict:
    return json.loads(_read_text(path))


def _write_out(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        print(text)


def _body_from_data(data: dict):
    if "halfspaces" in data:
        return HPolytope.from_dict(data)
    if "vertices" in data:
        return VPolytope.from_dict(data)
    raise ValueError("body JSON needs 'halfspaces' or 'vertices'")


def _bodies_from_data(data: dict):
    if "bodies" not in data:
        raise ValueError("family JSON for the diameter pipeline needs a 'bodies' list")
    return [HPolytope.from_dict(b) for b in data["bodies"]]


def _parse_list(text: str, cast):
    return [cast(x) for x in text.split(",") if x.strip()]


def _add_global_flags(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget-factor", type=float, default=16.0)
    p.add_argument("--oracle", choices=["exact", "mc", "auto"], default="auto")
    p.add_argument("--mc-samples", type=int, default=1_000_000)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=["csv", "json"], default="csv")


def _cmd_john(args) -> int:
    body = _body_from_data(_read_json(args.body))
    mode = "john" if isinstance(body, HPolytope) else "loewner"
    T, positioned = normalize(body, mode)
    vectors, idx = extract_contacts(positioned, tol=args.tol, symmetric=args.symmetric)
    D = recover_weights(vectors, source_indices=idx)
    report = validate_decomposition(D, tol=1e-6, seed=args.seed)
    payload = json.loads(D.to_json())
    payload["position_mode"] = mode
    payload["validation"] = {
        "trace_error": report.trace_error,
        "max_quadform_error": report.max_quadform_error,
        "ball_inside_margin": report.ball_inside_margin,
        "all_ok": report.all_ok,
    }
    _write_out(json.dumps(payload, indent=2), args.out)
    return 0 if report.all_ok else 2


def _cmd_sparsify(args) -> int:
    D = JohnDecomposition.from_json(_read_text(args.decomposition))
    budget = args.budget
    if budget is None:
        from .sparsify import default_budget

        budget = default_budget(D.dim, args.epsilon, args.budget_factor)
    S = sparsify(D, args.epsilon, budget=budget, strategy=args.strategy, seed=args.seed)
    audit = audit_sparsification(S, D)
    payload = json.loads(S.to_json())
    payload["audit"] = {
        "lambda_min": audit.lambda_min,
        "lambda_max": audit.lambda_max,
        "centroid_norm": audit.centroid_norm,
        "passed": audit.passed,
    }
    _write_out(json.dumps(payload, indent=2), args.out)
    return 0 if audit.passed else 2


def _cmd_select_volume(args) -> int:
    family = HPolytope.from_dict(_read_json(args.family))
    result = select_volume_subfamily(
        family,
        args.delta,
        strategy=args.strategy,
        seed=args.seed,
        budget_factor=args.budget_factor,
        oracle=args.oracle,
        mc_samples=args.mc_samples,
        contact_tol=args.tol,
    )
    _write_out(result.to_json(), args.out)
    return 0


def _cmd_select_diameter(args) -> int:
    bodies = _bodies_from_data(_read_json(args.family))
    result = select_diameter_subfamily(
        bodies,
        args.delta,
        strategy=args.strategy,
        seed=args.seed,
        budget_factor=args.budget_factor,
        contact_tol=args.tol,
    )
    _write_out(result.to_json(), args.out)
    return 0


def _cmd_verify(args) -> int:
    data = _read_json(args.artifact)
    if "sigma" in data:
        if not args.source:
            print("verify: a sparse decomposition needs --source", file=sys.stderr)
            return 1
        S = SparseDecomposition.from_json(json.dumps(data))
        D = JohnDecomposition.from_json(_read_text(args.source))
        audit = audit_sparsification(S, D)
        print(
            json.dumps(
                {
                    "kind": "sparse_decomposition",
                    "lambda_min": audit.lambda_min,
                    "lambda_max": audit.lambda_max,
                    "centroid_norm": audit.centroid_norm,
                    "passed": audit.passed,
                }
            )
        )
        return 0 if audit.passed else 2
    if "contacts" in data and "weights" in data:
        D = JohnDecomposition.from_json(json.dumps(data))
        report = validate_decomposition(D, tol=args.tol, seed=args.seed)
        print(
            json.dumps(
                {
                    "kind": "decomposition",
                    "trace_error": report.trace_error,
                    "max_quadform_error": report.max_quadform_error,
                    "ball_inside_margin": report.ball_inside_margin,
                    "passed": report.all_ok,
                }
            )
        )
        return 0 if report.all_ok else 2
    if "pipeline" in data and "indices" in data:
        if not args.family:
            print("verify: a selection needs --family", file=sys.stderr)
            return 1
        fam_data = _read_json(args.family)
        if data["pipeline"] == "diameter":
            bodies = _bodies_from_data(fam_data)
            all_n = np.vstack([b.normals for b in bodies])
            all_c = np.concatenate([b.offsets for b in bodies])
            P = HPolytope(all_n, all_c)
            sel = [bodies[i] for i in data["indices"]]
            Q = HPolytope(
                np.vstack([b.normals for b in sel]),
                np.concatenate([b.offsets for b in sel]),
            )
            beta = certify_containment_factor(Q, P, np.array(data["z"]))
            passed = beta <= data["achieved"] * (1 + 1e-6) + 1e-9
            print(json.dumps({"kind": "selection", "recertified_beta": beta, "passed": passed}))
            return 0 if passed else 2
        family = HPolytope.from_dict(fam_data)
        from .select import _volume_ratio

        ratio, mode, _ = _volume_ratio(
            family.normalized_offsets(), list(data["indices"]), args.oracle, args.mc_samples, args.seed
        )
        stored = data.get("achieved")
        passed = True
        if ratio is not None and stored is not None:
            passed = abs(ratio - stored) <= 1e-6 * max(1.0, abs(stored))
        print(json.dumps({"kind": "selection", "recomputed": ratio, "oracle_mode": mode, "passed": passed}))
        return 0 if passed else 2
    print("verify: unrecognized artifact", file=sys.stderr)
    return 1


def _emit_with_figures(report, args) -> int:
    text = emit_report(report, format=args.format, path=args.out, include_runtime=args.timing)
    if args.out is None:
        print(text, end="")
    else:
        print(f"wrote {args.out}", file=sys.stderr)
    if args.figures and args.out:
        from .figures import render_report_figures

        stem = args.out.rsplit(".", 1)[0]
        for path in render_report_figures(report, stem):
            print(f"wrote {path}", file=sys.stderr)
    agg = report.aggregate
    print(
        f"rows={agg['rows']} failed={agg['failed_rows']} max_normalized={agg['max_normalized']}",
        file=sys.stderr,
    )
    return 0 if report.all_passed else 2


def _cmd_lowerbound(args) -> int:
    report = run_lowerbound_experiment(
        _parse_list(args.n_list, int),
        delta=args.delta,
        count=args.count,
        trials=args.trials,
        seed=args.seed,
        oracle=args.oracle,
        floor=args.floor,
    )
    return _emit_with_figures(report, args)


def _cmd_report(args) -> int:
    ns = _parse_list(args.n_list, int)
    deltas = _parse_list(args.delta_list, float)
    grid = [(n, d) for n in ns for d in deltas]
    status = 0
    if args.pipeline in ("volume", "both"):
        rep = run_volume_experiment(
            grid,
            kind=args.kind,
            trials=args.trials,
            seed=args.seed,
            count=args.count,
            oracle=args.oracle,
            budget_factor=args.budget_factor,
            strategy=args.strategy,
            report_constant=args.report_constant,
        )
        sub = argparse.Namespace(**vars(args))
        if args.out and args.pipeline == "both":
            stem, ext = (args.out.rsplit(".", 1) + ["csv"])[:2]
            sub.out = f"{stem}_volume.{ext}"
        status = max(status, _emit_with_figures(rep, sub))
    if args.pipeline in ("diameter", "both"):
        rep = run_diameter_experiment(
            grid,
            kind=args.diameter_kind,
            trials=args.trials,
            seed=args.seed,
            count=args.count,
            budget_factor=args.budget_factor,
            strategy=args.strategy,
            report_constant=args.report_constant,
        )
        sub = argparse.Namespace(**vars(args))
        if args.out and args.pipeline == "both":
            stem, ext = (args.out.rsplit(".", 1) + ["csv"])[:2]
            sub.out = f"{stem}_diameter.{ext}"
        status = max(status, _emit_with_figures(rep, sub))
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hellykit",
        description="Certified small-subfamily selection for half-space families",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("john", help="position a body and recover its contact decomposition")
    p.add_argument("body", help="body JSON path or '-' for stdin")
    p.add_argument("--symmetric", action="store_true")
    _add_global_flags(p)
    p.set_defaults(func=_cmd_john)

    p = sub.add_parser("sparsify", help="sparsify a decomposition of the identity")
    p.add_argument("decomposition", help="decomposition JSON path or '-'")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--strategy", choices=["barrier", "sampling", "exhaustive"], default="barrier")
    _add_global_flags(p)
    p.set_defaults(func=_cmd_sparsify)

    p = sub.add_parser("select-volume", help="volume-certified subfamily of half-spaces")
    p.add_argument("family", help="family JSON path or '-'")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--strategy", choices=["barrier", "sampling", "exhaustive"], default="barrier")
    _add_global_flags(p)
    p.set_defaults(func=_cmd_select_volume)

    p = sub.add_parser("select-diameter", help="containment-certified subfamily of bodies")
    p.add_argument("family", help="family JSON path with a 'bodies' list, or '-'")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--strategy", choices=["barrier", "sampling", "exhaustive"], default="barrier")
    _add_global_flags(p)
    p.set_defaults(func=_cmd_select_diameter)

    p = sub.add_parser("verify", help="re-audit a decomposition, sparse multiset, or selection")
    p.add_argument("artifact", help="artifact JSON path or '-'")
    p.add_argument("--source", default=None, help="source decomposition JSON (for sparse artifacts)")
    p.add_argument("--family", default=None, help="family JSON (for selection artifacts)")
    _add_global_flags(p)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("lowerbound", help="symmetric-strips lower-bound experiment")
    p.add_argument("--n-list", default="2,3,4")
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--count", type=int, default=64)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--floor", type=float, default=0.0)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--timing", action="store_true", help="emit measured runtimes (breaks byte-stability)")
    _add_global_flags(p)
    p.set_defaults(func=_cmd_lowerbound)

    p = sub.add_parser("report", help="run a bound-verification sweep and emit report + figures")
    p.add_argument("--pipeline", choices=["volume", "diameter", "both"], default="volume")
    p.add_argument("--kind", default="random_polytope")
    p.add_argument("--diameter-kind", default="random_strips")
    p.add_argument("--n-list", default="2,3,4")
    p.add_argument("--delta-list", default="1,1.5,2")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--count", type=int, default=0)
    p.add_argument("--strategy", choices=["barrier", "sampling", "exhaustive"], default="barrier")
    p.add_argument("--report-constant", type=float, default=REPORT_CONSTANT_DEFAULT)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--timing", action="store_true", help="emit measured runtimes (breaks byte-stability)")
    _add_global_flags(p)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except HellyKitError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
