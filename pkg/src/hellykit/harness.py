"""Family generators, bound-verification experiments, and report emission.

Reports are pure functions of (config, seed): rows are ordered by
(n, delta, trial) and runtimes are suppressed from emitted files by default
so repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .bodies import HPolytope, cube, regular_simplex, volume
from .errors import GenerationFailed, HellyKitError, IoFailure
from .john import recover_weights
from .select import select_diameter_subfamily, select_volume_subfamily
from .sparsify import epsilon_schedule

REPORT_CONSTANT_DEFAULT = 3.0
STRIP_PROBE_COUNT = 1000
STRIP_PROBE_TOL = 1e-7
CSV_COLUMNS = [
    "n",
    "delta",
    "pipeline",
    "s",
    "cap",
    "epsilon",
    "achieved",
    "normalized",
    "bound_exponent",
    "oracle_mode",
    "seed",
    "runtime_ms",
]


@dataclass(frozen=True)
class FamilySpec:
    """Recipe for a seeded family of half-spaces or bodies."""

    kind: str
    n: int
    count: int = 0
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be >= 1")
        if self.kind not in ("cube", "simplex", "random_polytope", "random_strips", "affine_image"):
            raise ValueError(f"unknown family kind {self.kind!r}")


def _rng_for(*entropy):
    return np.random.default_rng(np.random.SeedSequence(list(entropy)))


def _random_sphere(rng, count, n):
    pts = rng.normal(size=(count, n))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def _random_john_normals(n, count, seed, retries: int = 60):
    """Unit normals whose offset-1 family is certifiably in John position."""
    for attempt in range(retries):
        rng = _rng_for(seed, 17, attempt)
        normals = _random_sphere(rng, count, n)
        try:
            D = recover_weights(normals)
        except HellyKitError:
            continue
        if D.residual_identity < 1e-9 and D.residual_barycenter < 1e-9:
            return normals
    raise GenerationFailed(
        f"no John-position family with {count} half-spaces in dimension {n} after {retries} draws; "
        f"counts below n(n+3)/2 = {n * (n + 3) // 2} rarely work"
    )


def _strips_directions(n, count, seed):
    """Strip normals passing the [1, 2] support sandwich, doubling count on failure.

    Each probe LP checks both the support value and the norm of its maximizer
    (a point of the intersection, so it must itself lie in 2B); the latter
    catches spikes that random probe directions would miss in high dimension.
    """
    current = count
    for doubling in range(5):
        rng = _rng_for(seed, 23, doubling)
        W = _random_sphere(rng, current, n)
        family = HPolytope(np.vstack([W, -W]), np.ones(2 * current))
        probe_rng = _rng_for(seed, 29, doubling)
        probes = _random_sphere(probe_rng, STRIP_PROBE_COUNT, n)
        good = True
        witness_norms = []
        for d in probes:
            h, x = lp.support_point(family.normals, family.offsets, d)
            if not (1.0 - STRIP_PROBE_TOL <= h <= 2.0 + STRIP_PROBE_TOL):
                good = False
                break
            nx = np.linalg.norm(x) if x is not None else np.inf
            if nx > 2.0 + STRIP_PROBE_TOL:
                good = False
                break
            witness_norms.append(nx)
        if good:
            # adversarial refinement: walk toward the farthest feasible point
            # from the worst probe witnesses (random directions alone miss
            # thin spikes once the dimension grows)
            order = np.argsort(witness_norms)[::-1][:20]
            for k in order:
                d = probes[k]
                for _ in range(6):
                    _, x = lp.support_point(family.normals, family.offsets, d)
                    nx = np.linalg.norm(x) if x is not None else np.inf
                    if nx > 2.0 + STRIP_PROBE_TOL:
                        good = False
                        break
                    if nx < 1e-9:
                        break
                    d = x / nx
                if not good:
                    break
        if good:
            return W
        current *= 2
    raise GenerationFailed(
        f"random strips never satisfied the 2-ball sandwich (n={n}, count up to {current}); "
        "the construction needs exponentially many directions in n"
    )


def _affine_map_for(n, seed):
    rng = _rng_for(seed, 31)
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    scales = rng.uniform(0.6, 1.7, size=n)
    L = q @ np.diag(scales) @ q.T + 0.15 * rng.normal(size=(n, n))
    while abs(np.linalg.det(L)) < 0.1:
        L = L + 0.5 * np.eye(n)
    t = rng.normal(scale=0.1, size=n)
    return L, t


def generate_family(spec: FamilySpec):
    """One HPolytope (half-space family) or a list of HPolytope bodies.

    Kinds: cube (2n tangent facets), simplex (n+1 facets in John position),
    random_polytope (count tangent facets, John position certified by weight
    recovery), random_strips (count symmetric strips with the unit ball
    sandwiched inside twice itself), affine_image (seeded affine distortion
    of a base kind).  params["as_bodies"] switches to per-body output.
    """
    n = spec.n
    as_bodies = bool(spec.params.get("as_bodies", False))
    if spec.kind == "cube":
        fam = cube(n)
        if as_bodies:
            return [
                HPolytope(np.vstack([fam.normals[i], fam.normals[n + i]]), np.ones(2))
                for i in range(n)
            ]
        return fam
    if spec.kind == "simplex":
        fam = regular_simplex(n)
        if as_bodies:
            return [HPolytope(fam.normals[i][None, :], np.ones(1)) for i in range(n + 1)]
        return fam
    if spec.kind == "random_polytope":
        count = spec.count or (n * (n + 3) // 2 + 2 * n)
        normals = _random_john_normals(n, count, spec.seed)
        if as_bodies:
            return [HPolytope(v[None, :], np.ones(1)) for v in normals]
        return HPolytope(normals, np.ones(count))
    if spec.kind == "random_strips":
        if spec.count < 1:
            raise ValueError("random_strips needs a positive count")
        W = _strips_directions(n, spec.count, spec.seed)
        if as_bodies:
            return [HPolytope(np.vstack([w, -w]), np.ones(2)) for w in W]
        return HPolytope(np.vstack([W, -W]), np.ones(2 * len(W)))
    if spec.kind == "affine_image":
        base_kind = spec.params.get("base", "random_polytope")
        base = FamilySpec(kind=base_kind, n=n, count=spec.count, seed=spec.seed)
        fam = generate_family(base)
        L, t = _affine_map_for(n, spec.seed)
        normals = np.linalg.solve(L.T, fam.normals.T).T
        offsets = fam.offsets + normals @ t
        while np.any(offsets <= 0.2):
            t = 0.5 * t
            offsets = fam.offsets + normals @ t
        scaled = normals / offsets[:, None]
        return HPolytope(scaled, np.ones(len(scaled)))
    raise ValueError(f"unknown family kind {spec.kind!r}")


@dataclass
class ReportRow:
    n: int
    delta: float
    pipeline: str
    s: int
    cap: int
    epsilon: float | None
    achieved: float | None
    normalized: float | None
    bound_exponent: float
    oracle_mode: str
    seed: int
    runtime_ms: float
    passed: bool = True
    note: str = ""

    def key(self):
        return (self.n, self.delta, self.seed)


@dataclass
class BoundReport:
    pipeline: str
    config: dict
    rows: list = field(default_factory=list)

    @property
    def aggregate(self) -> dict:
        vals = [r.normalized for r in self.rows if r.normalized is not None]
        return {
            "rows": len(self.rows),
            "failed_rows": sum(1 for r in self.rows if not r.passed),
            "max_normalized": max(vals) if vals else None,
        }

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)


def _fmt(value) -> str:
    if value is None:
        return "OracleSkipped"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_report(report: BoundReport, format: str = "csv", path=None, include_runtime: bool = False):
    """Write the report as CSV or JSON; returns the emitted text.

    runtime_ms is zeroed unless include_runtime is set, keeping repeated
    seeded runs byte-identical.
    """
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in report.rows:
            writer.writerow(
                [
                    r.n,
                    repr(float(r.delta)),
                    r.pipeline,
                    r.s,
                    r.cap,
                    "" if r.epsilon is None else repr(float(r.epsilon)),
                    _fmt(r.achieved),
                    _fmt(r.normalized),
                    repr(float(r.bound_exponent)),
                    r.oracle_mode,
                    r.seed,
                    repr(float(r.runtime_ms)) if include_runtime else "0",
                ]
            )
        text = buf.getvalue()
    elif format == "json":
        rows = []
        for r in report.rows:
            rows.append(
                {
                    "n": r.n,
                    "delta": r.delta,
                    "pipeline": r.pipeline,
                    "s": r.s,
                    "cap": r.cap,
                    "epsilon": r.epsilon,
                    "achieved": r.achieved,
                    "normalized": r.normalized,
                    "bound_exponent": r.bound_exponent,
                    "oracle_mode": r.oracle_mode,
                    "seed": r.seed,
                    "runtime_ms": r.runtime_ms if include_runtime else 0,
                    "passed": r.passed,
                    "note": r.note,
                }
            )
        text = json.dumps(
            {"config": report.config, "rows": rows, "aggregate": report.aggregate},
            indent=2,
            sort_keys=True,
        )
    else:
        raise ValueError(f"unknown report format {format!r}")
    if path is not None:
        try:
            with open(path, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
    return text


def _volume_row(n, delta, kind, count, trial, seed, oracle, budget_factor, strategy, report_constant):
    spec = FamilySpec(kind=kind, n=n, count=count, seed=int(seed))
    t0 = time.perf_counter()
    eps = epsilon_schedule(n, delta, "volume")
    try:
        family = generate_family(spec)
        result = select_volume_subfamily(
            family,
            delta,
            strategy=strategy,
            seed=int(seed),
            budget_factor=budget_factor,
            oracle=oracle,
        )
    except HellyKitError as exc:
        return ReportRow(
            n=n, delta=delta, pipeline="volume", s=0, cap=0, epsilon=eps,
            achieved=None, normalized=None, bound_exponent=(3.0 - delta) / 2.0,
            oracle_mode="error", seed=int(seed),
            runtime_ms=1000 * (time.perf_counter() - t0),
            passed=False, note=f"{type(exc).__name__}: {exc}",
        ), None
    runtime_ms = 1000 * (time.perf_counter() - t0)
    bound_value = result.bound
    achieved = result.achieved
    normalized = None if achieved is None else achieved / bound_value
    passed = True
    notes = []
    if result.s > result.admissible_cap:
        passed = False
        notes.append("cap exceeded")
    if achieved is not None:
        if achieved < 1.0 - 1e-9:
            passed = False
            notes.append("subset monotonicity violated")
        if normalized > report_constant:
            passed = False
            notes.append(f"normalized ratio {normalized:.3f} above {report_constant}")
    row = ReportRow(
        n=n, delta=delta, pipeline="volume", s=result.s, cap=result.admissible_cap,
        epsilon=eps, achieved=achieved, normalized=normalized,
        bound_exponent=(3.0 - delta) / 2.0,
        oracle_mode=result.provenance["oracle_mode"], seed=int(seed),
        runtime_ms=runtime_ms, passed=passed, note="; ".join(notes),
    )
    return row, result


def run_volume_experiment(
    grid,
    kind: str = "random_polytope",
    trials: int = 5,
    seed: int = 0,
    count: int = 0,
    oracle: str = "auto",
    budget_factor: float = 16.0,
    strategy: str = "barrier",
    report_constant: float = REPORT_CONSTANT_DEFAULT,
) -> BoundReport:
    """Volume-theorem sweep: one row per (n, delta, trial), deterministic order.

    Asserts the normalized ratio against report_constant, the subset
    monotonicity achieved >= 1, the cap accounting, the strict decrease of
    the bound expression in delta, and (recorded as a note, not a failure)
    the non-increase of the achieved ratio in delta at fixed n and trial.
    """
    config = {
        "pipeline": "volume", "grid": [[int(n), float(d)] for n, d in grid], "kind": kind,
        "trials": trials, "seed": seed, "count": count, "oracle": oracle,
        "budget_factor": budget_factor, "strategy": strategy, "report_constant": report_constant,
    }
    report = BoundReport(pipeline="volume", config=config)
    cells = sorted({(int(n), float(d)) for n, d in grid})
    by_run = {}
    for n, delta in cells:
        for trial in range(trials):
            row_seed = int(np.random.SeedSequence([seed, n, trial]).generate_state(1)[0] % (2**31))
            row, _ = _volume_row(
                n, delta, kind, count, trial, row_seed, oracle, budget_factor, strategy, report_constant
            )
            report.rows.append(row)
            by_run[(n, trial, delta)] = row
    # bound expression must strictly decrease in delta for n >= 2
    deltas = sorted({d for _, d in cells})
    for n in sorted({n for n, _ in cells}):
        if n >= 2:
            values = [float(n) ** ((3.0 - d) / 2.0) for d in deltas]
            if not all(a > b for a, b in zip(values, values[1:])):
                for row in report.rows:
                    if row.n == n:
                        row.passed = False
                        row.note += "; bound expression not decreasing in delta"
    # achieved ratio should not grow when delta increases (recorded, non-fatal)
    for n in sorted({n for n, _ in cells}):
        for trial in range(trials):
            seq = [by_run[(n, trial, d)] for d in deltas if (n, trial, d) in by_run]
            vals = [r.achieved for r in seq if r.achieved is not None]
            for a, b, row in zip(vals, vals[1:], seq[1:]):
                if b > a * (1.0 + 1e-6):
                    row.note = (row.note + "; achieved increased with delta").lstrip("; ")
    return report


def run_diameter_experiment(
    grid,
    kind: str = "random_strips",
    trials: int = 3,
    seed: int = 0,
    count: int = 0,
    budget_factor: float = 16.0,
    strategy: str = "barrier",
    report_constant: float = REPORT_CONSTANT_DEFAULT,
) -> BoundReport:
    """Diameter-theorem sweep: certified beta per cell against c n^{2-delta/2}."""
    config = {
        "pipeline": "diameter", "grid": [[int(n), float(d)] for n, d in grid], "kind": kind,
        "trials": trials, "seed": seed, "count": count,
        "budget_factor": budget_factor, "strategy": strategy, "report_constant": report_constant,
    }
    report = BoundReport(pipeline="diameter", config=config)
    cells = sorted({(int(n), float(d)) for n, d in grid})
    for n, delta in cells:
        for trial in range(trials):
            row_seed = int(np.random.SeedSequence([seed, n, trial]).generate_state(1)[0] % (2**31))
            eps = epsilon_schedule(n, delta, "diameter")
            t0 = time.perf_counter()
            try:
                body_count = count or max(4 * n, 2 ** n)
                spec = FamilySpec(
                    kind=kind, n=n, count=body_count, seed=row_seed, params={"as_bodies": True}
                )
                bodies = generate_family(spec)
                result = select_diameter_subfamily(
                    bodies, delta, strategy=strategy, seed=row_seed, budget_factor=budget_factor
                )
            except HellyKitError as exc:
                report.rows.append(
                    ReportRow(
                        n=n, delta=delta, pipeline="diameter", s=0, cap=0, epsilon=eps,
                        achieved=None, normalized=None, bound_exponent=2.0 - delta / 2.0,
                        oracle_mode="error", seed=row_seed,
                        runtime_ms=1000 * (time.perf_counter() - t0),
                        passed=False, note=f"{type(exc).__name__}: {exc}",
                    )
                )
                continue
            runtime_ms = 1000 * (time.perf_counter() - t0)
            beta = result.achieved
            normalized = beta / result.bound
            passed = normalized <= report_constant and result.s <= result.admissible_cap
            note = "" if passed else f"normalized beta {normalized:.3f} above {report_constant}"
            ratio = result.provenance.get("diam_ratio")
            if ratio is not None:
                note = (note + f"; diam_ratio={ratio:.6f}").lstrip("; ")
            report.rows.append(
                ReportRow(
                    n=n, delta=delta, pipeline="diameter", s=result.s, cap=result.admissible_cap,
                    epsilon=eps, achieved=beta, normalized=normalized,
                    bound_exponent=2.0 - delta / 2.0,
                    oracle_mode=result.provenance["oracle_mode"], seed=row_seed,
                    runtime_ms=runtime_ms, passed=passed, note=note,
                )
            )
    return report


def run_lowerbound_experiment(
    n_list,
    delta: float = 1.0,
    count: int = 64,
    trials: int = 50,
    seed: int = 0,
    oracle: str = "auto",
    floor: float = 0.0,
) -> BoundReport:
    """Symmetric-strips lower-bound family: the subfamily volume statistic.

    The family is rescaled so the full intersection has volume 1; for each of
    `trials` random subfamilies of ceil(n^delta) strips the statistic
    vol^(1/n) * log(1+n) / sqrt(n) is recorded, and the row reports its
    minimum, asserted above `floor`.
    """
    config = {
        "pipeline": "lowerbound", "n_list": [int(n) for n in n_list], "delta": delta,
        "count": count, "trials": trials, "seed": seed, "oracle": oracle, "floor": floor,
    }
    report = BoundReport(pipeline="lowerbound", config=config)
    for n in sorted(int(x) for x in n_list):
        t0 = time.perf_counter()
        row_seed = int(np.random.SeedSequence([seed, n, 77]).generate_state(1)[0] % (2**31))
        try:
            W = _strips_directions(n, count, row_seed)
        except GenerationFailed as exc:
            report.rows.append(
                ReportRow(
                    n=n, delta=delta, pipeline="lowerbound", s=0, cap=0, epsilon=None,
                    achieved=None, normalized=None, bound_exponent=0.5, oracle_mode="error",
                    seed=row_seed, runtime_ms=1000 * (time.perf_counter() - t0),
                    passed=False, note=f"GenerationFailed: {exc}",
                )
            )
            continue
        strips = HPolytope(np.vstack([W, -W]), np.ones(2 * len(W)))
        use_exact = oracle == "exact" or (oracle == "auto" and n <= 5)
        if use_exact:
            vol_q, _ = volume(strips, mode="exact")
            mode = "exact"
        else:
            vol_q, _ = volume(strips, mode="monte_carlo", mc_samples=10**6, seed=row_seed)
            mode = "mc"
        lam = vol_q ** (-1.0 / n)
        size = int(math.ceil(float(n) ** delta))
        rng = _rng_for(row_seed, 83)
        stats = []
        for _ in range(trials):
            pick = rng.choice(len(W), size=size, replace=False)
            sub = HPolytope(
                np.vstack([W[pick], -W[pick]]), np.full(2 * size, lam)
            )
            if use_exact:
                v, _ = volume(sub, mode="exact")
            else:
                v, _ = volume(sub, mode="monte_carlo", mc_samples=200_000, seed=row_seed + 1)
            stats.append(v ** (1.0 / n) * math.log(1.0 + n) / math.sqrt(n))
        achieved = float(min(stats))
        passed = achieved > floor
        report.rows.append(
            ReportRow(
                n=n, delta=delta, pipeline="lowerbound", s=size, cap=size, epsilon=None,
                achieved=achieved, normalized=achieved, bound_exponent=0.5,
                oracle_mode=mode, seed=row_seed,
                runtime_ms=1000 * (time.perf_counter() - t0),
                passed=passed,
                note="" if passed else f"statistic {achieved:.4f} at or below floor {floor}",
            )
        )
    return report
