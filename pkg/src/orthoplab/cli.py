"""Command line entry point: ``orthoplab {solve,verify,trace,inequalities,stream}``.

Every run writes into ``<out>/<hash>/`` where ``hash`` is a content hash of
the validated config and seed, so identical inputs give byte-identical
output trees.  Exit codes: 0 success, 1 config error, 2 solver
non-convergence, 3 a check reported a violation, 4 ball below resolution.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import batteries, inequalities
from .config import config_hash, parse_config
from .exact import conjugate_exponent, duality_residual, stream_function, CurlTooLarge
from .grid import BallSpec, Domain, GridFunction, to_csv
from .regularity import BallTooSmall, decay_trace
from .solver import NonConvergence, continuation_solve

logger = logging.getLogger("orthoplab")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_VIOLATION, EXIT_BALL = 0, 1, 2, 3, 4


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(outdir: Path, files: dict[str, str]) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (outdir / name).write_text(text)


def _solution(problem, solver) -> tuple[object, GridFunction, dict]:
    spec = problem.spec()
    if problem.source == "sample":
        return spec, spec.boundary, {"source": "sample"}
    u, report = continuation_solve(spec, solver.build())
    return spec, u, report.to_dict()


def _run_solve(cfg, seed, threads):
    spec, u, report = _solution(cfg.problem, cfg.solver)
    return EXIT_OK, {"solution.csv": to_csv(u), "report.json": _dumps(report)}


def _run_trace(cfg, seed, threads):
    spec, u, _ = _solution(cfg.problem, cfg.solver)
    trace = decay_trace(
        u, spec.p, cfg.center, cfg.radius, j=cfg.component, alpha=cfg.alpha, C0=cfg.C0,
        regime=spec.regime, delta_min=cfg.delta_min, max_stages=cfg.max_stages,
    )
    summary = {
        "total_energy": trace.total_energy,
        "b2_energy_sum": trace.b2_energy_sum,
        "bookkeeping_ok": trace.bookkeeping_ok,
        "monotone": trace.monotone,
        "b1_contraction_ok": trace.b1_contraction_ok,
        "stages_without_alternative": sum(s.alternative == "none" for s in trace.stages),
    }
    ok = trace.bookkeeping_ok and trace.monotone and trace.b1_contraction_ok and not summary["stages_without_alternative"]
    files = {"trace.csv": trace.to_csv(), "summary.json": _dumps(summary)}
    if not ok:
        files["violations.json"] = _dumps(summary)
        return EXIT_VIOLATION, files
    return EXIT_OK, files


def _verify_problem(args):
    k, problem, cfg, seed = args
    spec, u, _ = _solution(problem, cfg.solver)
    d = spec.domain
    balls = batteries.random_balls(d, cfg.balls, seed + 1000 * k)
    mp_balls = batteries.random_balls(d, cfg.min_principle_balls, seed + 1000 * k + 1, (0.15, 0.4), margin=2 * max(d.h))
    out: dict = {"problem": problem.model_dump(mode="json")}
    if "alternatives" in cfg.batteries:
        res = batteries.alternatives_battery(u, spec.p, balls)
        out["alternatives"] = {"checks": res.checks, "violations": res.violations}
    if "level" in cfg.batteries:
        res, counts = batteries.level_battery(u, spec.p, balls, None)
        out["level"] = {"checks": res.checks, "verdicts": counts, "violations": res.violations}
    if "min_principle" in cfg.batteries:
        res = batteries.min_principle_battery(u, spec.p, mp_balls, cfg.solver.grad_tol)
        out["min_principle"] = {"checks": res.checks, "violations": res.violations}
    return out


def _run_verify(cfg, seed, threads):
    jobs = [(k, prob, cfg, seed) for k, prob in enumerate(cfg.problems)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(_verify_problem, jobs))
    else:
        results = [_verify_problem(job) for job in jobs]
    report: dict = {"problems": results}
    failures = [
        {"problem": i, "battery": name, "violation": v}
        for i, res in enumerate(results)
        for name in ("alternatives", "level", "min_principle")
        for v in res.get(name, {}).get("violations", [])
    ]
    if cfg.negative_control:
        d = cfg.problems[0].domain() if cfg.problems else Domain.square(33)
        ctrl = batteries.min_principle_battery(batteries.dip_control(d), 4.0, [BallSpec((0.0, 0.0), 0.4)])
        report["negative_control"] = {"detected": not ctrl.ok}
        if ctrl.ok:
            failures.append({"problem": None, "battery": "negative_control", "violation": "control passed"})
    files = {"verify.json": _dumps(report)}
    if failures:
        files["violations.json"] = _dumps(failures)
        report["dump"] = "violations.json"
        files["verify.json"] = _dumps(report)
        return EXIT_VIOLATION, files
    return EXIT_OK, files


def _run_inequalities(cfg, seed, threads):
    rows = inequalities.run_batteries(cfg.samples, seed, tuple(cfg.q_grid), tuple(cfg.p_grid))
    witnesses = [{"id": i, "lhs": lhs, "rhs": rhs} for i, lhs, rhs in inequalities.equality_witnesses()]
    files = {"batteries.csv": inequalities.battery_csv(rows), "witnesses.json": _dumps(witnesses)}
    bad = [r.id for r in rows if not r.ok]
    if bad:
        files["violations.json"] = _dumps(bad)
        return EXIT_VIOLATION, files
    return EXIT_OK, files


def _run_stream(cfg, seed, threads):
    spec, u, _ = _solution(cfg.problem, cfg.solver)
    v, defect = stream_function(u, spec.p, cfg.threshold)
    w, _ = stream_function(v, conjugate_exponent(spec.p))
    back = w.values + u.values[1:-1, 1:-1]
    report = {
        "curl_defect": defect,
        "duality_residual": duality_residual(v, spec.p),
        "double_stream_spread": float(np.ptp(back)),
    }
    return EXIT_OK, {"stream.csv": to_csv(v), "report.json": _dumps(report)}


RUNNERS = {
    "solve": _run_solve,
    "trace": _run_trace,
    "verify": _run_verify,
    "inequalities": _run_inequalities,
    "stream": _run_stream,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orthoplab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(RUNNERS))
    parser.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    parser.add_argument("--out", type=Path, default=Path("runs"), help="parent of the output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=None, help="worker threads (env ORTHO_P_LAB_THREADS)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    threads = args.threads if args.threads is not None else int(os.environ.get("ORTHO_P_LAB_THREADS", "1"))
    try:
        cfg = parse_config(args.command, args.config.read_text())
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = args.out / config_hash(args.command, cfg, args.seed)
    try:
        code, files = RUNNERS[args.command](cfg, args.seed, max(threads, 1))
    except NonConvergence as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        _write(outdir, {"best.csv": to_csv(exc.best), "report.json": _dumps(exc.report.to_dict())})
        return EXIT_NONCONVERGENCE
    except BallTooSmall as exc:
        print(f"ball too small: {exc}", file=sys.stderr)
        return EXIT_BALL
    except CurlTooLarge as exc:
        print(f"curl defect: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    _write(outdir, files)
    if code == EXIT_VIOLATION:
        print(f"violation; see {outdir / 'violations.json'}", file=sys.stderr)
    print(outdir)
    return code


if __name__ == "__main__":
    sys.exit(main())
