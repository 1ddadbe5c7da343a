"""Command-line entry point: ``gnaf <subcommand> --config plan.json``.

Exit codes: 0 success, 1 criterion or dominance failure, 2 usage or
validation error.
"""

import argparse
import copy
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .codes import (
    ciod4_relay_code,
    extract_relay_pairs,
    naf_relay_code,
    parse_design,
    rotated_qpsk_codebook,
    theta4_relay_code,
    validate_code,
)
from .protocol import ProtocolConfig, codeword_matrix
from .simulator import PlanValidationError, SimulationPlan, pairwise_pep_estimate, run_plan, wilson_interval

PLAN_KEYS = {
    "variant", "T1", "T2", "R", "pi1", "pi2", "pi3", "snr_grid_db", "trials", "seed", "code",
    "constellation", "decoder", "min_codeword_errors", "block_size", "force", "noise_scale",
    "P", "pair", "pep_trials", "bound_samples",
}
CODE_KEYS = {"kind", "path", "s_map", "b1", "b2", "a0"}
CONSTELLATION_KEYS = {"kind", "rotation_deg"}


class UsageError(Exception):
    pass


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc, overrides):
    doc = copy.deepcopy(doc)
    for item in overrides or []:
        if "=" not in item:
            raise UsageError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        *parents, leaf = key.split(".")
        node = doc
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = _parse_value(value)
    return doc


def check_keys(doc):
    if not isinstance(doc, dict):
        raise UsageError("plan must be a JSON object")
    unknown = set(doc) - PLAN_KEYS
    unknown |= {f"code.{k}" for k in set(doc.get("code", {})) - CODE_KEYS}
    unknown |= {f"constellation.{k}" for k in set(doc.get("constellation", {})) - CONSTELLATION_KEYS}
    if unknown:
        raise UsageError(f"unknown keys: {', '.join(sorted(unknown))}")


def load_plan_doc(path, overrides=(), seed=None, trials=None):
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read plan {path}: {exc}") from None
    check_keys(doc)
    doc = apply_overrides(doc, overrides)
    check_keys(doc)
    if seed is not None:
        doc["seed"] = seed
    if trials is not None:
        doc["trials"] = trials
    return doc


def build_code(code_doc, T1, base_dir="."):
    kind = code_doc.get("kind")
    if kind == "theta4":
        code, n_sym, s_map = theta4_relay_code(), 3, (0, 1, 2)
    elif kind == "ciod4":
        code, n_sym, s_map = ciod4_relay_code(), 4, (0, 1, 2, 3)
    elif kind == "naf":
        code, n_sym, s_map = naf_relay_code(code_doc.get("b1", 1.0), code_doc.get("b2", 1.0)), 2, (0, 1)
    elif kind == "file":
        if "path" not in code_doc:
            raise UsageError("code kind 'file' needs a path")
        design = parse_design((Path(base_dir) / code_doc["path"]).read_text())
        s_map = tuple(code_doc.get("s_map", range(design.n_symbols)))
        code, n_sym = extract_relay_pairs(design, s_map, T1, name=code_doc["path"]), design.n_symbols
    else:
        raise UsageError(f"unknown code kind {kind!r}")
    if "s_map" in code_doc and kind != "file":
        raise UsageError("s_map is only meaningful for file designs")
    if "a0" in code_doc:
        a0 = float(code_doc["a0"])
        code = code.with_source_pair(a0 * np.eye(code.T2, code.T1), np.zeros((code.T2, code.T1)))
    return code, n_sym, s_map


def build_plan(doc, base_dir="."):
    """Plan, config and codebook from a parsed plan document."""
    try:
        grid_db = doc.get("snr_grid_db", [10.0])
        grid = [10 ** (float(d) / 10) for d in grid_db]
        config = ProtocolConfig(
            doc["variant"], int(doc["T1"]), int(doc["T2"]), int(doc["R"]),
            float(doc["pi1"]), float(doc.get("pi2", 0.0)), float(doc["pi3"]),
            float(doc.get("P", grid[0])),
        )
        code, n_sym, s_map = build_code(doc.get("code", {}), config.T1, base_dir)
        const = doc.get("constellation", {"kind": "qpsk", "rotation_deg": 0.0})
        if const.get("kind", "qpsk") != "qpsk":
            raise UsageError(f"unsupported constellation {const.get('kind')!r}")
        codebook = rotated_qpsk_codebook(float(const.get("rotation_deg", 0.0)), n_sym, config.T1, s_map)
        plan = SimulationPlan(
            config=config,
            code=code,
            codebook=codebook,
            snr_grid=tuple(grid),
            trials_per_point=doc.get("trials", 1000),
            seed=int(doc.get("seed", 0)),
            decoder=doc.get("decoder", "exhaustive"),
            min_codeword_errors=doc.get("min_codeword_errors"),
            block_size=int(doc.get("block_size", 2000)),
            noise_scale=float(doc.get("noise_scale", 1.0)),
            force=bool(doc.get("force", False)),
        )
    except KeyError as exc:
        raise UsageError(f"missing key {exc}") from None
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    return plan


def _dump(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    sys.stdout.write(text)


def cmd_validate(args):
    doc = load_plan_doc(args.config, args.override, args.seed, args.trials)
    plan = build_plan(doc, Path(args.config).parent)
    report = validate_code(plan.code, plan.codebook, plan.config)
    out = report.to_dict()
    if not report.meets_criteria:
        problems = []
        if report.diversity_claim < report.max_diversity:
            problems.append(
                f"rank deficiency: min rank(dS) = {report.min_rank_deltaS} at codeword pair "
                f"{report.worst_pair}, diversity {report.diversity_claim} < {report.max_diversity}"
            )
        if not report.power_ok:
            problems.append("power constraint violated")
        if not all(report.xi_diagonal):
            problems.append("relay noise not decorrelated (Xi Xi^T not diagonal)")
        out["problems"] = problems
    _dump(out, args.out)
    return 0 if report.meets_criteria else 1


def _write_result(result, out):
    text = result.to_csv()
    if out:
        Path(out).write_text(text)
        Path(str(out) + ".json").write_text(json.dumps(result.sidecar(), indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text)


def cmd_simulate(args):
    doc = load_plan_doc(args.config, args.override, args.seed, args.trials)
    plan = build_plan(doc, Path(args.config).parent)
    try:
        result = run_plan(plan, workers=args.workers)
    except PlanValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write_result(result, args.out)
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def _pair(doc, plan):
    pair = doc.get("pair", [0, 1])
    i, j = int(pair[0]), int(pair[1])
    L = len(plan.codebook)
    if not (0 <= i < L and 0 <= j < L) or i == j:
        raise UsageError(f"pair must be two distinct indices below {L}")
    return i, j


def cmd_pep(args):
    doc = load_plan_doc(args.config, args.override, args.seed, args.trials)
    plan = build_plan(doc, Path(args.config).parent)
    cfg = plan.config
    i, j = _pair(doc, plan)
    vec = plan.codebook.vectors
    mu = analysis.mu_of_code(plan.code)
    m = analysis.pairwise_matrix(codeword_matrix(cfg, plan.code, vec[i]), codeword_matrix(cfg, plan.code, vec[j]), cfg, mu)
    inputs = {"plan": plan.digest(), "pair": [i, j], "P": cfg.P}
    records = [
        analysis.analysis_record("rank_M", m.rank_M, inputs),
        analysis.analysis_record("sigma2_min", m.sigma2_min, inputs),
        analysis.analysis_record("mu", mu, inputs),
    ]
    try:
        records.append(analysis.analysis_record("pep_bound", analysis.pep_bound(m, cfg), inputs))
        records.append(analysis.analysis_record("exponent_gnaf", analysis.pep_exponent_gnaf(m.rank_M, cfg.P), inputs))
        records.append(analysis.analysis_record("exponent_jh", analysis.pep_exponent_jh(cfg.R, cfg.P), inputs))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    n_bound = int(doc.get("bound_samples", 0))
    if n_bound:
        from .channel import frame_rng

        val = analysis.pep_integral_bound(m, cfg, n_bound, frame_rng(plan.seed, 1))
        records.append(analysis.analysis_record("pep_integral_bound", val, {**inputs, "n": n_bound}, plan.seed))
    trials = int(doc.get("pep_trials", 0))
    if trials:
        est, lo, hi = pairwise_pep_estimate(cfg, plan.code, vec[i], vec[j], cfg.P, trials, plan.seed)
        records.append(analysis.analysis_record("pep_estimate", [est, lo, hi], {**inputs, "trials": trials}, plan.seed))
    _dump(records, args.out)
    return 0


def cmd_coding_gain(args):
    doc = load_plan_doc(args.config, args.override, args.seed, args.trials)
    plan = build_plan(doc, Path(args.config).parent)
    i, j = _pair(doc, plan)
    vec = plan.codebook.vectors
    try:
        cg = analysis.coding_gain(plan.code, vec[i], vec[j], plan.config)
    except analysis.RestrictionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    inputs = {"plan": plan.digest(), "pair": [i, j], "P": plan.config.P}
    records = [analysis.analysis_record(k, v, inputs) for k, v in vars(cg).items()]
    _dump(records, args.out)
    return 0


def read_curve(path, metric="cer"):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or metric not in rows[0]:
        raise UsageError(f"{path} has no {metric} column")
    return rows, [(float(r["P"]), float(r[metric])) for r in rows]


def cmd_slope(args):
    _, curve = read_curve(args.input, args.metric)
    try:
        value = analysis.diversity_slope(curve, args.window)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _dump({"metric": args.metric, "window": args.window, "diversity_slope": value}, args.out)
    return 0


def _slope_range(points, window):
    """Extreme slopes consistent with the per-point Wilson intervals."""
    pts = sorted(points, key=lambda p: p.P)[-window:]
    half = len(pts) // 2
    steep = [(p.P, p.cer_ci[1] if k < half else p.cer_ci[0]) for k, p in enumerate(pts)]
    flat = [(p.P, p.cer_ci[0] if k < half else p.cer_ci[1]) for k, p in enumerate(pts)]
    out = []
    for c in (flat, steep):
        try:
            out.append(analysis.diversity_slope(c, window))
        except ValueError:
            out.append(float("nan"))
    return out


def compare_results(res_a, res_b, window=3):
    """Dominance flag and slope comparison of two runs on the same grid."""
    grid_a = [p.P for p in res_a.points]
    grid_b = [p.P for p in res_b.points]
    if len(grid_a) != len(grid_b) or not np.allclose(grid_a, grid_b, rtol=1e-12):
        raise UsageError("the two plans use different SNR grids")
    slope_a = analysis.diversity_slope(res_a.curve("cer"), window)
    slope_b = analysis.diversity_slope(res_b.curve("cer"), window)
    lo_a, hi_a = _slope_range(res_a.points, window)
    lo_b, hi_b = _slope_range(res_b.points, window)
    return {
        "dominates": all(a.cer <= b.cer for a, b in zip(res_a.points, res_b.points)),
        "slope_a": slope_a,
        "slope_b": slope_b,
        "slope_difference": slope_a - slope_b,
        "slope_difference_range": [lo_a - hi_b, hi_a - lo_b],
        "window": window,
        "plan_hash_a": res_a.plan_hash,
        "plan_hash_b": res_b.plan_hash,
        "seed_a": res_a.seed,
        "seed_b": res_b.seed,
    }


def merged_table(res_a, res_b):
    lines = ["snr_db,P,cer_a,cer_b,ser_a,ser_b,cer_a_lo,cer_a_hi,cer_b_lo,cer_b_hi"]
    for a, b in zip(res_a.points, res_b.points):
        vals = [a.snr_db, a.P, a.cer, b.cer, a.ser, b.ser, *a.cer_ci, *b.cer_ci]
        lines.append(",".join(f"{v:.17g}" for v in vals))
    return "\n".join(lines) + "\n"


def cmd_compare(args):
    if len(args.config) != 2:
        raise UsageError("compare needs exactly two --config plans")
    plans = [build_plan(load_plan_doc(c, args.override, args.seed, args.trials), Path(c).parent) for c in args.config]
    if len(plans[0].snr_grid) != len(plans[1].snr_grid) or not np.allclose(plans[0].snr_grid, plans[1].snr_grid):
        raise UsageError("the two plans use different SNR grids")
    try:
        res = [run_plan(p, workers=args.workers) for p in plans]
    except PlanValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    summary = compare_results(*res, window=args.window)
    if args.out:
        Path(args.out).write_text(merged_table(*res))
    sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0 if summary["dominates"] else 1


def make_parser():
    parser = argparse.ArgumentParser(prog="gnaf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, multi=False):
        if multi:
            p.add_argument("--config", action="append", required=True, help="plan JSON (give twice)")
        else:
            p.add_argument("--config", required=True, help="plan JSON")
        p.add_argument("--out", help="output path")
        p.add_argument("--seed", type=int, help="override the plan seed (u64)")
        p.add_argument("--workers", type=int, default=1, help="worker processes; never changes results")
        p.add_argument("--trials", type=int, help="override the plan's trials per point")
        p.add_argument("--override", action="append", default=[], metavar="K=V", help="set a plan key")

    for name, func in (("validate", cmd_validate), ("simulate", cmd_simulate), ("pep", cmd_pep),
                       ("coding-gain", cmd_coding_gain)):
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(func=func)
    p = sub.add_parser("compare")
    common(p, multi=True)
    p.add_argument("--window", type=int, default=3)
    p.set_defaults(func=cmd_compare)
    p = sub.add_parser("slope")
    p.add_argument("--input", required=True, help="result CSV from simulate")
    p.add_argument("--metric", choices=("cer", "ser"), default="cer")
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--out")
    p.set_defaults(func=cmd_slope)
    return parser


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        print("error: seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
