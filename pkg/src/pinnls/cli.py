"""Experiment runner: run single problems, reproduce the benchmark tables,
and self-verify derivatives and manufactured solutions."""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import assembly, problems
from .linalg import seeded_rng
from .metrics import mc_error
from .optimizer import TrainConfig, train

SCHEMA_VERSION = 1

# Benchmark table rows: per problem a list of (field, norm kind, reference
# error); a reproduction passes while the best-of-seeds absolute error stays
# within 10x of the reference, which absorbs the seed and hardware variance
# of a stochastic method.
TABLE_ROWS = {
    "1": {
        "iterations": 500,
        "rows": {
            "poisson": [("u", "L2", 7.02e-05), ("u", "H1", 5.78e-04)],
            "elasticity": [("u", "L2", 7.34e-04), ("u", "H1", 1.94e-02)],
            "parabolic": [("u", "L2", 1.82e-03), ("u", "H1", 1.54e-02)],
            "hyperbolic": [("u", "L2", 4.41e-04), ("u", "H1", 3.81e-03)],
        },
    },
    "2": {
        "iterations": 500,
        "rows": {
            "stokes": [("u", "L2", 1.84e-04), ("u", "H1", 2.91e-03),
                       ("p", "H1semi", 2.20e-02)],
            "transient-stokes": [("u", "L2", 1.41e-04), ("u", "H1", 2.30e-03),
                                 ("p", "H1semi", 1.59e-02)],
            "darcy": [("sigma", "L2", 1.34e-03), ("p", "L2", 1.13e-04)],
            "inverse": [("u", "L2", 3.16e-03), ("f", "L2", 5.66e-02),
                        ("u", "H1", 4.73e-02)],
        },
    },
    "6": {
        "iterations": 5000,
        "rows": {
            "poisson": [("u", "L2", 1.84e-06), ("u", "H1", 1.13e-05)],
            "elasticity": [("u", "L2", 2.06e-04), ("u", "H1", 6.03e-03)],
            "parabolic": [("u", "L2", 6.17e-05), ("u", "H1", 5.34e-04)],
            "hyperbolic": [("u", "L2", 3.12e-05), ("u", "H1", 4.42e-04)],
        },
    },
    "7": {
        "iterations": 5000,
        "rows": {
            "stokes": [("u", "L2", 1.41e-04), ("u", "H1", 2.19e-03),
                       ("p", "H1semi", 1.93e-02)],
            "transient-stokes": [("u", "L2", 9.69e-05), ("u", "H1", 1.62e-03),
                                 ("p", "H1semi", 1.37e-02)],
            "darcy": [("sigma", "L2", 1.01e-04), ("p", "L2", 7.79e-06)],
            "inverse": [("u", "L2", 7.88e-05), ("f", "L2", 1.20e-03),
                        ("u", "H1", 1.36e-03)],
        },
    },
}
REPRO_TOLERANCE_FACTOR = 10.0


def build_problem(name, eta_reg=3e-3, average_penalty=False):
    kwargs = {}
    if name == "inverse":
        kwargs["eta_reg"] = eta_reg
    if name in ("stokes", "transient-stokes"):
        kwargs["average_penalty"] = average_penalty
    return problems.make_problem(name, **kwargs)


def _config_dict(pde, cfg, eta_reg, average_penalty):
    return {
        "pde": pde,
        "widths": cfg.widths,
        "iterations": cfg.iterations,
        "n_interior": cfg.n_interior,
        "n_boundary": cfg.n_boundary,
        "n_eval": cfg.n_eval,
        "seed": cfg.seed,
        "eta_reg": eta_reg,
        "hard_boundary": cfg.hard_boundary,
        "average_penalty": average_penalty,
        "checkpoint_stride": cfg.checkpoint_stride,
    }


def _errors_to_json(errors):
    return {f: {k: [float(a), float(r)] for k, (a, r) in kinds.items()}
            for f, kinds in errors.items()}


def write_artifacts(out_dir, problem, report, resolved_config):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    final = report.checkpoints[-1]
    doc = {
        "schema": SCHEMA_VERSION,
        "problem": problem.name,
        "config": resolved_config,
        "loss_history": report.loss_history,
        "alphas": report.alphas,
        "mus": report.mus,
        "stopped_early": report.stopped_early,
        "stop_reason": report.stop_reason,
        "wall_time": report.wall_time,
        "checkpoints": [
            {"iteration": c.iteration, "loss": c.loss, "mu": c.mu,
             "quadrature_gap": c.quadrature_gap, "certificate": c.certificate,
             "errors": _errors_to_json(c.errors)}
            for c in report.checkpoints
        ],
        "final_errors": _errors_to_json(final.errors),
    }
    with open(out / "report.json", "w") as fh:
        json.dump(doc, fh, indent=1)
    with open(out / "loss.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["iteration", "loss", "alpha", "mu"])
        for k, loss in enumerate(report.loss_history):
            alpha = report.alphas[k] if k < len(report.alphas) else ""
            mu = report.mus[k] if k < len(report.mus) else ""
            wr.writerow([k, repr(loss), alpha, mu])
    params_doc = {}
    for fname, field in report.fields.items():
        p = field.params
        params_doc[fname] = {"d_in": p.d_in, "d_out": p.d_out,
                             "width": p.width, "theta": p.theta.tolist()}
    with open(out / "params.json", "w") as fh:
        json.dump(params_doc, fh)
    return doc


def recompute_errors(out_dir):
    """Recompute the final error report from report.json + params.json only."""
    from .network import (HardBoundaryField, NetworkField, NetworkParams,
                          unit_cube_bubble, zero_lift)

    out = Path(out_dir)
    with open(out / "report.json") as fh:
        doc = json.load(fh)
    with open(out / "params.json") as fh:
        params_doc = json.load(fh)
    cfg = doc["config"]
    problem = build_problem(cfg["pde"], eta_reg=cfg.get("eta_reg", 3e-3),
                            average_penalty=cfg.get("average_penalty", False))
    errors = {}
    for spec in problem.fields:
        p = params_doc[spec.name]
        params = NetworkParams(p["d_in"], p["d_out"], p["width"],
                               np.asarray(p["theta"]))
        if cfg.get("hard_boundary", False):
            field = HardBoundaryField(params, zero_lift, unit_cube_bubble)
        else:
            field = NetworkField(params)
        errors[spec.name] = mc_error(field, problem.truth[spec.name],
                                     problem.domain, cfg["n_eval"],
                                     seeded_rng(cfg["seed"], 4))
    return _errors_to_json(errors)


def run_single(pde, widths=None, iterations=500, n_interior=1000, n_boundary=100,
               n_eval=10000, seed=0, eta_reg=3e-3, hard_boundary=False,
               average_penalty=False, out_dir=None):
    problem = build_problem(pde, eta_reg=eta_reg, average_penalty=average_penalty)
    width_map = {}
    if widths:
        for spec, w in zip(problem.fields, widths):
            width_map[spec.name] = w
    cfg = TrainConfig(iterations=iterations, n_interior=n_interior,
                      n_boundary=n_boundary, n_eval=n_eval, seed=seed,
                      widths=width_map, hard_boundary=hard_boundary)
    report = train(problem, cfg)
    resolved = _config_dict(pde, cfg, eta_reg, average_penalty)
    if out_dir is not None:
        write_artifacts(out_dir, problem, report, resolved)
    return problem, report


def check_manufactured(n_points=100, seed=123, tol=1e-8):
    """Worst absolute truth residual per problem (excluding blocks that are
    nonzero on the truth by construction, i.e. the inverse regularization)."""
    results = {}
    for name in problems.PROBLEM_NAMES:
        prob = build_problem(name)
        samples = assembly.draw_samples(prob, n_points, n_points,
                                        seeded_rng(seed, 0), seeded_rng(seed, 1),
                                        seeded_rng(seed, 2))
        fields = {f.name: problems.TruthAnsatz(prob.truth[f.name]) for f in prob.fields}
        _, sys = assembly.assemble(prob, samples, fields, need_jacobian=False)
        worst = 0.0
        for blk in prob.blocks:
            if blk.name == "regularization":
                continue
            rows = sys.block_rows[blk.name]
            n = samples[blk.tag].points.shape[0]
            raw = sys.r[rows] / np.sqrt(samples[blk.tag].weight) if not blk.aggregate else sys.r[rows]
            worst = max(worst, float(np.abs(raw).max()))
        results[name] = worst
    failures = {k: v for k, v in results.items() if v > tol}
    return results, failures


def check_gradients(seed=7, tol=1e-6, n_points=5, width=3):
    """Compare assembled Jacobians against central finite differences on
    small seeded configurations, per problem and per block."""
    from .network import NetworkField, NetworkParams

    worst_overall = 0.0
    failures = []
    for name in problems.PROBLEM_NAMES:
        prob = build_problem(name)
        samples = assembly.draw_samples(prob, n_points, n_points,
                                        seeded_rng(seed, 0), seeded_rng(seed, 1),
                                        seeded_rng(seed, 2))
        fields = {}
        for i, spec in enumerate(prob.fields):
            fields[spec.name] = NetworkField(NetworkParams.init(
                prob.domain.n_coords, spec.d_out, width, seeded_rng(seed, 3, i)))
        _, sys = assembly.assemble(prob, samples, fields)
        J_fd = assembly.fd_residual_jacobian(prob, samples, fields)
        scale = max(np.abs(J_fd).max(), 1.0)
        for blk in prob.blocks:
            rows = sys.block_rows[blk.name]
            dev = np.abs(sys.J[rows] - J_fd[rows]).max() / scale
            worst_overall = max(worst_overall, float(dev))
            if dev > tol:
                failures.append((name, blk.name, float(dev)))
    return worst_overall, failures


def cmd_run(args):
    try:
        problem = build_problem(args.pde, eta_reg=args.eta_reg,
                                average_penalty=args.average_penalty)
    except (KeyError, problems.InvalidRegularization) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    widths = [int(w) for w in args.width.split(",")] if args.width else None
    if widths and len(widths) != len(problem.fields):
        print(f"config error: {problem.name} has {len(problem.fields)} fields, "
              f"got {len(widths)} widths", file=sys.stderr)
        return 2
    try:
        problem, report = run_single(
            args.pde, widths=widths, iterations=args.iters,
            n_interior=args.interior, n_boundary=args.boundary,
            n_eval=args.eval_points, seed=args.seed, eta_reg=args.eta_reg,
            hard_boundary=args.hard_boundary, average_penalty=args.average_penalty,
            out_dir=args.out)
    except assembly.NonFiniteResidual as err:
        print(f"training aborted: {err}", file=sys.stderr)
        return 3
    final = report.checkpoints[-1]
    errs = ", ".join(f"{f} L2={final.errors[f]['L2'][0]:.3e}" for f in final.errors)
    print(f"{args.pde}: loss {report.final_loss:.3e} after "
          f"{len(report.loss_history) - 1} steps ({report.wall_time:.1f}s); {errs}")
    return 0


def cmd_reproduce(args):
    table = TABLE_ROWS[args.table]
    seeds = [int(s) for s in args.seeds.split(",")]
    any_fail = False
    print(f"{'pde':18s} {'metric':14s} {'paper':>10s} {'best':>10s} "
          f"{'median':>10s} {'ratio':>7s} verdict")
    for pde, metrics in table["rows"].items():
        per_seed = []
        for seed in seeds:
            _, report = run_single(pde, iterations=table["iterations"], seed=seed)
            per_seed.append(report.checkpoints[-1].errors)
        for fname, kind, paper_val in metrics:
            vals = sorted(e[fname][kind][0] for e in per_seed)
            best, median = vals[0], vals[len(vals) // 2]
            ok = best <= REPRO_TOLERANCE_FACTOR * paper_val
            any_fail |= not ok
            print(f"{pde:18s} {fname + ' ' + kind:14s} {paper_val:10.2e} "
                  f"{best:10.2e} {median:10.2e} {best / paper_val:7.2f} "
                  f"{'pass' if ok else 'FAIL'}")
    return 1 if any_fail else 0


def cmd_check(args):
    code = 0
    if args.scope in ("gradients", "all"):
        worst, failures = check_gradients()
        print(f"gradient check: worst relative deviation {worst:.3e}")
        for name, blk, dev in failures:
            print(f"  FAIL {name}/{blk}: {dev:.3e}")
            code = 1
    if args.scope in ("manufactured", "all"):
        results, failures = check_manufactured()
        worst = max(results.values())
        print(f"manufactured check: worst truth residual {worst:.3e}")
        for name, dev in failures.items():
            print(f"  FAIL {name}: {dev:.3e}")
            code = 1
    return code


def cmd_export(args):
    errors = recompute_errors(args.out)
    print(json.dumps(errors, indent=1))
    return 0


def _load_config_defaults(parser, path):
    with open(path) as fh:
        file_cfg = json.load(fh)
    parser.set_defaults(**{k.replace("-", "_"): v for k, v in file_cfg.items()})


def main(argv=None):
    parser = argparse.ArgumentParser(prog="pinnls")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train one problem and write artifacts")
    p_run.add_argument("--pde", required=True)
    p_run.add_argument("--width", default=None,
                       help="comma-separated widths, one per field")
    p_run.add_argument("--iters", type=int, default=500)
    p_run.add_argument("--interior", type=int, default=1000)
    p_run.add_argument("--boundary", type=int, default=100)
    p_run.add_argument("--eval-points", type=int, default=10000)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--eta-reg", type=float, default=3e-3)
    p_run.add_argument("--hard-boundary", action="store_true")
    p_run.add_argument("--average-penalty", action="store_true")
    p_run.add_argument("--config", default=None, help="JSON config file; "
                       "flags override file values override defaults")
    p_run.add_argument("--out", default=None)
    p_run.set_defaults(func=cmd_run)

    p_rep = sub.add_parser("reproduce", help="re-run a benchmark table")
    p_rep.add_argument("--table", choices=sorted(TABLE_ROWS), required=True)
    p_rep.add_argument("--seeds", default="0,1,2")
    p_rep.set_defaults(func=cmd_reproduce)

    p_chk = sub.add_parser("check", help="self-verification oracles")
    p_chk.add_argument("--scope", choices=["gradients", "manufactured", "all"],
                       default="all")
    p_chk.set_defaults(func=cmd_check)

    p_exp = sub.add_parser("export", help="recompute errors from artifacts")
    p_exp.add_argument("--out", required=True)
    p_exp.set_defaults(func=cmd_export)

    if argv is None:
        argv = sys.argv[1:]
    # config-file defaults must be injected before final parsing
    pre, _ = parser.parse_known_args(argv)
    if getattr(pre, "config", None):
        _load_config_defaults(p_run, pre.config)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
