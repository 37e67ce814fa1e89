"""``dmech`` command line: config-driven runs writing CSV diagnostics.

Exit codes: 0 success, 1 usage or config error, 2 solver failure (including
residuals above ``residual_tol``), 3 invariance or precondition failure
(including equivalence checks above their tolerances).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import dms, forced, nonholonomic, reduction, routh
from .config import RunConfig, SystemSetup, build, parse_config
from .errors import (ConfigError, DmechError, NoConvergenceError, PreconditionError,
                     SimulationError, SingularSystemError)

log = logging.getLogger("dmech")

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_PRECONDITION = 0, 1, 2, 3


def setup_logging():
    level = os.environ.get("DMECH_LOG", "quiet").lower()
    levels = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


# ----------------------------------------------------------------------------
# CSV output


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: Path, header: List[str], rows) -> int:
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")
            count += 1
    return count


def _inf(v) -> float:
    v = np.asarray(v)
    return float(np.max(np.abs(v))) if v.size else 0.0


def write_trajectory(out: Path, curve):
    n = curve.shape[1]
    write_csv(out / "trajectory.csv", ["k"] + [f"coord_{i}" for i in range(n)],
              ([k, *curve[k]] for k in range(curve.shape[0])))


def write_residuals(out: Path, diag):
    write_csv(out / "residuals.csv", ["k", "residual_inf_norm", "newton_iters"],
              ([k + 1, diag.residuals[k], int(diag.iterations[k])] for k in range(diag.residuals.size)))


def write_momentum(out: Path, J):
    J = np.asarray(J).reshape(len(J), -1)
    write_csv(out / "momentum.csv", ["k"] + [f"J_{i}" for i in range(J.shape[1])],
              ([k, *J[k]] for k in range(J.shape[0])))


# ----------------------------------------------------------------------------
# modes


class Outcome:
    def __init__(self):
        self.code = EXIT_OK
        self.metrics = {}
        self.messages = []

    def fail(self, code, message):
        self.code = max(self.code, code)
        self.messages.append(message)


def _full_run(cfg: RunConfig, st: SystemSetup, out: Path, res: Outcome):
    q0, q1, steps, nc = cfg.q0, cfg.q1, cfg.steps, cfg.newton
    if st.nh is not None:
        curve, diag = nonholonomic.nh_simulate(st.nh, q0, q1, steps, nc)
    elif st.forced is not None:
        curve, diag = forced.forced_simulate(st.forced, q0, q1, steps, nc)
    else:
        curve, diag = dms.simulate(st.sys, q0, q1, steps, nc)
    write_trajectory(out, curve)
    write_residuals(out, diag)
    res.metrics["max_residual"] = diag.max_residual
    res.metrics["max_newton_iters"] = int(diag.iterations.max()) if diag.iterations.size else 0
    if diag.max_residual > cfg.check("residual_tol"):
        res.fail(EXIT_SOLVER, f"residual {diag.max_residual:.3e} above residual_tol")
    if st.bundle is not None:
        J = dms.momentum_along(st.sys, st.bundle, curve)
        write_momentum(out, J)
        res.metrics["momentum_drift"] = _inf(J - J[0])
    if st.nh is not None:
        chis = diag.extra["constraints"]
        write_csv(out / "constraints.csv", ["k"] + [f"chi_{i}" for i in range(chis.shape[1])],
                  ([k, *chis[k]] for k in range(chis.shape[0])))
        res.metrics["max_constraint"] = _inf(chis)
        if _inf(chis) > cfg.check("residual_tol"):
            res.fail(EXIT_PRECONDITION, "kinematic constraints violated along the run")
    return curve


def mode_simulate(cfg, st, out, res):
    _full_run(cfg, st, out, res)


def mode_nonholonomic(cfg, st, out, res):
    _full_run(cfg, st, out, res)


def mode_reduce(cfg, st, out, res):
    curve = _full_run(cfg, st, out, res)
    rs = reduction.ReducedSystem(st.source, st.bundle)
    red = reduction.reduce_curve(rs, curve)
    eq = reduction.reduced_equivalence(rs, red)
    rc, _ = reduction.reduced_simulate(rs, red.point(0), red.taus[1], cfg.steps, cfg.newton)
    rec = reduction.reconstruct(rs, rc, curve[0])
    err = np.array([st.bundle.distance(a, b) for a, b in zip(rec, curve)])
    m, gd = st.bundle.shape_dim, st.bundle.group.dim
    write_csv(out / "reduced.csv",
              ["k"] + [f"tau_{i}" for i in range(m)] + [f"v_{j}" for j in range(gd)]
              + [f"tau_next_{i}" for i in range(m)],
              ([k, *red.taus[k], *red.v_reps[k], *red.taus[k + 1]] for k in range(len(red))))
    write_csv(out / "equivalence_report.csv",
              ["k", "phi_inf_norm", "psi_inf_norm", "reconstruction_error"],
              ([k, eq[k - 1, 0], eq[k - 1, 1], err[k]] for k in range(1, len(red))))
    res.metrics.update(max_phi=float(eq[:, 0].max()) if eq.size else 0.0,
                       max_psi=float(eq[:, 1].max()) if eq.size else 0.0,
                       max_reconstruction_error=float(err.max()))
    tol = cfg.check("equivalence_tol")
    if max(res.metrics["max_phi"], res.metrics["max_psi"], res.metrics["max_reconstruction_error"]) > tol:
        res.fail(EXIT_PRECONDITION, "reduced equivalence above equivalence_tol")


def mode_routh(cfg, st, out, res):
    curve = _full_run(cfg, st, out, res)
    setup = routh.RouthSetup(st.sys, st.bundle, cfg.mu, cfg.newton)
    routh.check_momentum(setup, curve, cfg.check("momentum_tol"))
    taus = [st.bundle.shape_of(q) for q in curve]
    rows, worst, worst_a = [], 0.0, 0.0
    grp = st.bundle.group
    for k in range(1, curve.shape[0] - 1):
        r = _inf(routh.routh_residual(setup, taus[k - 1], taus[k], taus[k + 1]))
        a = _inf(grp.log(routh.a_mu(setup, curve[k], curve[k + 1])))
        rows.append([k, r, a])
        worst, worst_a = max(worst, r), max(worst_a, a)
    write_csv(out / "equivalence_report.csv", ["k", "routh_residual_inf_norm", "a_mu_deviation"], rows)
    res.metrics.update(max_routh_residual=worst, max_a_mu_deviation=worst_a)
    if worst > cfg.check("equivalence_tol") or worst_a > cfg.check("momentum_tol"):
        res.fail(EXIT_PRECONDITION, "Routh residual or connection level above tolerance")


def mode_two_stage(cfg, st, out, res):
    rep = reduction.two_stage_check(st.sys, st.bundle, cfg.q0, cfg.q1, cfg.steps, cfg.newton, cfg.split)
    write_trajectory(out, rep["staged"])
    keys = ("staged_vs_one_shot", "staged_vs_full", "one_shot_vs_full")
    write_csv(out / "equivalence_report.csv", ["metric", "value"], ([k, rep[k]] for k in keys))
    res.metrics.update({k: rep[k] for k in keys})
    if max(rep[k] for k in keys) > cfg.check("equivalence_tol"):
        res.fail(EXIT_PRECONDITION, "staged and one-shot trajectories disagree")


def mode_diagnose(cfg, st, out, res):
    regular, conds = dms.regularity_check(st.sys, cfg.q0, cfg.q1)
    res.metrics.update(regular=bool(regular), condition_plus=conds[0], condition_minus=conds[1])
    if not regular:
        res.fail(EXIT_PRECONDITION, "system is not regular at the seed")
    rng = np.random.default_rng(cfg.seed)
    q0, dq = np.asarray(cfg.q0), np.asarray(cfg.q1) - np.asarray(cfg.q0)

    def sampler(r):
        a = q0 + 0.1 * r.standard_normal(q0.size)
        return a, a + dq + 0.01 * r.standard_normal(q0.size)

    if st.bundle is not None:
        v = reduction.check_invariance(st.sys, st.bundle, int(cfg.check("samples")), rng, sampler)
        res.metrics["invariance_violation"] = v
        if v > cfg.check("invariance_tol"):
            res.fail(EXIT_PRECONDITION, f"L_d is not invariant (violation {v:.3e})")
        if st.forced is not None:
            fv = forced.check_force_equivariance(st.forced, st.bundle, int(cfg.check("samples")), rng, sampler)
            res.metrics["force_equivariance_violation"] = fv
            if fv > cfg.check("invariance_tol"):
                res.fail(EXIT_PRECONDITION, f"forces are not equivariant (violation {fv:.3e})")
    if st.nh is not None:
        c = st.nh.check_consistency([cfg.q0, cfg.q1])
        res.metrics["distribution_consistency"] = c
        if c > 1e-10:
            res.fail(EXIT_PRECONDITION, "annihilator does not annihilate the basis")
        try:
            q2 = nonholonomic.nh_step(st.nh, cfg.q0, cfg.q1, cfg.newton)
            res.metrics["nh_regular"] = bool(nonholonomic.nh_regularity_test(st.nh, cfg.q0, cfg.q1, q2))
        except PreconditionError as exc:
            res.fail(EXIT_PRECONDITION, str(exc))


MODES = {"simulate": mode_simulate, "reduce": mode_reduce, "routh": mode_routh,
         "nonholonomic": mode_nonholonomic, "two_stage": mode_two_stage, "diagnose": mode_diagnose}


def run(cfg: RunConfig, out_dir, mode: Optional[str] = None) -> int:
    """Execute one config, writing artifacts into ``out_dir``; returns the exit code."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mode = mode or cfg.mode
    res = Outcome()
    try:
        st = build(cfg)
        MODES[mode](cfg, st, out, res)
    except (SimulationError, NoConvergenceError, SingularSystemError) as exc:
        res.fail(EXIT_SOLVER, str(exc))
    except PreconditionError as exc:
        res.fail(EXIT_PRECONDITION, str(exc))
    except DmechError as exc:
        res.fail(EXIT_SOLVER, str(exc))
    report = {"config": Path(cfg.path).name, "mode": mode, "system": cfg.system["name"],
              "steps": cfg.steps, "exit_code": res.code,
              "status": "ok" if res.code == EXIT_OK else "failed",
              "metrics": res.metrics, "messages": res.messages}
    with open(out / "report.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for m in res.messages:
        log.warning("%s: %s", cfg.path, m)
    log.info("%s finished with exit code %d", cfg.path, res.code)
    return res.code


def _run_one(args):
    path, out_dir, mode, tol, fd_step = args
    setup_logging()
    try:
        cfg = parse_config(path)
    except ConfigError as exc:
        print(f"{path}: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if tol is not None:
        cfg.newton = replace(cfg.newton, tol=tol)
    if fd_step is not None:
        cfg.scheme = replace(cfg.scheme, fd_step=fd_step)
    return run(cfg, out_dir if out_dir is not None else (cfg.out_dir or "dmech_out"), mode)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_float(s):
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def make_parser():
    p = _Parser(prog="dmech", description="Discrete mechanics runs from config files.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (("run", "run the mode named in each config"),
                        ("diagnose", "regularity and invariance diagnostics for each config")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("configs", nargs="+", help="config file(s)")
        s.add_argument("--out-dir", help="output directory (one subdirectory per config when several)")
        s.add_argument("--jobs", type=int, default=1, help="configs to run in parallel")
        s.add_argument("--tol", type=_positive_float, help="override the Newton tolerance")
        s.add_argument("--fd-step", type=_positive_float, help="override the finite-difference step")
    return p


def main(argv=None) -> int:
    setup_logging()
    args = make_parser().parse_args(argv)
    mode = "diagnose" if args.command == "diagnose" else None
    jobs = []
    for path in args.configs:
        out = args.out_dir
        if out is not None and len(args.configs) > 1:
            out = str(Path(out) / Path(path).stem)
        jobs.append((path, out, mode, args.tol, args.fd_step))
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            codes = list(ex.map(_run_one, jobs))
    else:
        codes = [_run_one(j) for j in jobs]
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
