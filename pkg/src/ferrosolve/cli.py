"""Command line driver: ``ferrosolve run|converge|check <scenario> ...``.

Exit codes: 0 success, 2 solver failure, 3 validation / configuration
failure.  The environment variable FERROSOLVE_THREADS caps the worker
threads of the underlying linear algebra libraries.
"""

import argparse
import os
import sys

import numpy as np


def _apply_thread_cap():
    cap = os.environ.get("FERROSOLVE_THREADS")
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, cap)


_apply_thread_cap()

from .errors import (DomainEscape, FerrosolveError, LinearSolveFailure,  # noqa: E402
                     MismatchedScenario, NoConvergence, NonPositiveDefinite,
                     ParseError, SingularSystem, StepSolveFailure,
                     ValidationError)
from . import io as fio                                                  # noqa: E402
from .rothe import average_loads, interpolant_gap                        # noqa: E402
from .scenario import parse_scenario                                     # noqa: E402
from .tensors import assemble_block_A, assemble_block_D                  # noqa: E402
from .young import build_measure, convergence_study, mvs_residual, uniform_partition  # noqa: E402

EXIT_OK = 0
EXIT_SOLVER = 2
EXIT_VALIDATION = 3

_VALIDATION_ERRORS = (ParseError, ValidationError, NonPositiveDefinite,
                      MismatchedScenario, DomainEscape, FileNotFoundError)
_SOLVER_ERRORS = (StepSolveFailure, LinearSolveFailure, SingularSystem,
                  NoConvergence)


def _coercivity_gate(scn, override):
    """Refuse the unregularized regime for non-coercive remanent energies."""
    f_spec = scn.build_f()
    hardening_definite = False
    if scn.hardening.any():
        hardening_definite = bool(np.linalg.eigvalsh(scn.hardening).min() > 1e-12)
    if not f_spec.coercive and not hardening_definite:
        if override:
            print("warning: remanent energy is not coercive and the hardening "
                  "map vanishes; proceeding under --override-coercivity",
                  file=sys.stderr)
            return
        raise ValidationError([
            "remanent energy family lacks the quadratic lower bound and the "
            "hardening map is zero: the unregularized existence regime does "
            "not apply; pass --override-coercivity to run anyway"])


def _run_level(scn, level, outdir, tag=""):
    grid = scn.build_grid()
    tensors = scn.build_tensors()
    system = scn.build_system(grid, tensors)
    problem = scn.build_problem(level=level, system=system)
    schedule = scn.build_schedule(grid)
    zhat = average_loads(system, schedule, problem.time_grid)
    z0 = scn.initial_state(grid)
    traj, ledger = problem.run(z0, zhat, step_tol=scn.tolerances.step_tol)

    suffix = f"_m{level}{tag}"
    fio.write_trajectory_csv(
        os.path.join(outdir, f"trajectory{suffix}.csv"), level, traj, grid.dim)
    fio.write_energy_csv(
        os.path.join(outdir, f"energy{suffix}.csv"), level, ledger)
    fio.write_certificates_csv(
        os.path.join(outdir, f"certificates{suffix}.csv"), level, traj)
    for i, t in enumerate(np.atleast_1d(scn.checkpoints)):
        n = int(round(t / traj.time_grid.h))
        n = max(0, min(n, traj.time_grid.n_steps))
        b, q = schedule.at(n * traj.time_grid.h)
        fields = system.solve_bvp(z=traj.z_nodes[n], b=b, q=q)
        fio.write_snapshot(
            os.path.join(outdir, f"snapshot{suffix}_t{i}.vtk"), grid, fields,
            title=f"state at t={n * traj.time_grid.h:.17g}")
    return problem, traj, ledger


def cmd_run(scn, args):
    outdir = fio.ensure_outdir(args.out)
    _coercivity_gate(scn, args.override_coercivity)
    level = args.level if args.level is not None else scn.level
    problem, traj, ledger = _run_level(scn, level, outdir)
    worst = max((c.residual for c in traj.certificates), default=0.0)
    print(f"level {level}: {traj.time_grid.n_steps} steps, "
          f"max certificate {worst:.3e}, outputs in {outdir}")
    return EXIT_OK if worst <= scn.tolerances.step_tol else EXIT_SOLVER


def cmd_converge(scn, args):
    outdir = fio.ensure_outdir(args.out)
    _coercivity_gate(scn, args.override_coercivity)
    if args.levels is not None:
        m0, m1 = args.levels
    else:
        m0, m1 = scn.levels
    if m1 < m0 or m0 < 1:
        raise ValidationError([f"levels: need 1 <= m0 <= m1, got {m0}..{m1}"])

    grid = scn.build_grid()
    f_spec = scn.build_f()
    g_spec = scn.build_g()
    results = []
    problems = {}
    for lv in range(m0, m1 + 1):
        problem, traj, _ = _run_level(scn, lv, outdir)
        results.append((lv, traj))
        problems[lv] = problem

    partition = uniform_partition(problems[m0].time_grid, grid,
                                  n_time_bins=2 ** m0)
    study = convergence_study(results, f_spec, grid.strain_dim,
                              grid.volumes, partition)
    fio.write_study_csv(os.path.join(outdir, "study.csv"), study)
    measure = build_measure([tr for _, tr in results], grid.volumes, partition)
    fio.write_measure_csv(os.path.join(outdir, "measure.csv"), measure)

    with open(os.path.join(outdir, "mvs.csv"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write("level,lhs,rhs,slack,gap_lhs,gap_rhs\n")
        for lv, traj in results:
            rep = mvs_residual(traj, problems[lv], f_spec, g_spec)
            gl, gr = interpolant_gap(traj, grid.volumes,
                                     p_star=problems[lv].p_exponent
                                     / (problems[lv].p_exponent - 1.0))
            fh.write(f"{lv},{rep.lhs:.17g},{rep.rhs:.17g},"
                     f"{rep.slack:.17g},{gl:.17g},{gr:.17g}\n")

    diffs = study["final_state_diffs"]
    print(f"levels {m0}..{m1}: final-state level differences "
          + " ".join(f"{d:.3e}" for d in diffs))
    return EXIT_OK


def cmd_check(scn, args):
    _coercivity_gate(scn, args.override_coercivity)
    tensors = scn.build_tensors()
    block_A = assemble_block_A(tensors)
    block_D = assemble_block_D(tensors)
    f_spec = scn.build_f()
    g_spec = scn.build_g()
    print(f"c0 = {block_A.c0:.17g}")
    print(f"lambda_min_D = {block_D.lam_min:.17g}")
    print(f"f family = {f_spec.family}, coercive = {f_spec.coercive}, "
          f"growth = {f_spec.growth_constants}")
    print(f"g family = {g_spec.family}, growth = {g_spec.growth_constants}")
    print(f"hardening definite = {bool(scn.hardening.any()) and bool(np.linalg.eigvalsh(scn.hardening).min() > 1e-12)}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ferrosolve",
        description="Quasi-static ferroelectric evolution: solve, refine, check.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", help="scenario configuration file")
        p.add_argument("--level", type=int, default=None,
                       help="dyadic time level (overrides the scenario)")
        p.add_argument("--levels", type=_levels_arg, default=None,
                       metavar="m0..m1", help="level range for studies")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--override-coercivity", action="store_true",
                       help="run even when the coercivity prerequisites fail")

    for name, fn in (("run", cmd_run), ("converge", cmd_converge),
                     ("check", cmd_check)):
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(func=fn)
    return parser


def _levels_arg(text):
    for sep in ("..", ":", "-"):
        if sep in text:
            a, b = text.split(sep, 1)
            return int(a), int(b)
    raise argparse.ArgumentTypeError(f"expected m0..m1, got {text!r}")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        scn = parse_scenario(args.scenario)
        return args.func(scn, args)
    except _VALIDATION_ERRORS as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except _SOLVER_ERRORS as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FerrosolveError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
