"""Command-line front end.

Subcommands: ``validate``, ``solve``, ``simulate``, ``verify``,
``compare``.  Exit codes: 0 success, 1 validation or input failure,
2 solver failure (singular system), 3 verification failure.

Logging level comes from the DYNGAME_LOG environment variable
(error | info | debug).  Reports are written as JSON (sorted keys, so
identical configuration and seed produce byte-identical files) or as
plot-ready CSV trajectories with one row per stage:
t, x[0..p), u^i[0..m_i) per player, then per-player stage cost.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__, feedback_nash, feedback_stackelberg, lqr, verify
from . import openloop_nash, openloop_stackelberg
from .errors import DynGameError, InvalidGameError, SingularSystemError
from .game import GameSpec, Trajectory, reorder_players, rollout, validate
from .gameio import GameFormatError, load_game

log = logging.getLogger("dyngame")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_SOLVER = 2
EXIT_VERIFY = 3

SOLVERS = ("lqr", "feedback-nash", "feedback-stackelberg",
           "openloop-nash", "openloop-stackelberg")
OPEN_LOOP_SOLVERS = ("openloop-nash", "openloop-stackelberg")


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GameFormatError as exc:
        log.error("invalid game file: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InvalidGameError as exc:
        log.error("invalid input: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SingularSystemError as exc:
        log.error("solver failure: %s", exc)
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except DynGameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def _setup_logging():
    level = os.environ.get("DYNGAME_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dyngame",
        description="Solve and verify finite-horizon affine-quadratic dynamic games.",
    )
    parser.add_argument("--version", action="version", version=f"dyngame {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, solver=True, x0=True, out=True, leader=True):
        p.add_argument("--game", required=True, help="path to the JSON game definition")
        if solver:
            p.add_argument("--solver", choices=SOLVERS, default="feedback-nash")
        if x0:
            p.add_argument("--x0", help="initial state: comma-separated values or a file path")
        if out:
            p.add_argument("--out", help="output file (default: stdout)")
            p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--tol", type=float, default=1e-9,
                       help="validation tolerance (symmetry/definiteness)")
        if leader:
            p.add_argument("--leader", type=int, default=None, metavar="I",
                           help="reorder players so 1-based player I moves first "
                                "(Stackelberg leadership is positional)")

    p_val = sub.add_parser("validate", help="check a game definition")
    add_common(p_val, solver=False, x0=False, out=False, leader=False)
    p_val.set_defaults(func=cmd_validate)

    p_solve = sub.add_parser("solve", help="compute an equilibrium")
    add_common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_sim = sub.add_parser("simulate", help="solve and write the equilibrium trajectory")
    add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", help="solve and run the verification oracles")
    add_common(p_ver)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--samples", type=int, default=100,
                       help="random deviations per player")
    p_ver.add_argument("--fd-step", type=float, default=1e-5,
                       help="finite-difference step for stationarity checks")
    p_ver.set_defaults(func=cmd_verify)

    p_cmp = sub.add_parser("compare", help="run all applicable solvers side by side")
    add_common(p_cmp, solver=False)
    p_cmp.set_defaults(func=cmd_compare)

    return parser


def _parse_x0(arg: str | None, spec: GameSpec, required: bool) -> np.ndarray | None:
    if arg is None:
        if required:
            raise InvalidGameError("--x0 is required for open-loop solvers")
        return None
    if os.path.exists(arg):
        with open(arg, "r", encoding="utf-8") as fh:
            text = fh.read()
        try:
            values = json.loads(text)
        except json.JSONDecodeError:
            values = [float(v) for v in text.replace(",", " ").split()]
    else:
        values = [float(v) for v in arg.split(",") if v.strip()]
    x0 = np.asarray(values, dtype=float).ravel()
    if x0.shape != (spec.state_dim,):
        raise InvalidGameError(
            f"--x0 has {x0.size} entries, the game needs {spec.state_dim}")
    return x0


def _load_and_validate(args) -> GameSpec:
    spec = load_game(args.game)
    leader = getattr(args, "leader", None)
    if leader is not None:
        if not 1 <= leader <= spec.n_players:
            raise InvalidGameError(
                f"--leader must be in 1..{spec.n_players}, got {leader}")
        order = [leader - 1] + [i for i in range(spec.n_players) if i != leader - 1]
        spec = reorder_players(spec, order)
    report = validate(spec, tol=args.tol)
    if not report.ok:
        raise InvalidGameError(
            "game failed validation:\n  " + "\n  ".join(report.messages()),
            violations=report.messages())
    return spec


def _solve(spec: GameSpec, solver: str, x0: np.ndarray | None):
    """Dispatch to a solver; returns (solution, trajectory-or-None, pattern)."""
    if solver == "lqr":
        if spec.n_players != 1:
            raise InvalidGameError("the lqr solver requires a single-player game")
        sol = lqr.solve_control(spec)
        traj = rollout(spec, sol.laws, x0) if x0 is not None else None
        return sol, traj, verify.FEEDBACK
    if solver == "feedback-nash":
        sol = feedback_nash.solve(spec)
        traj = rollout(spec, sol.laws, x0) if x0 is not None else None
        return sol, traj, verify.FEEDBACK
    if solver == "feedback-stackelberg":
        sol = feedback_stackelberg.solve(spec)
        traj = rollout(spec, sol.laws, x0) if x0 is not None else None
        return sol, traj, verify.FEEDBACK
    if solver == "openloop-nash":
        sol = openloop_nash.solve(spec, x0)
        return sol, sol.trajectory, verify.OPEN_LOOP
    if solver == "openloop-stackelberg":
        sol = openloop_stackelberg.solve(spec, x0)
        return sol, sol.trajectory, verify.OPEN_LOOP
    raise InvalidGameError(f"unknown solver {solver!r}")


def cmd_validate(args) -> int:
    spec = load_game(args.game)
    report = validate(spec, tol=args.tol)
    if report.ok:
        print(f"ok: {spec.n_players} players, state dimension {spec.state_dim}, "
              f"{spec.horizon} stages")
        return EXIT_OK
    for message in report.messages():
        print(f"violation: {message}")
    return EXIT_INVALID


def cmd_solve(args) -> int:
    spec = _load_and_validate(args)
    x0 = _parse_x0(args.x0, spec, required=args.solver in OPEN_LOOP_SOLVERS)
    sol, traj, _ = _solve(spec, args.solver, x0)

    if args.format == "csv":
        if traj is None:
            raise InvalidGameError("csv output needs a trajectory; pass --x0")
        _write(args.out, _trajectory_csv(spec, traj))
        return EXIT_OK

    doc = {"solver": args.solver, "laws": _laws_doc(sol.laws)}
    if traj is not None:
        doc["x0"] = x0.tolist()
        doc["trajectory"] = _trajectory_doc(spec, traj)
    _write(args.out, _dumps(doc))
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _load_and_validate(args)
    x0 = _parse_x0(args.x0, spec, required=True)
    sol, traj, _ = _solve(spec, args.solver, x0)
    if traj is None:
        traj = rollout(spec, sol.laws, x0)
    out = (_trajectory_csv(spec, traj) if args.format == "csv"
           else _dumps({"solver": args.solver, "x0": x0.tolist(),
                        "trajectory": _trajectory_doc(spec, traj)}))
    _write(args.out, out)
    return EXIT_OK


def cmd_verify(args) -> int:
    spec = _load_and_validate(args)
    open_loop = args.solver in OPEN_LOOP_SOLVERS
    x0 = _parse_x0(args.x0, spec, required=open_loop)
    if x0 is None:
        x0 = np.ones(spec.state_dim)
        log.info("no --x0 given; verifying feedback solution from all-ones state")
    sol, _, pattern = _solve(spec, args.solver, x0)
    report = verify.run_verification(
        spec, sol, pattern, solver_name=args.solver, x0=x0,
        samples=args.samples, fd_step=args.fd_step, seed=args.seed)
    _write(args.out, _dumps(report.as_dict()))
    if not report.passed:
        for failure in report.failures:
            print(f"verification failure: {failure}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_compare(args) -> int:
    spec = _load_and_validate(args)
    x0 = _parse_x0(args.x0, spec, required=True)

    applicable = ["feedback-nash", "openloop-nash"]
    if spec.n_players == 1:
        zero_targets = all(
            not np.any(st.x_target[0]) and not np.any(st.u_target[0][0])
            for st in spec.stages)
        if zero_targets:
            applicable.insert(0, "lqr")
    else:
        applicable += ["feedback-stackelberg", "openloop-stackelberg"]

    rows = {}
    skipped = {}
    for name in applicable:
        try:
            if name == "feedback-stackelberg":
                # needs PSD leader cross weights; re-validate for that shape
                bad = validate(spec, tol=args.tol, for_stackelberg=True)
                if not bad.ok:
                    skipped[name] = "; ".join(bad.messages())
                    continue
            sol, traj, _ = _solve(spec, name, x0)
            if traj is None:
                traj = rollout(spec, sol.laws, x0)
            rows[name] = traj
        except SingularSystemError as exc:
            skipped[name] = str(exc)

    if args.out:
        doc = {
            "x0": x0.tolist(),
            "results": {
                name: {"total_costs": traj.total_costs.tolist(),
                       "controls": [u.tolist() for u in traj.controls]}
                for name, traj in rows.items()
            },
            "skipped": skipped,
        }
        _write(args.out, _dumps(doc))
    _print_comparison(spec, rows, skipped)
    return EXIT_OK


def _print_comparison(spec, rows, skipped):
    names = list(rows)
    if not names:
        print("no solver produced a solution")
        return
    header = "player".ljust(10) + "".join(name.rjust(24) for name in names)
    print("total costs")
    print(header)
    for i in range(spec.n_players):
        label = spec.players[i].name or f"P{i + 1}"
        line = label.ljust(10)
        for name in names:
            line += f"{rows[name].total_costs[i]:24.12g}"
        print(line)
    print()
    print("controls by stage")
    for t in range(spec.horizon):
        for i in range(spec.n_players):
            label = f"t={t} u^{i + 1}"
            line = label.ljust(10)
            for name in names:
                vals = ",".join(f"{v:.6g}" for v in rows[name].controls[i][t])
                line += vals.rjust(24)
            print(line)
    for name, reason in skipped.items():
        print(f"skipped {name}: {reason}")


# ---------------------------------------------------------------------------
# Serialization helpers


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _laws_doc(laws):
    return [
        [{"G": law.G.tolist(), "g": law.g.tolist()} for law in stage]
        for stage in laws
    ]


def _trajectory_doc(spec, traj: Trajectory):
    return {
        "states": traj.states.tolist(),
        "controls": [u.tolist() for u in traj.controls],
        "stage_costs": traj.stage_costs.tolist(),
        "total_costs": traj.total_costs.tolist(),
    }


def _trajectory_csv(spec, traj: Trajectory) -> str:
    cols = ["t"]
    cols += [f"x{k}" for k in range(spec.state_dim)]
    for i in range(spec.n_players):
        cols += [f"u{i + 1}_{k}" for k in range(spec.control_dims[i])]
    cols += [f"cost{i + 1}" for i in range(spec.n_players)]
    lines = [",".join(cols)]
    for t in range(spec.horizon):
        row = [str(t)]
        row += [repr(float(v)) for v in traj.states[t]]
        for i in range(spec.n_players):
            row += [repr(float(v)) for v in traj.controls[i][t]]
        row += [repr(float(v)) for v in traj.stage_costs[:, t]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _write(path, text: str) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    sys.exit(main())
