"""Solver-independent verification oracles.

Every check here judges a solution only through its output object (laws or
control sequences) plus the plain game machinery: rollout, stage costs,
re-solves of reduced or truncated games.  None of them re-uses the
internal recursion of the solver under test to certify itself.

Randomness is reproducible across platforms: all sampling uses numpy's
PCG64 generator (64-bit state) seeded explicitly, via
``np.random.Generator(np.random.PCG64(seed))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import feedback_nash, feedback_stackelberg, lqr, openloop_nash, openloop_stackelberg
from .errors import InvalidGameError
from .feedback_nash import StageFeedbackSolution
from .feedback_stackelberg import FeedbackStackelbergSolution
from .game import (GameSpec, fold_player_controls, rollout, stage_cost,
                   truncate)
from .lqr import ControlSolution
from .openloop_nash import OpenLoopNashSolution
from .openloop_stackelberg import OpenLoopStackelbergSolution

OPEN_LOOP = "open-loop"
FEEDBACK = "feedback"

# Default acceptance thresholds for the assembled report.
STATIONARITY_TOL = 1e-6
DEVIATION_TOL = -1e-8
STC_TOL = 1e-10
WTC_TOL = 1e-9
PSD_TOL = -1e-9


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def central_gradient(f, z: np.ndarray, h: float) -> np.ndarray:
    """Central-difference gradient of a scalar function, component-wise.

    Truncation error is O(h^2); exact (up to roundoff) on quadratics.
    """
    z = np.asarray(z, dtype=float)
    grad = np.empty_like(z)
    for k in range(z.size):
        zp = z.copy(); zp[k] += h
        zm = z.copy(); zm[k] -= h
        grad[k] = (f(zp) - f(zm)) / (2.0 * h)
    return grad


def _check_pattern(solution, pattern: str) -> None:
    is_ol = isinstance(solution, (OpenLoopNashSolution, OpenLoopStackelbergSolution))
    if pattern == OPEN_LOOP and not is_ol:
        raise InvalidGameError("open-loop pattern given a feedback solution")
    if pattern == FEEDBACK and is_ol:
        raise InvalidGameError("feedback pattern given an open-loop solution")
    if pattern not in (OPEN_LOOP, FEEDBACK):
        raise InvalidGameError(f"unknown information pattern {pattern!r}")


# ---------------------------------------------------------------------------
# Stationarity


def stationarity(spec: GameSpec, solution, pattern: str, h: float = 1e-5,
                 x0: np.ndarray | None = None) -> dict[int, float]:
    """Per-player max first-order residual, by central finite differences.

    Open loop: the residual of player i differentiates its total cost over
    the whole control sequence, the other sequences held fixed; for a
    Stackelberg leader the followers re-best-respond inside the
    differentiated map (that is the leader's actual objective).
    Feedback: per-stage derivatives of the cost-to-go along the
    equilibrium path, other players acting through their laws, with the
    Stackelberg leader differentiated through the followers' stage
    reactions.
    """
    _check_pattern(solution, pattern)
    if pattern == OPEN_LOOP:
        return _stationarity_open_loop(spec, solution, h)
    return _stationarity_feedback(spec, solution, h, x0)


def _stationarity_open_loop(spec, sol, h):
    T, n = spec.horizon, spec.n_players
    controls = [u.copy() for u in sol.trajectory.controls]
    x0 = sol.x0
    is_stackelberg = isinstance(sol, OpenLoopStackelbergSolution)

    out: dict[int, float] = {}
    for i in range(n):
        if is_stackelberg and i == 0:
            def cost(u_flat):
                u1 = u_flat.reshape(T, spec.control_dims[0])
                reduced = fold_player_controls(spec, 0, u1)
                reaction = openloop_nash.solve(reduced, x0)
                full = [u1] + [reaction.trajectory.controls[k] for k in range(n - 1)]
                return rollout(spec, full, x0).total_costs[0]
        else:
            def cost(u_flat, i=i):
                us = [controls[j] if j != i else u_flat.reshape(T, spec.control_dims[i])
                      for j in range(n)]
                return rollout(spec, us, x0).total_costs[i]
        grad = central_gradient(cost, controls[i].ravel(), h)
        out[i] = float(np.abs(grad).max(initial=0.0))
    return out


def _tail_cost(spec, laws, t, x, player, stage_controls):
    """Cost of stages t..T-1 from pre-decision state x, with stage-t
    controls given explicitly and later stages played by the laws."""
    st = spec.stages[t]
    x_next = st.A @ x + st.s
    for j in range(spec.n_players):
        x_next = x_next + st.B[j] @ stage_controls[j]
    total = stage_cost(spec, player, t, x_next, stage_controls)
    xx = x_next
    for tau in range(t + 1, spec.horizon):
        st = spec.stages[tau]
        us = [laws[tau][j](xx) for j in range(spec.n_players)]
        x_after = st.A @ xx + st.s
        for j in range(spec.n_players):
            x_after = x_after + st.B[j] @ us[j]
        total += stage_cost(spec, player, tau, x_after, us)
        xx = x_after
    return total


def _stationarity_feedback(spec, sol, h, x0):
    if x0 is None:
        raise InvalidGameError("feedback stationarity needs an initial state x0")
    x0 = np.asarray(x0, dtype=float)
    T, n = spec.horizon, spec.n_players
    laws = sol.laws
    states = rollout(spec, laws, x0).states
    is_stackelberg = isinstance(sol, FeedbackStackelbergSolution)

    out = {i: 0.0 for i in range(n)}
    for t in range(T):
        x = states[t]
        base = [laws[t][j](x) for j in range(n)]
        for i in range(n):
            if is_stackelberg and i == 0:
                def cost(u1, t=t, x=x):
                    us = [np.asarray(u1)] + sol.stage_reaction(t, x, u1)
                    return _tail_cost(spec, laws, t, x, 0, us)
            else:
                def cost(ui, t=t, x=x, i=i, base=base):
                    us = [base[j] if j != i else np.asarray(ui) for j in range(n)]
                    return _tail_cost(spec, laws, t, x, i, us)
            grad = central_gradient(cost, base[i], h)
            out[i] = max(out[i], float(np.abs(grad).max(initial=0.0)))
    return out


# ---------------------------------------------------------------------------
# Sampled deviation gaps


def deviation_gap(spec: GameSpec, solution, pattern: str, player: int,
                  samples: int = 100, magnitude: float = 1e-3, seed: int = 0,
                  x0: np.ndarray | None = None) -> float:
    """Min over random unilateral deviations of (deviated - equilibrium) cost.

    Negative values beyond tolerance are the failure signal: the player
    found an improvement.  Open loop perturbs the committed sequence;
    feedback perturbs the player's law coefficients and re-rolls the
    trajectory (all other players keep acting through their laws).
    """
    _check_pattern(solution, pattern)
    rng = _rng(seed)
    if pattern == OPEN_LOOP:
        return _deviation_open_loop(spec, solution, player, samples, magnitude, rng)
    return _deviation_feedback(spec, solution, player, samples, magnitude, rng, x0)


def _unit(rng, shape):
    d = rng.standard_normal(shape)
    norm = np.linalg.norm(d)
    return d if norm == 0 else d / norm


def _deviation_open_loop(spec, sol, player, samples, magnitude, rng):
    controls = sol.trajectory.controls
    base_cost = sol.trajectory.total_costs[player]
    scale = magnitude * max(1.0, np.linalg.norm(controls[player]))
    worst = np.inf
    for _ in range(samples):
        delta = scale * _unit(rng, controls[player].shape)
        us = [controls[j] if j != player else controls[player] + delta
              for j in range(spec.n_players)]
        worst = min(worst, rollout(spec, us, sol.x0).total_costs[player] - base_cost)
    return float(worst)


def _perturbed_laws(laws, player, dG, dg):
    out = []
    for t, stage in enumerate(laws):
        row = list(stage)
        law = row[player]
        row[player] = type(law)(law.G + dG[t], law.g + dg[t])
        out.append(row)
    return out


def _deviation_feedback(spec, sol, player, samples, magnitude, rng, x0):
    if x0 is None:
        raise InvalidGameError("feedback deviation sampling needs an initial state x0")
    x0 = np.asarray(x0, dtype=float)
    laws = sol.laws
    base_cost = rollout(spec, laws, x0).total_costs[player]
    T, p, m = spec.horizon, spec.state_dim, spec.control_dims[player]
    law_norm = max(1.0, max(np.abs(l[player].G).max(initial=0.0) for l in laws))
    scale = magnitude * law_norm
    worst = np.inf
    for _ in range(samples):
        flat = _unit(rng, T * (m * p + m)) * scale
        dG = flat[:T * m * p].reshape(T, m, p)
        dg = flat[T * m * p:].reshape(T, m)
        dev_cost = rollout(spec, _perturbed_laws(laws, player, dG, dg), x0).total_costs[player]
        worst = min(worst, dev_cost - base_cost)
    return float(worst)


def leader_gap(spec: GameSpec, solution, pattern: str, samples: int = 50,
               magnitude: float = 1e-3, seed: int = 0,
               x0: np.ndarray | None = None) -> float:
    """Min leader-cost gap over random leader deviations, followers
    re-best-responding.

    Open loop: each deviated leader sequence is folded into the drift and
    the followers' open-loop Nash game is re-solved.  Feedback: the
    deviated leader law is played with followers reacting stagewise
    through the solution's reaction maps.
    """
    _check_pattern(solution, pattern)
    rng = _rng(seed)
    if pattern == OPEN_LOOP:
        if not isinstance(solution, OpenLoopStackelbergSolution):
            raise InvalidGameError("leader gap needs a Stackelberg solution")
        return _leader_gap_open_loop(spec, solution, samples, magnitude, rng)
    if not isinstance(solution, FeedbackStackelbergSolution):
        raise InvalidGameError("leader gap needs a Stackelberg solution")
    return _leader_gap_feedback(spec, solution, samples, magnitude, rng, x0)


def leader_cost_open_loop(spec: GameSpec, u_leader: np.ndarray, x0: np.ndarray) -> float:
    """Leader's cost for a committed sequence, followers re-best-responding
    (their open-loop Nash game with the leader's controls folded into the
    drift)."""
    u_leader = np.atleast_2d(np.asarray(u_leader, dtype=float))
    reduced = fold_player_controls(spec, 0, u_leader)
    reaction = openloop_nash.solve(reduced, x0)
    full = [u_leader] + [reaction.trajectory.controls[k]
                         for k in range(spec.n_players - 1)]
    return float(rollout(spec, full, x0).total_costs[0])


def _leader_gap_open_loop(spec, sol, samples, magnitude, rng):
    u1 = sol.trajectory.controls[0]
    base = leader_cost_open_loop(spec, u1, sol.x0)
    scale = magnitude * max(1.0, np.linalg.norm(u1))
    worst = np.inf
    for _ in range(samples):
        delta = scale * _unit(rng, u1.shape)
        worst = min(worst, leader_cost_open_loop(spec, u1 + delta, sol.x0) - base)
    return float(worst)


def _leader_cost_feedback(spec, sol, leader_laws, x0):
    """Leader's realized cost when it plays ``leader_laws`` and followers
    react stagewise through the solution's reaction maps."""
    x = np.asarray(x0, dtype=float)
    total = 0.0
    for t in range(spec.horizon):
        st = spec.stages[t]
        u1 = leader_laws[t](x)
        us = [u1] + sol.stage_reaction(t, x, u1)
        x_next = st.A @ x + st.s
        for j in range(spec.n_players):
            x_next = x_next + st.B[j] @ us[j]
        total += stage_cost(spec, 0, t, x_next, us)
        x = x_next
    return total


def _leader_gap_feedback(spec, sol, samples, magnitude, rng, x0):
    if x0 is None:
        raise InvalidGameError("feedback leader gap needs an initial state x0")
    x0 = np.asarray(x0, dtype=float)
    laws = sol.laws
    base_laws = [l[0] for l in laws]
    base = _leader_cost_feedback(spec, sol, base_laws, x0)
    T, p, m = spec.horizon, spec.state_dim, spec.control_dims[0]
    scale = magnitude * max(1.0, max(np.abs(l.G).max(initial=0.0) for l in base_laws))
    worst = np.inf
    for _ in range(samples):
        flat = _unit(rng, T * (m * p + m)) * scale
        dG = flat[:T * m * p].reshape(T, m, p)
        dg = flat[T * m * p:].reshape(T, m)
        dev_laws = [type(l)(l.G + dG[t], l.g + dg[t]) for t, l in enumerate(base_laws)]
        worst = min(worst, _leader_cost_feedback(spec, sol, dev_laws, x0) - base)
    return float(worst)


# ---------------------------------------------------------------------------
# Time consistency


@dataclass(frozen=True)
class TimeConsistency:
    """Outcome of truncate-and-re-solve checks.

    ``verdict`` is the property the solution class is expected to satisfy:
    feedback solutions are strongly time consistent (tail laws match for
    *any* truncation state), open-loop Nash weakly so (tail matches when
    re-solved from the on-path state), and open-loop Stackelberg only
    consistent when the truncation inherits the multiplier state --
    ``mu_reset_deviation`` records how far a zero-multiplier re-solve
    drifts (reported, not asserted)."""

    verdict: str                      # "STC" or "WTC"
    tail_deviation: float
    mu_reset_deviation: float | None = None


def time_consistency(spec: GameSpec, solution, pattern: str) -> TimeConsistency:
    _check_pattern(solution, pattern)
    if isinstance(solution, ControlSolution):
        return _tc_control(spec, solution)
    if isinstance(solution, FeedbackStackelbergSolution):
        return _tc_feedback(spec, solution, feedback_stackelberg.solve)
    if isinstance(solution, StageFeedbackSolution):
        return _tc_feedback(spec, solution, feedback_nash.solve)
    if isinstance(solution, OpenLoopStackelbergSolution):
        return _tc_open_loop_stackelberg(spec, solution)
    return _tc_open_loop_nash(spec, solution)


def _tc_control(spec, sol):
    worst = 0.0
    for s in range(1, spec.horizon):
        tail = lqr.solve_control(truncate(spec, s))
        for dt in range(spec.horizon - s):
            worst = max(worst,
                        np.abs(tail.gains[dt] - sol.gains[s + dt]).max(initial=0.0),
                        np.abs(tail.offsets[dt] - sol.offsets[s + dt]).max(initial=0.0))
    return TimeConsistency(verdict="STC", tail_deviation=float(worst))


def _tc_feedback(spec, sol, solver):
    worst = 0.0
    for s in range(1, spec.horizon):
        tail = solver(truncate(spec, s))
        for dt in range(spec.horizon - s):
            for i in range(spec.n_players):
                worst = max(worst,
                            np.abs(tail.gains[dt][i] - sol.gains[s + dt][i]).max(initial=0.0),
                            np.abs(tail.offsets[dt][i] - sol.offsets[s + dt][i]).max(initial=0.0))
    return TimeConsistency(verdict="STC", tail_deviation=float(worst))


def _tc_open_loop_nash(spec, sol):
    worst = 0.0
    for s in range(1, spec.horizon):
        tail = openloop_nash.solve(truncate(spec, s), sol.trajectory.states[s])
        for i in range(spec.n_players):
            worst = max(worst, np.abs(tail.trajectory.controls[i]
                                      - sol.trajectory.controls[i][s:]).max(initial=0.0))
    return TimeConsistency(verdict="WTC", tail_deviation=float(worst))


def _tc_open_loop_stackelberg(spec, sol):
    worst_inherit = 0.0
    worst_reset = 0.0
    for s in range(1, spec.horizon):
        tail_spec = truncate(spec, s)
        x_s = sol.trajectory.states[s]
        inherit = openloop_stackelberg.solve(tail_spec, x_s, initial_mu=sol.mu[:, s])
        reset = openloop_stackelberg.solve(tail_spec, x_s)
        for i in range(spec.n_players):
            tail_u = sol.trajectory.controls[i][s:]
            worst_inherit = max(worst_inherit,
                                np.abs(inherit.trajectory.controls[i] - tail_u).max(initial=0.0))
            worst_reset = max(worst_reset,
                              np.abs(reset.trajectory.controls[i] - tail_u).max(initial=0.0))
    return TimeConsistency(verdict="WTC", tail_deviation=float(worst_inherit),
                           mu_reset_deviation=float(worst_reset))


# ---------------------------------------------------------------------------
# Definiteness monitoring


@dataclass(frozen=True)
class MonitorEntry:
    stage: int
    name: str
    min_eigenvalue: float
    symmetric: bool
    asserted: bool  # part of the PSD assertion, or recorded only


@dataclass(frozen=True)
class DefinitenessLog:
    entries: tuple[MonitorEntry, ...]

    @property
    def ok(self) -> bool:
        return all(e.min_eigenvalue >= PSD_TOL for e in self.entries if e.asserted)

    def violations(self) -> list[MonitorEntry]:
        return [e for e in self.entries if e.asserted and e.min_eigenvalue < PSD_TOL]


def definiteness_monitor(solution) -> DefinitenessLog:
    """Record the spectra of the solution's quadratic coefficient sequences.

    The PSD assertion covers the matrices with a structural symmetry and
    semidefiniteness guarantee: feedback value coefficients Z^i (any n,
    given PSD cross weights) and the single-player open-loop costate
    coefficient.  Multi-player open-loop costate matrices are genuinely
    non-symmetric (the transition operator mixes all players' costates)
    and carry no definiteness guarantee; their symmetric-part spectra are
    recorded for inspection only.
    """
    entries: list[MonitorEntry] = []

    def record(mat, stage, name, asserted):
        sym_gap = np.abs(mat - mat.T).max(initial=0.0)
        symmetric = bool(sym_gap <= 1e-9 * (1.0 + np.abs(mat).max(initial=0.0)))
        eig = float(np.linalg.eigvalsh(0.5 * (mat + mat.T)).min())
        entries.append(MonitorEntry(stage=stage, name=name, min_eigenvalue=eig,
                                    symmetric=symmetric, asserted=bool(asserted and symmetric)))

    if isinstance(solution, ControlSolution):
        for t in range(solution.Z.shape[0]):
            record(solution.Z[t], t, "Z", asserted=True)
    elif isinstance(solution, StageFeedbackSolution):
        n, horizon = solution.Z.shape[0], solution.Z.shape[1] - 1
        for i in range(n):
            for t in range(horizon + 1):
                record(solution.Z[i, t], t, f"Z[{i}]", asserted=True)
    elif isinstance(solution, OpenLoopNashSolution):
        n, horizon = solution.M.shape[0], solution.M.shape[1] - 1
        for i in range(n):
            for t in range(horizon + 1):
                record(solution.M[i, t], t, f"M[{i}]", asserted=(n == 1))
    elif isinstance(solution, OpenLoopStackelbergSolution):
        nf, horizon = solution.Mx.shape[0], solution.Mx.shape[1] - 1
        for t in range(horizon + 1):
            record(solution.Lx[t], t, "L_x", asserted=False)
            for k in range(nf):
                record(solution.Mx[k, t], t, f"M_x[{k}]", asserted=False)
    else:
        raise InvalidGameError(f"cannot monitor solution type {type(solution).__name__}")
    return DefinitenessLog(entries=tuple(entries))


# ---------------------------------------------------------------------------
# Assembled report


@dataclass
class VerificationReport:
    solver: str
    pattern: str
    seed: int
    samples: int
    fd_step: float
    magnitude: float
    stationarity: dict[int, float] = field(default_factory=dict)
    deviation_gaps: dict[int, float] = field(default_factory=dict)
    leader_gap: float | None = None
    time_consistency: TimeConsistency | None = None
    definiteness: DefinitenessLog | None = None
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict:
        tc = self.time_consistency
        dlog = self.definiteness
        return {
            "solver": self.solver,
            "pattern": self.pattern,
            "seed": self.seed,
            "samples": self.samples,
            "fd_step": self.fd_step,
            "magnitude": self.magnitude,
            "stationarity": {str(k): v for k, v in sorted(self.stationarity.items())},
            "deviation_gaps": {str(k): v for k, v in sorted(self.deviation_gaps.items())},
            "leader_gap": self.leader_gap,
            "time_consistency": None if tc is None else {
                "verdict": tc.verdict,
                "tail_deviation": tc.tail_deviation,
                "mu_reset_deviation": tc.mu_reset_deviation,
            },
            "definiteness": None if dlog is None else {
                "ok": dlog.ok,
                "entries": [
                    {"stage": e.stage, "name": e.name,
                     "min_eigenvalue": e.min_eigenvalue,
                     "symmetric": e.symmetric, "asserted": e.asserted}
                    for e in dlog.entries
                ],
            },
            "failures": list(self.failures),
            "passed": self.passed,
        }


def run_verification(spec: GameSpec, solution, pattern: str, solver_name: str,
                     x0: np.ndarray | None = None, samples: int = 100,
                     leader_samples: int = 50, fd_step: float = 1e-5,
                     magnitude: float = 1e-3, seed: int = 0) -> VerificationReport:
    """Run the full oracle battery on one solution and collect a report."""
    report = VerificationReport(solver=solver_name, pattern=pattern, seed=seed,
                                samples=samples, fd_step=fd_step, magnitude=magnitude)
    is_stackelberg = isinstance(
        solution, (FeedbackStackelbergSolution, OpenLoopStackelbergSolution))

    report.stationarity = stationarity(spec, solution, pattern, h=fd_step, x0=x0)
    for i, r in report.stationarity.items():
        if r > STATIONARITY_TOL:
            report.failures.append(
                f"stationarity residual of player {i} is {r:.3e} > {STATIONARITY_TOL:.0e}")

    for i in range(spec.n_players):
        if is_stackelberg and i == 0:
            continue
        gap = deviation_gap(spec, solution, pattern, i, samples=samples,
                            magnitude=magnitude, seed=seed + i, x0=x0)
        report.deviation_gaps[i] = gap
        if gap < DEVIATION_TOL:
            report.failures.append(
                f"player {i} improved by {-gap:.3e} under a sampled deviation")

    if is_stackelberg:
        report.leader_gap = leader_gap(spec, solution, pattern,
                                       samples=leader_samples, magnitude=magnitude,
                                       seed=seed + spec.n_players, x0=x0)
        if report.leader_gap < DEVIATION_TOL:
            report.failures.append(
                f"leader improved by {-report.leader_gap:.3e} under a sampled deviation")

    report.time_consistency = time_consistency(spec, solution, pattern)
    tc = report.time_consistency
    tol = STC_TOL if tc.verdict == "STC" else WTC_TOL
    if tc.tail_deviation > tol:
        report.failures.append(
            f"{tc.verdict} tail deviation {tc.tail_deviation:.3e} > {tol:.0e}")

    report.definiteness = definiteness_monitor(solution)
    for e in report.definiteness.violations():
        report.failures.append(
            f"{e.name} at stage {e.stage} has min eigenvalue {e.min_eigenvalue:.3e}")

    return report
