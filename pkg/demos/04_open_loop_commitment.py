"""Open-loop equilibria: committed sequences, costates, and (in)consistency.

Open-loop players commit whole control paths at time zero.  The solver
returns the committed sequences plus the adjoint variables that certify
first-order optimality.  Open-loop Nash survives mid-game re-solving from
an on-path state; the open-loop Stackelberg leader's plan generally does
not once its commitment multipliers are reset.
"""

import numpy as np

from dyngame import openloop_nash, openloop_stackelberg, truncate

from dyngame import constant_game

game = constant_game(
    A=[[0.9, 0.2], [0.0, 0.85]],
    B=[[[0.4], [0.0]], [[0.0], [0.5]]],
    Q=[np.diag([1.0, 0.3]), np.diag([0.3, 1.0])],
    R=[[[[1.0]], [[0.2]]], [[[0.0]], [[1.0]]]],
    T=6,
)
x0 = np.array([1.0, -1.0])

nash = openloop_nash.solve(game, x0)
print("open-loop Nash committed controls (player 1):",
      np.round(nash.trajectory.controls[0].ravel(), 4))
print("KKT residuals:", {k: f"{v:.1e}" for k, v in openloop_nash.kkt_residuals(nash).items()})

costates = openloop_nash.costates(nash)
print("player 1 costate path:", np.round(costates[0, :, 0], 4))

# Weak time consistency: re-solving the tail from the on-path state x_3
# reproduces the committed tail.
s = 3
tail = openloop_nash.solve(truncate(game, s), nash.trajectory.states[s])
print(f"\nNash tail re-solve gap at stage {s}:",
      np.abs(tail.trajectory.controls[0] - nash.trajectory.controls[0][s:]).max())

# Open-loop Stackelberg: the leader's plan leans on commitment.
stack = openloop_stackelberg.solve(game, x0)
print("\nleader's committed sequence:", np.round(stack.trajectory.controls[0].ravel(), 4))
print("KKT residuals:",
      {k: f"{v:.1e}" for k, v in openloop_stackelberg.kkt_residuals(stack).items()})

inherited = openloop_stackelberg.solve(truncate(game, s), stack.trajectory.states[s],
                                       initial_mu=stack.mu[:, s])
reset = openloop_stackelberg.solve(truncate(game, s), stack.trajectory.states[s])
gap_inh = np.abs(inherited.trajectory.controls[0] - stack.trajectory.controls[0][s:]).max()
gap_rst = np.abs(reset.trajectory.controls[0] - stack.trajectory.controls[0][s:]).max()
print(f"\ntail gap, multipliers inherited: {gap_inh:.2e}   (plan holds)")
print(f"tail gap, multipliers reset:     {gap_rst:.2e}   (plan re-opens)")
