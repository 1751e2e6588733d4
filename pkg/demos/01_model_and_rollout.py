"""Build a game, validate it, and roll out trajectories.

A two-firm advertising duopoly: the state is the market-share gap of firm
1 over firm 2, each firm's control is its advertising push.  Advertising
shifts the gap, costs effort, and each firm has a preferred gap.
"""

import numpy as np

from dyngame import constant_game, rollout, save_game, stage_cost, validate

# Market-share gap decays 10% per quarter; firm 1's push raises it, firm
# 2's lowers it.  Firm 1 wants the gap at +0.5, firm 2 at -0.5.
game = constant_game(
    A=[[0.9]],
    B=[[[0.4]], [[-0.4]]],
    Q=[[[2.0]], [[2.0]]],
    R=[[[[1.0]], [[0.0]]], [[[0.0]], [[1.0]]]],
    T=8,
    x_target=[[0.5], [-0.5]],
    names=["firm1", "firm2"],
)

report = validate(game)
print("validation:", "clean" if report.ok else report.messages())

# Hand the firms naive constant pushes and watch the gap drift.
u1 = np.full((8, 1), 0.3)
u2 = np.full((8, 1), 0.1)
traj = rollout(game, [u1, u2], x0=np.array([0.0]))

print("\nmarket-share gap under constant pushes:")
for t in range(game.horizon):
    print(f"  quarter {t}: gap {traj.states[t + 1, 0]:+.3f}  "
          f"firm1 pays {traj.stage_costs[0, t]:.3f}, "
          f"firm2 pays {traj.stage_costs[1, t]:.3f}")
print(f"totals: firm1 {traj.total_costs[0]:.3f}, firm2 {traj.total_costs[1]:.3f}")

# A single stage cost can be inspected directly.
print("\nfirm1's cost if the gap lands on its target and it spends nothing:",
      stage_cost(game, 0, 0, np.array([0.5]), [np.zeros(1), np.zeros(1)]))

# The exact same game as a JSON document (usable with the dyngame CLI).
save_game(game, "/tmp/duopoly.json")
print("\nwrote /tmp/duopoly.json  (try: dyngame compare --game /tmp/duopoly.json --x0 0)")
