"""Single-player affine-quadratic control: the n = 1 backbone.

Solves a two-state tracking problem, confirms the quadratic value function
against a realized rollout, and runs the built-in cross-check that
recomputes the laws through an algebraically regrouped recursion.
"""

import numpy as np

from dyngame import constant_game, lqr, rollout

# Inventory + backlog dynamics with a seasonal drift; one control channel.
game = constant_game(
    A=[[0.95, 0.10], [0.00, 0.80]],
    B=[[[0.5], [0.2]]],
    Q=[[[1.0, 0.0], [0.0, 0.5]]],
    R=[[[[0.2]]]],
    T=12,
    s=[0.05, -0.02],
)

sol = lqr.solve_control(game)
x0 = np.array([1.0, -0.5])

print("stage 0 law: u =", sol.laws[0][0].G, "x +", sol.laws[0][0].g)
print("predicted optimal cost:", sol.value(x0))

traj = rollout(game, sol.laws, x0)
print("realized rollout cost: ", traj.total_costs[0])

# The value coefficients satisfy the one-step recursion at every stage.
rng = np.random.default_rng(0)
x = rng.standard_normal(2)
t = 4
u = sol.laws[t][0](x)
st = game.stages[t]
x_next = st.A @ x + st.B[0] @ u + st.s
from dyngame import stage_cost
gap = sol.cost_to_go(t, x) - (stage_cost(game, 0, t, x_next, [u])
                              + sol.cost_to_go(t + 1, x_next))
print(f"one-step value recursion gap at t={t}: {gap:.2e}")

# Two independent groupings of the same algebra must agree to roundoff.
print("regrouped-recursion law deviation:", lqr.crosscheck_premultiplied(game))
