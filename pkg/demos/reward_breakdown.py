# The navigation reward, term by term: progress toward the goal, the
# arrival bonus, proximity intrusion, and the collision override.
#
# Run: python3 demos/reward_breakdown.py

import numpy as np

from cnav.config import WorldConfig
from cnav.geometry import Box
from cnav.world import World, compute_reward

cfg = WorldConfig()

# The pure reward function first: it maps (previous distance, current
# distance, nearest depth, collided) to a goal term and an avoidance term.

print("reward components (goal term, avoidance term):")
cases = [
    ("steady approach, clear air", (2.0, 1.8, 5.0, False)),
    ("retreat, clear air", (2.0, 2.2, 5.0, False)),
    ("approach inside the safety margin", (2.0, 1.8, 0.6, False)),
    ("crossing the arrival radius", (0.8, 0.4, 5.0, False)),
    ("collision", (2.0, 1.9, 0.1, True)),
]
for label, (prev, cur, depth, hit) in cases:
    r_goal, r_avoid = compute_reward(prev, cur, depth, hit, cfg)
    print(f"  {label:36s} ({r_goal:+.2f}, {r_avoid:+.2f})")

# Now the same terms logged live from an episode: one agent flies straight
# at its goal past a wall-like box that pinches the corridor.

world = World(cfg, [Box((0.0, 1.2, 2.0), (0.4, 0.8, 2.0))],
              [[-4.0, 0.0, 2.0]], [[4.0, 0.0, 2.0]])
print("\nscripted fly-by (full forward command):")
print("  step  dist   depth_min  r_goal  r_avoid")
for step in range(1, 61):
    res = world.step([[1.0, 0.0, 0.0]])[0]
    if step % 6 == 0 or res.done:
        print(f"  {step:4d}  {res.goal_distance:5.2f}  {res.depth_min:8.2f}"
              f"  {res.r_goal:+6.2f}  {res.r_avoid:+7.2f}")
    if res.done:
        print(f"  episode ends: {res.status.value}")
        break

# The avoidance term only bites inside d_safe; the arrival bonus replaces
# progress on the final step, and termination snaps the path closed.

agent = world.agents[0]
straight = float(np.linalg.norm(agent.goal - agent.start))
print(f"\npath length {agent.path_length:.2f} m vs straight line {straight:.2f} m")
