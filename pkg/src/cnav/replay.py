"""Preallocated FIFO transition store with uniform sampling."""

from __future__ import annotations

import numpy as np


class ReplayBuffer:
    """Ring buffer over fixed-shape transitions.

    Oldest entries are overwritten first once capacity is reached.  Sampling
    is uniform with replacement over the stored prefix and never touches
    slots that have not been written.
    """

    FIELDS = ("depth", "goal", "vel", "action", "reward",
              "next_depth", "next_goal", "next_vel", "done")

    def __init__(self, capacity: int, depth_shape, rng: np.random.Generator):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        h, w = depth_shape
        self.capacity = capacity
        self._rng = rng
        self._depth = np.zeros((capacity, h, w), dtype=np.float32)
        self._goal = np.zeros((capacity, 3), dtype=np.float32)
        self._vel = np.zeros((capacity, 3), dtype=np.float32)
        self._action = np.zeros((capacity, 3), dtype=np.float32)
        self._reward = np.zeros(capacity, dtype=np.float32)
        self._next_depth = np.zeros_like(self._depth)
        self._next_goal = np.zeros_like(self._goal)
        self._next_vel = np.zeros_like(self._vel)
        self._done = np.zeros(capacity, dtype=np.float32)
        self._n = 0
        self._head = 0

    def __len__(self) -> int:
        return self._n

    def add(self, obs, action, reward: float, next_obs, done: bool) -> None:
        i = self._head
        self._depth[i] = obs.depth
        self._goal[i] = obs.goal_body
        self._vel[i] = obs.velocity
        self._action[i] = action
        self._reward[i] = reward
        self._next_depth[i] = next_obs.depth
        self._next_goal[i] = next_obs.goal_body
        self._next_vel[i] = next_obs.velocity
        self._done[i] = 1.0 if done else 0.0
        self._head = (i + 1) % self.capacity
        self._n = min(self._n + 1, self.capacity)

    def sample(self, batch_size: int) -> dict:
        if batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {batch_size}")
        if batch_size > self._n:
            raise ValueError(
                f"requested {batch_size} transitions but only {self._n} stored")
        idx = self._rng.integers(0, self._n, size=batch_size)
        return {
            "depth": self._depth[idx],
            "goal": self._goal[idx],
            "vel": self._vel[idx],
            "action": self._action[idx],
            "reward": self._reward[idx],
            "next_depth": self._next_depth[idx],
            "next_goal": self._next_goal[idx],
            "next_vel": self._next_vel[idx],
            "done": self._done[idx],
        }
