# The simulated depth camera: analytic first-hit distances for spheres,
# boxes, cylinders, and prisms, rendered as a per-pixel depth frame.
#
# Run: python3 demos/depth_camera.py

import time

import numpy as np

from cnav.config import WorldConfig
from cnav.geometry import Box, Cylinder, Sphere
from cnav.world import DepthCamera, World

cfg = WorldConfig()  # 32x24 pixels over a 90x60 degree field of view
cam = DepthCamera(cfg)

# A small furnished room: a pillar, a crate, and a ball, viewed from the
# west wall looking east.

shapes = [
    Cylinder((4.0, -1.5, 0.0), 0.4, 4.0),
    Box((5.0, 1.5, 1.0), (0.6, 0.6, 1.0)),
    Sphere((3.0, 0.5, 1.8), 0.5),
]
position = np.array([-2.0, 0.0, 1.6])
frame = cam.render(position, 0.0, shapes, (np.array(cfg.bounds_lo),
                                           np.array(cfg.bounds_hi)))

# Nearer is darker: print the frame as ASCII shades.

palette = "@%#*+=-:. "
levels = np.clip((frame / cfg.depth_max * (len(palette) - 1)), 0,
                 len(palette) - 1).astype(int)
print("depth frame (nearer = darker):")
for row in levels:
    print("  " + "".join(palette[v] for v in row))
print(f"nearest pixel: {frame.min():.2f} m, farthest: {frame.max():.2f} m")

# Misses clamp to depth_max, so an empty view is a uniform far plane.

empty = cam.render(position, np.pi, [], None)
print(f"\nlooking into open space: every pixel {empty.min():.1f} m")

# Each agent sees the others as spheres of the body radius; the frame is
# what the policy actually consumes.

world = World(cfg, shapes, [[-2.0, 0.0, 1.6], [2.0, 0.0, 1.6]],
              [[6.0, 0.0, 1.6], [-6.0, 0.0, 1.6]])
through_agent = world.render_depth(0)
print(f"with a second agent ahead, center pixel drops to "
      f"{through_agent[12, 16]:.2f} m")

# Rendering must stay fast enough for training rollouts.

t0 = time.perf_counter()
n = 200
for _ in range(n):
    cam.render(position, 0.0, shapes, world.bounds)
per_frame = (time.perf_counter() - t0) / n * 1e3
print(f"\nrender time: {per_frame:.2f} ms per {cfg.depth_width}x{cfg.depth_height} frame")
