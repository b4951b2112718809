"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Workloads match what the pipeline does: one full LiDAR sweep against a
generated scene's boxes, and the IoU matrix of a frame's detections against
its ground truth (plus a larger one). Both implementations are checked for
agreement before timing.
"""

from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from infracp import _kernels_py
from infracp.geometry import boxes_to_array
from infracp.scene import Archetype, ScenarioSpec, generate
from infracp.sensing import LidarConfig

try:
    from infracp import _kernels as _compiled
except ImportError:
    _compiled = None


def sweep_workload():
    scene = generate(ScenarioSpec(Archetype.FOUR_WAY, n_actors=24, n_frames=1, seed=0))
    agent = scene.agents[0]
    pose = scene.agent_pose(agent.agent_id, 0)
    boxes = boxes_to_array(list(scene.frames[0].actors) + list(scene.occluders))
    dirs = LidarConfig.for_agent(agent).directions()
    c, s = np.cos(pose.yaw), np.sin(pose.yaw)
    world_dirs = np.column_stack([c * dirs[:, 0] - s * dirs[:, 1], s * dirs[:, 0] + c * dirs[:, 1], dirs[:, 2]])
    origin = np.array([pose.x, pose.y, pose.z])
    kw = dict(exclude=agent.actor_index if agent.actor_index is not None else -1, ground=True, max_range=120.0)
    return f"cast_rays {len(dirs)} rays x {len(boxes)} boxes", (origin, world_dirs, boxes), kw


def iou_workload(n, m, seed):
    rng = np.random.default_rng(seed)

    def rows(k):
        return np.column_stack([rng.uniform(-40, 40, (k, 2)), rng.uniform(1.5, 2.6, k), rng.uniform(3.5, 12, k),
                                rng.uniform(-np.pi, np.pi, k)])

    return f"iou_matrix {n} x {m}", (rows(n), rows(m)), {}


def bench(fn, args, kw, repeat):
    fn(*args, **kw)
    return min(timeit.repeat(lambda: fn(*args, **kw), number=1, repeat=repeat))


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    workloads = [sweep_workload(), iou_workload(12, 15, 1), iou_workload(200, 200, 2)]
    print(f"{'workload':<40} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}")
    for name, wargs, kw in workloads:
        fn = "cast_rays" if name.startswith("cast") else "iou_matrix"
        py = getattr(_kernels_py, fn)
        t_py = bench(py, wargs, kw, args.repeat)
        if _compiled is None:
            print(f"{name:<40} {t_py * 1e3:>10.2f} {'n/a':>10} {'':>8}")
            continue
        cy = getattr(_compiled, fn)
        a, b = py(*wargs, **kw), cy(*wargs, **kw)
        if fn == "cast_rays":
            fin = np.isfinite(a[0])
            assert np.array_equal(a[1], b[1]) and np.allclose(a[0][fin], b[0][fin], atol=1e-9)
        else:
            assert np.allclose(a, b, atol=1e-12)
        t_cy = bench(cy, wargs, kw, args.repeat)
        print(f"{name:<40} {t_py * 1e3:>10.2f} {t_cy * 1e3:>10.2f} {t_py / t_cy:>7.1f}x")
    if _compiled is None:
        print("compiled extension not built; only the fallback was timed", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
