"""Desk-scale planar push task: slide a T-shaped block onto a fixed target.

Quasi-static dynamics: the circular end-effector moves at a capped speed;
when its disk penetrates the block polygon, the block translates along
the contact normal by the penetration depth and rotates according to the
torque sign and lever arm.  No momentum, no friction cone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..policy.observation import Observation, ObservationLayout
from ..rng import RngStream

__all__ = ["PushTConfig", "PlanarPushState", "PushTEnv", "coverage", "scripted_push_expert", "gen_pusht"]

# T-block geometry in the block frame: a horizontal bar plus a stem below.
BAR = (-0.08, 0.08, 0.0, 0.04)  # x0, x1, y0, y1
STEM = (-0.02, 0.02, -0.10, 0.0)
BLOCK_CIRCUMRADIUS = 0.13


def _wrap(theta: float) -> float:
    t = (theta + np.pi) % (2.0 * np.pi) - np.pi
    return float(np.pi if t == -np.pi else t)


def _rot(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class PlanarPushState:
    ee: tuple
    block_pos: tuple
    block_theta: float
    step_count: int = 0


@dataclass
class PushTConfig:
    ee_radius: float = 0.03
    ee_speed: float = 0.03
    k_rot: float = 0.03
    target_pos: tuple = (0.68, 0.68)
    target_theta: float = 0.0
    max_steps: int = 300
    # environment initialization sampling ranges
    block_pos_range: tuple = ((0.28, 0.55), (0.28, 0.55))
    block_theta_range: tuple = (-np.pi, np.pi)
    ee_pos_range: tuple = ((0.1, 0.9), (0.1, 0.9))
    workspace_margin: float = 0.12


def _points_in_block(points: np.ndarray, pos, theta: float) -> np.ndarray:
    """Boolean mask of world points inside the T polygon at the given pose."""
    q = (np.asarray(points) - np.asarray(pos)) @ _rot(theta)  # world -> frame
    masks = []
    for x0, x1, y0, y1 in (BAR, STEM):
        masks.append((q[:, 0] >= x0) & (q[:, 0] <= x1) & (q[:, 1] >= y0) & (q[:, 1] <= y1))
    return masks[0] | masks[1]


_GRID = None


def _grid_points(res: int = 256) -> np.ndarray:
    global _GRID
    if _GRID is None or _GRID.shape[0] != res * res:
        axis = (np.arange(res) + 0.5) / res
        gx, gy = np.meshgrid(axis, axis)
        _GRID = np.column_stack([gx.ravel(), gy.ravel()])
    return _GRID


def coverage(state: PlanarPushState, cfg: PushTConfig, res: int = 256) -> float:
    """Fraction of the block footprint overlapping the target footprint."""
    pts = _grid_points(res)
    in_block = _points_in_block(pts, state.block_pos, state.block_theta)
    n_block = int(in_block.sum())
    if n_block == 0:
        return 0.0
    in_target = _points_in_block(pts[in_block], cfg.target_pos, cfg.target_theta)
    return float(in_target.sum()) / n_block


def _closest_on_rect(qx: float, qy: float, rect) -> tuple:
    """((closest boundary point), (outward unit direction), signed distance).

    Negative distance means the query point is inside the rectangle.
    """
    x0, x1, y0, y1 = rect
    if not (x0 <= qx <= x1 and y0 <= qy <= y1):
        cx = min(max(qx, x0), x1)
        cy = min(max(qy, y0), y1)
        dx, dy = qx - cx, qy - cy
        dist = math.hypot(dx, dy)
        out = (dx / dist, dy / dist) if dist > 0 else (0.0, 1.0)
        return (cx, cy), out, dist
    # inside: nearest edge
    gaps = (qx - x0, x1 - qx, qy - y0, y1 - qy)
    i = min(range(4), key=gaps.__getitem__)
    if i == 0:
        c, out = (x0, qy), (-1.0, 0.0)
    elif i == 1:
        c, out = (x1, qy), (1.0, 0.0)
    elif i == 2:
        c, out = (qx, y0), (0.0, -1.0)
    else:
        c, out = (qx, y1), (0.0, 1.0)
    return c, out, -gaps[i]


class PushTEnv:
    """Single-owner mutable environment; deterministic given reset inputs."""

    def __init__(self, cfg: PushTConfig | None = None):
        self.cfg = cfg or PushTConfig()
        self.state: PlanarPushState | None = None

    ACT_DIM = 2

    def layout(self) -> ObservationLayout:
        return ObservationLayout(state_dim=6)

    def reset(self, stream: RngStream) -> PlanarPushState:
        c = self.cfg
        bx = c.block_pos_range[0][0] + (c.block_pos_range[0][1] - c.block_pos_range[0][0]) * stream.uniform()
        by = c.block_pos_range[1][0] + (c.block_pos_range[1][1] - c.block_pos_range[1][0]) * stream.uniform()
        th = c.block_theta_range[0] + (c.block_theta_range[1] - c.block_theta_range[0]) * stream.uniform()
        ex = c.ee_pos_range[0][0] + (c.ee_pos_range[0][1] - c.ee_pos_range[0][0]) * stream.uniform()
        ey = c.ee_pos_range[1][0] + (c.ee_pos_range[1][1] - c.ee_pos_range[1][0]) * stream.uniform()
        self.state = PlanarPushState(ee=(float(ex), float(ey)), block_pos=(float(bx), float(by)), block_theta=_wrap(float(th)))
        return self.state

    def set_state(self, state: PlanarPushState):
        self.state = state

    def observation(self) -> Observation:
        s = self.state
        return Observation(
            state=np.array(
                [s.ee[0], s.ee[1], s.block_pos[0], s.block_pos[1], np.cos(s.block_theta), np.sin(s.block_theta)],
                dtype=np.float32,
            )
        )

    def step(self, ee_target) -> PlanarPushState:
        self.state = push_step(self.state, ee_target, self.cfg)
        return self.state

    def coverage(self) -> float:
        return coverage(self.state, self.cfg)


def push_step(s: PlanarPushState, ee_target, cfg: PushTConfig) -> PlanarPushState:
    """One quasi-static simulation step; inputs are clamped, never raises.

    Non-finite target components are treated as "hold position".
    """
    tx, ty = float(ee_target[0]), float(ee_target[1])
    eex, eey = s.ee
    if not (math.isfinite(tx) and math.isfinite(ty)):
        tx, ty = eex, eey
    tx = min(max(tx, 0.0), 1.0)
    ty = min(max(ty, 0.0), 1.0)
    dx, dy = tx - eex, ty - eey
    dist = math.hypot(dx, dy)
    if dist > cfg.ee_speed:
        f = cfg.ee_speed / dist
        dx, dy = dx * f, dy * f
    eex, eey = eex + dx, eey + dy

    px, py = s.block_pos
    theta = s.block_theta
    c, sn = math.cos(theta), math.sin(theta)
    rx, ry = eex - px, eey - py
    qx, qy = c * rx + sn * ry, -sn * rx + c * ry  # ee center in block frame

    best = None
    for rect in (BAR, STEM):
        res = _closest_on_rect(qx, qy, rect)
        if best is None or res[2] < best[2]:
            best = res
    (cfx, cfy), (ofx, ofy), d = best[0], best[1], best[2]
    penetration = cfg.ee_radius - d  # d < 0 when ee center is inside
    if penetration > 0:
        owx, owy = c * ofx - sn * ofy, sn * ofx + c * ofy  # outward normal, world
        px, py = px - owx * penetration, py - owy * penetration
        cwx, cwy = c * cfx - sn * cfy, sn * cfx + c * cfy  # lever arm from origin
        torque = cwx * (-owy) - cwy * (-owx)
        lever = math.hypot(cwx, cwy)
        # near-central pushes (|torque| below deadband) produce pure translation
        sign = 0.0 if abs(torque) < 1e-4 else math.copysign(1.0, torque)
        theta = _wrap(theta + sign * penetration * lever / cfg.k_rot)

    m = cfg.workspace_margin
    px = min(max(px, m), 1.0 - m)
    py = min(max(py, m), 1.0 - m)
    return PlanarPushState(
        ee=(eex, eey),
        block_pos=(px, py),
        block_theta=float(theta),
        step_count=s.step_count + 1,
    )


# -- scripted expert ------------------------------------------------------
#
# Model-based receding-horizon planner: simulate a fixed candidate set of
# push maneuvers with the true dynamics and commit to the one whose final
# simulated pose cost is lowest.  Deterministic; no search randomness.

_N_DIRS = 24
_LATS = (-0.06, -0.04, -0.02, 0.0, 0.02, 0.04, 0.06)
_THETA_WEIGHT = 0.25


def _pose_cost(s: PlanarPushState, cfg: PushTConfig) -> float:
    dp = math.hypot(s.block_pos[0] - cfg.target_pos[0], s.block_pos[1] - cfg.target_pos[1])
    dth = abs(_wrap(s.block_theta - cfg.target_theta))
    return dp + _THETA_WEIGHT * dth


def _maneuver_goal(sim: PlanarPushState, ux: float, uy: float, lat: float, cfg: PushTConfig) -> tuple:
    """ee goal for one step of a (direction, lateral-offset) push maneuver.

    In the push phase the per-step advance is capped by the remaining
    translation/rotation budget so pushes taper off near the target.
    """
    px, py = sim.block_pos
    eex, eey = sim.ee
    perpx, perpy = -uy, ux
    standoff = BLOCK_CIRCUMRADIUS + cfg.ee_radius + 0.01
    ax = px - ux * standoff + perpx * lat
    ay = py - uy * standoff + perpy * lat
    behind = (eex - px) * ux + (eey - py) * uy < -0.5 * BLOCK_CIRCUMRADIUS
    if behind and math.hypot(eex - ax, eey - ay) < 0.06:
        err_along = (cfg.target_pos[0] - px) * ux + (cfg.target_pos[1] - py) * uy
        dth = abs(_wrap(sim.block_theta - cfg.target_theta))
        # rotation per unit penetration is roughly lever / k_rot with lever ~ 0.08
        budget = max(err_along, 0.0) + dth * cfg.k_rot / 0.08
        if budget < 5e-4:
            return sim.ee
        tx = px + perpx * lat  # laterally offset point that follows the block
        ty = py + perpy * lat
        dx, dy = tx - eex, ty - eey
        dn = math.hypot(dx, dy)
        if dn < 1e-9:
            return sim.ee
        step = min(cfg.ee_speed, budget) / dn
        return (eex + dx * step, eey + dy * step)
    return (ax, ay)


def _retreat_goal(sim: PlanarPushState, cfg: PushTConfig) -> tuple:
    px, py = sim.block_pos
    eex, eey = sim.ee
    ax, ay = eex - px, eey - py
    norm = math.hypot(ax, ay)
    if norm < 1e-9:
        ax, ay, norm = 0.0, -1.0, 1.0
    return (px + ax / norm * 0.25, py + ay / norm * 0.25)


def _simulate_maneuver(s: PlanarPushState, goal_fn, cfg: PushTConfig, tp: int):
    """Roll the maneuver forward with an optimal-stopping rule.

    Once a step would worsen the pose cost already achieved, the maneuver
    switches to retreating for the remainder of the horizon.
    """
    sim = s
    waypoints = np.empty((tp, 2), dtype=np.float32)
    best_cost = _pose_cost(s, cfg)
    retreating = False
    for i in range(tp):
        if not retreating:
            nxt = push_step(sim, goal_fn(sim), cfg)
            cost = _pose_cost(nxt, cfg)
            if cost <= best_cost + 1e-9:
                best_cost = min(best_cost, cost)
                sim = nxt
                waypoints[i] = sim.ee
                continue
            retreating = True
        sim = push_step(sim, _retreat_goal(sim, cfg), cfg)
        waypoints[i] = sim.ee
    return waypoints, sim


def scripted_push_expert(s: PlanarPushState, cfg: PushTConfig, tp: int) -> np.ndarray:
    """Plan tp end-effector waypoints minimizing the simulated pose cost.

    Deterministic: candidates are enumerated in a fixed order and replaying
    the returned waypoints open-loop reproduces the planner's simulation
    exactly (each waypoint is one capped-speed step from the previous).
    """
    candidates = [lambda sim: _retreat_goal(sim, cfg)]
    for i in range(_N_DIRS):
        phi = 2.0 * math.pi * i / _N_DIRS
        ux, uy = math.cos(phi), math.sin(phi)
        for lat in _LATS:
            candidates.append(lambda sim, ux=ux, uy=uy, lat=lat: _maneuver_goal(sim, ux, uy, lat, cfg))

    best_wps, best_cost = None, np.inf
    for goal_fn in candidates:
        wps, final = _simulate_maneuver(s, goal_fn, cfg, tp)
        cost = _pose_cost(final, cfg)
        if cost < best_cost:
            best_wps, best_cost = wps, cost
    return best_wps


def gen_pusht(
    n_episodes: int,
    seed: int,
    cfg: PushTConfig | None = None,
    tp: int = 16,
    ta: int = 8,
    stop_coverage: float = 0.95,
    noise: float = 0.0,
    dwell: int = 0,
):
    """Closed-loop expert demonstrations recorded at every replanning point.

    Each sample pairs the observation at a replan boundary with the
    expert's next tp waypoints; the first ta of them are then executed.
    With noise > 0, execution perturbs each waypoint by that amount of
    Gaussian exploration noise (labels stay the expert's clean plan), so
    the dataset covers states off the optimal path together with the
    expert's corrections from them.  dwell > 0 records that many extra
    replan cycles after stop_coverage is reached, so solved states (where
    the expert retreats and holds) appear in the data too.
    """
    from .dataset import DemoDataset

    if n_episodes < 1:
        raise ValueError(f"need at least one episode, got {n_episodes}")
    if not 1 <= ta <= tp:
        raise ValueError(f"need 1 <= Ta <= Tp, got Ta={ta}, Tp={tp}")
    cfg = cfg or PushTConfig()
    env = PushTEnv(cfg)
    root = RngStream(seed)
    ds = DemoDataset(task_id="pusht", seed=seed, tp=tp, act_dim=2, layout=env.layout())
    for ep in range(n_episodes):
        env.reset(root.child(ep))
        noise_stream = root.child(n_episodes + ep) if noise > 0.0 else None
        steps = 0
        dwell_left = dwell
        while steps < cfg.max_steps:
            if env.coverage() >= stop_coverage:
                if dwell_left == 0:
                    break
                dwell_left -= 1
            obs = env.observation()
            plan = scripted_push_expert(env.state, cfg, tp)
            ds.add(obs, plan)
            for waypoint in plan[:ta]:
                if noise_stream is not None:
                    waypoint = waypoint + noise * noise_stream.normal((2,))
                env.step(waypoint)
                steps += 1
                if steps >= cfg.max_steps:
                    break
    return ds
