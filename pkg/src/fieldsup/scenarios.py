"""Scenario definitions for the four field cases, flat-file configuration,
and summary statistics over recorded traces.

Default geometry (all overridable): a 5 m radius circular path or a 20 m
straight path, two UGV lanes offset half the formation distance to either
side, three box obstacles placed on the outer lane for the "with obstacles"
cases, and the UAV flying the same route at altitude.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, fields, replace
from typing import Sequence

import numpy as np

from .dynamics import SwarmParams, UavGains, UgvGains, VirtualPoint, WorldState, ugv_state, uav_state
from .hybrid import discrete_projection
from .models import PlantLibrary, PlantParams, build_plants, spec_for_robot
from .runtime import (
    ClosedLoopConfig,
    MissionSpec,
    SupervisorRuntime,
    Trace,
    initial_runtime,
)
from .synthesis import ModularSupervisorSet, modular_synthesis


@dataclass(frozen=True)
class WaypointPath:
    """Piecewise-linear path traversed at constant speed from its own t=0."""

    points: tuple[tuple[float, float, float], ...]
    speed: float

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValueError("a path needs at least two waypoints")
        if self.speed <= 0:
            raise ValueError("path speed must be positive")
        pts = [np.asarray(p, dtype=float) for p in self.points]
        seg = [float(np.linalg.norm(b - a)) for a, b in zip(pts, pts[1:])]
        object.__setattr__(self, "_pts", pts)
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(seg)]))

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    def point_at(self, t: float) -> np.ndarray:
        s = min(max(0.0, t) * self.speed, self.length)
        idx = int(np.searchsorted(self._cum, s, side="right")) - 1
        idx = min(idx, len(self._pts) - 2)
        seg_len = self._cum[idx + 1] - self._cum[idx]
        frac = 0.0 if seg_len == 0 else (s - self._cum[idx]) / seg_len
        return self._pts[idx] + frac * (self._pts[idx + 1] - self._pts[idx])

    def finished(self, t: float) -> bool:
        return max(0.0, t) * self.speed >= self.length


def circle_waypoints(radius: float, z: float, n: int = 72, start_angle: float = 0.0,
                     ) -> tuple[tuple[float, float, float], ...]:
    pts = []
    for k in range(n + 1):
        a = start_angle + 2.0 * math.pi * k / n
        pts.append((radius * math.cos(a), radius * math.sin(a), z))
    return tuple(pts)


def line_waypoints(length: float, y: float, z: float,
                   ) -> tuple[tuple[float, float, float], ...]:
    return ((0.0, y, z), (length, y, z))


CASES = ("case1", "case2", "case3", "case4")


@dataclass(frozen=True)
class ScenarioConfig:
    """One experiment: path shape, obstacles, timing, and all tunables."""

    name: str = "case1"
    path: str = "circular"            # circular | straight
    obstacles: str = "present"        # present | absent
    duration: float = 120.0           # s
    seed: int = 0
    dt: float = 0.02                  # s (50 Hz)
    n_ugvs: int = 2

    circle_radius: float = 5.0        # m
    straight_length: float = 20.0     # m
    lane_offset: float = 0.5          # m, half the formation spacing
    obstacle_count: int = 3
    obstacle_lane_gap: float = 1.0    # m from the outer lane to each obstacle
    ugv_speed: float = 0.6            # m/s along the path
    uav_speed: float = 0.5            # m/s (slower: the survey outlasts the UGVs)
    uav_mission_time: float = 1.0     # s, upload instant
    ugv_mission_time: float = 2.0     # s

    # swarm / control parameters
    formation_distance: float = 1.0   # m
    d_min: float = 0.3
    d_max: float = 6.0
    obstacle_threshold: float = 1.5
    comm_radius: float = 3.0
    goal_tolerance: float = 0.3
    hover_height: float = 5.0
    k_formation: float = 0.25
    k_obstacle: float = 0.4
    kp: float = 1.2
    ki: float = 0.05
    kd: float = 0.0

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.path not in ("circular", "straight"):
            raise ValueError(f"unknown path kind {self.path!r}")
        if self.obstacles not in ("present", "absent"):
            raise ValueError(f"unknown obstacles flag {self.obstacles!r}")

    def swarm_params(self) -> SwarmParams:
        return SwarmParams(
            formation_distance=self.formation_distance,
            d_min=self.d_min,
            d_max=self.d_max,
            obstacle_threshold=self.obstacle_threshold,
            k_formation=self.k_formation,
            k_obstacle=self.k_obstacle,
            kp=self.kp,
            ki=self.ki,
            kd=self.kd,
            comm_radius=self.comm_radius,
        )

    def plant_params(self) -> PlantParams:
        return PlantParams(
            obstacle_threshold=self.obstacle_threshold,
            comm_radius=self.comm_radius,
            goal_tolerance=self.goal_tolerance,
            hover_height=self.hover_height,
        )


def preset(case: str) -> ScenarioConfig:
    """The four bundled experiments."""
    table = {
        "case1": ("circular", "present"),
        "case2": ("circular", "absent"),
        "case3": ("straight", "present"),
        "case4": ("straight", "absent"),
    }
    if case not in table:
        raise ValueError(f"unknown case {case!r} (want one of {', '.join(CASES)})")
    path, obstacles = table[case]
    return ScenarioConfig(name=case, path=path, obstacles=obstacles)


# -- flat key=value config files -------------------------------------------------


def write_config(cfg: ScenarioConfig) -> str:
    """Canonical text form: sorted keys, repr-stable values."""
    out = io.StringIO()
    out.write("# fieldsup scenario config (units: m, s, m/s)\n")
    for f in sorted(fields(ScenarioConfig), key=lambda f: f.name):
        out.write(f"{f.name} = {getattr(cfg, f.name)}\n")
    return out.getvalue()


def read_config(text: str) -> ScenarioConfig:
    kinds = {f.name: f.type for f in fields(ScenarioConfig)}
    values: dict = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {line_no}: expected 'key = value'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in kinds:
            raise ValueError(f"line {line_no}: unknown key {key!r}")
        kind = kinds[key]
        try:
            if kind in ("float", float):
                values[key] = float(val)
            elif kind in ("int", int):
                values[key] = int(val)
            else:
                values[key] = val
        except ValueError:
            raise ValueError(f"line {line_no}: bad value for {key!r}") from None
    return ScenarioConfig(**values)


# -- scenario assembly -------------------------------------------------------------


@dataclass
class Scenario:
    """Everything needed to run one experiment."""

    config: ScenarioConfig
    library: PlantLibrary
    synthesis: ModularSupervisorSet
    loop: ClosedLoopConfig
    world: WorldState

    def fresh_runtime(self) -> SupervisorRuntime:
        return initial_runtime(self.loop)


def synthesize_supervisors(lib: PlantLibrary) -> ModularSupervisorSet:
    """Run the modular pipeline for the bundled team (one UAV, n UGVs)."""
    subplants = [discrete_projection(lib.uav)] + [
        discrete_projection(g) for g in lib.ugvs
    ]
    specs: list = [
        (lib.specs["H_A1"], 0),
        (lib.specs["H_A2"], 0),
        (lib.specs["H_A3"], 0),
    ]
    for k in range(1, len(lib.ugvs) + 1):
        specs.extend([
            (spec_for_robot(lib.specs["H_B1"], k), k),
            (spec_for_robot(lib.specs["H_B2"], k), k),
            (spec_for_robot(lib.specs["H_B3"], k), k),
        ])
    return modular_synthesis(subplants, specs)


def _lane_paths(cfg: ScenarioConfig) -> tuple[WaypointPath, WaypointPath, WaypointPath]:
    """UAV path plus one path per UGV lane."""
    if cfg.path == "circular":
        # Survey circle plus a return leg to the central landing pad.
        uav = WaypointPath(
            circle_waypoints(cfg.circle_radius, -cfg.hover_height)
            + ((0.0, 0.0, -cfg.hover_height),),
            cfg.uav_speed)
        # Lane speeds scale with radius so both UGVs keep the same angular
        # rate and the radial spacing stays at the formation distance.
        r_out = cfg.circle_radius + cfg.lane_offset
        r_in = cfg.circle_radius - cfg.lane_offset
        outer = WaypointPath(circle_waypoints(r_out, 0.0),
                             cfg.ugv_speed * r_out / cfg.circle_radius)
        inner = WaypointPath(circle_waypoints(r_in, 0.0),
                             cfg.ugv_speed * r_in / cfg.circle_radius)
        return uav, outer, inner
    # Straight survey plus a short overshoot to a clear landing spot.
    uav = WaypointPath(
        line_waypoints(cfg.straight_length, 0.0, -cfg.hover_height)
        + ((cfg.straight_length + 2.0, 0.0, -cfg.hover_height),),
        cfg.uav_speed)
    outer = WaypointPath(line_waypoints(cfg.straight_length, cfg.lane_offset, 0.0),
                         cfg.ugv_speed)
    inner = WaypointPath(line_waypoints(cfg.straight_length, -cfg.lane_offset, 0.0),
                         cfg.ugv_speed)
    return uav, outer, inner


def _obstacle_points(cfg: ScenarioConfig) -> tuple[np.ndarray, ...]:
    """Obstacles sit beyond the outer UGV lane so only that lane's robot
    crosses the detection threshold; spacing exceeds the hysteresis band."""
    if cfg.obstacles == "absent":
        return ()
    out = []
    if cfg.path == "circular":
        r = cfg.circle_radius + cfg.lane_offset + cfg.obstacle_lane_gap
        for k in range(cfg.obstacle_count):
            a = 2.0 * math.pi * (k + 0.7) / cfg.obstacle_count
            out.append(np.array([r * math.cos(a), r * math.sin(a), 0.0]))
    else:
        y = cfg.lane_offset + cfg.obstacle_lane_gap
        for k in range(cfg.obstacle_count):
            x = cfg.straight_length * (k + 1.0) / (cfg.obstacle_count + 1.0)
            out.append(np.array([x, y, 0.0]))
    return tuple(out)


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    lib = build_plants(cfg.plant_params(), n_ugvs=cfg.n_ugvs)
    synth = synthesize_supervisors(lib)
    uav_path, outer, inner = _lane_paths(cfg)

    schedule = [MissionSpec(0, cfg.uav_mission_time, uav_path)]
    lanes = [outer, inner]
    for k in range(cfg.n_ugvs):
        schedule.append(MissionSpec(k + 1, cfg.ugv_mission_time, lanes[k % 2]))

    loop = ClosedLoopConfig(
        components=(lib.uav, *lib.ugvs),
        supervisors=tuple(synth.supervisors),
        plant_params=lib.params,
        swarm=cfg.swarm_params(),
        dt=cfg.dt,
        schedule=tuple(schedule),
        uav_gains=UavGains(),
        ugv_gains=UgvGains(nu_max=max(1.5, 2.5 * cfg.ugv_speed)),
    )

    # The UAV stages away from the UGV lanes (circle center, or behind the
    # straight start line) and transits to its route after take-off.
    if cfg.path == "circular":
        ux, uy = 0.0, 0.0
    else:
        ux, uy = -2.0, 0.0
    robots = [uav_state(ux, uy, height=0.0, mass=1.5)]
    for k in range(cfg.n_ugvs):
        path = lanes[k % 2]
        x, y, _ = _start_of(path)
        robots.append(ugv_state(x, y, heading=_initial_heading(path)))
    world = WorldState(
        time=0.0,
        robots=tuple(robots),
        vps=tuple(VirtualPoint.at(r) for r in robots),
        obstacles=_obstacle_points(cfg),
    )
    return Scenario(cfg, lib, synth, loop, world)


def _start_of(path: WaypointPath) -> tuple[float, float, float]:
    p = path.point_at(0.0)
    return float(p[0]), float(p[1]), -float(p[2])


def _initial_heading(path: WaypointPath) -> float:
    p0 = path.point_at(0.0)
    p1 = path.point_at(0.5)
    return math.atan2(float(p1[1] - p0[1]), float(p1[0] - p0[0]))


# -- summary statistics --------------------------------------------------------------


def template_of(event: str) -> str:
    return event.split("_", 1)[0]


def summarize(trace: Trace, cfg: ScenarioConfig, n_robots: int) -> dict:
    """Pure function of the trace: dwell times, event counts, distances,
    formation-band compliance, completion flags."""
    dt = cfg.dt
    dwell: dict[str, float] = {}
    for s in trace.samples:
        key = f"{s.robot}:{s.mode}"
        dwell[key] = dwell.get(key, 0.0) + dt / 1.0

    counts: dict[str, int] = {}
    for e in trace.events:
        counts[e.event] = counts.get(e.event, 0) + 1

    by_time: dict[float, dict[int, tuple[float, float, float]]] = {}
    for s in trace.samples:
        by_time.setdefault(s.time, {})[s.robot] = s.position
    min_pairwise = float("inf")
    for _, row in by_time.items():
        idxs = sorted(row)
        for a in range(len(idxs)):
            for b in range(a + 1, len(idxs)):
                pa, pb = np.array(row[idxs[a]]), np.array(row[idxs[b]])
                min_pairwise = min(min_pairwise, float(np.linalg.norm(pa - pb)))

    # Formation band over inter-UGV distance after connection plus settling.
    connect_times = [e.time for e in trace.events if template_of(e.event) == "b10"]
    band_lo, band_hi = 0.9, 1.1
    compliant = total = 0
    if connect_times and n_robots >= 3:
        t0 = min(connect_times) + 5.0
        for t, row in by_time.items():
            if t < t0 or 1 not in row or 2 not in row:
                continue
            d = float(np.linalg.norm(np.array(row[1]) - np.array(row[2])))
            total += 1
            if band_lo <= d <= band_hi:
                compliant += 1
    completion = {
        str(i): any(
            template_of(e.event) in ("a20", "b20") and e.source == str(i)
            for e in trace.events
        )
        for i in range(n_robots)
    }
    return {
        "scenario": cfg.name,
        "duration": cfg.duration,
        "mode_dwell_s": {k: round(v, 3) for k, v in sorted(dwell.items())},
        "event_counts": dict(sorted(counts.items())),
        "min_pairwise_distance_m": round(min_pairwise, 4),
        "formation_band": {
            "low_m": band_lo,
            "high_m": band_hi,
            "samples": total,
            "compliant": compliant,
            "fraction": round(compliant / total, 4) if total else None,
        },
        "mission_completed": completion,
    }
