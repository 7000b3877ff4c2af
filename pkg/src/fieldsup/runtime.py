"""Closed-loop executor: the event generator feeding plant observations to
the supervisor layer (information channel) and the control map translating
supervisor decisions back into continuous commands (control logic channel).

Per tick: detected uncontrollable events are processed first (ordered by
robot index then event id), then at most one controllable action fires per
robot, then the virtual points and robot dynamics advance one step and the
trace records are appended. Everything is deterministic given the same
configuration and mission schedule.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .automata import Fsa
from .dynamics import (
    SimulationFault,
    SwarmParams,
    Trajectory,
    UavGains,
    UgvGains,
    VirtualPoint,
    WorldState,
    robot_track_vp,
    vp_step,
)
from .hybrid import HybridAutomaton, discrete_projection
from .models import SCALARS, PlantParams

TRACE_FORMAT = "fieldsup-trace"
TRACE_VERSION = 1
CSV_COLUMNS = "time,robot,px,py,pz,vx,vy,vz,mode"

MISSION_NONE = "none"
MISSION_PENDING = "pending"
MISSION_ACTIVE = "active"
MISSION_FINISHED = "finished"


class ModelViolation(RuntimeError):
    """An event fired that the plant model does not permit."""


class ExecutorBug(RuntimeError):
    """The executor tried to fire a controllable event a supervisor disables."""


@dataclass(frozen=True)
class EventObservation:
    time: float
    event: str
    source: str              # robot index as string, or "system"
    cause: dict[str, float] = field(default_factory=dict)

    def as_json(self) -> str:
        return json.dumps(
            {"t": round(self.time, 6), "event": self.event, "source": self.source,
             "cause": {k: round(v, 6) for k, v in self.cause.items()}},
            sort_keys=True,
        )


@dataclass(frozen=True)
class ContinuousSample:
    time: float
    robot: int
    position: tuple[float, float, float]
    velocity: tuple[float, float, float]
    mode: str

    def as_csv(self) -> str:
        px, py, pz = self.position
        vx, vy, vz = self.velocity
        return (f"{self.time:.6f},{self.robot},{px:.9f},{py:.9f},{pz:.9f},"
                f"{vx:.9f},{vy:.9f},{vz:.9f},{self.mode}")


@dataclass
class Trace:
    samples: list[ContinuousSample] = field(default_factory=list)
    events: list[EventObservation] = field(default_factory=list)

    def event_ids(self) -> list[str]:
        return [e.event for e in self.events]

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# {TRACE_FORMAT} v{TRACE_VERSION} continuous\n")
            fh.write(CSV_COLUMNS + "\n")
            for s in self.samples:
                fh.write(s.as_csv() + "\n")

    def write_events(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"format": TRACE_FORMAT, "version": TRACE_VERSION,
                                 "kind": "events"}) + "\n")
            for e in self.events:
                fh.write(e.as_json() + "\n")


def read_events(path) -> list[EventObservation]:
    """Parse an events JSONL file; raises ValueError with the line number."""
    out: list[EventObservation] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {line_no}: bad JSON ({exc})") from None
            if line_no == 1 and row.get("format") == TRACE_FORMAT:
                continue
            try:
                out.append(EventObservation(
                    time=float(row["t"]), event=str(row["event"]),
                    source=str(row["source"]), cause=dict(row.get("cause", {})),
                ))
            except (KeyError, TypeError) as exc:
                raise ValueError(f"line {line_no}: missing field ({exc})") from None
    for prev, nxt in zip(out, out[1:]):
        if nxt.time < prev.time:
            raise ValueError("events out of time order")
    return out


@dataclass(frozen=True)
class MissionSpec:
    """One scheduled mission: upload time plus the trajectory to follow."""

    robot: int
    receive_time: float
    trajectory: Trajectory


@dataclass(frozen=True)
class RobotMission:
    status: str = MISSION_NONE
    received_at: float = 0.0
    trajectory: Trajectory | None = None


@dataclass(frozen=True)
class ActivatedPath:
    """A trajectory clocked from the instant the mission actually started."""

    path: Trajectory
    t0: float

    def point_at(self, t: float) -> np.ndarray:
        return self.path.point_at(max(0.0, t - self.t0))

    def finished(self, t: float) -> bool:
        return self.path.finished(max(0.0, t - self.t0))


@dataclass(frozen=True)
class SupervisorRuntime:
    """Dynamic state of the supervisory layer (immutable; steps copy)."""

    plant_modes: tuple[str, ...]
    sup_states: tuple[str, ...]
    missions: tuple[RobotMission, ...]
    obstacle_clear: tuple[bool, ...]   # armed to emit the next detect event
    link_registered: tuple[bool, ...]  # connectivity as acknowledged by events
    queued: tuple[int, ...]            # indices into cfg.schedule not yet delivered


@dataclass(frozen=True)
class ClosedLoopConfig:
    """Static wiring of one simulation: plants, supervisors, gains, schedule."""

    components: tuple[HybridAutomaton, ...]   # index = robot index (0 is the UAV)
    supervisors: tuple[Fsa, ...]
    plant_params: PlantParams
    swarm: SwarmParams
    dt: float = 0.02
    schedule: tuple[MissionSpec, ...] = ()
    uav_gains: UavGains = UavGains()
    ugv_gains: UgvGains = UgvGains()
    auto_clear: bool = True
    hover_settle_speed: float = 0.25   # m/s, "velocity close to zero" gate
    hover_band: float = 0.15           # fraction of hover height

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        skeletons = tuple(discrete_projection(c) for c in self.components)
        owner: dict[str, int] = {}
        for idx, sk in enumerate(skeletons):
            for ev in sk.event_ids:
                if ev in owner:
                    raise ValueError(f"event {ev} owned by two components")
                owner[ev] = idx
        controllable = frozenset(
            ev for sk in skeletons for ev in sk.controllable_ids()
        )
        object.__setattr__(self, "_skeletons", skeletons)
        object.__setattr__(self, "_owner", owner)
        object.__setattr__(self, "_controllable", controllable)

    @property
    def skeletons(self) -> tuple[Fsa, ...]:
        return self._skeletons  # type: ignore[attr-defined]

    def owner_of(self, event: str) -> int:
        try:
            return self._owner[event]  # type: ignore[attr-defined]
        except KeyError:
            raise ModelViolation(f"event {event!r} belongs to no plant component") from None

    def is_controllable(self, event: str) -> bool:
        return event in self._controllable  # type: ignore[attr-defined]

    def template_id(self, event: str) -> str:
        """Strip the per-robot suffix: b13_2 -> b13."""
        return event.split("_", 1)[0]


# Auto-selected lifecycle commands, in firing order. Operator-style commands
# (disarm, return home, clear, break formation) stay enabled but are never
# chosen autonomously.
_KEEP_AVOID = 0
_KEEP_FORMATION = 1
_KEEP_MISSION = 2
_LIFECYCLE = {"a1": 3, "a5": 4, "a7": 5, "b1": 6}
_PRIORITY = {"a27": _KEEP_AVOID, "b7": _KEEP_AVOID, "b13": _KEEP_FORMATION,
             "a15": _KEEP_MISSION, "b15": _KEEP_MISSION}


def action_priority(template_id: str) -> int | None:
    if template_id in _PRIORITY:
        return _PRIORITY[template_id]
    return _LIFECYCLE.get(template_id)


def select_action(enabled: Iterable[str]) -> str | None:
    """Fixed-priority choice among enabled controllable events: avoidance,
    then formation, then mission keeping, then lifecycle commands. Pure
    function of the set; returns None when nothing is auto-selectable."""
    ranked = []
    for ev in sorted(enabled):
        pr = action_priority(ev.split("_", 1)[0])
        if pr is not None:
            ranked.append((pr, ev))
    if not ranked:
        return None
    return min(ranked)[1]


def initial_runtime(cfg: ClosedLoopConfig) -> SupervisorRuntime:
    n = len(cfg.components)
    return SupervisorRuntime(
        plant_modes=tuple(c.initial_mode for c in cfg.components),
        sup_states=tuple(s.initial for s in cfg.supervisors),
        missions=(RobotMission(),) * n,
        obstacle_clear=(True,) * n,
        link_registered=(False,) * n,
        queued=tuple(range(len(cfg.schedule))),
    )


def step_supervisors(cfg: ClosedLoopConfig, rt: SupervisorRuntime, event: str,
                     ) -> SupervisorRuntime:
    """Advance the owning plant component and every supervisor that knows the
    event. Rejects plant-ineligible events and disabled controllable events."""
    idx = cfg.owner_of(event)
    sk = cfg.skeletons[idx]
    nxt_mode = sk.step(rt.plant_modes[idx], event)
    if nxt_mode is None:
        raise ModelViolation(
            f"event {event} not eligible in {sk.name} state {rt.plant_modes[idx]}"
        )
    new_sups = list(rt.sup_states)
    for j, sup in enumerate(cfg.supervisors):
        if not sup.has_event(event):
            continue
        dst = sup.step(rt.sup_states[j], event)
        if dst is None:
            if cfg.is_controllable(event):
                raise ExecutorBug(
                    f"controllable {event} fired while disabled by {sup.name or j}"
                )
            raise ModelViolation(
                f"uncontrollable {event} rejected by supervisor {sup.name or j}; "
                "synthesis should have prevented this"
            )
        new_sups[j] = dst
    modes = list(rt.plant_modes)
    modes[idx] = nxt_mode
    return replace(rt, plant_modes=tuple(modes), sup_states=tuple(new_sups))


def disabled_events(cfg: ClosedLoopConfig, rt: SupervisorRuntime) -> frozenset[str]:
    """Union over supervisors of controllable events they currently disable."""
    out = set()
    for j, sup in enumerate(cfg.supervisors):
        st = rt.sup_states[j]
        for ev in sup.event_ids:
            if cfg.is_controllable(ev) and sup.step(st, ev) is None:
                out.add(ev)
    return frozenset(out)


def enabled_events(cfg: ClosedLoopConfig, rt: SupervisorRuntime) -> frozenset[str]:
    """Controllable events eligible in the plant minus every supervisor's
    disabled set (conjunction semantics of the modular architecture)."""
    disabled = disabled_events(cfg, rt)
    out = set()
    for idx, sk in enumerate(cfg.skeletons):
        for ev in sk.eligible(rt.plant_modes[idx]):
            if cfg.is_controllable(ev) and ev not in disabled:
                out.add(ev)
    return frozenset(out)


# -- scalar derivation ------------------------------------------------------------


def world_scalars(cfg: ClosedLoopConfig, rt: SupervisorRuntime, w: WorldState,
                  i: int) -> dict[str, float]:
    """The per-robot scalar record guards and invariants read."""
    robot = w.robots[i]
    vp = w.vps[i]
    if w.obstacles:
        min_obs = min(float(np.linalg.norm(vp.d - o)) for o in w.obstacles)
    else:
        min_obs = 1e9
    mission = rt.missions[i]
    traj = w.targets[i]
    goal = 0.0
    if traj is not None and mission.status == MISSION_ACTIVE:
        end = traj.point_at(1e18)
        if traj.finished(w.time) and \
                float(np.linalg.norm(robot.position - end)) <= cfg.plant_params.goal_tolerance:
            goal = 1.0
    pending_clock = (w.time - mission.received_at) if mission.status == MISSION_PENDING else 0.0
    link_margin = -1e9
    if w.link_enabled and i >= 1:
        # UGV pairwise links; the UAV (index 0) is not part of the ground net.
        others = [j for j in range(1, len(w.robots)) if j != i]
        if others:
            nearest = min(float(np.linalg.norm(vp.d - w.vps[j].d)) for j in others)
            link_margin = cfg.swarm.comm_radius - nearest
    scalars = {
        "height": robot.height,
        "speed": robot.speed,
        "vp_speed": 0.0,
        "min_obstacle_dist": min_obs,
        "link_margin": link_margin,
        "goal_reached": goal,
        "pending_clock": pending_clock,
    }
    assert set(scalars) == set(SCALARS)
    return scalars


def _edge_guard_holds(cfg: ClosedLoopConfig, rt: SupervisorRuntime,
                      scalars: dict[str, float], i: int, event: str) -> bool:
    edge = cfg.components[i].edge_for(rt.plant_modes[i], event)
    return edge is not None and edge.guard.holds(scalars)


def _apply_reset(cfg: ClosedLoopConfig, w: WorldState, i: int, event: str,
                 rt: SupervisorRuntime) -> WorldState:
    edge = cfg.components[i].edge_for(rt.plant_modes[i], event)
    if edge is None or edge.reset.is_identity:
        return w
    if edge.reset.id == "vp_to_altitude":
        (alt,) = edge.reset.args
        robot = w.robots[i]
        vps = list(w.vps)
        vps[i] = VirtualPoint(np.array([robot.position[0], robot.position[1], -alt]))
        return replace(w, vps=tuple(vps))
    raise SimulationFault(f"unknown reset {edge.reset.id!r}")


# -- event generation ---------------------------------------------------------------


def detect_events(cfg: ClosedLoopConfig, rt: SupervisorRuntime, w: WorldState,
                  ) -> tuple[SupervisorRuntime, list[EventObservation]]:
    """Generate the uncontrollable events the current continuous state
    justifies, gated by plant eligibility so the abstraction stays sound.

    Level crossings are latched (obstacle episodes, link registration), so
    each physical crossing emits one event. Returns the runtime carrying
    updated latches and mission bookkeeping along with the observations,
    ordered by robot index then event id.
    """
    events: list[EventObservation] = []
    p = cfg.plant_params

    for i in range(len(cfg.components)):
        scal = world_scalars(cfg, rt, w, i)
        mode = rt.plant_modes[i]
        sk = cfg.skeletons[i]
        uav = i == 0

        def eligible(template: str) -> str | None:
            ev = template if uav else f"{template}_{i}"
            if sk.step(mode, ev) is not None and _edge_guard_holds(cfg, rt, scal, i, ev):
                return ev
            return None

        # Mission receive: scheduled uploads, delivered once eligible.
        for q in rt.queued:
            ms = cfg.schedule[q]
            if ms.robot != i or ms.receive_time > w.time:
                continue
            ev = eligible("a18" if uav else "b18")
            if ev is not None:
                events.append(EventObservation(w.time, ev, str(i), {"scheduled": ms.receive_time}))
                rt = replace(
                    rt,
                    queued=tuple(x for x in rt.queued if x != q),
                    missions=_set_mission(
                        rt.missions, i,
                        RobotMission(MISSION_PENDING, w.time, ms.trajectory)),
                )
                break  # one upload per robot per tick

        mission = rt.missions[i]

        # Mission start (UAV): pending mission and a settled hover.
        if uav and mission.status == MISSION_PENDING:
            ev = eligible("a14")
            settled = (
                abs(scal["height"] - p.hover_height) <= cfg.hover_band * p.hover_height
                and scal["speed"] <= cfg.hover_settle_speed
            )
            if ev is not None and settled:
                events.append(EventObservation(w.time, ev, str(i),
                                               {"height": scal["height"]}))
                rt = replace(rt, missions=_set_mission(
                    rt.missions, i,
                    RobotMission(MISSION_ACTIVE, mission.received_at, mission.trajectory)))
                mission = rt.missions[i]

        # Mission timeout: pending too long (UAV model only has the edge).
        if mission.status == MISSION_PENDING:
            ev = eligible("a22") if uav else None
            if ev is not None:
                events.append(EventObservation(w.time, ev, str(i),
                                               {"pending_clock": scal["pending_clock"]}))
                rt = replace(rt, missions=_set_mission(rt.missions, i, RobotMission()))
                mission = rt.missions[i]

        # Mission finish: goal tolerance reached while active.
        if mission.status == MISSION_ACTIVE and scal["goal_reached"] >= 0.5:
            ev = eligible("a20" if uav else "b20")
            if ev is not None:
                events.append(EventObservation(w.time, ev, str(i),
                                               {"goal_reached": 1.0}))
                rt = replace(rt, missions=_set_mission(
                    rt.missions, i,
                    RobotMission(MISSION_FINISHED, mission.received_at, mission.trajectory)))
                mission = rt.missions[i]

        # Mission clear: acknowledged once the UAV is back on the ground.
        if uav and cfg.auto_clear and mission.status == MISSION_FINISHED:
            ev = eligible("a29")
            if ev is not None:
                events.append(EventObservation(w.time, ev, str(i), {}))
                rt = replace(rt, missions=_set_mission(rt.missions, i, RobotMission()))

        # Obstacle episode: one detect per crossing, cleared with hysteresis.
        near = scal["min_obstacle_dist"] < p.obstacle_threshold
        cleared = scal["min_obstacle_dist"] > p.clear_factor * p.obstacle_threshold
        if rt.obstacle_clear[i] and near:
            ev = eligible("a24" if uav else "b4")
            if ev is not None:
                events.append(EventObservation(
                    w.time, ev, str(i), {"min_obstacle_dist": scal["min_obstacle_dist"]}))
                rt = replace(rt, obstacle_clear=_set_flag(rt.obstacle_clear, i, False))
        elif not rt.obstacle_clear[i] and cleared:
            ev = eligible("a26" if uav else "b6")
            if ev is not None:
                events.append(EventObservation(
                    w.time, ev, str(i), {"min_obstacle_dist": scal["min_obstacle_dist"]}))
                rt = replace(rt, obstacle_clear=_set_flag(rt.obstacle_clear, i, True))

        # Network link: registration follows emitted events, not raw level.
        if not uav:
            up = scal["link_margin"] >= 0.0
            if up and not rt.link_registered[i]:
                ev = eligible("b10")
                if ev is not None:
                    events.append(EventObservation(
                        w.time, ev, str(i), {"link_margin": scal["link_margin"]}))
                    rt = replace(rt, link_registered=_set_flag(rt.link_registered, i, True))
            elif not up and rt.link_registered[i]:
                ev = eligible("b12")
                if ev is not None:
                    events.append(EventObservation(
                        w.time, ev, str(i), {"link_margin": scal["link_margin"]}))
                    rt = replace(rt, link_registered=_set_flag(rt.link_registered, i, False))

    events.sort(key=lambda e: (int(e.source), e.event))
    return rt, events


def _set_mission(missions: tuple[RobotMission, ...], i: int, m: RobotMission,
                 ) -> tuple[RobotMission, ...]:
    out = list(missions)
    out[i] = m
    return tuple(out)


def _set_flag(flags: tuple[bool, ...], i: int, v: bool) -> tuple[bool, ...]:
    out = list(flags)
    out[i] = v
    return tuple(out)


# -- the closed loop ---------------------------------------------------------------


def term_mask(cfg: ClosedLoopConfig, rt: SupervisorRuntime, enabled: frozenset[str],
              i: int) -> frozenset[str]:
    """VP velocity-term mask for robot i, derived from its mode and the
    controllable events the supervisors currently allow it."""
    mode = rt.plant_modes[i]
    uav = i == 0
    keep_mission = ("a15" if uav else f"b15_{i}") in enabled
    keep_form = (not uav) and f"b13_{i}" in enabled
    mask = set()
    if mode in ("A5", "B3"):
        mask.add("o")
    if mode == "B4":
        mask.add("f")
    if keep_mission or keep_form or (mode == "B3" and rt.missions[i].status == MISSION_ACTIVE):
        mask.add("u")
    if mode in ("A1", "A2", "A3", "B1"):
        mask.discard("u")  # grounded / hovering: the VP holds still
    return frozenset(mask)


def _fire(cfg: ClosedLoopConfig, rt: SupervisorRuntime, w: WorldState, i: int,
          event: str) -> tuple[SupervisorRuntime, WorldState]:
    """Apply one event: edge reset (evaluated in the pre-transition mode),
    then the supervisory step, then command bookkeeping."""
    w = _apply_reset(cfg, w, i, event, rt)
    rt = step_supervisors(cfg, rt, event)
    template = cfg.template_id(event)
    mission = rt.missions[i]
    if template == "b1" and mission.status == MISSION_PENDING:
        rt = replace(rt, missions=_set_mission(
            rt.missions, i,
            RobotMission(MISSION_ACTIVE, mission.received_at, mission.trajectory)))
    elif template == "b21":
        rt = replace(rt, missions=_set_mission(rt.missions, i, RobotMission()))
    # A mission becoming active clocks its trajectory from this instant.
    if template in ("a14", "b1") and rt.missions[i].status == MISSION_ACTIVE \
            and rt.missions[i].trajectory is not None:
        targets = list(w.targets)
        targets[i] = ActivatedPath(rt.missions[i].trajectory, w.time)
        w = replace(w, targets=tuple(targets))
    return rt, w


def closed_loop_step(cfg: ClosedLoopConfig, rt: SupervisorRuntime, w: WorldState,
                     ) -> tuple[SupervisorRuntime, WorldState, Trace]:
    """One tick: observe, supervise, act, integrate, record."""
    records = Trace()

    # (1)-(2) uncontrollable observations first.
    rt, observations = detect_events(cfg, rt, w)
    for obs in observations:
        rt, w = _fire(cfg, rt, w, int(obs.source), obs.event)
        records.events.append(obs)

    # (3) at most one controllable action per robot, by fixed priority.
    for i in range(len(cfg.components)):
        enabled = enabled_events(cfg, rt)
        scal = world_scalars(cfg, rt, w, i)
        mine = {
            ev for ev in enabled
            if cfg.owner_of(ev) == i and _edge_guard_holds(cfg, rt, scal, i, ev)
        }
        # Arming is only worth doing with a mission uploaded or on the way.
        if cfg.template_id("a1") in {cfg.template_id(ev) for ev in mine}:
            has_work = rt.missions[i].status == MISSION_PENDING or any(
                cfg.schedule[q].robot == i for q in rt.queued
            )
            if not has_work:
                mine = {ev for ev in mine if cfg.template_id(ev) != "a1"}
        choice = select_action(mine)
        if choice is None:
            continue
        rt, w = _fire(cfg, rt, w, i, choice)
        records.events.append(EventObservation(w.time, choice, str(i), {}))

    # (4)-(5) translate modes into term masks and advance the dynamics.
    enabled = enabled_events(cfg, rt)
    new_vps = []
    new_robots = []
    for i in range(len(cfg.components)):
        mask = term_mask(cfg, rt, enabled, i)
        new_vps.append(vp_step(i, w, mask, cfg.swarm, cfg.dt) if mask
                       else w.vps[i])
        new_robots.append(robot_track_vp(i, w, cfg.dt, cfg.uav_gains, cfg.ugv_gains))
    w = replace(w, time=w.time + cfg.dt, vps=tuple(new_vps), robots=tuple(new_robots))

    # (6) one continuous sample per robot per tick.
    for i, robot in enumerate(w.robots):
        records.samples.append(ContinuousSample(
            time=w.time,
            robot=i,
            position=tuple(float(x) for x in robot.position),
            velocity=tuple(float(x) for x in robot.velocity),
            mode=rt.plant_modes[i],
        ))
    return rt, w, records


def run_closed_loop(cfg: ClosedLoopConfig, rt: SupervisorRuntime, w: WorldState,
                    duration: float) -> tuple[SupervisorRuntime, WorldState, Trace]:
    """Advance the loop for `duration` seconds, accumulating one trace.

    On a model violation the partial trace is attached to the exception so
    the failure step can be dumped alongside everything recorded so far.
    """
    steps = int(round(duration / cfg.dt))
    trace = Trace()
    for _ in range(steps):
        try:
            rt, w, rec = closed_loop_step(cfg, rt, w)
        except (ModelViolation, ExecutorBug, SimulationFault) as exc:
            exc.partial_trace = trace
            exc.failure_step = len(trace.samples)
            raise
        trace.samples.extend(rec.samples)
        trace.events.extend(rec.events)
    return rt, w, trace


# -- offline trace verification ------------------------------------------------------


@dataclass(frozen=True)
class TraceVerdict:
    legal: bool
    reason: str = ""
    index: int = -1   # offending event index

    def __bool__(self) -> bool:
        return self.legal


def verify_trace(events: Sequence[EventObservation], cfg: ClosedLoopConfig,
                 ) -> TraceVerdict:
    """Replay the event subsequence of a trace against the plant skeletons
    and the lifted supervisors: legal iff every event is plant-eligible and
    no disabled controllable event ever fires."""
    modes = list(c.initial_mode for c in cfg.components)
    sups = list(s.initial for s in cfg.supervisors)
    for n, obs in enumerate(events):
        ev = obs.event
        try:
            idx = cfg.owner_of(ev)
        except ModelViolation:
            return TraceVerdict(False, f"unknown event {ev}", n)
        sk = cfg.skeletons[idx]
        nxt = sk.step(modes[idx], ev)
        if nxt is None:
            return TraceVerdict(
                False, f"{ev} not eligible in {sk.name} state {modes[idx]}", n)
        for j, sup in enumerate(cfg.supervisors):
            if not sup.has_event(ev):
                continue
            dst = sup.step(sups[j], ev)
            if dst is None:
                kind = "disabled controllable" if cfg.is_controllable(ev) \
                    else "supervisor-rejected uncontrollable"
                return TraceVerdict(
                    False, f"{ev} is {kind} at {sup.name or j} state {sups[j]}", n)
            sups[j] = dst
        modes[idx] = nxt
    return TraceVerdict(True)
