"""Concrete hybrid plant models for the robot team and the six behavior
specifications their supervisors are synthesized from.

The UAV plant has 5 modes, 23 transitions and 15 events; each UGV instance
has 4 modes, 13 transitions and 12 events. Event ids and controllability
flags follow the event table below (UGV events get an instance suffix, so
the composed team plant interleaves per-robot behavior). Both structures are
asserted at construction time.

Specification intent, per robot kind:
  flying / navigation   ordering of arm, take-off, mission and landing
                        phases (UAV), or of connectivity and formation
                        phases (UGV)
  avoidance             obstacle episodes: detect, keep avoiding, clear
  mission               receive / start / keep / finish-or-clear loop,
                        no duplicate assignment, wait when done
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .automata import EventDef, Fsa, ModelError, rename_events
from .hybrid import Cond, Edge, Guard, HybridAutomaton, Reset, TRUE

# Scalar names every guard and invariant is written over. The simulation
# derives one such record per robot each step. All are physically
# nonnegative except link_margin, which is signed (positive = connected).
SCALARS = (
    "height",            # m above ground (UAV)
    "speed",             # m/s robot speed
    "vp_speed",          # m/s virtual-point speed
    "min_obstacle_dist", # m, to nearest obstacle point
    "link_margin",       # m, comm radius minus nearest-teammate distance
    "goal_reached",      # 0/1 mission goal tolerance reached
    "pending_clock",     # s since mission upload while not started
)


@dataclass(frozen=True)
class PlantParams:
    """Thresholds shared by guards, invariants and event detection."""

    obstacle_threshold: float = 1.5     # D_o, m
    clear_factor: float = 1.1          # hysteresis: free space at D_o * factor
    comm_radius: float = 3.0           # m, neighbor / link radius
    goal_tolerance: float = 0.3        # m
    hover_height: float = 5.0          # m
    ground_tolerance: float = 0.05     # m
    rest_speed: float = 0.05           # m/s, "close to zero"
    mission_timeout: float = 120.0     # s, pending mission staleness
    exit_band: float = 0.1             # m, width of crossing-detection bands

    def __post_init__(self):
        if min(self.obstacle_threshold, self.comm_radius, self.goal_tolerance,
               self.hover_height, self.exit_band) <= 0:
            raise ModelError("plant thresholds must be positive")
        if self.clear_factor <= 1.0:
            raise ModelError("clear_factor must exceed 1")

    @property
    def clear_distance(self) -> float:
        """Free-space threshold: the detect threshold plus hysteresis."""
        return self.clear_factor * self.obstacle_threshold


# (id, controllable, label); the UGV block uses template ids that are
# suffixed per robot instance.
UAV_EVENTS = (
    ("a1", True, "Arm"),
    ("a3", True, "Disarm"),
    ("a5", True, "Take off"),
    ("a7", True, "Land"),
    ("a9", True, "Keep hovering"),
    ("a11", True, "Return to home"),
    ("a14", False, "Start mission"),
    ("a15", True, "Keep mission"),
    ("a18", False, "Receive mission"),
    ("a20", False, "Finish mission"),
    ("a22", False, "Time out"),
    ("a24", False, "Detect obstacles"),
    ("a26", False, "Detect free space"),
    ("a27", True, "Keep avoiding"),
    ("a29", False, "Clear mission"),
)

UGV_EVENTS = (
    ("b1", True, "Start mission"),
    ("b4", False, "Detect obstacles"),
    ("b6", False, "Detect free space"),
    ("b7", True, "Keep avoiding"),
    ("b10", False, "Network connected"),
    ("b12", False, "Network disconnected"),
    ("b13", True, "Keep formation"),
    ("b15", True, "Keep mission"),
    ("b18", False, "Receive mission"),
    ("b20", False, "Finish mission"),
    ("b21", True, "Clear mission"),
    ("b23", True, "Break formation"),
)


def event_defs(table) -> tuple[EventDef, ...]:
    return tuple(EventDef(i, c, l) for i, c, l in table)


def ugv_event_id(template_id: str, robot: int) -> str:
    return f"{template_id}_{robot}"


def _cond(scalar: str, op: str, threshold: float) -> Guard:
    return Guard((Cond(scalar, op, threshold),))


def build_uav_plant(p: PlantParams) -> HybridAutomaton:
    """UAV hybrid model: Idle, Arming, Hovering, Flying, Avoiding.

    Guards are written so that every guard region sits inside the source
    mode's invariant (exit guards use a thin crossing band above the
    threshold) and every reset lands inside the target invariant.
    """
    grounded = Guard((
        Cond("height", "<=", p.ground_tolerance),
        Cond("speed", "<=", p.rest_speed),
    ))
    airborne_cap = 1.5 * p.hover_height
    invariants = {
        "A1": grounded,
        "A2": _cond("height", "<=", airborne_cap),
        "A3": _cond("height", ">=", 0.0),
        "A4": _cond("height", ">=", 0.0),
        "A5": _cond("height", ">=", 0.0),
    }
    fields = {"A1": "ground", "A2": "ground", "A3": "hover", "A4": "mission", "A5": "avoid"}

    aloft = _cond("height", ">=", 0.0)
    near = aloft.conjoin(_cond("min_obstacle_dist", "<", p.obstacle_threshold))
    clear = Guard((
        Cond("height", ">=", 0.0),
        Cond("min_obstacle_dist", ">", p.clear_distance),
        Cond("min_obstacle_dist", "<=", p.clear_distance + p.exit_band),
    ))
    stale = Guard((
        Cond("pending_clock", ">=", p.mission_timeout),
        Cond("height", "<=", airborne_cap),
    ))
    done = aloft.conjoin(_cond("goal_reached", ">=", 0.5))
    on_ground = _cond("height", "<=", p.ground_tolerance)
    landable = Guard((
        Cond("height", ">=", 0.0),
        Cond("height", "<=", airborne_cap),
    ))
    in_a2 = _cond("height", "<=", airborne_cap)

    vp_up = Reset("vp_to_altitude", (p.hover_height,))
    vp_down = Reset("vp_to_altitude", (0.0,))

    edges = (
        # Idle
        Edge("A1", "a1", "A2", guard=grounded),
        Edge("A1", "a18", "A2", guard=grounded),
        # Arming (covers armed-on-ground and the descent after a land command)
        Edge("A2", "a3", "A1", guard=grounded),
        Edge("A2", "a5", "A3", guard=on_ground, reset=vp_up),
        Edge("A2", "a18", "A2", guard=in_a2),
        Edge("A2", "a22", "A2", guard=stale),
        Edge("A2", "a29", "A1", guard=grounded),
        # Hovering
        Edge("A3", "a7", "A2", guard=landable, reset=vp_down),
        Edge("A3", "a9", "A3", guard=aloft),
        Edge("A3", "a11", "A3", guard=aloft),
        Edge("A3", "a14", "A4", guard=aloft),
        Edge("A3", "a15", "A3", guard=aloft),
        # Flying the mission
        Edge("A4", "a7", "A2", guard=landable, reset=vp_down),
        Edge("A4", "a9", "A4", guard=aloft),
        Edge("A4", "a11", "A3", guard=aloft),
        Edge("A4", "a15", "A4", guard=aloft),
        Edge("A4", "a20", "A3", guard=done),
        Edge("A4", "a24", "A5", guard=near),
        # Avoiding
        Edge("A5", "a7", "A2", guard=landable, reset=vp_down),
        Edge("A5", "a15", "A5", guard=aloft),
        Edge("A5", "a24", "A5", guard=near),
        Edge("A5", "a26", "A4", guard=clear),
        Edge("A5", "a27", "A5", guard=aloft),
    )
    h = HybridAutomaton(
        name="G_A",
        modes=frozenset(invariants),
        dim=len(SCALARS),
        events=frozenset(event_defs(UAV_EVENTS)),
        edges=edges,
        invariants=invariants,
        field_ids=fields,
        initial_mode="A1",
        initial_continuous=_initial_scalars(),
        marked_modes=frozenset({"A1", "A3"}),
        mode_labels={"A1": "Idle", "A2": "Arming", "A3": "Hovering",
                     "A4": "Flying", "A5": "Avoiding"},
    )
    _assert_shape(h, states=5, transitions=23, events=15)
    return h


def build_ugv_template(p: PlantParams) -> HybridAutomaton:
    """UGV hybrid model template: Stationary, Navigation, Safety, Formation.

    Instantiate per robot with `instantiate_ugv` (events get an index suffix
    so two UGV plants interleave under composition).
    """
    # The safety mode's invariant allows the hysteresis band above the clear
    # threshold, so the free-space crossing can be sampled inside the mode.
    invariants = {
        "B1": _cond("speed", "<=", p.rest_speed),
        "B2": TRUE,
        "B3": _cond("min_obstacle_dist", "<=", p.clear_distance + p.exit_band),
        "B4": _cond("link_margin", ">=", -p.exit_band),
    }
    fields = {"B1": "idle", "B2": "navigate", "B3": "avoid", "B4": "formation"}

    linked = _cond("link_margin", ">=", -p.exit_band)
    near = linked.conjoin(_cond("min_obstacle_dist", "<", p.obstacle_threshold))
    clear = Guard((
        Cond("min_obstacle_dist", ">", p.clear_distance),
        Cond("min_obstacle_dist", "<=", p.clear_distance + p.exit_band),
    ))
    up = _cond("link_margin", ">=", 0.0)
    downlink = Guard((
        Cond("link_margin", "<", 0.0),
        Cond("link_margin", ">=", -p.exit_band),
    ))
    still = _cond("speed", "<=", p.rest_speed)
    done = Guard((
        Cond("goal_reached", ">=", 0.5),
        Cond("speed", "<=", p.rest_speed),
        Cond("link_margin", ">=", -p.exit_band),
    ))

    edges = (
        Edge("B1", "b18", "B2", guard=still),
        Edge("B2", "b1", "B2"),
        Edge("B2", "b10", "B2", guard=up),
        Edge("B2", "b13", "B4", guard=up),
        Edge("B2", "b15", "B2"),
        Edge("B2", "b21", "B1", guard=still),
        Edge("B3", "b6", "B2", guard=clear),
        Edge("B3", "b7", "B3", guard=_cond("min_obstacle_dist", "<=", p.clear_distance + p.exit_band)),
        Edge("B4", "b4", "B3", guard=near),
        Edge("B4", "b12", "B2", guard=downlink),
        Edge("B4", "b13", "B4", guard=linked),
        Edge("B4", "b20", "B1", guard=done),
        Edge("B4", "b23", "B2", guard=linked),
    )
    h = HybridAutomaton(
        name="G_B",
        modes=frozenset(invariants),
        dim=len(SCALARS),
        events=frozenset(event_defs(UGV_EVENTS)),
        edges=edges,
        invariants=invariants,
        field_ids=fields,
        initial_mode="B1",
        initial_continuous=_initial_scalars(),
        marked_modes=frozenset({"B1", "B4"}),
        mode_labels={"B1": "Stationary", "B2": "Navigation", "B3": "Safety",
                     "B4": "Formation"},
    )
    _assert_shape(h, states=4, transitions=13, events=12)
    return h


def instantiate_ugv(template: HybridAutomaton, robot: int) -> HybridAutomaton:
    """Per-robot copy with suffixed event ids (b4 -> b4_<robot>)."""
    mapping = {e.id: ugv_event_id(e.id, robot) for e in template.events}
    return HybridAutomaton(
        name=f"{template.name}{robot}",
        modes=template.modes,
        dim=template.dim,
        events=frozenset(EventDef(mapping[e.id], e.controllable, e.label)
                         for e in template.events),
        edges=tuple(Edge(e.source, mapping[e.event], e.target, e.guard, e.reset)
                    for e in template.edges),
        invariants=dict(template.invariants),
        field_ids=dict(template.field_ids),
        initial_mode=template.initial_mode,
        initial_continuous=template.initial_continuous,
        marked_modes=template.marked_modes,
        mode_labels=dict(template.mode_labels),
    )


def _initial_scalars() -> tuple[float, ...]:
    # height, speed, vp_speed, min_obstacle_dist, link_margin, goal, clock
    return (0.0, 0.0, 0.0, 1e9, -1e9, 0.0, 0.0)


def _assert_shape(h: HybridAutomaton, states: int, transitions: int, events: int):
    if len(h.modes) != states or len(h.edges) != transitions or len(h.events) != events:
        raise ModelError(
            f"{h.name}: got {len(h.modes)} states / {len(h.edges)} transitions /"
            f" {len(h.events)} events, expected {states}/{transitions}/{events}"
        )


# -- behavior specifications ----------------------------------------------------


def _events_subset(table, ids) -> list[EventDef]:
    defs = {i: EventDef(i, c, l) for i, c, l in table}
    return [defs[i] for i in ids]


def build_uav_flying_spec() -> Fsa:
    """Phases: stopped, armed standby, mission context, avoiding.

    Take-off requires an assigned mission (standby forbids it); the standby
    hover reached by the keep-hovering action rejects further mission starts,
    which is the deliberate pressure point controllability analysis finds.
    """
    ids = ["a1", "a3", "a5", "a7", "a9", "a14", "a15", "a18", "a24", "a26", "a27", "a29"]
    trans = [
        ("t1", "a1", "t2"),
        ("t1", "a18", "t3"),
        ("t2", "a18", "t3"),
        ("t2", "a3", "t1"),
        ("t2", "a29", "t1"),
        ("t2", "a7", "t2"),
        ("t2", "a9", "t2"),
        ("t3", "a5", "t3"),
        ("t3", "a18", "t3"),
        ("t3", "a29", "t1"),
        ("t3", "a14", "t3"),
        ("t3", "a15", "t3"),
        ("t3", "a9", "t2"),
        ("t3", "a7", "t2"),
        ("t3", "a24", "t4"),
        ("t4", "a27", "t4"),
        ("t4", "a24", "t4"),
        ("t4", "a26", "t3"),
    ]
    return Fsa.build(["t1", "t2", "t3", "t4"], _events_subset(UAV_EVENTS, ids),
                     trans, "t1", ["t1"], name="H_A1")


def build_uav_avoidance_spec() -> Fsa:
    """Obstacle episode for the UAV: detect, then alternate keep-avoiding
    until free space; a repeated detection is only absorbed at the episode
    head, the other pressure point the synthesis resolves."""
    ids = ["a24", "a26", "a27"]
    trans = [
        ("o1", "a24", "o2"),
        ("o2", "a24", "o2"),
        ("o2", "a27", "o3"),
        ("o2", "a26", "o1"),
        ("o3", "a27", "o2"),
        ("o3", "a26", "o1"),
    ]
    return Fsa.build(["o1", "o2", "o3"], _events_subset(UAV_EVENTS, ids),
                     trans, "o1", ["o1"], name="H_A2")


def build_uav_mission_spec() -> Fsa:
    """Mission loop: received -> started -> finished or cleared -> wait.

    Landing is reserved for mission-closed phases, keep-mission for the
    active phase, and stray finish/timeout/clear signals are absorbed in the
    waiting phases.
    """
    ids = ["a7", "a14", "a15", "a18", "a20", "a22", "a29"]
    trans = [
        ("s4", "a18", "s1"),
        ("s4", "a14", "s4"),
        ("s4", "a20", "s4"),
        ("s4", "a22", "s4"),
        ("s4", "a29", "s4"),
        ("s4", "a7", "s4"),
        ("s3", "a18", "s1"),
        ("s3", "a14", "s3"),
        ("s3", "a20", "s3"),
        ("s3", "a22", "s3"),
        ("s3", "a29", "s3"),
        ("s3", "a7", "s3"),
        ("s1", "a14", "s2"),
        ("s1", "a18", "s1"),
        ("s1", "a22", "s3"),
        ("s1", "a29", "s3"),
        ("s2", "a14", "s2"),
        ("s2", "a15", "s2"),
        ("s2", "a20", "s4"),
    ]
    return Fsa.build(["s1", "s2", "s3", "s4"], _events_subset(UAV_EVENTS, ids),
                     trans, "s4", ["s3", "s4"], name="H_A3")


def build_ugv_navigation_spec() -> Fsa:
    """Connectivity/mission phase tracker gating formation keeping: the
    formation action is reserved for connected-and-active phases."""
    ids = ["b1", "b10", "b12", "b13", "b20", "b21"]
    trans = [
        ("n1", "b10", "n2"),
        ("n1", "b1", "n3"),
        ("n2", "b10", "n2"),
        ("n2", "b12", "n1"),
        ("n2", "b1", "n4"),
        ("n3", "b10", "n4"),
        ("n3", "b21", "n1"),
        ("n4", "b10", "n4"),
        ("n4", "b12", "n3"),
        ("n4", "b13", "n4"),
        ("n4", "b20", "n2"),
        ("n4", "b21", "n2"),
    ]
    return Fsa.build(["n1", "n2", "n3", "n4"], _events_subset(UGV_EVENTS, ids),
                     trans, "n1", ["n1", "n2"], name="H_B1")


def build_ugv_avoidance_spec() -> Fsa:
    """Obstacle episode for a UGV: keep avoiding between detect and free
    space, with the avoidance action guaranteed available throughout."""
    ids = ["b4", "b6", "b7"]
    trans = [
        ("v1", "b4", "v2"),
        ("v2", "b7", "v3"),
        ("v2", "b6", "v1"),
        ("v3", "b7", "v2"),
        ("v3", "b6", "v1"),
    ]
    return Fsa.build(["v1", "v2", "v3"], _events_subset(UGV_EVENTS, ids),
                     trans, "v1", ["v1"], name="H_B2")


def build_ugv_mission_spec() -> Fsa:
    """Mission loop for a UGV: received -> started -> keep -> finished or
    cleared -> wait for the next assignment. Starting is the only action
    available while a mission is pending."""
    ids = ["b1", "b15", "b18", "b20", "b21"]
    trans = [
        ("s4", "b18", "s1"),
        ("s3", "b18", "s1"),
        ("s1", "b1", "s2"),
        ("s2", "b15", "s2"),
        ("s2", "b20", "s4"),
        ("s2", "b21", "s3"),
    ]
    return Fsa.build(["s1", "s2", "s3", "s4"], _events_subset(UGV_EVENTS, ids),
                     trans, "s4", ["s3", "s4"], name="H_B3")


def build_specs() -> dict[str, Fsa]:
    """The six behavior specifications over template event ids."""
    return {
        "H_A1": build_uav_flying_spec(),
        "H_A2": build_uav_avoidance_spec(),
        "H_A3": build_uav_mission_spec(),
        "H_B1": build_ugv_navigation_spec(),
        "H_B2": build_ugv_avoidance_spec(),
        "H_B3": build_ugv_mission_spec(),
    }


def spec_for_robot(spec: Fsa, robot: int) -> Fsa:
    """Instantiate a UGV-template spec for one robot index."""
    mapping = {e.id: ugv_event_id(e.id, robot) for e in spec.alphabet}
    inst = rename_events(spec, mapping)
    return Fsa(inst.states, inst.alphabet, dict(inst.transitions), inst.initial,
               inst.marked, name=f"{spec.name}_{robot}",
               state_labels=dict(inst.state_labels))


@dataclass(frozen=True)
class PlantLibrary:
    """Everything the synthesis and runtime layers consume."""

    params: PlantParams
    uav: HybridAutomaton
    ugv_template: HybridAutomaton
    ugvs: tuple[HybridAutomaton, ...]
    specs: dict[str, Fsa] = field(default_factory=dict)

    @property
    def n_ugvs(self) -> int:
        return len(self.ugvs)


def build_plants(params: PlantParams | None = None, n_ugvs: int = 2) -> PlantLibrary:
    """Construct the full library; shape checks run inside the builders."""
    p = params or PlantParams()
    if n_ugvs < 1:
        raise ModelError("need at least one UGV")
    template = build_ugv_template(p)
    return PlantLibrary(
        params=p,
        uav=build_uav_plant(p),
        ugv_template=template,
        ugvs=tuple(instantiate_ugv(template, k + 1) for k in range(n_ugvs)),
        specs=build_specs(),
    )
