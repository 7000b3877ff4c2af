"""Hybrid automata: discrete modes carrying invariants, guards, resets and a
vector-field selector over a small continuous scalar space.

Guards and invariants are conjunctions of threshold comparisons over named
scalars derived from the world state (distances, speeds, heights, link
status). There is deliberately no general predicate language. Each edge's
stored guard includes the source mode's invariant, so any state enabling an
outgoing edge also satisfies the mode invariant by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .automata import EventDef, Fsa, ModelError

BOUNDARY_TOL = 1e-9

_OPS = {
    "<": lambda x, t: x < t + BOUNDARY_TOL,
    ">": lambda x, t: x > t - BOUNDARY_TOL,
    "<=": lambda x, t: x <= t + BOUNDARY_TOL,
    ">=": lambda x, t: x >= t - BOUNDARY_TOL,
}


@dataclass(frozen=True)
class Cond:
    """One threshold comparison over a named scalar."""

    scalar: str
    op: str
    threshold: float

    def __post_init__(self):
        if self.op not in _OPS:
            raise ModelError(f"unsupported comparison {self.op!r}")

    def holds(self, scalars: Mapping[str, float]) -> bool:
        try:
            value = scalars[self.scalar]
        except KeyError:
            raise ModelError(f"scalar {self.scalar!r} missing from evaluation context") from None
        return _OPS[self.op](value, self.threshold)

    def as_dict(self) -> dict:
        return {"scalar": self.scalar, "op": self.op, "threshold": self.threshold}


@dataclass(frozen=True)
class Guard:
    """Conjunction of conditions; the empty conjunction is True."""

    conds: tuple[Cond, ...] = ()

    def holds(self, scalars: Mapping[str, float]) -> bool:
        return all(c.holds(scalars) for c in self.conds)

    def conjoin(self, other: "Guard") -> "Guard":
        return Guard(self.conds + other.conds)

    def as_dict(self) -> list:
        return [c.as_dict() for c in self.conds]


TRUE = Guard()


@dataclass(frozen=True)
class Reset:
    """Named continuous-state transformer attached to an edge.

    The identity reset is the default; non-identity resets are resolved by id
    in the simulation layer (the hybrid skeleton stays purely declarative).
    """

    id: str = "identity"
    args: tuple[float, ...] = ()

    @property
    def is_identity(self) -> bool:
        return self.id == "identity"


@dataclass(frozen=True)
class Edge:
    source: str
    event: str
    target: str
    guard: Guard = TRUE
    reset: Reset = Reset()


@dataclass(frozen=True)
class HybridAutomaton:
    """Modes with invariants and mode-indexed vector fields over a shared
    event alphabet; the discrete skeleton is a well-formed Fsa."""

    name: str
    modes: frozenset[str]
    dim: int
    events: frozenset[EventDef]
    edges: tuple[Edge, ...]
    invariants: Mapping[str, Guard]
    field_ids: Mapping[str, str]
    initial_mode: str
    initial_continuous: tuple[float, ...]
    marked_modes: frozenset[str]
    mode_labels: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.initial_continuous) != self.dim:
            raise ModelError("initial continuous state has wrong dimension")
        for m in self.modes:
            if m not in self.invariants:
                raise ModelError(f"mode {m!r} has no invariant")
            if m not in self.field_ids:
                raise ModelError(f"mode {m!r} has no vector field")
        # Fsa construction validates determinism and endpoint membership.
        object.__setattr__(self, "_skeleton", self._build_skeleton())

    def _build_skeleton(self) -> Fsa:
        return Fsa.build(
            states=self.modes,
            events=self.events,
            transitions=[(e.source, e.event, e.target) for e in self.edges],
            initial=self.initial_mode,
            marked=self.marked_modes,
            name=self.name,
            state_labels=self.mode_labels,
        )

    def edge_for(self, mode: str, event: str) -> Edge | None:
        for e in self.edges:
            if e.source == mode and e.event == event:
                return e
        return None

    def invariant_holds(self, mode: str, scalars: Mapping[str, float]) -> bool:
        return self.invariants[mode].holds(scalars)


def discrete_projection(h: HybridAutomaton) -> Fsa:
    """The DES skeleton: drop continuous structure, keep ids and flags."""
    return h._skeleton  # noqa: SLF001 - owned attribute


def from_fsa(
    a: Fsa,
    dim: int = 0,
    field_id: str = "none",
    initial_continuous: Sequence[float] = (),
) -> HybridAutomaton:
    """Trivial hybrid lift of an Fsa: True invariants and guards, identity
    resets. discrete_projection inverts this up to transition ordering."""
    return HybridAutomaton(
        name=a.name,
        modes=a.states,
        dim=dim,
        events=a.alphabet,
        edges=tuple(Edge(src, ev, dst) for (src, ev), dst in sorted(a.transitions.items())),
        invariants={m: TRUE for m in a.states},
        field_ids={m: field_id for m in a.states},
        initial_mode=a.initial,
        initial_continuous=tuple(initial_continuous),
        marked_modes=a.marked,
        mode_labels=dict(a.state_labels),
    )
