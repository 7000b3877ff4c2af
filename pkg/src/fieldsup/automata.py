"""Deterministic finite-state automata with a controllability-partitioned alphabet.

This is the discrete-event backbone of the workbench: immutable automata,
their (marked) languages, and the structural operations every other layer
builds on (reachability, trim, nonblocking, projection), plus a line-based
text format and DOT export for inspection.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence


class ModelError(ValueError):
    """A structurally invalid automaton or an ill-posed operation on one."""


class ParseError(ValueError):
    """Malformed automaton text; carries a 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class EventDef:
    """One alphabet symbol: short id, controllability flag, display label."""

    id: str
    controllable: bool
    label: str = ""

    def __post_init__(self):
        if not self.id or any(ch.isspace() for ch in self.id) or ":" in self.id:
            raise ModelError(f"bad event id {self.id!r}")


@dataclass(frozen=True)
class Fsa:
    """Deterministic FSA over an EventDef alphabet.

    The transition function is partial: a missing (state, event) pair means
    the event is not eligible there. There are no implicit self-loops and no
    null-event transitions; the empty string is represented only as the empty
    sequence.
    """

    states: frozenset[str]
    alphabet: frozenset[EventDef]
    transitions: Mapping[tuple[str, str], str]
    initial: str
    marked: frozenset[str]
    name: str = ""
    state_labels: Mapping[str, str] = field(default_factory=dict)

    # Derived lookup tables, built once (the dataclass itself stays frozen).
    _events_by_id: Mapping[str, EventDef] = field(init=False, repr=False, compare=False, default=None)
    _out: Mapping[str, tuple[tuple[str, str], ...]] = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        by_id: dict[str, EventDef] = {}
        for ev in self.alphabet:
            if ev.id in by_id:
                raise ModelError(f"duplicate event id {ev.id!r}")
            by_id[ev.id] = ev
        if not self.states:
            # The empty automaton (empty language); only the sentinel form.
            if self.initial or self.marked or self.transitions:
                raise ModelError("empty state set with nonempty structure")
        elif self.initial not in self.states:
            raise ModelError(f"initial state {self.initial!r} not a state")
        if not self.marked <= self.states:
            raise ModelError(f"marked states {sorted(self.marked - self.states)} not states")
        out: dict[str, list[tuple[str, str]]] = {s: [] for s in self.states}
        for (src, ev_id), dst in self.transitions.items():
            if src not in self.states or dst not in self.states:
                raise ModelError(f"transition {src}-{ev_id}->{dst} leaves the state set")
            if ev_id not in by_id:
                raise ModelError(f"transition on unknown event {ev_id!r}")
            out[src].append((ev_id, dst))
        for s in out:
            out[s].sort()
        object.__setattr__(self, "_events_by_id", by_id)
        object.__setattr__(self, "_out", {s: tuple(v) for s, v in out.items()})

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def build(
        states: Iterable[str],
        events: Iterable[EventDef],
        transitions: Iterable[tuple[str, str, str]],
        initial: str,
        marked: Iterable[str],
        name: str = "",
        state_labels: Mapping[str, str] | None = None,
    ) -> "Fsa":
        """Build from (src, event, dst) triples, rejecting nondeterminism."""
        tmap: dict[tuple[str, str], str] = {}
        for src, ev, dst in transitions:
            key = (src, ev)
            if key in tmap and tmap[key] != dst:
                raise ModelError(f"nondeterministic on {key}: {tmap[key]} vs {dst}")
            tmap[key] = dst
        return Fsa(
            states=frozenset(states),
            alphabet=frozenset(events),
            transitions=tmap,
            initial=initial,
            marked=frozenset(marked),
            name=name,
            state_labels=dict(state_labels or {}),
        )

    # -- basic queries ---------------------------------------------------------

    def event(self, ev_id: str) -> EventDef:
        try:
            return self._events_by_id[ev_id]
        except KeyError:
            raise ModelError(f"unknown event id {ev_id!r}") from None

    def has_event(self, ev_id: str) -> bool:
        return ev_id in self._events_by_id

    @property
    def event_ids(self) -> frozenset[str]:
        return frozenset(self._events_by_id)

    def controllable_ids(self) -> frozenset[str]:
        return frozenset(e.id for e in self.alphabet if e.controllable)

    def uncontrollable_ids(self) -> frozenset[str]:
        return frozenset(e.id for e in self.alphabet if not e.controllable)

    def step(self, state: str, ev_id: str) -> str | None:
        return self.transitions.get((state, ev_id))

    def eligible(self, state: str) -> tuple[str, ...]:
        """Event ids defined at `state`, in lexicographic order."""
        return tuple(ev for ev, _ in self._out.get(state, ()))

    def out_edges(self, state: str) -> tuple[tuple[str, str], ...]:
        return self._out.get(state, ())

    def is_empty(self) -> bool:
        return not self.states

    # -- language operations ---------------------------------------------------

    def run(self, seq: Sequence[str]) -> str | None:
        """Final state of the run on `seq`, or None if it leaves the graph."""
        state = self.initial
        for ev in seq:
            if ev not in self._events_by_id:
                raise ModelError(f"unknown event id {ev!r}")
            nxt = self.step(state, ev)
            if nxt is None:
                return None
            state = nxt
        return state


EMPTY_NAME = "(empty)"


def empty_like(a: Fsa, name: str = EMPTY_NAME) -> Fsa:
    """The empty automaton over a's alphabet: no states, empty language.

    The initial-state slot holds a sentinel; is_empty() distinguishes it.
    """
    return Fsa(
        states=frozenset(),
        alphabet=a.alphabet,
        transitions={},
        initial="",
        marked=frozenset(),
        name=name,
    )


def _restrict(a: Fsa, keep: set[str], name: str) -> Fsa:
    if a.initial not in keep:
        return empty_like(a, name)
    return Fsa(
        states=frozenset(keep),
        alphabet=a.alphabet,
        transitions={
            (s, e): d for (s, e), d in a.transitions.items() if s in keep and d in keep
        },
        initial=a.initial,
        marked=a.marked & keep,
        name=name,
        state_labels={s: l for s, l in a.state_labels.items() if s in keep},
    )


def accessible(a: Fsa) -> Fsa:
    """Sub-automaton of states reachable from the initial state."""
    if a.is_empty():
        return a
    seen = {a.initial}
    frontier = deque([a.initial])
    while frontier:
        s = frontier.popleft()
        for _, dst in a.out_edges(s):
            if dst not in seen:
                seen.add(dst)
                frontier.append(dst)
    if seen == a.states:
        return a
    return _restrict(a, seen, a.name)


def coaccessible(a: Fsa) -> Fsa:
    """Sub-automaton of states from which some marked state is reachable.

    May be the empty automaton (no states); that is a legal value.
    """
    if a.is_empty():
        return a
    rev: dict[str, set[str]] = {s: set() for s in a.states}
    for (src, _), dst in a.transitions.items():
        rev[dst].add(src)
    seen = set(a.marked)
    frontier = deque(seen)
    while frontier:
        s = frontier.popleft()
        for p in rev[s]:
            if p not in seen:
                seen.add(p)
                frontier.append(p)
    if seen == a.states:
        return a
    return _restrict(a, seen, a.name)


def trim(a: Fsa) -> Fsa:
    """accessible(coaccessible(a)); idempotent."""
    return accessible(coaccessible(a))


def is_nonblocking(a: Fsa) -> bool:
    """True iff every accessible state can reach a marked state."""
    acc = accessible(a)
    if acc.is_empty():
        return True
    co = coaccessible(acc)
    return co.states == acc.states


def language_contains(a: Fsa, seq: Sequence[str], marked_only: bool = False) -> bool:
    """Membership of `seq` in L(a) (or L_m(a) when marked_only)."""
    if a.is_empty():
        return False
    end = a.run(seq)
    if end is None:
        return False
    return end in a.marked if marked_only else True


def enumerate_language(a: Fsa, max_len: int, marked_only: bool = False) -> list[tuple[str, ...]]:
    """All strings of L(a) (or L_m) with length <= max_len.

    Deterministic order: by length, then lexicographically by event id.
    """
    if max_len < 0:
        raise ValueError("max_len must be >= 0")
    if a.is_empty():
        return []
    out: list[tuple[str, ...]] = []
    level: list[tuple[tuple[str, ...], str]] = [((), a.initial)]
    for _ in range(max_len + 1):
        for seq, state in level:
            if not marked_only or state in a.marked:
                out.append(seq)
        nxt = [
            (seq + (ev,), dst)
            for seq, state in level
            for ev, dst in a.out_edges(state)
        ]
        nxt.sort(key=lambda p: p[0])
        level = nxt
        if not level:
            break
    return out


def project(seq: Sequence[str], observable: Iterable[str]) -> tuple[str, ...]:
    """Natural projection: erase events outside `observable`."""
    obs = set(observable)
    return tuple(ev for ev in seq if ev in obs)


# -- textual format ------------------------------------------------------------
#
#   # comment
#   alphabet: a1:c:Arm a3:c b4:u:Detect_obstacles
#   states: s0 s1 s2
#   initial: s0
#   marked: s0 s2
#   trans: s0 a1 s1
#
# One `trans` line per transition; alphabet/states/marked lines may repeat and
# accumulate. Labels use underscores for spaces.


def parse_automaton(text: str, name: str = "") -> Fsa:
    events: dict[str, EventDef] = {}
    states: list[str] = []
    state_set: set[str] = set()
    initial: str | None = None
    marked: list[str] = []
    triples: list[tuple[str, str, str]] = []
    seen_keys: set[tuple[str, str]] = set()

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ParseError(line_no, f"expected '<keyword>: ...', got {line!r}")
        key, rest = line.split(":", 1)
        key = key.strip()
        fields = rest.split()
        if key == "alphabet":
            for tok in fields:
                parts = tok.split(":")
                if len(parts) < 2 or parts[1] not in ("c", "u"):
                    raise ParseError(line_no, f"bad event spec {tok!r} (want id:c|u[:label])")
                ev_id = parts[0]
                if ev_id in events:
                    raise ParseError(line_no, f"duplicate event {ev_id!r}")
                label = parts[2].replace("_", " ") if len(parts) > 2 else ""
                events[ev_id] = EventDef(ev_id, parts[1] == "c", label)
        elif key == "states":
            for s in fields:
                if s in state_set:
                    raise ParseError(line_no, f"duplicate state {s!r}")
                state_set.add(s)
                states.append(s)
        elif key == "initial":
            if len(fields) != 1:
                raise ParseError(line_no, "initial takes exactly one state")
            if initial is not None:
                raise ParseError(line_no, "initial already set")
            initial = fields[0]
        elif key == "marked":
            marked.extend(fields)
        elif key == "trans":
            if len(fields) != 3:
                raise ParseError(line_no, "trans takes '<src> <event> <dst>'")
            src, ev, dst = fields
            if src not in state_set:
                raise ParseError(line_no, f"unknown source state {src!r}")
            if dst not in state_set:
                raise ParseError(line_no, f"unknown target state {dst!r}")
            if ev not in events:
                raise ParseError(line_no, f"unknown event {ev!r}")
            if (src, ev) in seen_keys:
                raise ParseError(line_no, f"duplicate transition on ({src}, {ev})")
            seen_keys.add((src, ev))
            triples.append((src, ev, dst))
        else:
            raise ParseError(line_no, f"unknown keyword {key!r}")

    if initial is None:
        raise ParseError(1, "missing 'initial:' line")
    if initial not in state_set:
        raise ParseError(1, f"initial state {initial!r} never declared")
    for s in marked:
        if s not in state_set:
            raise ParseError(1, f"marked state {s!r} never declared")
    return Fsa.build(states, events.values(), triples, initial, marked, name=name)


def format_automaton(a: Fsa) -> str:
    """Inverse of parse_automaton, with deterministic ordering."""
    lines = []
    evs = sorted(a.alphabet, key=lambda e: e.id)
    toks = []
    for e in evs:
        tok = f"{e.id}:{'c' if e.controllable else 'u'}"
        if e.label:
            tok += ":" + e.label.replace(" ", "_")
        toks.append(tok)
    lines.append("alphabet: " + " ".join(toks))
    lines.append("states: " + " ".join(sorted(a.states)))
    lines.append(f"initial: {a.initial}")
    lines.append("marked: " + " ".join(sorted(a.marked)))
    for (src, ev), dst in sorted(a.transitions.items()):
        lines.append(f"trans: {src} {ev} {dst}")
    return "\n".join(lines) + "\n"


def to_dot(a: Fsa) -> str:
    """Graphviz rendering: marked states double-circled, initial gets an
    inbound arrow, uncontrollable-event edges dashed. Deterministic output."""
    lines = ["digraph fsa {", "  rankdir=LR;", '  __init [shape=none, label=""];']
    for s in sorted(a.states):
        shape = "doublecircle" if s in a.marked else "circle"
        label = a.state_labels.get(s, s)
        lines.append(f'  "{s}" [shape={shape}, label="{label}"];')
    if not a.is_empty():
        lines.append(f'  __init -> "{a.initial}";')
    for (src, ev), dst in sorted(a.transitions.items()):
        style = "" if a.event(ev).controllable else ", style=dashed"
        lines.append(f'  "{src}" -> "{dst}" [label="{ev}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def rename_events(a: Fsa, mapping: Mapping[str, str]) -> Fsa:
    """Copy with event ids rewritten (used to instantiate per-robot plants)."""
    def m(ev: str) -> str:
        return mapping.get(ev, ev)

    new_events = frozenset(
        EventDef(m(e.id), e.controllable, e.label) for e in a.alphabet
    )
    if len(new_events) != len(a.alphabet):
        raise ModelError("event renaming collides")
    return Fsa(
        states=a.states,
        alphabet=new_events,
        transitions={(s, m(e)): d for (s, e), d in a.transitions.items()},
        initial=a.initial,
        marked=a.marked,
        name=a.name,
        state_labels=dict(a.state_labels),
    )


def rename_states(a: Fsa, prefix: str) -> Fsa:
    """Copy with every state id prefixed (keeps products readable)."""
    def m(s: str) -> str:
        return prefix + s

    return Fsa(
        states=frozenset(m(s) for s in a.states),
        alphabet=a.alphabet,
        transitions={(m(s), e): m(d) for (s, e), d in a.transitions.items()},
        initial=m(a.initial),
        marked=frozenset(m(s) for s in a.marked),
        name=a.name,
        state_labels={m(s): l for s, l in a.state_labels.items()},
    )
