"""Supervisor synthesis: composition, controllability, supremal sublanguages.

The central computation is `supcon`, an iterative state-pruning fixpoint on
the spec/plant product: delete product states where an uncontrollable
plant-eligible event is undefined, delete non-coreachable states, repeat.
`modular_synthesis` wraps the per-spec pipeline (check controllability,
nonblocking and per-spec nonconflict; admit the spec verbatim or replace it
with the supremal result) and the final set-level nonconflict check.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .automata import (
    EventDef,
    Fsa,
    ModelError,
    accessible,
    coaccessible,
    empty_like,
    is_nonblocking,
    trim,
)


def _merged_alphabet(automata: Sequence[Fsa]) -> frozenset[EventDef]:
    """Union of alphabets; a shared id must agree on controllability."""
    by_id: dict[str, EventDef] = {}
    for a in automata:
        for ev in a.alphabet:
            prev = by_id.get(ev.id)
            if prev is None:
                by_id[ev.id] = ev
            elif prev.controllable != ev.controllable:
                raise ModelError(
                    f"controllability conflict on shared event {ev.id!r}"
                )
    return frozenset(by_id.values())


def _pair_name(a: Fsa, b: Fsa) -> str:
    la = a.name or "A"
    lb = b.name or "B"
    return f"{la}||{lb}"


def sync(a: Fsa, b: Fsa) -> Fsa:
    """Synchronous (parallel) composition.

    Shared events move jointly, private events interleave; the result is the
    accessible part, marked where both components mark.
    """
    alphabet = _merged_alphabet([a, b])
    if a.is_empty() or b.is_empty():
        return empty_like(Fsa(frozenset(), alphabet, {}, "", frozenset()), _pair_name(a, b))
    shared = a.event_ids & b.event_ids
    init = (a.initial, b.initial)
    states: set[tuple[str, str]] = {init}
    transitions: dict[tuple[tuple[str, str], str], tuple[str, str]] = {}
    frontier = deque([init])
    while frontier:
        sa, sb = frontier.popleft()
        moves: list[tuple[str, tuple[str, str]]] = []
        for ev, da in a.out_edges(sa):
            if ev in shared:
                db = b.step(sb, ev)
                if db is not None:
                    moves.append((ev, (da, db)))
            else:
                moves.append((ev, (da, sb)))
        for ev, db in b.out_edges(sb):
            if ev not in shared:
                moves.append((ev, (sa, db)))
        for ev, dst in moves:
            transitions[((sa, sb), ev)] = dst
            if dst not in states:
                states.add(dst)
                frontier.append(dst)

    def nm(st: tuple[str, str]) -> str:
        return f"{st[0]}|{st[1]}"

    return Fsa(
        states=frozenset(nm(s) for s in states),
        alphabet=alphabet,
        transitions={(nm(s), e): nm(d) for (s, e), d in transitions.items()},
        initial=nm(init),
        marked=frozenset(nm(s) for s in states if s[0] in a.marked and s[1] in b.marked),
        name=_pair_name(a, b),
    )


def sync_all(automata: Sequence[Fsa]) -> Fsa:
    """Left-folded synchronous composition of one or more automata."""
    if not automata:
        raise ModelError("sync_all needs at least one automaton")
    result = automata[0]
    for nxt in automata[1:]:
        result = sync(result, nxt)
    return result


def meet(a: Fsa, b: Fsa) -> Fsa:
    """Product on a common alphabet: L(a) ∩ L(b), marked pairwise."""
    if a.event_ids != b.event_ids:
        raise ModelError(
            f"meet needs identical alphabets; difference: "
            f"{sorted(a.event_ids ^ b.event_ids)}"
        )
    return sync(a, b)


def lift(a: Fsa, alphabet: Iterable[EventDef]) -> Fsa:
    """Extend a's alphabet, self-looping every state on the added events."""
    full = _merged_alphabet([a, Fsa(frozenset(), frozenset(alphabet), {}, "", frozenset())])
    added = frozenset(e.id for e in full) - a.event_ids
    if not added:
        return Fsa(a.states, full, dict(a.transitions), a.initial, a.marked,
                   a.name, dict(a.state_labels))
    trans = dict(a.transitions)
    for s in a.states:
        for ev in added:
            trans[(s, ev)] = s
    return Fsa(a.states, full, trans, a.initial, a.marked, a.name, dict(a.state_labels))


def universal(alphabet: Iterable[EventDef], name: str = "universal") -> Fsa:
    """Single marked state self-looping on every event: Σ*."""
    evs = frozenset(alphabet)
    return Fsa(
        states=frozenset({"u0"}),
        alphabet=evs,
        transitions={("u0", e.id): "u0" for e in evs},
        initial="u0",
        marked=frozenset({"u0"}),
        name=name,
    )


@dataclass(frozen=True)
class ControllabilityResult:
    controllable: bool
    witness: tuple[tuple[str, ...], str] | None = None  # (string s, event υ)

    def __bool__(self) -> bool:
        return self.controllable


def is_controllable(k: Fsa, g: Fsa) -> ControllabilityResult:
    """Definition-style check of closure(L(k)) against (g, uncontrollables).

    Runs a breadth-first product search so a failure yields a shortest
    witness (s, υ) with s in closure(L(k)), sυ in L(g), sυ not in closure(L(k)).
    """
    if k.event_ids != g.event_ids:
        raise ModelError("is_controllable needs a shared alphabet")
    if k.is_empty():
        return ControllabilityResult(True)
    unc = g.uncontrollable_ids()
    init = (k.initial, g.initial)
    seen = {init}
    frontier: deque[tuple[tuple[str, str], tuple[str, ...]]] = deque([(init, ())])
    while frontier:
        (sk, sg), path = frontier.popleft()
        for ev, dg in g.out_edges(sg):
            dk = k.step(sk, ev)
            if dk is None:
                if ev in unc:
                    return ControllabilityResult(False, (path, ev))
                continue
            nxt = (dk, dg)
            if nxt not in seen:
                seen.add(nxt)
                frontier.append((nxt, path + (ev,)))
    return ControllabilityResult(True)


def supervised_product(s: Fsa, g: Fsa) -> Fsa:
    """Closed loop S/G: the meet, used for trace checking and verification."""
    return meet(s, g)


def supcon(g: Fsa, k: Fsa) -> Fsa:
    """Trim recognizer of the supremal controllable sublanguage of
    L_m(k) ∩ L_m(g) w.r.t. (g, uncontrollable events).

    Fixpoint on the product: drop states where an uncontrollable event is
    plant-eligible but undefined, drop non-coaccessible states, repeat.
    Returns the empty automaton when nothing controllable survives.
    """
    if k.event_ids != g.event_ids:
        raise ModelError("supcon needs a shared alphabet")
    if k.is_empty() or g.is_empty():
        return empty_like(g, "supcon")
    unc = g.uncontrollable_ids()

    # Product state space; keep the plant component for eligibility tests.
    init = (k.initial, g.initial)
    states: set[tuple[str, str]] = {init}
    trans: dict[tuple[tuple[str, str], str], tuple[str, str]] = {}
    frontier = deque([init])
    while frontier:
        sk, sg = frontier.popleft()
        for ev, dk in k.out_edges(sk):
            dg = g.step(sg, ev)
            if dg is None:
                continue
            dst = (dk, dg)
            trans[((sk, sg), ev)] = dst
            if dst not in states:
                states.add(dst)
                frontier.append(dst)
    marked = {s for s in states if s[0] in k.marked and s[1] in g.marked}

    alive = set(states)
    while True:
        # Controllability pruning.
        bad = set()
        for (sk, sg) in alive:
            for ev in g.eligible(sg):
                if ev in unc:
                    dst = trans.get(((sk, sg), ev))
                    if dst is None or dst not in alive:
                        bad.add((sk, sg))
                        break
        if bad:
            alive -= bad
            if init not in alive:
                return empty_like(g, "supcon")
            continue
        # Coaccessibility pruning (then reachability is rebuilt at the end).
        rev: dict[tuple[str, str], set[tuple[str, str]]] = {s: set() for s in alive}
        for (src, ev), dst in trans.items():
            if src in alive and dst in alive:
                rev[dst].add(src)
        co = {s for s in marked if s in alive}
        queue = deque(co)
        while queue:
            s = queue.popleft()
            for p in rev[s]:
                if p not in co:
                    co.add(p)
                    queue.append(p)
        if co == alive:
            break
        alive = co
        if init not in alive:
            return empty_like(g, "supcon")

    def nm(st: tuple[str, str]) -> str:
        return f"{st[0]}|{st[1]}"

    result = Fsa(
        states=frozenset(nm(s) for s in alive),
        alphabet=g.alphabet,
        transitions={
            (nm(s), e): nm(d)
            for (s, e), d in trans.items()
            if s in alive and d in alive
        },
        initial=nm(init),
        marked=frozenset(nm(s) for s in marked if s in alive),
        name="supcon",
    )
    return accessible(result)


def nonconflict(supervisors: Sequence[Fsa], g: Fsa) -> bool:
    """True iff the meet of all supervisors (lifted to g's alphabet) with g
    is nonblocking: every reachable joint state is coreachable."""
    loop = g
    for s in supervisors:
        loop = meet(lift(s, g.alphabet), loop)
    return is_nonblocking(loop)


@dataclass(frozen=True)
class ControlPattern:
    """Per closed-loop state, the controllable events the supervisor disables."""

    disabled: dict[str, frozenset[str]]

    def disabled_at(self, state: str) -> frozenset[str]:
        return self.disabled.get(state, frozenset())


def control_data(s: Fsa, g: Fsa) -> ControlPattern:
    """Disablement map of s over g: for each reachable closed-loop state, the
    controllable events eligible in g but undefined in s."""
    if s.event_ids != g.event_ids:
        raise ModelError("control_data needs a shared alphabet")
    ctrl = g.controllable_ids()
    disabled: dict[str, frozenset[str]] = {}
    if s.is_empty():
        return ControlPattern(disabled)
    init = (s.initial, g.initial)
    seen = {init}
    frontier = deque([init])
    while frontier:
        ss, sg = frontier.popleft()
        dis = set()
        for ev, dg in g.out_edges(sg):
            ds = s.step(ss, ev)
            if ds is None:
                if ev in ctrl:
                    dis.add(ev)
                continue
            nxt = (ds, dg)
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
        disabled[f"{ss}|{sg}"] = frozenset(dis)
    return ControlPattern(disabled)


def language_equal(a: Fsa, b: Fsa) -> bool:
    """Exact equality of generated and marked languages of two DFAs.

    Synchronized search over state pairs: a mismatch in eligible events or
    marking at any jointly reached pair is a language difference. For trim
    automata this decides both L and L_m.
    """
    if a.is_empty() or b.is_empty():
        return a.is_empty() and b.is_empty()
    if a.event_ids != b.event_ids:
        return False
    init = (a.initial, b.initial)
    seen = {init}
    frontier = deque([init])
    while frontier:
        sa, sb = frontier.popleft()
        if (sa in a.marked) != (sb in b.marked):
            return False
        ea, eb = a.eligible(sa), b.eligible(sb)
        if ea != eb:
            return False
        for ev in ea:
            nxt = (a.step(sa, ev), b.step(sb, ev))
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return True


def bounded_language_equal(a: Fsa, b: Fsa, max_len: int) -> bool:
    """Equality of generated and marked languages restricted to strings of
    length <= max_len, by depth-limited synchronized search (no enumeration)."""
    if a.is_empty() or b.is_empty():
        return a.is_empty() and b.is_empty()
    if a.event_ids != b.event_ids:
        return False
    best: dict[tuple[str, str], int] = {(a.initial, b.initial): 0}
    frontier = deque([(a.initial, b.initial, 0)])
    while frontier:
        sa, sb, depth = frontier.popleft()
        if (sa in a.marked) != (sb in b.marked):
            return False
        if depth >= max_len:
            continue
        ea, eb = a.eligible(sa), b.eligible(sb)
        if ea != eb:
            return False
        for ev in ea:
            nxt = (a.step(sa, ev), b.step(sb, ev))
            d = depth + 1
            if best.get(nxt, max_len + 1) > d:
                best[nxt] = d
                frontier.append((nxt[0], nxt[1], d))
    return True


@dataclass(frozen=True)
class SynthesisVerdict:
    """Per-spec record of the modular pipeline."""

    spec_name: str
    subplant_name: str
    controllable: bool
    nonblocking: bool
    nonconflicting: bool
    verbatim: bool
    witness: tuple[tuple[str, ...], str] | None
    supervisor_states: int

    def as_dict(self) -> dict:
        return {
            "spec": self.spec_name,
            "subplant": self.subplant_name,
            "controllable": self.controllable,
            "nonblocking": self.nonblocking,
            "nonconflicting": self.nonconflicting,
            "verbatim": self.verbatim,
            "counterexample": None
            if self.witness is None
            else {"string": list(self.witness[0]), "event": self.witness[1]},
            "supervisor_states": self.supervisor_states,
        }


@dataclass
class ModularSupervisorSet:
    """Result bundle: one supervisor per spec plus provenance and patterns."""

    supervisors: list[Fsa]
    verdicts: list[SynthesisVerdict]
    patterns: list[ControlPattern] = field(default_factory=list)
    subplant_index: list[int] = field(default_factory=list)


class SynthesisFailure(RuntimeError):
    """A spec admits no nonempty controllable sublanguage."""

    def __init__(self, spec_name: str):
        super().__init__(f"empty supremal controllable sublanguage for spec {spec_name!r}")
        self.spec_name = spec_name


class ConflictError(RuntimeError):
    """The final supervisor set conflicts on the composed plant."""

    def __init__(self, witness: tuple[str, ...]):
        super().__init__(
            "modular supervisors conflict; blocked after " + ("ε" if not witness else " ".join(witness))
        )
        self.witness = witness


def _blocking_witness(supervisors: Sequence[Fsa], g: Fsa) -> tuple[str, ...]:
    """Shortest string of the joint closed loop reaching a non-coreachable state."""
    loop = g
    for s in supervisors:
        loop = meet(lift(s, g.alphabet), loop)
    loop = accessible(loop)
    good = coaccessible(loop).states
    frontier: deque[tuple[str, tuple[str, ...]]] = deque([(loop.initial, ())])
    seen = {loop.initial}
    while frontier:
        st, path = frontier.popleft()
        if st not in good:
            return path
        for ev, dst in loop.out_edges(st):
            if dst not in seen:
                seen.add(dst)
                frontier.append((dst, path + (ev,)))
    return ()


def modular_synthesis(
    subplants: Sequence[Fsa],
    specs: Sequence[tuple[Fsa, int]],
    plant: Fsa | None = None,
) -> ModularSupervisorSet:
    """Per-spec pipeline, then a set-level nonconflict check.

    For each (spec H, subplant index i): K = meet(lift(H), G_i). If K is
    controllable w.r.t. G_i, nonblocking, and its closed loop is nonblocking,
    H is admitted verbatim as the supervisor (after the language equality
    check against the supremal result); otherwise the supcon recognizer
    replaces it. Raises SynthesisFailure on an empty supremal language and
    ConflictError when the final set conflicts on the composed plant.
    """
    for _, idx in specs:
        if not 0 <= idx < len(subplants):
            raise ModelError(f"spec references unknown subplant {idx}")
    if plant is None:
        plant = sync_all(list(subplants))

    supervisors: list[Fsa] = []
    verdicts: list[SynthesisVerdict] = []
    patterns: list[ControlPattern] = []
    sub_idx: list[int] = []

    for spec, idx in specs:
        g = subplants[idx]
        # Legal language: the spec composed onto its subplant (accessible but
        # deliberately not trimmed, so the nonblocking check is meaningful).
        k = meet(lift(spec, g.alphabet), g)
        k = Fsa(k.states, k.alphabet, dict(k.transitions), k.initial, k.marked,
                name=spec.name or "K")
        ctrl = is_controllable(k, g) if not k.is_empty() else ControllabilityResult(True)
        nonblk = (not k.is_empty()) and is_nonblocking(k)
        nonconf = (not k.is_empty()) and nonconflict([k], g)
        sup = supcon(g, k)
        if sup.is_empty():
            raise SynthesisFailure(spec.name or "K")
        verbatim = bool(ctrl) and nonblk and nonconf
        if verbatim:
            # Final equality check: the verbatim closed loop must realize the
            # same language as the supremal solution.
            closed = trim(supervised_product(k, g))
            verbatim = language_equal(sup, closed)
        chosen = k if verbatim else sup
        supervisors.append(chosen)
        patterns.append(control_data(chosen, g))
        sub_idx.append(idx)
        verdicts.append(
            SynthesisVerdict(
                spec_name=spec.name or "K",
                subplant_name=g.name or f"G{idx}",
                controllable=bool(ctrl),
                nonblocking=nonblk,
                nonconflicting=nonconf,
                verbatim=verbatim,
                witness=ctrl.witness,
                supervisor_states=len(chosen.states),
            )
        )

    if not nonconflict(supervisors, plant):
        raise ConflictError(_blocking_witness(supervisors, plant))
    return ModularSupervisorSet(supervisors, verdicts, patterns, sub_idx)
