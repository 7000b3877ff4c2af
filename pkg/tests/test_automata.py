import random

import pytest
from hypothesis import given, settings, strategies as st

from fieldsup.automata import (
    EventDef,
    Fsa,
    ModelError,
    ParseError,
    accessible,
    coaccessible,
    empty_like,
    enumerate_language,
    format_automaton,
    is_nonblocking,
    language_contains,
    parse_automaton,
    project,
    rename_events,
    to_dot,
    trim,
)

import oracles


def _rand(seed, n_states=8, n_events=3, density=0.35):
    rng = random.Random(seed)
    return oracles.random_fsa(rng, n_states, oracles.random_alphabet(rng, n_events),
                              density)


# -- construction invariants ---------------------------------------------------


def test_rejects_nondeterminism():
    e = EventDef("a", True)
    with pytest.raises(ModelError, match="nondeterministic"):
        Fsa.build(["x", "y"], [e], [("x", "a", "x"), ("x", "a", "y")], "x", [])


def test_rejects_dangling_endpoints():
    e = EventDef("a", True)
    with pytest.raises(ModelError):
        Fsa.build(["x"], [e], [("x", "a", "zz")], "x", [])
    with pytest.raises(ModelError):
        Fsa.build(["x"], [e], [], "nope", [])


def test_rejects_duplicate_event_ids():
    with pytest.raises(ModelError, match="duplicate"):
        Fsa(frozenset({"x"}), frozenset({EventDef("a", True), EventDef("a", False)}),
            {}, "x", frozenset())


# -- accessible / coaccessible / trim -------------------------------------------


def test_accessible_drops_orphan_state(light_bulb):
    e = light_bulb.event("alpha")
    with_orphan = Fsa.build(
        ["off", "on", "orphan"], [e],
        [("off", "alpha", "on"), ("on", "alpha", "off"), ("orphan", "alpha", "off")],
        "off", ["on"],
    )
    acc = accessible(with_orphan)
    assert acc.states == frozenset({"off", "on"})
    for n in range(4):
        assert enumerate_language(acc, n) == enumerate_language(with_orphan, n)


def test_accessible_identity_on_light_bulb(light_bulb):
    assert accessible(light_bulb).states == light_bulb.states


@pytest.mark.parametrize("seed", range(12))
def test_accessible_matches_bfs_oracle(seed):
    a = _rand(seed)
    assert accessible(a).states == frozenset(oracles.bfs_reachable(oracles.as_dict(a)))


def test_coaccessible_identity_when_all_states_reach_marked(machine):
    assert coaccessible(machine).states == machine.states


def test_coaccessible_empty_when_nothing_marked(light_bulb):
    bare = Fsa(light_bulb.states, light_bulb.alphabet, dict(light_bulb.transitions),
               light_bulb.initial, frozenset())
    assert coaccessible(bare).is_empty()


@pytest.mark.parametrize("seed", range(12))
def test_coaccessible_matches_reverse_bfs_oracle(seed):
    a = _rand(seed + 100, n_states=10)
    co = coaccessible(a)
    expect = oracles.reverse_reachable(oracles.as_dict(a))
    if a.initial not in expect:
        assert co.is_empty()
    else:
        assert co.states == frozenset(expect)


def test_trim_idempotent_on_random():
    for seed in range(10):
        a = _rand(seed + 300)
        t = trim(a)
        tt = trim(t)
        assert t.states == tt.states and t.transitions == tt.transitions


def test_trim_keeps_machine_unchanged(machine):
    assert trim(machine).states == machine.states


def test_trim_prunes_deadlock_branch(machine):
    evs = list(machine.alphabet) + [EventDef("delta", False, "jam")]
    triples = [(s, e, d) for (s, e), d in machine.transitions.items()]
    triples.append(("Working", "delta", "Stuck"))
    with_dead = Fsa.build(
        list(machine.states) + ["Stuck"], evs, triples, "Idle", ["Idle"],
    )
    dead = {s for s in with_dead.states
            if s not in oracles.reverse_reachable(oracles.as_dict(with_dead))}
    assert dead == {"Stuck"}
    t = trim(with_dead)
    assert "Stuck" not in t.states
    assert t.states == machine.states


def test_trim_preserves_marked_language():
    for seed in range(8):
        a = _rand(seed + 40, n_states=6)
        t = trim(a)
        d_a, d_t = oracles.as_dict(a), oracles.as_dict(t)
        for n in (3, 6):
            assert (oracles.enumerate_strings(d_t, n, marked_only=True)
                    == oracles.enumerate_strings(d_a, n, marked_only=True))
            assert (oracles.enumerate_strings(d_t, n)
                    <= oracles.enumerate_strings(d_a, n))


# -- nonblocking -----------------------------------------------------------------


def test_light_bulb_nonblocking(light_bulb):
    assert is_nonblocking(light_bulb)


def test_absorbing_unmarked_state_blocks(machine):
    evs = list(machine.alphabet) + [EventDef("delta", False)]
    triples = [(s, e, d) for (s, e), d in machine.transitions.items()]
    triples.append(("Down", "delta", "Dead"))
    a = Fsa.build(list(machine.states) + ["Dead"], evs, triples, "Idle", ["Idle"])
    assert not is_nonblocking(a)


@pytest.mark.parametrize("seed", range(10))
def test_nonblocking_agrees_with_bounded_prefix_oracle(seed):
    a = _rand(seed + 77, n_states=5)
    d = oracles.as_dict(a)
    horizon = 2 * len(a.states)
    generated = oracles.enumerate_strings(d, horizon)
    marked = oracles.enumerate_strings(d, horizon, marked_only=True)
    prefixes = {s[:k] for s in marked for k in range(len(s) + 1)}
    # every generated string (with slack below the horizon) extends to a
    # marked string iff the automaton is nonblocking
    short = {s for s in generated if len(s) <= len(a.states)}
    assert is_nonblocking(a) == (short <= prefixes)


# -- language membership and enumeration ------------------------------------------


def test_machine_language_examples(machine):
    assert language_contains(machine, ["beta", "alpha"], marked_only=True)
    assert not language_contains(machine, ["beta"], marked_only=True)
    assert language_contains(machine, ["beta"], marked_only=False)
    assert language_contains(machine, [], marked_only=False)
    assert language_contains(machine, ["beta", "gamma", "mu"], marked_only=True)


def test_unknown_event_rejected(machine):
    with pytest.raises(ModelError, match="unknown event"):
        language_contains(machine, ["nope"])


def test_light_bulb_enumeration(light_bulb):
    assert enumerate_language(light_bulb, 2) == [
        (), ("alpha",), ("alpha", "alpha")]


def test_machine_enumeration_contains_paper_strings(machine):
    strings = set(enumerate_language(machine, 3))
    assert ("beta", "alpha", "beta") in strings
    assert ("beta", "gamma", "mu") in strings


@pytest.mark.parametrize("seed", range(8))
def test_enumeration_count_matches_path_count_oracle(seed):
    a = _rand(seed + 9, n_states=5)
    for n in (2, 4):
        assert len(enumerate_language(a, n)) == oracles.count_strings(oracles.as_dict(a), n)


def test_enumeration_order_is_length_then_lex(machine):
    out = enumerate_language(machine, 3)
    assert out == sorted(out, key=lambda s: (len(s), s))


# -- projection --------------------------------------------------------------------


def test_projection_erases():
    assert project(["a", "b", "a"], {"a"}) == ("a", "a")


def test_projection_identity_on_full_alphabet():
    s = ["a", "b", "c", "a"]
    assert project(s, {"a", "b", "c"}) == tuple(s)


@given(st.lists(st.sampled_from("abcd"), max_size=20),
       st.sets(st.sampled_from("abcd")))
def test_projection_idempotent_and_monotone(seq, obs):
    once = project(seq, obs)
    assert project(once, obs) == once
    assert len(once) <= len(seq)


@given(st.lists(st.sampled_from("abc"), max_size=12),
       st.lists(st.sampled_from("abc"), max_size=4),
       st.sets(st.sampled_from("abc")))
def test_projection_is_a_morphism(s, t, obs):
    assert project(list(s) + list(t), obs) == project(s, obs) + project(t, obs)


# -- prefix consistency -------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 8))
def test_language_contains_prefix_consistent(seed, length):
    a = _rand(seed, n_states=5)
    d = oracles.as_dict(a)
    for s in oracles.enumerate_strings(d, min(length, 5)):
        if language_contains(a, s):
            for k in range(len(s)):
                assert language_contains(a, s[:k])


# -- text format and DOT -------------------------------------------------------------


def test_format_parse_round_trip(machine):
    text = format_automaton(machine)
    back = parse_automaton(text, name=machine.name)
    assert back.states == machine.states
    assert back.transitions == machine.transitions
    assert back.marked == machine.marked
    assert back.alphabet == machine.alphabet
    assert format_automaton(back) == text


@pytest.mark.parametrize("bad, line, msg", [
    ("alphabet: a:c\nstates: x\ninitial: x\ntrans: x b x", 4, "unknown event"),
    ("alphabet: a:c\nstates: x x\ninitial: x", 2, "duplicate state"),
    ("alphabet: a:z\nstates: x\ninitial: x", 1, "bad event spec"),
    ("alphabet: a:c\nstates: x\ninitial: x\ntrans: x a y", 4, "unknown target"),
    ("alphabet: a:c\nstates: x\ninitial: x\ntrans: x a x\ntrans: x a x", 5,
     "duplicate transition"),
    ("states: x\ninitial: x\nwhat: ever", 3, "unknown keyword"),
])
def test_parser_reports_line_numbers(bad, line, msg):
    with pytest.raises(ParseError, match=f"line {line}.*{msg}"):
        parse_automaton(bad)


def test_parser_requires_initial():
    with pytest.raises(ParseError, match="initial"):
        parse_automaton("alphabet: a:c\nstates: x\n")


def test_dot_export_shape(light_bulb):
    dot = to_dot(light_bulb)
    assert dot.count("doublecircle") == 1
    assert dot.count("->") == 3  # two edges plus the initial arrow
    assert to_dot(light_bulb) == dot  # deterministic


def test_dot_marks_uncontrollable_edges(machine):
    dot = to_dot(machine)
    assert 'label="alpha", style=dashed' in dot
    assert 'label="beta"]' in dot


def test_rename_events_rejects_collisions(machine):
    with pytest.raises(ModelError, match="collides|duplicate"):
        rename_events(machine, {"beta": "alpha"})


def test_empty_automaton_behaves():
    e = empty_like(Fsa.build(["x"], [EventDef("a", True)], [], "x", []))
    assert e.is_empty()
    assert enumerate_language(e, 3) == []
    assert not language_contains(e, [])
    assert is_nonblocking(e)
