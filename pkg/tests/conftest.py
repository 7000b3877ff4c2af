import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fieldsup.automata import Fsa, EventDef
from fieldsup.hybrid import discrete_projection
from fieldsup.models import build_plants, spec_for_robot
from fieldsup.runtime import run_closed_loop
from fieldsup.scenarios import build_scenario, preset, synthesize_supervisors
from fieldsup.synthesis import lift, meet, sync_all, trim


@pytest.fixture(scope="session")
def library():
    return build_plants()


@pytest.fixture(scope="session")
def team(library):
    """Subplants, specs, synthesis result and the composed plant."""
    subplants = [discrete_projection(library.uav)] + [
        discrete_projection(g) for g in library.ugvs
    ]
    specs = [
        (library.specs["H_A1"], 0),
        (library.specs["H_A2"], 0),
        (library.specs["H_A3"], 0),
    ]
    for k in range(1, len(library.ugvs) + 1):
        specs.extend([
            (spec_for_robot(library.specs["H_B1"], k), k),
            (spec_for_robot(library.specs["H_B2"], k), k),
            (spec_for_robot(library.specs["H_B3"], k), k),
        ])
    t0 = time.perf_counter()
    result = synthesize_supervisors(library)
    elapsed = time.perf_counter() - t0
    plant = sync_all(subplants)
    return {
        "subplants": subplants,
        "specs": specs,
        "result": result,
        "plant": plant,
        "synthesis_seconds": elapsed,
    }


@pytest.fixture(scope="session")
def closed_loop(team):
    """The joint closed-loop automaton of all supervisors over the plant."""
    loop = team["plant"]
    for s in team["result"].supervisors:
        loop = meet(lift(s, team["plant"].alphabet), loop)
    return trim(loop)


@pytest.fixture(scope="session")
def case_runs():
    """All four bundled scenarios simulated for their full duration."""
    out = {}
    for case in ("case1", "case2", "case3", "case4"):
        scenario = build_scenario(preset(case))
        t0 = time.perf_counter()
        rt, w, trace = run_closed_loop(
            scenario.loop, scenario.fresh_runtime(), scenario.world,
            scenario.config.duration)
        out[case] = {
            "scenario": scenario,
            "runtime": rt,
            "world": w,
            "trace": trace,
            "seconds": time.perf_counter() - t0,
        }
    return out


# -- tiny shared models -----------------------------------------------------------


@pytest.fixture
def light_bulb():
    """Two states flipped by one controllable event; the on state is marked."""
    alpha = EventDef("alpha", True, "flip switch")
    return Fsa.build(
        ["off", "on"], [alpha],
        [("off", "alpha", "on"), ("on", "alpha", "off")],
        "off", ["on"], name="bulb",
    )


@pytest.fixture
def machine():
    """Idle/Working/Down loop: start, complete, breakdown, repair; Idle marked."""
    evs = [
        EventDef("beta", True, "start"),
        EventDef("alpha", False, "complete"),
        EventDef("gamma", False, "breakdown"),
        EventDef("mu", True, "repair"),
    ]
    return Fsa.build(
        ["Idle", "Working", "Down"], evs,
        [
            ("Idle", "beta", "Working"),
            ("Working", "alpha", "Idle"),
            ("Working", "gamma", "Down"),
            ("Down", "mu", "Idle"),
        ],
        "Idle", ["Idle"], name="machine",
    )
