"""Shared model fixtures.

``ab_fts`` is the two-feature demonstration system (features A/B, exactly one
selected); ``ab_fts_evolved`` adds a self-loop on s2 guarded by A.  The pump
fixtures model a desk-scale infusion-pump product line with labelled alarm and
safe states, used by the analysis and regression suites.
"""

from __future__ import annotations

import pytest

from splac import featexpr as fx
from splac.featexpr import FeatureModel, parse
from splac.plmodel import FTS, FtsTransition, State


def build_fts(features, formula, states, initial, transitions):
    fm = FeatureModel(tuple(features), parse(formula))
    state_objs = tuple(State(sid, frozenset(labels)) for sid, labels in states)
    trans_objs = tuple(
        FtsTransition(src, action, dst, parse(pc)) for src, action, dst, pc in transitions
    )
    return FTS(fm, state_objs, initial, trans_objs)


@pytest.fixture
def ab_fts():
    return build_fts(
        ["A", "B"],
        "A xor B",
        [("s0", []), ("s1", []), ("s2", [])],
        "s0",
        [
            ("s0", "a", "s1", "true"),
            ("s1", "b", "s0", "B"),
            ("s1", "d", "s2", "A"),
            ("s2", "c", "s0", "A"),
        ],
    )


@pytest.fixture
def ab_fts_evolved():
    return build_fts(
        ["A", "B"],
        "A xor B",
        [("s0", []), ("s1", []), ("s2", [])],
        "s0",
        [
            ("s0", "a", "s1", "true"),
            ("s1", "b", "s0", "B"),
            ("s1", "d", "s2", "A"),
            ("s2", "c", "s0", "A"),
            ("s2", "e", "s2", "A"),
        ],
    )


PUMP_FEATURES = ["HW", "MD", "CDT", "VD", "CIR"]
PUMP_FORMULA = "HW & (MD => CDT & VD)"


def make_pump_fts(extra_states=(), extra_transitions=(), features=None, formula=None):
    """An infusion-pump style FTS: a running loop, three guarded alarm states,
    each alarm leading to a Safe state that resumes operation."""
    states = [
        ("run", ["Infusion_NormalOperationS"]),
        ("Alrm_PumpOverheatS", ["Alarm", "Alrm_PumpOverheatS"]),
        ("Alrm_DoseRateHardLimitsViolationS", ["Alarm", "Alrm_DoseRateHardLimitsViolationS"]),
        ("Alrm_WrongDrugTypeS", ["Alarm", "Alrm_WrongDrugTypeS"]),
        ("safe", ["Safe"]),
    ] + list(extra_states)
    transitions = [
        ("run", "tick", "run", "true"),
        ("run", "overheat", "Alrm_PumpOverheatS", "true"),
        ("run", "dose_rate_violation", "Alrm_DoseRateHardLimitsViolationS", "CIR"),
        ("run", "wrong_drug", "Alrm_WrongDrugTypeS", "CDT"),
        ("Alrm_PumpOverheatS", "halt", "safe", "true"),
        ("Alrm_DoseRateHardLimitsViolationS", "halt", "safe", "CIR"),
        ("Alrm_WrongDrugTypeS", "halt", "safe", "CDT"),
        ("safe", "resume", "run", "true"),
    ] + list(extra_transitions)
    return build_fts(
        features or PUMP_FEATURES,
        formula or PUMP_FORMULA,
        states,
        "run",
        transitions,
    )


@pytest.fixture
def pump_fts():
    return make_pump_fts()
