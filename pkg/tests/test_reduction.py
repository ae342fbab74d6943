import json
import random

import pytest

from bireach.conditions import USELESS, check_phi1
from bireach.model import Configuration, Dvass, State, TransitionOrbit
from bireach.oracle import OracleBudget, bireach_oracle
from bireach.reduction import (BIREACHABLE, NOT_BIREACHABLE, UNKNOWN, DecideConfig,
                               band_location, decide, decide_states, fold_atom_place,
                               fold_plain_place, fold_registers, rank, remove_orbit)
from bireach.vectors import DataVector

from generators import PLAIN_ORACLE, random_plain_vass

L, M = State("l"), State("m")
SMALL = OracleBudget(max_tokens_per_place=5, max_total_atoms=5, max_depth=30, max_states=5000)


def _t(src, tgt, plain=None, data=None, name=""):
    return TransitionOrbit.make(src, DataVector(plain or {}, data or {}), tgt, name)


def _verdict(net, q, q2, budget=SMALL):
    z = DataVector()
    return bireach_oracle(net, Configuration(q, z), Configuration(q2, z), budget).verdict


# -- orbit removal ------------------------------------------------------------------------

def test_remove_the_only_orbit():
    t = _t(L, L, {"h": 1})
    net = Dvass.make("x", ["l"], [], ["h"], [], [t])
    out = remove_orbit(net, t)
    assert out.transitions == () and rank(out) < rank(net)
    with pytest.raises(ValueError):
        remove_orbit(out, t)


def test_removing_useless_orbits_keeps_the_verdict():
    rng = random.Random(5)
    removed = 0
    for _ in range(200):
        net, c, d = random_plain_vass(rng)
        q, q2 = c.state, d.state
        rep = check_phi1(net, q, q2)
        useless = rep.useless()
        if not useless:
            continue
        smaller = remove_orbit(net, useless[0])
        before, after = _verdict(net, q, q2, PLAIN_ORACLE), _verdict(smaller, q, q2, PLAIN_ORACLE)
        if before and after:
            assert before == after
            removed += 1
        # what was useless stays useless
        again = {v.orbit: v.status for v in check_phi1(smaller, q, q2).verdicts}
        assert all(again[o] == USELESS for o in useless[1:])
    assert removed > 20


# -- plain folds ----------------------------------------------------------------------------

def test_untouched_plain_place_with_zero_bound():
    net = Dvass.make("x", ["l", "m"], [], ["h", "k"], [], [_t(L, M, {"k": 1}), _t(M, L, {"k": -1})])
    out, q, q2 = fold_plain_place(net, "h", 0, L, M)
    assert out.plain_places == ("k",)
    assert sorted(out.locations) == sorted(band_location(x, 0) for x in ("l", "m"))
    assert len(out.transitions) == 2
    assert (q, q2) == (State(band_location("l", 0)), State(band_location("m", 0)))


def test_two_bands():
    net = Dvass.make("x", ["l"], [], ["h"], [], [_t(L, L, {"h": 1}), _t(L, L, {"h": -1})])
    out, q, _ = fold_plain_place(net, "h", 1, L, L)
    assert len(out.locations) == 2 and not out.plain_places
    moves = {(t.src.location, t.tgt.location) for t in out.transitions}
    assert moves == {(band_location("l", 0), band_location("l", 1)),
                     (band_location("l", 1), band_location("l", 0))}
    assert _verdict(net, L, L) == _verdict(out, q, q) == BIREACHABLE


def test_step_too_large_for_the_band():
    net = Dvass.make("x", ["l"], [], ["h"], [], [_t(L, L, {"h": 2})])
    out, _, _ = fold_plain_place(net, "h", 1, L, L)
    assert out.transitions == ()


# -- atom folds -----------------------------------------------------------------------------

def test_untouched_atom_place_with_zero_bound():
    net = Dvass.make("x", ["l"], [], ["h"], ["p"], [_t(L, L, {"h": 1})])
    out, q, _ = fold_atom_place(net, "p", 0, L, L)
    assert out.atom_places == () and out.registers == ()
    assert [t.eff for t in out.transitions] == [DataVector({"h": 1})]


def test_single_token_cycles_through_a_register():
    net = Dvass.make("x", ["l"], [], [], ["p"], [
        _t(L, L, data={("p", 0): 1}, name="put"), _t(L, L, data={("p", 0): -1}, name="take")])
    out, q, _ = fold_atom_place(net, "p", 1, L, L)
    (r,) = fold_registers("p", 1)
    assert out.registers == (r,) and q == State.make("l", {r: None})
    by = {t.name: t for t in out.transitions}
    assert by["put"].src.regs[r] is None and by["put"].tgt.regs[r] is not None
    assert by["take"].src.regs[r] is not None and by["take"].tgt.regs[r] is None
    assert len(out.transitions) == 2
    assert _verdict(net, L, L) == _verdict(out, q, q) == BIREACHABLE


def test_two_tokens_do_not_fit_one_register():
    for data in ({("p", 0): 2}, {("p", 0): 1, ("p", 1): 1}):
        net = Dvass.make("x", ["l"], [], [], ["p"], [_t(L, L, data=data)])
        out, _, _ = fold_atom_place(net, "p", 1, L, L)
        assert out.transitions == ()


def test_two_registers_hold_both_orders():
    net = Dvass.make("x", ["l"], [], [], ["p"], [_t(L, L, data={("p", 0): 1, ("p", 1): 1})])
    out, _, _ = fold_atom_place(net, "p", 2, L, L)
    r1, r2 = fold_registers("p", 2)
    assert out.transitions
    for t in out.transitions:
        assert t.src.regs == {r1: None, r2: None}
        assert None not in t.tgt.regs.values() and t.tgt.regs[r1] != t.tgt.regs[r2]


# -- decision loop ----------------------------------------------------------------------

def test_source_equals_target():
    net = Dvass.make("x", ["l"], [], ["h"], [], [])
    c = Configuration(L, DataVector({"h": 3}))
    v = decide(net, c, c)
    assert v.kind == BIREACHABLE and v.trace == [] and v.exit_code == 0


def test_separate_locations():
    net = Dvass.make("x", ["l", "m"], [], [], [], [])
    v = decide_states(net, L, M)
    assert v.kind == NOT_BIREACHABLE and v.exit_code == 1
    assert "state graph" in v.reason


def test_unreachable_component():
    net = Dvass.make("x", ["l", "m"], [], ["h"], [], [_t(L, M), _t(L, L, {"h": 1})])
    v = decide_states(net, L, M)
    assert v.kind == NOT_BIREACHABLE and "components" in v.reason


def _budget_net():
    return Dvass.make("x", ["l", "m"], [], [], ["p"], [
        _t(L, M, name="go"), _t(M, L, name="back"),
        _t(L, L, data={("p", 0): 1, ("p", 1): 1}, name="put"),
        _t(L, L, data={("p", 0): -2}, name="take")])


def test_small_budget_gives_unknown():
    v = decide_states(_budget_net(), L, M, DecideConfig(msum_budget=1))
    assert v.kind == UNKNOWN and v.exit_code == 2
    assert "put" in v.reason and "take" in v.reason


def test_assume_complete_trusts_the_budget():
    v = decide_states(_budget_net(), L, M, DecideConfig(msum_budget=1, assume_complete=True))
    assert v.kind == BIREACHABLE
    assert [s["kind"] for s in v.trace][:2] == ["remove", "remove"]


def test_default_budget_decides():
    v = decide_states(_budget_net(), L, M)
    assert v.kind == BIREACHABLE
    assert _verdict(_budget_net(), L, M) == BIREACHABLE


def test_plain_fold_before_atom_fold():
    net = Dvass.make("x", ["l", "m"], [], ["h"], ["p"], [_t(L, M), _t(M, L)])
    seen = []
    v = decide_states(net, L, M, DecideConfig(on_step=lambda k, a, b: seen.append((k, a, b))))
    assert v.kind == BIREACHABLE
    assert [k for k, _, _ in seen] == ["fold-plain", "fold-atom"]
    for k, (n1, _, _), (n2, _, _) in seen:
        assert rank(n2) < rank(n1)


def test_trace_is_json_and_ranks_drop():
    net = Dvass.make("x", ["l"], [], ["h"], [], [_t(L, L, {"h": 1}), _t(L, L, {"h": 1}, name="x")])
    v = decide(net, Configuration(L, DataVector()), Configuration(L, DataVector({"h": 1})))
    data = json.loads(json.dumps(v.to_json()))
    assert data["verdict"] == v.kind == NOT_BIREACHABLE
    for step in data["trace"]:
        assert step["rank_after"] < step["rank_before"]
    for a, b in zip(data["trace"], data["trace"][1:]):
        assert a["rank_after"] == b["rank_before"]
