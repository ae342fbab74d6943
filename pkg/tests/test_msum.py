import json
import random

import pytest

from bireach.dsl import load
from bireach.model import Dvass, State, TransitionOrbit, pseudo_run_steps_valid
from bireach.msum import (SAT, STAR, UNSAT_CERTIFIED, UNSAT_WITHIN, MsumInstance, YVector,
                          build_usefulness_instances, certify_unsat, default_budget,
                          euler_pseudo_run, solve, witness_sum, witness_transitions)
from bireach.oracle import msum_bruteforce
from bireach.vectors import DataVector

from generators import CORPUS, random_data_vass, random_msum

X = ("x", ())


class TestExamples:
    def test_unit_twice(self):
        out = solve(MsumInstance((YVector({X: 1}),), YVector({X: 2})))
        assert out.sat and [k for _, _, k in out.witness] == [2]

    def test_parity(self):
        inst = MsumInstance((YVector({X: 2}),), YVector({X: 1}))
        for b in range(4):
            assert not solve(inst, b).sat
        assert solve(inst).kind == UNSAT_CERTIFIED

    def test_difference_orbit(self):
        gen = YVector({("p", (0,)): 1, ("p", (1,)): -1})
        inst = MsumInstance((gen,), YVector({("p", (7,)): 1, ("p", (9,)): -1}))
        out = solve(inst)
        assert out.sat
        ((g, m, k),) = out.witness
        assert k == 1 and dict(m) == {0: 7, 1: 9}
        assert msum_bruteforce(inst, 2, 4) is not None

    def test_budget_below_support(self):
        inst = MsumInstance((YVector({X: 1}),), YVector({("p", (1,)): 1, ("p", (2,)): 1}))
        with pytest.raises(ValueError):
            solve(inst, 1)

    def test_certified_flag(self):
        # needs a fresh atom on each side: never satisfiable, but not caught by projection
        gen = YVector({STAR: 1, ("e", (0, 1)): 1})
        inst = MsumInstance((gen,), YVector({STAR: 1, ("e", (5, 5)): 1}))
        assert solve(inst, 3).kind in (UNSAT_WITHIN, UNSAT_CERTIFIED)
        assert solve(inst, 3, certified=True).kind == UNSAT_CERTIFIED

    def test_default_budget(self):
        inst = MsumInstance((YVector({("p", (0,)): 1, ("p", (1,)): 1}),), YVector({("p", (4,)): 2}))
        assert default_budget(inst) == 1 + 2 * 2 * 1

    def test_outcome_json(self):
        out = solve(MsumInstance((YVector({X: 1}),), YVector({X: 2})))
        data = json.loads(json.dumps(out.to_json()))
        assert data["outcome"] == SAT and data["witness"][0]["count"] == 2

    def test_yvector_json_round_trip(self):
        v = YVector({("p", (0, None)): 3, STAR: -1})
        assert YVector.from_json(json.loads(json.dumps(v.to_json()))) == v


def test_projection_certificate_is_sound():
    """A certified instance has no small brute-force solution either."""
    rng = random.Random(31)
    certified = 0
    for _ in range(300):
        inst = random_msum(rng)
        if certify_unsat(inst):
            certified += 1
            assert msum_bruteforce(inst, 4, 5) is None
    assert certified > 20


def test_monotone_in_budget():
    rng = random.Random(37)
    for _ in range(120):
        inst = random_msum(rng)
        low = len(inst.target.support())
        seen_sat = False
        for b in range(low, low + 4):
            out = solve(inst, b)
            assert not (seen_sat and not out.sat)
            seen_sat |= out.sat
            if out.sat:
                assert witness_sum(inst, out.witness) == inst.target


# -- usefulness instances ------------------------------------------------------------

def _net(*ts, locs=("q",), plain=("h",)):
    return Dvass.make("n", locs, [], plain, ["p"], list(ts))


def test_zero_self_loop_is_useful():
    loop = TransitionOrbit.make(State("q"), DataVector(), State("q"), "loop")
    net = _net(loop)
    b, b2 = build_usefulness_instances(net, State("q"), State("q"), loop)
    assert solve(b).sat and solve(b2).sat


def test_uncancellable_effect():
    up = TransitionOrbit.make(State("q"), DataVector({"h": 1}), State("q"), "up")
    net = _net(up)
    b, _ = build_usefulness_instances(net, State("q"), State("q"), up)
    assert not solve(b).sat


def test_orbit_not_in_net():
    up = TransitionOrbit.make(State("q"), DataVector({"h": 1}), State("q"), "up")
    with pytest.raises(ValueError):
        build_usefulness_instances(_net(), State("q"), State("q"), up)


def test_exit_orbit_of_the_relaxed_net_is_useless():
    """Every orbit raises the total count on p1 (a w/w' round trip by one),
    so no nonempty multiset of transitions has zero effect."""
    net = load(CORPUS / "vprime.dvass").net
    p1 = {t.name: sum(n for (p, _), n in t.eff.data.items() if p == "p1")
          for t in net.transitions}
    assert p1 == {"V1": 2, "V2": 1, "V2b": 1, "w": -1, "w'": 2}
    w = next(t for t in net.transitions if t.name == "w")
    q = State("l")
    for inst in build_usefulness_instances(net, q, q, w):
        assert solve(inst).kind == UNSAT_CERTIFIED
        assert msum_bruteforce(inst, 4, 4) is None


def test_two_location_cycle_assembles():
    go = TransitionOrbit.make(State("l"), DataVector(data={("p", 0): -1}), State("m"), "go")
    back = TransitionOrbit.make(State("m"), DataVector(data={("p", 0): 1}), State("l"), "back")
    net = _net(go, back, locs=("l", "m"))
    q = State("l")
    for inst in build_usefulness_instances(net, q, q, go):
        out = solve(inst)
        assert out.sat
        steps = witness_transitions(net, go, out.witness)
        run = euler_pseudo_run(steps, q, q)
        assert [s.location for s, _ in run] == ["l", "m", "l"]
        assert pseudo_run_steps_valid(net, run) and run[-1][1].is_zero()


def test_witnesses_assemble_into_pseudo_runs():
    """SAT witnesses on one-location nets always form a single closed walk."""
    rng = random.Random(41)
    sat = 0
    for _ in range(150):
        net, _, _ = random_data_vass(rng, registers=(), locations=("l",))
        q = State("l")
        for o in net.transitions:
            for inst in build_usefulness_instances(net, q, q, o):
                out = solve(inst, 4)
                if not out.sat:
                    continue
                sat += 1
                steps = witness_transitions(net, o, out.witness)
                run = euler_pseudo_run(steps, q, q)
                assert run is not None and pseudo_run_steps_valid(net, run)
                assert run[-1][1].is_zero()
    assert sat > 30
