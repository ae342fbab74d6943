"""Rank-decreasing reductions and the top-level decision loop."""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

from .conditions import check_phi1, check_phi2
from .coverability import DEFAULT_MAX_DEPTH, DEFAULT_MAX_NODES
from .model import SIGIL, Configuration, Dvass, State, TransitionOrbit, normalize
from .atoms import canonical
from .stategraph import restrict_by_orbits, scc_orbits
from .vectors import DataVector

BIREACHABLE = "BIREACHABLE"
NOT_BIREACHABLE = "NOT_BIREACHABLE"
UNKNOWN = "UNKNOWN"
EXIT_CODES = {BIREACHABLE: 0, NOT_BIREACHABLE: 1, UNKNOWN: 2}


def rank(net: Dvass) -> tuple[int, int, int]:
    return net.rank()


# -- reductions ---------------------------------------------------------------------

def remove_orbit(net: Dvass, o: TransitionOrbit) -> Dvass:
    if o not in net.transitions:
        raise ValueError(f"{o} is not an orbit of the net")
    return net.with_transitions([t for t in net.transitions if t != o])


def band_location(loc: str, n: int) -> str:
    return f"{loc}{SIGIL}{n}"


def fold_plain_place(net: Dvass, h: str, B: int, q: State, q2: State):
    """Move the value of ``h`` (known to stay within 0..B) into locations."""
    if h not in net.plain_places:
        raise ValueError(f"{h!r} is not a plain place")
    ts = []
    for t in net.transitions:
        d = t.eff.get(h)
        w = t.eff.restrict([h])
        for n in range(B + 1):
            if 0 <= n + d <= B:
                ts.append(TransitionOrbit.make(
                    State(band_location(t.src.location, n), t.src.valuation), w,
                    State(band_location(t.tgt.location, n + d), t.tgt.valuation), t.name))
    locs = [band_location(loc, n) for loc in net.locations for n in range(B + 1)]
    plain = [x for x in net.plain_places if x != h]
    out = Dvass.make(net.name, locs, net.registers, plain, net.atom_places, ts)
    return (out, State(band_location(q.location, 0), q.valuation),
            State(band_location(q2.location, 0), q2.valuation))


def fold_registers(p: str, B: int) -> list[str]:
    return [f"{p}{SIGIL}r{i + 1}" for i in range(B)]


def _orderings(ms: Counter) -> set:
    items = sorted(ms.elements())
    return set(itertools.permutations(items))


def _content_pairs(vp: dict, atoms: list[int], B: int, start: int):
    """Multisets (µ, µ') of tokens on the folded place before and after a
    transition with p-part ``vp``; passive tokens may sit on the
    transition's own atoms or on new ones."""
    need = {a: max(0, -vp.get(a, 0)) for a in atoms}
    base = sum(need.values())
    base_after = sum(need[a] + vp.get(a, 0) for a in atoms)
    if base > B or base_after > B:
        return
    slack = B - max(base, base_after)
    # extra passive tokens: on own atoms, or on new atoms
    own = list(atoms)
    for extra_own in _bounded_vectors(len(own), slack):
        used = sum(extra_own)
        mu = Counter({a: need[a] + e for a, e in zip(own, extra_own)})
        for part in _partitions_upto(slack - used):
            fresh = {start + i: k for i, k in enumerate(part)}
            m1 = Counter(mu)
            m1.update(fresh)
            m2 = Counter({a: m1[a] + vp.get(a, 0) for a in own})
            m2.update(fresh)
            yield +m1, +m2


def _bounded_vectors(n: int, total: int):
    if n == 0:
        yield ()
        return
    for k in range(total + 1):
        for rest in _bounded_vectors(n - 1, total - k):
            yield (k,) + rest


def _partitions_upto(total: int):
    """Multisets of positive parts with sum ≤ total (non-increasing tuples)."""
    def rec(rem, largest):
        yield ()
        for k in range(min(rem, largest), 0, -1):
            for rest in rec(rem - k, k):
                yield (k,) + rest
    yield from rec(total, total)


def fold_atom_place(net: Dvass, p: str, B: int, q: State, q2: State):
    """Replace atom place ``p`` (at most B tokens) by B registers holding its
    tokens.  Register contents are kept in prefix form: the first k new
    registers hold the k tokens, in every order."""
    if p not in net.atom_places:
        raise ValueError(f"{p!r} is not an atom place")
    regs = fold_registers(p, B)
    ts = []
    for t in net.transitions:
        vp = t.eff.place_part(p)
        w = t.eff.restrict([p])
        atoms = sorted(t.support())
        start = (max(atoms) + 1) if atoms else 0
        for m1, m2 in _content_pairs(vp, atoms, B, start):
            for o1 in _orderings(m1):
                v1 = dict(t.src.valuation)
                v1.update({r: None for r in regs})
                v1.update(zip(regs, o1))
                s1 = State.make(t.src.location, v1)
                for o2 in _orderings(m2):
                    v2 = dict(t.tgt.valuation)
                    v2.update({r: None for r in regs})
                    v2.update(zip(regs, o2))
                    ts.append(TransitionOrbit.make(s1, w, State.make(t.tgt.location, v2), t.name))
    out = Dvass.make(net.name, net.locations, list(net.registers) + regs, net.plain_places,
                     [x for x in net.atom_places if x != p], ts)

    def extend(s):
        v = dict(s.valuation)
        v.update({r: None for r in regs})
        return State.make(s.location, v)

    return out, extend(q), extend(q2)


# -- decision loop ---------------------------------------------------------------------

@dataclass
class DecideConfig:
    msum_budget: int | None = None
    cover_max_nodes: int = DEFAULT_MAX_NODES
    cover_max_depth: int = DEFAULT_MAX_DEPTH
    assume_complete: bool = False
    route: str = "direct"
    on_step: Callable | None = None


@dataclass
class Verdict:
    kind: str
    reason: str = ""
    trace: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.kind]

    def to_json(self) -> dict:
        return {"verdict": self.kind, "reason": self.reason, "trace": self.trace}


def decide(net: Dvass, src: Configuration, tgt: Configuration,
           config: DecideConfig | None = None) -> Verdict:
    config = config or DecideConfig()
    trace: list = []
    if src == tgt:
        return Verdict(BIREACHABLE, "source equals target", trace)
    net, q, q2 = normalize(net, src, tgt)
    while True:
        r0 = net.rank()
        fwd, bwd = scc_orbits(net, q)
        connected = canonical(q2) in fwd and canonical(q2) in bwd
        if not net.plain_places and not net.atom_places:
            if connected:
                return Verdict(BIREACHABLE, "state graph connects both ways", trace)
            return Verdict(NOT_BIREACHABLE, "no path in the state graph", trace)
        if not connected:
            return Verdict(NOT_BIREACHABLE, "source and target lie in different components", trace)
        step = None
        restricted = restrict_by_orbits(net, fwd, bwd)
        if len(restricted.transitions) < len(net.transitions):
            step = ("scc", len(net.transitions) - len(restricted.transitions), None,
                    restricted, q, q2)
        else:
            phi1 = check_phi1(net, q, q2, config.msum_budget, config.assume_complete,
                              stop_at_useless=True)
            useless = phi1.useless()
            if useless:
                o = useless[0]
                step = ("remove", repr(o), None, remove_orbit(net, o), q, q2)
            else:
                phi2 = check_phi2(net, q, q2, config.route, config.cover_max_nodes,
                                  config.cover_max_depth)
                if phi2.unknown:
                    return Verdict(UNKNOWN, phi2.unknown, trace)
                bad = phi2.unpumpable()
                if bad:
                    plain = [c for c in bad if c.plain]
                    c = (plain or bad)[0]
                    if c.plain:
                        n2, a, b = fold_plain_place(net, c.place, c.bound, q, q2)
                        step = ("fold-plain", c.place, c.bound, n2, a, b)
                    else:
                        n2, a, b = fold_atom_place(net, c.place, c.bound, q, q2)
                        step = ("fold-atom", c.place, c.bound, n2, a, b)
                elif phi1.holds():
                    return Verdict(BIREACHABLE, "all orbits useful and all places pumpable", trace)
                else:
                    names = ", ".join(t.name or repr(t) for t in phi1.unknown())
                    return Verdict(UNKNOWN, f"usefulness undetermined for: {names}", trace)
        kind, item, bound, n2, a, b = step
        r1 = n2.rank()
        if not r1 < r0:
            raise AssertionError(f"rank did not decrease: {r0} -> {r1} ({kind})")
        trace.append({"kind": kind, "item": item, "bound": bound,
                      "rank_before": list(r0), "rank_after": list(r1)})
        if config.on_step is not None:
            config.on_step(kind, (net, q, q2), (n2, a, b))
        net, q, q2 = n2, a, b


def decide_states(net: Dvass, q: State, q2: State, config: DecideConfig | None = None) -> Verdict:
    return decide(net, Configuration(q, DataVector()), Configuration(q2, DataVector()), config)
