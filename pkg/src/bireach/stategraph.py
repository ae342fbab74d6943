"""Orbit-finite state graph: edge orbits, saturation, path queries."""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass

from .atoms import Renaming, apply, canonical, fresh_atoms, set_partitions
from .model import Dvass, State, _match_state, reverse

EdgeOrbit = tuple  # canonical (State, State)


def edge_of(s: State, s2: State) -> EdgeOrbit:
    return canonical((s, s2))


def edge_orbits(net: Dvass) -> set:
    return {edge_of(t.src, t.tgt) for t in net.transitions}


def identity_orbits(locations, registers) -> set:
    regs = sorted(registers)
    out = set()
    for loc in locations:
        for k in range(len(regs) + 1):
            for filled in itertools.combinations(regs, k):
                for part in set_partitions(list(filled)):
                    val = {r: None for r in regs}
                    for i, block in enumerate(part):
                        for r in block:
                            val[r] = i
                    s = State.make(loc, val)
                    out.add(edge_of(s, s))
    return out


def _unifier(m2: State, m1: State) -> dict | None:
    """Injection sending ``m2`` onto ``m1`` register-wise, if they share an orbit."""
    if m1.location != m2.location:
        return None
    r1 = m1.regs
    inj: dict = {}
    for r, b in m2.valuation:
        a = r1.get(r, "missing")
        if a == "missing" or (a is None) != (b is None):
            return None
        if b is not None and inj.setdefault(b, a) != a:
            return None
    if len(set(inj.values())) != len(inj):
        return None
    return inj


def compose(o1: EdgeOrbit, o2: EdgeOrbit) -> set:
    s, m1 = o1
    m2, s2 = o2
    inj = _unifier(m2, m1)
    if inj is None:
        return set()
    mid = m1.support()
    left = s.support() - mid
    # move o2 so that its middle state is m1 and its private atoms avoid o1's atoms
    used = s.support() | mid
    priv2 = sorted((m2.support() | s2.support()) - set(inj))
    start = max(used | set(inj) | set(priv2), default=-1) + 1
    full = dict(inj)
    full.update({a: start + i for i, a in enumerate(priv2)})
    s2r = apply(Renaming.from_injection(full), s2)
    right = sorted(s2r.support() - mid)
    left = sorted(left)
    out = set()
    for k in range(min(len(left), len(right)) + 1):
        for dom in itertools.combinations(right, k):
            for img in itertools.permutations(left, k):
                out.add(edge_of(s, apply(dict(zip(dom, img)), s2r)))
    return out


@dataclass(frozen=True)
class ClosureTable:
    lengths: dict  # EdgeOrbit -> shortest witness length
    registers: tuple = ()

    def __contains__(self, o):
        return o in self.lengths

    def __len__(self):
        return len(self.lengths)

    def orbits(self) -> list:
        return sorted(self.lengths, key=_edge_key)

    def to_json(self) -> list:
        return [{"source": repr(a), "target": repr(b), "length": self.lengths[(a, b)]}
                for a, b in self.orbits()]


def _edge_key(o):
    return (o[0].sort_key(), o[1].sort_key())


def saturate(edges, locations=None, registers=()) -> ClosureTable:
    """Reflexive-transitive closure of ``edges``; lengths are shortest
    composition chains (breadth-first over right composition by edges)."""
    edges = sorted(set(edges), key=_edge_key)
    if locations is None:
        locations = sorted({s.location for e in edges for s in e})
    regs = tuple(sorted(registers))
    if not regs and edges:
        regs = tuple(r for r, _ in edges[0][0].valuation)
    lengths = {o: 0 for o in identity_orbits(locations, regs)}
    for e in edges:
        lengths.setdefault(e, 1)
    # an edge composes with o only if its source lies in the orbit of o's target
    by_source: dict = {}
    for e in edges:
        by_source.setdefault(canonical(e[0]), []).append(e)
    queue = deque(sorted(lengths, key=lambda o: (lengths[o], _edge_key(o))))
    while queue:
        o = queue.popleft()
        for e in by_source.get(canonical(o[1]), ()):
            for r in sorted(compose(o, e), key=_edge_key):
                if r not in lengths:
                    lengths[r] = lengths[o] + 1
                    queue.append(r)
    return ClosureTable(lengths, regs)


def closure_of(net: Dvass) -> ClosureTable:
    return saturate(edge_orbits(net), net.locations, net.registers)


def path_exists(closure: ClosureTable, s: State, s2: State) -> bool:
    return edge_of(s, s2) in closure


def path_bound(closure: ClosureTable) -> int:
    """Atoms sufficient for a concrete witness path: each of at most L steps
    may load every register afresh, plus both endpoints."""
    L = max(closure.lengths.values(), default=0)
    r = len(closure.registers)
    return L * r + 2 * r


def same_component(closure: ClosureTable, q: State, q2: State) -> bool:
    return path_exists(closure, q, q2) and path_exists(closure, q2, q)


def restrict_to_scc(net: Dvass, q: State, q2: State, closure: ClosureTable | None = None) -> Dvass:
    closure = closure or closure_of(net)
    keep = [t for t in net.transitions
            if all(path_exists(closure, a, b) for a, b in
                   ((q, t.src), (t.tgt, q), (q2, t.src), (t.tgt, q2)))]
    if len(keep) == len(net.transitions):
        return net
    return net.with_transitions(keep)


# -- orbit search from atom-free states -------------------------------------------
# The set of states reachable from an atom-free state is closed under renaming,
# so a search over state orbits answers the same queries as the closure.

def state_successors(net: Dvass, s: State):
    """Canonical successor states of ``s`` (one per orbit over supp(s))."""
    out = set()
    for t in net.transitions:
        m = _match_state(t.src, s)
        if m is None:
            continue
        rest = sorted(t.tgt.support() - set(m))
        m.update(zip(rest, fresh_atoms(len(rest), s.support() | set(m.values()))))
        out.add(canonical(apply(m, t.tgt)))
    return out


def reachable_states(net: Dvass, s: State) -> set:
    if not s.is_atom_free():
        raise ValueError("orbit search needs an atom-free start state")
    seen = {s}
    queue = deque([s])
    while queue:
        for y in state_successors(net, queue.popleft()):
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return seen


def scc_orbits(net: Dvass, q: State) -> tuple[set, set]:
    """State orbits reachable from ``q`` and those from which ``q`` is reachable."""
    return reachable_states(net, q), reachable_states(reverse(net), q)


def restrict_by_orbits(net: Dvass, fwd: set, bwd: set) -> Dvass:
    keep = [t for t in net.transitions
            if canonical(t.src) in fwd and canonical(t.tgt) in bwd]
    if len(keep) == len(net.transitions):
        return net
    return net.with_transitions(keep)


# -- concrete instantiation (used for cross-checks) ------------------------------

def concrete_states(net: Dvass, pool) -> list[State]:
    regs = net.registers
    out = []
    for loc in net.locations:
        for vals in itertools.product([None] + list(pool), repeat=len(regs)):
            out.append(State.make(loc, dict(zip(regs, vals))))
    return out


def concrete_edges(net: Dvass, pool) -> dict:
    """Adjacency of the state graph restricted to register values in ``pool``."""
    pool = list(pool)
    adj: dict = {}
    for t in net.transitions:
        atoms = sorted(t.src.support() | t.tgt.support())
        for img in itertools.permutations(pool, len(atoms)):
            m = dict(zip(atoms, img))
            adj.setdefault(apply(m, t.src), set()).add(apply(m, t.tgt))
    return adj


def concrete_reachable(adj: dict, s: State) -> set:
    seen = {s}
    queue = deque([s])
    while queue:
        x = queue.popleft()
        for y in adj.get(x, ()):
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return seen
