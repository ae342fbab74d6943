"""Ground truth at desk scale: bounded canonical BFS, run validation, and a
reference checker for plain VASS."""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .atoms import Renaming, apply, canonicalize
from .coverability import compute_cover
from .model import Configuration, Dvass, PseudoRun, State, pseudo_run_steps_valid, reverse, successors
from .msum import STAR, MsumInstance, YVector
from .vectors import DataVector, place_size

FOUND = "FOUND"
EXHAUSTED = "EXHAUSTED"


@dataclass(frozen=True)
class OracleBudget:
    max_tokens_per_place: int = 8
    max_total_atoms: int = 8
    max_depth: int = 60
    max_states: int = 100_000

    def __post_init__(self):
        if min(self.max_tokens_per_place, self.max_total_atoms, self.max_depth,
               self.max_states) <= 0:
            raise ValueError("oracle budget entries must be positive")


@dataclass
class OracleAnswer:
    kind: str
    run: PseudoRun | None = None
    frontier_empty: bool = False  # queue drained before any cap stopped the search
    complete: bool = False  # frontier_empty and nothing was pruned
    states: int = 0

    @property
    def found(self) -> bool:
        return self.kind == FOUND

    @property
    def conclusive_no(self) -> bool:
        return self.kind == EXHAUSTED and self.complete

    def to_json(self) -> dict:
        out = {"answer": self.kind, "states": self.states}
        if self.run is not None:
            out["run"] = [{"state": repr(s), "marking": str(v)} for s, v in self.run]
        else:
            out["frontier_empty"] = self.frontier_empty
            out["complete"] = self.complete
        return out


def _within(c: Configuration, b: OracleBudget) -> bool:
    m = c.marking
    if any(n > b.max_tokens_per_place for n in m.plain.values()):
        return False
    if any(place_size(m, p) > b.max_tokens_per_place for p in m.atom_places()):
        return False
    return len(c.support()) <= b.max_total_atoms


def bfs_reach(net: Dvass, src: Configuration, tgt: Configuration,
              budget: OracleBudget | None = None) -> OracleAnswer:
    """Shortest run from ``src`` to ``tgt``.

    The configurations reachable from ``src`` form a set closed under
    renamings fixing supp(src), so configurations are merged up to exactly
    those renamings and the target is matched up to them as well; the run
    returned is renamed to end at ``tgt`` itself."""
    b = budget or OracleBudget()
    fixed = src.support()
    start, _ = canonicalize(src, fixed)
    goal, to_goal = canonicalize(tgt, fixed)
    parent: dict = {start: None}
    depth = {start: 0}
    queue = deque([start])
    pruned = False
    while queue:
        c = queue.popleft()
        if c == goal:
            run, tau = _rebuild(parent, c)
            # run ends at tau(goal); carry it onto tgt (supp(src) stays put)
            sigma = to_goal.inverse().compose(tau.inverse())
            run = [(apply(sigma, st), apply(sigma, v)) for st, v in run]
            return OracleAnswer(FOUND, run, states=len(parent))
        if depth[c] >= b.max_depth:
            pruned = True
            continue
        for _, _, c2 in successors(c, net):
            if not _within(c2, b):
                pruned = True
                continue
            k, rho = canonicalize(c2, fixed)
            if k in parent:
                continue
            if len(parent) >= b.max_states:
                return OracleAnswer(EXHAUSTED, states=len(parent))
            parent[k] = (c, rho)
            depth[k] = depth[c] + 1
            queue.append(k)
    return OracleAnswer(EXHAUSTED, frontier_empty=True, complete=not pruned,
                        states=len(parent))


def _rebuild(parent: dict, last) -> tuple[PseudoRun, Renaming]:
    chain = []
    k = last
    while k is not None:
        link = parent[k]
        chain.append((k, None if link is None else link[1]))
        k = None if link is None else link[0]
    chain.reverse()
    # tau_i = tau_{i-1} o rho_i^{-1} carries the stored representative back to
    # the concrete successor of the previous configuration
    tau = Renaming.identity()
    run = []
    for rep, rho in chain:
        if rho is not None:
            tau = tau.compose(rho.inverse())
        c = apply(tau, rep)
        run.append((c.state, c.marking))
    return run, tau


def validate_pseudo_run(net: Dvass, run: PseudoRun, require_nonneg: bool = False) -> bool:
    if require_nonneg and not all(v.is_nonnegative() for _, v in run):
        return False
    return pseudo_run_steps_valid(net, run)


@dataclass
class BireachAnswer:
    forward: OracleAnswer
    backward: OracleAnswer

    @property
    def verdict(self) -> str | None:
        """'BIREACHABLE', 'NOT_BIREACHABLE', or None when inconclusive."""
        if self.forward.found and self.backward.found:
            return "BIREACHABLE"
        if self.forward.conclusive_no or self.backward.conclusive_no:
            return "NOT_BIREACHABLE"
        return None


def bireach_oracle(net: Dvass, src: Configuration, tgt: Configuration,
                   budget: OracleBudget | None = None) -> BireachAnswer:
    fwd = bfs_reach(net, src, tgt, budget)
    if fwd.conclusive_no:
        return BireachAnswer(fwd, OracleAnswer(EXHAUSTED))
    return BireachAnswer(fwd, bfs_reach(net, tgt, src, budget))


def reachable_configurations(net: Dvass, src: Configuration,
                             budget: OracleBudget | None = None) -> list[Configuration]:
    """Canonical representatives (fixing supp(src)) of configurations reached
    within the budget."""
    b = budget or OracleBudget()
    fixed = src.support()
    start, _ = canonicalize(src, fixed)
    seen = {start: 0}
    queue = deque([start])
    while queue and len(seen) < b.max_states:
        c = queue.popleft()
        if seen[c] >= b.max_depth:
            continue
        for _, _, c2 in successors(c, net):
            if not _within(c2, b):
                continue
            k, _ = canonicalize(c2, fixed)
            if k not in seen:
                seen[k] = seen[c] + 1
                queue.append(k)
                if len(seen) >= b.max_states:
                    break
    return list(seen)


# -- plain VASS reference -------------------------------------------------------

def _flow_feasible(net: Dvass, src: str | None, tgt: str | None) -> bool:
    """Integer x ≥ 1 on every transition with zero total effect and Euler
    balance (a path src → tgt, or a cycle family when src is None)."""
    ts = net.transitions
    if not ts:
        return src == tgt
    rows, rhs = [], []
    for h in net.plain_places:
        rows.append([t.eff.get(h) for t in ts])
        rhs.append(0)
    for loc in net.locations:
        rows.append([(loc == t.tgt.location) - (loc == t.src.location) for t in ts])
        rhs.append((loc == tgt) - (loc == src) if src is not None else 0)
    A = np.array(rows, dtype=float)
    b = np.array(rhs, dtype=float)
    res = milp(c=np.ones(len(ts)), constraints=LinearConstraint(A, b, b),
               integrality=np.ones(len(ts)), bounds=Bounds(1, np.inf))
    return res.status == 0


def _connected(net: Dvass, q: str, q2: str) -> bool:
    adj: dict = {}
    for t in net.transitions:
        a, b = t.src.location, t.tgt.location
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    seen, stack = {q}, [q]
    while stack:
        for y in adj.get(stack.pop(), ()):
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return q2 in seen and all(t.src.location in seen for t in net.transitions)


def _positive_pump(net: Dvass, q: State) -> bool:
    cover = compute_cover(net, Configuration(q, DataVector()))
    return any(i.state == q and all(i.valuation.plain_value(h) > 0 for h in net.plain_places)
               for i in cover)


def theta1(net: Dvass, q: State, q2: State) -> bool:
    return (_flow_feasible(net, q.location, q2.location)
            and _flow_feasible(net, None, None)
            and _connected(net, q.location, q2.location))


def theta2(net: Dvass, q: State, q2: State) -> bool:
    if not net.plain_places:
        return True
    rev = reverse(net)
    return all(_positive_pump(n, s) for n in (net, rev) for s in (q, q2))


def vass_theta_check(net: Dvass, q: State, q2: State) -> bool:
    if not net.is_plain_vass():
        raise ValueError("the reference checker takes plain VASS only")
    return theta1(net, q, q2) and theta2(net, q, q2)


# -- Multiset Sum by enumeration ------------------------------------------------------

def msum_bruteforce(inst: MsumInstance, max_vectors: int, pool_size: int) -> tuple | None:
    """Multiset of at most ``max_vectors`` instantiated generators (atoms from
    supp(target) plus fresh ones, ``pool_size`` atoms in all) summing to the
    target; returns the list of vectors or None."""
    target_atoms = sorted(inst.target.support())
    if pool_size < len(target_atoms):
        raise ValueError("pool smaller than the target's support")
    nxt = max(target_atoms, default=-1) + 1
    pool = target_atoms + list(range(nxt, nxt + pool_size - len(target_atoms)))
    vectors = set()
    for g in inst.generators:
        if g.is_zero():
            continue
        sup = sorted(g.support())
        for img in itertools.permutations(pool, len(sup)):
            vectors.add(g.rename(dict(zip(sup, img))))
    vectors = sorted(vectors, key=repr)
    by_key: dict = {}
    for v in vectors:
        for k, _ in v.items:
            by_key.setdefault(k, []).append(v)
    dead = set()

    def pick(res: YVector):
        for k, _ in res.items:
            if k != STAR:
                return k
        return res.items[0][0]

    def rec(res: YVector, left: int, chosen: list):
        if res.is_zero():
            return list(chosen)
        if left == 0 or (res, left) in dead:
            return None
        for v in by_key.get(pick(res), ()):
            chosen.append(v)
            out = rec(res + v.scale(-1), left - 1, chosen)
            chosen.pop()
            if out is not None:
                return out
        dead.add((res, left))
        return None

    return rec(inst.target, max_vectors, [])
