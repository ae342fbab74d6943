"""Multiset Sum over orbit-finite vector sets.

Coordinates are pairs ``(tag, atoms)``: ``tag`` is a string and ``atoms`` a
tuple of atoms (``None`` allowed for empty registers).  A generator stands
for its whole orbit.  The solver instantiates generators into a growing
atom pool and asks an integer program for a nonnegative combination hitting
the target; witnesses are re-checked in exact integer arithmetic.
Unsatisfiability is certified when the instance projected to orbit
coordinates (atoms outside the target forgotten) is already infeasible.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import csr_matrix

from .atoms import fresh_atoms
from .model import Dvass, State, TransitionOrbit
from .vectors import DataVector

SAT = "SAT"
UNSAT_WITHIN = "UNSAT_WITHIN"
UNSAT_CERTIFIED = "UNSAT_CERTIFIED"
DEFAULT_COLUMN_CAP = 40000


class YVector:
    """Sparse integer vector over ``(tag, atoms)`` coordinates."""

    __slots__ = ("items", "_hash")

    def __init__(self, entries=None):
        acc: dict = {}
        for k, n in (entries.items() if isinstance(entries, dict) else (entries or ())):
            acc[k] = acc.get(k, 0) + n
        self.items = tuple(sorted(((k, n) for k, n in acc.items() if n), key=_key_order))
        self._hash = None

    def as_dict(self) -> dict:
        return dict(self.items)

    def support(self) -> frozenset:
        return frozenset(a for (_, atoms), _ in self.items for a in atoms if a is not None)

    def rename(self, m: dict) -> "YVector":
        return YVector({(tag, tuple(None if a is None else m.get(a, a) for a in atoms)): n
                        for (tag, atoms), n in self.items})

    def __add__(self, other):
        d = self.as_dict()
        for k, n in other.items:
            d[k] = d.get(k, 0) + n
        return YVector(d)

    def scale(self, c: int) -> "YVector":
        return YVector({k: c * n for k, n in self.items})

    def is_zero(self):
        return not self.items

    def __eq__(self, other):
        return isinstance(other, YVector) and self.items == other.items

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.items)
        return self._hash

    def __repr__(self):
        parts = []
        for (tag, atoms), n in self.items:
            arg = f"({','.join('-' if a is None else str(a) for a in atoms)})" if atoms else ""
            parts.append(f"{n:+d}{tag}{arg}")
        return "Y[" + " ".join(parts) + "]"

    def to_json(self):
        return [[tag, list(atoms), n] for (tag, atoms), n in self.items]

    @classmethod
    def from_json(cls, data) -> "YVector":
        return cls({(tag, tuple(atoms)): int(n) for tag, atoms, n in data})


def _atom_order(a):
    if a is None:
        return (0, "", 0)
    if isinstance(a, tuple):  # projected pattern entry ("s", atom) or ("x", index)
        return (2, a[0], a[1])
    return (1, "", a)


def _key_order(kn):
    (tag, atoms), _ = kn
    return (tag, tuple(_atom_order(a) for a in atoms))


@dataclass(frozen=True)
class MsumInstance:
    generators: tuple  # YVector representatives
    target: YVector
    labels: tuple = ()  # optional names, parallel to generators

    def label(self, i: int):
        return self.labels[i] if self.labels else i


@dataclass(frozen=True)
class MsumOutcome:
    kind: str
    witness: tuple = ()  # ((generator index, atom map as sorted pairs, multiplicity), ...)
    budget: int | None = None
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def sat(self) -> bool:
        return self.kind == SAT

    def to_json(self) -> dict:
        return {"outcome": self.kind, "budget": self.budget,
                "witness": [{"generator": g, "map": [list(p) for p in m], "count": k}
                            for g, m, k in self.witness]}


def default_budget(inst: MsumInstance) -> int:
    k = max((len(g.support()) for g in inst.generators), default=0)
    return len(inst.target.support()) + 2 * k * len(inst.generators)


# -- integer feasibility -----------------------------------------------------------

def _ilp(columns: list[YVector], target: YVector):
    """Nonnegative integer x with Σ x_j columns_j = target, or None."""
    if not columns:
        return [] if target.is_zero() else None
    col_keys = {k for c in columns for k, _ in c.items}
    if any(k not in col_keys for k, _ in target.items):
        return None
    keys = col_keys
    index = {k: i for i, k in enumerate(sorted(keys, key=lambda k: _key_order((k, 0))))}
    rows, cols, vals = [], [], []
    for j, c in enumerate(columns):
        for k, n in c.items:
            rows.append(index[k])
            cols.append(j)
            vals.append(n)
    A = csr_matrix((vals, (rows, cols)), shape=(len(index), len(columns)))
    b = np.zeros(len(index))
    for k, n in target.items:
        b[index[k]] = n
    res = milp(c=np.ones(len(columns)), constraints=LinearConstraint(A, b, b),
               integrality=np.ones(len(columns)), bounds=Bounds(0, np.inf))
    if res.status == 2:  # infeasible
        return None
    if res.x is None:
        raise RuntimeError(f"integer program failed: {res.message}")
    x = [int(round(v)) for v in res.x]
    total = YVector()
    for j, k in enumerate(x):
        if k:
            total = total + columns[j].scale(k)
    if total != target or any(k < 0 for k in x):
        raise RuntimeError("integer program returned an inexact solution")
    return x


# -- orbit projection certificate ----------------------------------------------------

def _project(v: YVector, fixed: frozenset) -> YVector:
    out: dict = {}
    for (tag, atoms), n in v.items:
        seen: dict = {}
        pat = []
        for a in atoms:
            if a is None:
                pat.append(None)
            elif a in fixed:
                pat.append(("s", a))
            else:
                pat.append(("x", seen.setdefault(a, len(seen))))
        key = (tag, tuple(pat))
        out[key] = out.get(key, 0) + n
    return YVector({k: n for k, n in out.items()}) if out else YVector()


def _partial_injections(dom, img):
    dom, img = list(dom), list(img)
    for k in range(min(len(dom), len(img)) + 1):
        for d in itertools.combinations(dom, k):
            for i in itertools.permutations(img, k):
                yield dict(zip(d, i))


def certify_unsat(inst: MsumInstance) -> bool:
    """True when even the orbit-projected instance has no solution."""
    fixed = inst.target.support()
    cols = set()
    for g in inst.generators:
        sup = sorted(g.support())
        shift = (max(fixed | set(sup)) + 1) if (fixed or sup) else 0
        moved = g.rename({a: a + shift for a in sup})
        for m in _partial_injections([a + shift for a in sup], sorted(fixed)):
            cols.add(_project(moved.rename(m), fixed))
    cols.discard(YVector())
    target = _project(inst.target, fixed)
    return _ilp(sorted(cols, key=repr), target) is None


# -- staged solver --------------------------------------------------------------------

def _instantiate(inst: MsumInstance, pool: list[int], cap: int):
    cols, origin = [], []
    seen = set()
    for gi, g in enumerate(inst.generators):
        if g.is_zero():
            continue
        sup = sorted(g.support())
        for img in itertools.permutations(pool, len(sup)):
            m = dict(zip(sup, img))
            v = g.rename(m)
            if v in seen:
                continue
            seen.add(v)
            cols.append(v)
            origin.append((gi, tuple(sorted(m.items()))))
            if len(cols) > cap:
                return None, None
    return cols, origin


def solve(inst: MsumInstance, max_budget: int | None = None, certified: bool = False,
          column_cap: int = DEFAULT_COLUMN_CAP) -> MsumOutcome:
    target_atoms = sorted(inst.target.support())
    if max_budget is None:
        max_budget = default_budget(inst)
    if max_budget < len(target_atoms):
        raise ValueError("budget is smaller than the target's support")
    no_atoms = not target_atoms and all(not g.support() for g in inst.generators)
    if certify_unsat(inst):
        return MsumOutcome(UNSAT_CERTIFIED, budget=max_budget, stats={"by": "projection"})
    extra = fresh_atoms(max_budget - len(target_atoms), target_atoms)
    last_done = None
    start = len(target_atoms)
    for size in range(start, max_budget + 1):
        pool = target_atoms + extra[:size - len(target_atoms)]
        cols, origin = _instantiate(inst, pool, column_cap)
        if cols is None:
            break
        x = _ilp(cols, inst.target)
        last_done = size
        if x is not None:
            witness = tuple((origin[j][0], origin[j][1], k) for j, k in enumerate(x) if k)
            return MsumOutcome(SAT, witness, size, {"pool": size, "columns": len(cols)})
        if no_atoms:
            return MsumOutcome(UNSAT_CERTIFIED, budget=max_budget, stats={"by": "atom-free"})
    if last_done is None:
        last_done = start - 1
    if certified and last_done == max_budget:
        return MsumOutcome(UNSAT_CERTIFIED, budget=max_budget, stats={"by": "caller"})
    return MsumOutcome(UNSAT_WITHIN, budget=last_done, stats={"pool": last_done})


def witness_sum(inst: MsumInstance, witness) -> YVector:
    total = YVector()
    for gi, m, k in witness:
        total = total + inst.generators[gi].rename(dict(m)).scale(k)
    return total


# -- usefulness encoding ----------------------------------------------------------------

STAR = ("*", ())


def state_key(s: State) -> tuple:
    regs = ",".join(r for r, _ in s.valuation)
    return (f"q:{s.location}|{regs}", tuple(a for _, a in s.valuation))


def data_to_y(v: DataVector) -> dict:
    d = {(f"h:{h}", ()): n for h, n in v.plain.items()}
    d.update({(f"p:{p}", (a,)): n for (p, a), n in v.data.items()})
    return d


def transition_vector(t: TransitionOrbit, marked: bool = False) -> YVector:
    d = data_to_y(t.eff)
    for s, n in ((t.src, -1), (t.tgt, 1)):
        k = state_key(s)
        d[k] = d.get(k, 0) + n
    if marked:
        d[STAR] = 1
    return YVector(d)


def build_usefulness_instances(net: Dvass, q: State, q2: State,
                               o: TransitionOrbit) -> tuple[MsumInstance, MsumInstance]:
    if o not in net.transitions:
        raise ValueError(f"{o} is not an orbit of the net")
    gens = [transition_vector(t) for t in net.transitions] + [transition_vector(o, True)]
    labels = tuple(("y", t.name or str(i)) for i, t in enumerate(net.transitions)) + (("x", o.name),)
    out = []
    for a, b in ((q, q2), (q2, q)):
        d = {STAR: 1}
        for s, n in ((a, -1), (b, 1)):
            k = state_key(s)
            d[k] = d.get(k, 0) + n
        out.append(MsumInstance(tuple(gens), YVector(d), labels))
    return out[0], out[1]


def witness_transitions(net: Dvass, o: TransitionOrbit, witness) -> list:
    """Concrete transitions (state, effect, state) of a usefulness witness."""
    from .atoms import apply
    ts = list(net.transitions) + [o]
    out = []
    for gi, m, k in witness:
        t = ts[gi]
        triple = apply(dict(m), t.triple)
        out.extend([triple] * k)
    return out


def euler_pseudo_run(steps, start: State, end: State, start_vec: DataVector | None = None):
    """Order concrete transitions into a walk from ``start`` to ``end``
    (Hierholzer); returns the pseudo-run or None if the multigraph is not
    connected enough to use every transition in one walk."""
    adj: dict = {}
    for i, (s, _, s2) in enumerate(steps):
        adj.setdefault(s, []).append(i)
    for v in adj.values():
        v.sort(reverse=True)
    used = [False] * len(steps)
    stack, path = [(start, None)], []
    while stack:
        node, via = stack[-1]
        out = adj.get(node, [])
        while out and used[out[-1]]:
            out.pop()
        if out:
            i = out.pop()
            used[i] = True
            stack.append((steps[i][2], i))
        else:
            stack.pop()
            path.append(via)
    if not all(used):
        return None
    order = [i for i in reversed(path) if i is not None]
    cur_state, vec = start, start_vec or DataVector()
    run = [(cur_state, vec)]
    for i in order:
        s, eff, s2 = steps[i]
        if s != cur_state:
            return None
        vec = vec + eff
        cur_state = s2
        run.append((cur_state, vec))
    if cur_state != end:
        return None
    return run
