"""Data VASS and Petri nets with equality data.

Names introduced by the library (normalization, compilation, folding)
contain the reserved character ``%``, which the DSL rejects in user input.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

from .atoms import apply, canonical, fresh_atoms, set_partitions, support as atom_support
from .vectors import DataVector, OmegaValuation, support as vec_support

SIGIL = "%"


@dataclass(frozen=True)
class State:
    location: str
    valuation: tuple = ()  # sorted ((register, atom | None), ...)

    @classmethod
    def make(cls, location: str, valuation: dict | None = None) -> "State":
        return cls(location, tuple(sorted((valuation or {}).items())))

    @classmethod
    def empty(cls, location: str, registers: Iterable[str]) -> "State":
        return cls(location, tuple((r, None) for r in sorted(registers)))

    @property
    def regs(self) -> dict:
        return dict(self.valuation)

    def support(self) -> frozenset[int]:
        return frozenset(a for _, a in self.valuation if a is not None)

    def empty_registers(self) -> frozenset[str]:
        return frozenset(r for r, a in self.valuation if a is None)

    def is_atom_free(self) -> bool:
        return all(a is None for _, a in self.valuation)

    def _atom_columns(self):
        cols: dict[int, list] = {}
        for r, a in self.valuation:
            if a is not None:
                cols.setdefault(a, []).append(("r", r))
        return {a: tuple(c) for a, c in cols.items()}

    def _rename(self, m):
        if self.is_atom_free():
            return self
        return State(self.location, tuple((r, None if a is None else m.get(a, a))
                                          for r, a in self.valuation))

    def sort_key(self):
        return (self.location, tuple((r, -1 if a is None else a) for r, a in self.valuation))

    def __repr__(self):
        if not self.valuation:
            return self.location
        inner = ", ".join(f"{r}={'-' if a is None else a}" for r, a in self.valuation)
        return f"{self.location}[{inner}]"


@dataclass(frozen=True)
class TransitionOrbit:
    """Canonical representative ``(source, effect, target)`` of an orbit."""
    src: State
    eff: DataVector
    tgt: State
    name: str = field(default="", compare=False)

    @classmethod
    def make(cls, src: State, eff: DataVector, tgt: State, name: str = "") -> "TransitionOrbit":
        s, v, t = canonical((src, eff, tgt))
        return cls(s, v, t, name)

    @property
    def triple(self):
        return (self.src, self.eff, self.tgt)

    def support(self) -> frozenset[int]:
        return atom_support(self.triple)

    def sort_key(self):
        return (self.src.sort_key(), self.tgt.sort_key(), self.eff._plain, self.eff._data)

    def renamed(self, name: str) -> "TransitionOrbit":
        return replace(self, name=name)

    def __repr__(self):
        return f"<{self.name or 't'}: {self.src} -[{self.eff}]-> {self.tgt}>"


@dataclass(frozen=True)
class Configuration:
    state: State
    marking: DataVector

    def __post_init__(self):
        if not self.marking.is_nonnegative():
            raise ValueError("configuration marking must be nonnegative")

    @property
    def vector(self):
        return self.marking

    def support(self) -> frozenset[int]:
        return self.state.support() | vec_support(self.marking)

    def _atom_columns(self):
        from .atoms import atom_columns
        return atom_columns((self.state, self.marking))

    def _rename(self, m):
        return Configuration(self.state._rename(m), self.marking._rename(m))

    def __repr__(self):
        return f"{self.state}({self.marking})"


@dataclass(frozen=True)
class OmegaConfiguration:
    state: State
    valuation: OmegaValuation

    @property
    def vector(self):
        return self.valuation

    def support(self) -> frozenset[int]:
        return self.state.support() | self.valuation.named_atoms()

    def _atom_columns(self):
        from .atoms import atom_columns
        return atom_columns((self.state, self.valuation))

    def _rename(self, m):
        return OmegaConfiguration(self.state._rename(m), self.valuation._rename(m))

    def sort_key(self):
        v = self.valuation
        return (self.state.sort_key(), repr(v))

    def to_json(self) -> dict:
        return {"state": state_json(self.state), **self.valuation.to_json()}

    def __repr__(self):
        return f"{self.state}{self.valuation}"


def state_json(s: State) -> dict:
    return {"location": s.location, "registers": {r: a for r, a in s.valuation}}


@dataclass(frozen=True)
class Dvass:
    name: str
    locations: tuple
    registers: tuple
    plain_places: tuple
    atom_places: tuple
    transitions: tuple

    @classmethod
    def make(cls, name, locations, registers, plain_places, atom_places,
             transitions: Iterable[TransitionOrbit]) -> "Dvass":
        seen: dict = {}
        for t in transitions:
            seen.setdefault(t, t)
        ts = tuple(sorted(seen.values(), key=TransitionOrbit.sort_key))
        net = cls(name, tuple(sorted(set(locations))), tuple(sorted(set(registers))),
                  tuple(sorted(set(plain_places))), tuple(sorted(set(atom_places))), ts)
        net.check()
        return net

    def check(self):
        groups = [set(self.locations), set(self.registers), set(self.plain_places),
                  set(self.atom_places)]
        for g1, g2 in itertools.combinations(groups, 2):
            if g1 & g2:
                raise ValueError(f"name sets overlap: {sorted(g1 & g2)}")
        regs = set(self.registers)
        for t in self.transitions:
            for s in (t.src, t.tgt):
                if s.location not in self.locations:
                    raise ValueError(f"undeclared location {s.location!r} in {t}")
                if set(s.regs) != regs:
                    raise ValueError(f"valuation of {s} is not total on registers")
            if not t.eff.plain_places() <= set(self.plain_places):
                raise ValueError(f"undeclared plain place in {t}")
            if not t.eff.atom_places() <= set(self.atom_places):
                raise ValueError(f"undeclared atom place in {t}")

    def rank(self) -> tuple[int, int, int]:
        return (len(self.atom_places), len(self.plain_places), len(self.transitions))

    def with_transitions(self, transitions) -> "Dvass":
        return Dvass.make(self.name, self.locations, self.registers, self.plain_places,
                          self.atom_places, transitions)

    def empty_state(self, location: str) -> State:
        return State.empty(location, self.registers)

    def is_plain_vass(self) -> bool:
        return not self.registers and not self.atom_places

    def orbit_names(self) -> dict:
        return {t: t.name for t in self.transitions}


@dataclass
class PetriTransition:
    name: str
    inputs: list  # [(place, var)]
    outputs: list
    constraint: list  # [(var, "=" | "!=", var)]

    def variables(self) -> list[str]:
        out = []
        for _, x in self.inputs + self.outputs:
            if x not in out:
                out.append(x)
        for x, _, y in self.constraint:
            for z in (x, y):
                if z not in out:
                    out.append(z)
        return out


@dataclass
class PetriNet:
    name: str
    places: list
    transitions: list
    marking: dict = field(default_factory=dict)  # place -> [atom name]
    target: dict | None = None


PseudoRun = list  # [(State, DataVector)]


# -- basic operations ------------------------------------------------------

def reverse(net: Dvass) -> Dvass:
    ts = [TransitionOrbit.make(t.tgt, -t.eff, t.src, t.name) for t in net.transitions]
    return net.with_transitions(ts)


def _match_state(pattern: State, state: State) -> dict | None:
    if pattern.location != state.location:
        return None
    m: dict = {}
    regs = state.regs
    for r, x in pattern.valuation:
        y = regs.get(r, "missing")
        if y == "missing" or (x is None) != (y is None):
            return None
        if x is not None and m.setdefault(x, y) != y:
            return None
    if len(set(m.values())) != len(m):
        return None
    return m


def instantiations(t: TransitionOrbit, state: State, named: Iterable[int],
                   value, default) -> Iterator[dict]:
    """Injective atom maps sending ``t.src`` onto ``state``.

    Unforced atoms of ``t`` go to ``named`` atoms or to fresh ones (at most
    one fresh atom per transition atom).  ``value(p, a)`` / ``default(p)``
    give the current count, used to prune maps that would go negative.
    """
    forced = _match_state(t.src, state)
    if forced is None:
        return
    named = sorted(set(named) | state.support())
    rest = sorted(t.support() - set(forced))
    fresh = fresh_atoms(len(rest), named)
    neg: dict[int, list] = {}
    for (p, a), n in t.eff.data.items():
        if n < 0:
            neg.setdefault(a, []).append((p, -n))
    for a, reqs in neg.items():
        if a in forced and any(value(p, forced[a]) < k for p, k in reqs):
            return

    def ok(a, b, is_fresh):
        for p, k in neg.get(a, ()):
            have = default(p) if is_fresh else value(p, b)
            if have < k:
                return False
        return True

    def rec(i, m, used, nfresh):
        if i == len(rest):
            yield dict(m)
            return
        a = rest[i]
        for b in named:
            if b in used or not ok(a, b, False):
                continue
            m[a] = b
            used.add(b)
            yield from rec(i + 1, m, used, nfresh)
            used.discard(b)
            del m[a]
        b = fresh[nfresh]
        if ok(a, b, True):
            m[a] = b
            yield from rec(i + 1, m, used, nfresh + 1)
            del m[a]

    yield from rec(0, dict(forced), set(forced.values()), 0)


def successors(c: Configuration, net: Dvass) -> Iterator[tuple[TransitionOrbit, dict, Configuration]]:
    """Concrete successors; fresh atoms are the smallest ids unused by ``c``."""
    marking = c.marking
    data = marking.data
    named = c.support()
    for t in net.transitions:
        for m in instantiations(t, c.state, named,
                                lambda p, a: data.get((p, a), 0), lambda p: 0):
            m_full = {a: m[a] for a in m}
            v = apply(m_full, t.eff)
            new = marking + v
            if not new.is_nonnegative():
                continue
            yield t, m_full, Configuration(apply(m_full, t.tgt), new)


def enumerate_successors(c: Configuration, net: Dvass) -> frozenset:
    """Successors up to renamings fixing supp(c): pairs (orbit, configuration)
    where atoms outside supp(c) are renumbered canonically."""
    fixed = c.support()
    out = set()
    for t, _, c2 in successors(c, net):
        out.add((t, canonical(c2, fixed)))
    return frozenset(out)


def pseudo_run_steps_valid(net: Dvass, run: PseudoRun) -> bool:
    orbits = set(net.transitions)
    for (s0, v0), (s1, v1) in zip(run, run[1:]):
        t = canonical((s0, v1 - v0, s1))
        if TransitionOrbit(*t) not in orbits:
            return False
    return True


# -- Petri nets --------------------------------------------------------------

MAIN = "main"


def _types_for(tr: PetriTransition) -> list[dict[str, int]]:
    vs = tr.variables()
    out = []
    for part in set_partitions(vs):
        block = {x: i for i, b in enumerate(part) for x in b}
        good = all((block[x] == block[y]) == (op == "=") for x, op, y in tr.constraint)
        if good:
            out.append(block)
    return out


def orbit_counts(net: PetriNet) -> dict[str, int]:
    """Number of transition orbits each Petri transition spans."""
    return {tr.name: len(_types_for(tr)) for tr in net.transitions}


def compile_petri(net: PetriNet) -> tuple[Dvass, Configuration, Configuration | None]:
    """Expand each Petri transition into one orbit per total equality type.

    Tight loops (same atom consumed and produced on the same place) are
    split through a fresh intermediate location; registers carry the atoms
    shared by the two halves.
    """
    plans = []
    max_shared = 0
    for tr in net.transitions:
        types = _types_for(tr)
        if not types:
            raise ValueError(f"transition {tr.name!r}: constraint is unsatisfiable")
        for k, block in enumerate(types):
            vin = DataVector.tokens()
            for p, x in tr.inputs:
                vin = vin + DataVector.unit(p, block[x])
            vout = DataVector.tokens()
            for p, x in tr.outputs:
                vout = vout + DataVector.unit(p, block[x])
            din, dout = vin.data, vout.data
            tight = any(key in dout for key in din)
            shared = sorted(vec_support(vin) & vec_support(vout)) if tight else []
            max_shared = max(max_shared, len(shared))
            plans.append((tr.name, k, vin, vout, tight, shared))
    regs = [f"{SIGIL}r{i + 1}" for i in range(max_shared)]
    locations = [MAIN]
    orbits = []
    main = State.empty(MAIN, regs)
    for name, k, vin, vout, tight, shared in plans:
        if not tight:
            orbits.append(TransitionOrbit.make(main, vout - vin, main, f"{name}.{k}"))
            continue
        mid_loc = f"{SIGIL}{name}.{k}"
        locations.append(mid_loc)
        val = {r: None for r in regs}
        val.update({regs[i]: a for i, a in enumerate(shared)})
        mid = State.make(mid_loc, val)
        orbits.append(TransitionOrbit.make(main, -vin, mid, f"{name}.{k}.in"))
        orbits.append(TransitionOrbit.make(mid, vout, main, f"{name}.{k}.out"))
    dv = Dvass.make(net.name, locations, regs, [], net.places, orbits)

    names: dict[str, int] = {}

    def config(marking):
        data: dict = {}
        for p, atoms in marking.items():
            for x in atoms:
                a = names.setdefault(x, len(names))
                data[(p, a)] = data.get((p, a), 0) + 1
        return Configuration(main, DataVector(data=data))

    src = config(net.marking)
    tgt = config(net.target) if net.target is not None else None
    return dv, src, tgt


# -- normalization -----------------------------------------------------------

def reg_place(r: str) -> str:
    return f"{SIGIL}reg.{r}"


def bar_place(r: str) -> str:
    return f"{SIGIL}bar.{r}"


def split_location(loc: str, empty: Iterable[str], barred: bool) -> str:
    return f"{loc}{SIGIL}{'b' if barred else 'u'}.{'.'.join(sorted(empty))}"


def valuation_vector(state: State, place_of) -> DataVector:
    data: dict = {}
    for r, a in state.valuation:
        if a is not None:
            data[(place_of(r), a)] = data.get((place_of(r), a), 0) + 1
    return DataVector(data=data)


def eliminate_registers(net: Dvass) -> Dvass:
    """Registers become atom places holding at most one token; the set of
    empty registers moves into locations.  Every transition lands in a
    barred copy of its target location, from which a flash-back transition
    moves the barred register tokens back."""
    if not net.registers:
        return net
    regs = net.registers
    locs = set()
    orbits = []
    barred_targets = set()
    for t in net.transitions:
        mu, mu2 = t.src, t.tgt
        eff = (t.eff - valuation_vector(mu, reg_place) + valuation_vector(mu2, bar_place))
        l1 = split_location(mu.location, mu.empty_registers(), False)
        l2 = split_location(mu2.location, mu2.empty_registers(), True)
        locs.update((l1, l2))
        barred_targets.add((mu2.location, mu2.empty_registers()))
        orbits.append(TransitionOrbit.make(State(l1), eff, State(l2), t.name))
    for loc, empty in sorted(barred_targets, key=lambda x: (x[0], sorted(x[1]))):
        full = [r for r in regs if r not in empty]
        for part in set_partitions(full):
            val = {r: None for r in regs}
            for i, block in enumerate(part):
                for r in block:
                    val[r] = i
            nu = State.make(loc, val)
            eff = valuation_vector(nu, reg_place) - valuation_vector(nu, bar_place)
            l_bar = split_location(loc, empty, True)
            l_un = split_location(loc, empty, False)
            locs.update((l_bar, l_un))
            orbits.append(TransitionOrbit.make(State(l_bar), eff, State(l_un), f"{SIGIL}flash"))
    for loc in net.locations:
        for k in range(len(regs) + 1):
            for empty in itertools.combinations(regs, k):
                locs.add(split_location(loc, empty, False))
    places = list(net.atom_places) + [reg_place(r) for r in regs] + [bar_place(r) for r in regs]
    return Dvass.make(net.name, locs, [], net.plain_places, places, orbits)


def register_free_config(c: Configuration) -> Configuration:
    s = c.state
    loc = split_location(s.location, s.empty_registers(), False)
    return Configuration(State(loc), c.marking + valuation_vector(s, reg_place))


def pinned_place(p: str, k: int) -> str:
    return f"{SIGIL}{p}@{k}"


def pin_atoms(net: Dvass, atoms: Iterable[int]) -> tuple[Dvass, dict]:
    """Move ``P × S`` to plain places for the finite atom set ``S``.

    Each orbit splits by the partial injections of its atoms into ``S``;
    returns the new net and the map ``(p, s) -> plain place``.
    """
    S = sorted(set(atoms))
    if not S:
        return net, {}
    idx = {a: i for i, a in enumerate(S)}
    pins = {(p, a): pinned_place(p, idx[a]) for p in net.atom_places for a in S}
    orbits = []
    for t in net.transitions:
        ts = sorted(t.support())
        # fresh labels keep representative atoms disjoint from S
        off = max(S) + 1
        t_src, t_eff, t_tgt = apply({a: a + off for a in ts}, t.triple)
        shifted = [a + off for a in ts]
        for k in range(len(shifted) + 1):
            for dom in itertools.combinations(shifted, k):
                for img in itertools.permutations(S, k):
                    m = dict(zip(dom, img))
                    plain, data = dict(t_eff.plain), {}
                    for (p, a), n in t_eff.data.items():
                        if a in m:
                            h = pins[(p, m[a])]
                            plain[h] = plain.get(h, 0) + n
                        else:
                            data[(p, a)] = n
                    orbits.append(TransitionOrbit.make(
                        apply(m, t_src), DataVector(plain, data), apply(m, t_tgt), t.name))
    plain_places = list(net.plain_places) + sorted(pins.values())
    return Dvass.make(net.name, net.locations, net.registers, plain_places,
                      net.atom_places, orbits), pins


def pin_vector(v: DataVector, pins: dict) -> DataVector:
    plain, data = dict(v.plain), {}
    for key, n in v.data.items():
        if key in pins:
            plain[pins[key]] = plain.get(pins[key], 0) + n
        else:
            data[key] = n
    return DataVector(plain, data)


INIT = f"{SIGIL}init"
FINAL = f"{SIGIL}final"


def normalize(net: Dvass, src: Configuration, tgt: Configuration) -> tuple[Dvass, State, State]:
    """Equivalent instance whose endpoints are empty-register states with
    zero marking.  Steps: registers to atom places, endpoint atoms to plain
    places, endpoint plain values to four bracket transitions."""
    if (src.state.is_atom_free() and tgt.state.is_atom_free()
            and src.marking.is_zero() and tgt.marking.is_zero()):
        return net, src.state, tgt.state
    if not net.registers:
        net1, c1, c2 = net, src, tgt
    else:
        net1 = eliminate_registers(net)
        c1, c2 = register_free_config(src), register_free_config(tgt)
    S = vec_support(c1.marking) | vec_support(c2.marking)
    net2, pins = pin_atoms(net1, S)
    u, u2 = pin_vector(c1.marking, pins), pin_vector(c2.marking, pins)
    l, l2 = c1.state.location, c2.state.location
    if u.is_zero() and u2.is_zero():
        return net2, State(l), State(l2)
    extra = [
        TransitionOrbit.make(State(INIT), u, State(l), f"{SIGIL}load"),
        TransitionOrbit.make(State(l2), -u2, State(FINAL), f"{SIGIL}unload"),
        TransitionOrbit.make(State(l), -u, State(INIT), f"{SIGIL}unload0"),
        TransitionOrbit.make(State(FINAL), u2, State(l2), f"{SIGIL}load1"),
    ]
    net3 = Dvass.make(net2.name, list(net2.locations) + [INIT, FINAL], [],
                      net2.plain_places, net2.atom_places, list(net2.transitions) + extra)
    return net3, State(INIT), State(FINAL)
