"""Coverability sets as finite antichains of simple ω-configurations.

The tree search works on ω-configurations whose atom ids persist along a
branch.  When an ancestor ``A`` embeds into a node ``N`` through a genuine
permutation ``ρ`` (``ρ(A) ≤ N`` pointwise, including the default region),
repeating the branch segment renamed by ``ρ`` is always possible, and the
node is accelerated:

* plain growth becomes ω;
* growth at ``(p, z)`` becomes ω on every atom of the ``ρ``-cycle of ``z``;
* growth at ``(p, z)`` where ``z`` is not the image of an atom named in
  ``A`` makes the default of ``p`` ω (the segment can be replayed with a
  fresh atom in place of ``z`` as often as wanted).

Two routes are offered: ``direct`` runs the tree on the net as given, and
``dvas`` first reduces the net to a single location without registers or
plain places (:func:`to_dvas`) and pulls the result back.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .atoms import Renaming, apply, canonical, fresh_atoms, set_partitions
from .model import (SIGIL, Configuration, Dvass, OmegaConfiguration, State,
                    TransitionOrbit, eliminate_registers, instantiations,
                    reg_place, register_free_config, split_location)
from .vectors import OMEGA, DataVector, OmegaValuation, as_omega, embeds

ROUTES = ("direct", "dvas")


class CoverCapExceeded(RuntimeError):
    """The tree outgrew its node or depth cap; the cover is unknown."""

    def __init__(self, what: str, limit: int):
        super().__init__(f"coverability {what} cap {limit} exceeded")
        self.what = what
        self.limit = limit


@dataclass(frozen=True)
class CoverResult:
    ideals: tuple  # canonical OmegaConfiguration, pairwise incomparable
    stats: dict = field(default_factory=dict, compare=False, hash=False)

    def __iter__(self):
        return iter(self.ideals)

    def __len__(self):
        return len(self.ideals)

    def at(self, state: State) -> list:
        return [i for i in self.ideals if i.state == state]

    def to_json(self) -> list:
        return [i.to_json() for i in self.ideals]


# -- ω-configuration helpers ---------------------------------------------------

def absorb_generic(c: OmegaConfiguration) -> OmegaConfiguration:
    """Drop named atoms that are indistinguishable from generic ones.

    An atom outside the registers whose every exception sits on a place
    with default ω denotes the same ideal as a fresh atom."""
    v = c.valuation
    regs = c.state.support()
    exc = v.exceptions
    by_atom: dict[int, list] = {}
    for (p, a), n in exc.items():
        by_atom.setdefault(a, []).append(p)
    drop = {a for a, ps in by_atom.items()
            if a not in regs and all(p in v.omega_places for p in ps)}
    if not drop:
        return c
    return OmegaConfiguration(c.state, OmegaValuation(
        v.plain, v.omega_places, {k: n for k, n in exc.items() if k[1] not in drop}))


def canonical_ideal(c: OmegaConfiguration) -> OmegaConfiguration:
    return canonical(absorb_generic(c))


def antichain(ideals) -> tuple:
    """Maximal elements under ⊑, canonical and sorted; of two mutually
    embedding ideals the canonically smaller one is kept."""
    uniq = sorted({canonical_ideal(i) for i in ideals}, key=OmegaConfiguration.sort_key)
    keep = []
    for i, x in enumerate(uniq):
        dominated = False
        for j, y in enumerate(uniq):
            if i == j or embeds(x, y) is None:
                continue
            if embeds(y, x) is None or j < i:
                dominated = True
                break
        if not dominated:
            keep.append(x)
    return tuple(keep)


def ideal_member(cover, c) -> bool:
    return any(embeds(c, i) is not None for i in cover)


def _fire(node: OmegaConfiguration, t: TransitionOrbit, m: dict) -> OmegaConfiguration | None:
    v = node.valuation
    eff = apply(m, t.eff)
    plain = v.plain
    for h, n in eff.plain.items():
        new = plain.get(h, 0) + n
        if new < 0:
            return None
        plain[h] = new
    exc = v.exceptions
    for (p, a), n in eff.data.items():
        new = exc.get((p, a), v.default(p)) + n
        if new < 0:
            return None
        exc[(p, a)] = new
    return absorb_generic(OmegaConfiguration(apply(m, t.tgt),
                                             OmegaValuation(plain, v.omega_places, exc)))


def omega_successors(node: OmegaConfiguration, net: Dvass):
    v = node.valuation
    named = node.support()
    for t in net.transitions:
        for h, n in t.eff.plain.items():
            if n < 0 and v.plain_value(h) < -n:
                break
        else:
            for m in instantiations(t, node.state, named, v.value, v.default):
                s = _fire(node, t, m)
                if s is not None:
                    yield t, s


# -- acceleration --------------------------------------------------------------

def _permutation_embedding(a: OmegaConfiguration, n: OmegaConfiguration) -> Renaming | None:
    """A finite-support permutation ρ with ρ(a) ≤ n at every coordinate."""
    if a.state.location != n.state.location:
        return None
    fa, fn = a.valuation, n.valuation
    if not fa.omega_places <= fn.omega_places:
        return None
    for h, x in fa.plain.items():
        if x > fn.plain_value(h):
            return None
    regs_a, regs_n = a.state.regs, n.state.regs
    forced: dict[int, int] = {}
    for r, x in regs_a.items():
        y = regs_n.get(r)
        if (x is None) != (y is None):
            return None
        if x is not None and forced.setdefault(x, y) != y:
            return None
    if len(set(forced.values())) != len(forced):
        return None
    places = sorted(fa.atom_places() | fn.atom_places())
    named_a = sorted(fa.named_atoms() | set(forced))
    named_n = sorted(fn.named_atoms() | n.state.support())
    # atoms of n that cannot receive a generic atom of a
    must_hit = {z for z in named_n
                if any(fn.value(p, z) < OMEGA for p in fa.omega_places)}

    def fits(x, z):
        return all(fa.value(p, x) <= fn.value(p, z) for p in places)

    def fits_generic(x):
        return all(fa.value(p, x) <= fn.default(p) for p in places)

    cands = {}
    for x in named_a:
        if x in forced:
            if not fits(x, forced[x]):
                return None
            cands[x] = [forced[x]]
            continue
        opts = [z for z in named_n if fits(x, z)]
        opts.sort(key=lambda z: (z != x, z))
        if fits_generic(x):
            opts.append(None)
        cands[x] = opts
    order = sorted(named_a, key=lambda x: (x not in forced, len(cands[x]), x))
    avoid = set(named_a) | set(named_n)

    def rec(i, inj, used):
        missing = must_hit - used
        if len(missing) > len(order) - i:
            return None
        if i == len(order):
            return dict(inj)
        x = order[i]
        for z in cands[x]:
            if z is None:
                z = fresh_atoms(1, avoid | used)[0]
            elif z in used:
                continue
            inj[x] = z
            used.add(z)
            out = rec(i + 1, inj, used)
            if out is not None:
                return out
            used.discard(z)
            del inj[x]
        return None

    inj = rec(0, {}, set())
    if inj is None:
        return None
    return Renaming.from_injection(inj)


def _cycle(rho: Renaming, z: int) -> list[int]:
    out = [z]
    y = rho(z)
    while y != z:
        out.append(y)
        y = rho(y)
    return out


def accelerate(a: OmegaConfiguration, n: OmegaConfiguration) -> OmegaConfiguration | None:
    """The accelerated form of ``n`` against ancestor ``a``, or None when
    ``a`` does not embed or nothing grows."""
    rho = _permutation_embedding(a, n)
    if rho is None:
        return None
    fa, fn = a.valuation, n.valuation
    inv = rho.inverse()
    plain = fn.plain
    changed = False
    for h, x in plain.items():
        if x != OMEGA and x > fa.plain_value(h):
            plain[h] = OMEGA
            changed = True
    omega = set(fn.omega_places)
    exc = fn.exceptions
    image_named = {rho(x) for x in fa.named_atoms() | a.state.support()}
    atoms = sorted(fn.named_atoms() | image_named)
    places = sorted(fa.atom_places() | fn.atom_places())
    new_omega_coords = set()
    for z in atoms:
        for p in places:
            if fn.value(p, z) <= fa.value(p, inv(z)):
                continue
            # strict growth, possibly from a finite value to one already ω
            if z not in image_named and p not in omega:
                omega.add(p)
                changed = True
            for y in _cycle(rho, z):
                if fn.value(p, y) != OMEGA:
                    new_omega_coords.add((p, y))
                    changed = True
    if not changed:
        return None
    for key in new_omega_coords:
        exc[key] = OMEGA
    # exceptions equal to a new ω default vanish in the constructor
    return absorb_generic(OmegaConfiguration(n.state, OmegaValuation(plain, omega, exc)))


# -- tree search ----------------------------------------------------------------

DEFAULT_MAX_NODES = 20000
DEFAULT_MAX_DEPTH = 400


def km_cover(net: Dvass, c0, max_nodes: int = DEFAULT_MAX_NODES,
             max_depth: int = DEFAULT_MAX_DEPTH) -> tuple:
    """Karp-Miller style tree; returns the antichain of maximal nodes."""
    root = c0 if isinstance(c0, OmegaConfiguration) else \
        OmegaConfiguration(c0.state, as_omega(c0.marking))
    root = absorb_generic(root)
    kept = [root]
    frontier = [(root, ())]
    while frontier:
        nxt = []
        for node, path in frontier:
            if any(embeds(node, k) is not None and embeds(k, node) is None for k in kept):
                continue
            if len(path) >= max_depth:
                raise CoverCapExceeded("depth", max_depth)
            anc = path + (node,)
            succ = sorted({s for _, s in omega_successors(node, net)},
                          key=OmegaConfiguration.sort_key)
            for s in succ:
                changed = True
                while changed:
                    changed = False
                    for a in anc:
                        acc = accelerate(a, s)
                        if acc is not None:
                            s = acc
                            changed = True
                if any(embeds(s, k) is not None for k in kept):
                    continue
                kept.append(s)
                if len(kept) > max_nodes:
                    raise CoverCapExceeded("node", max_nodes)
                nxt.append((s, anc))
        frontier = nxt
    return antichain(kept), len(kept)


# -- reduction to a single-location net without registers or plain places ------

STAR = f"{SIGIL}*"


def loc_place(loc: str) -> str:
    return f"{SIGIL}at.{loc}"


def tilde_place(loc: str) -> str:
    return f"{SIGIL}to.{loc}"


@dataclass(frozen=True)
class BackMap:
    """What is needed to pull a cover of the reduced net back."""
    plain_places: tuple          # original plain places (now atom places)
    atom_places: tuple           # original atom places
    registers: tuple
    locations: dict              # step-1 location -> (location, empty registers) or None if barred
    lifted: tuple                # every place that was plain before step 3


def _lift_transition(eff: DataVector, name: str) -> list[TransitionOrbit]:
    """Sign-consistent preimages of ``eff`` under the map forgetting atoms on
    plain places: produced tokens land on one new atom per place, consumed
    tokens take every equality type with each other and with ``eff``'s atoms."""
    data = eff.data
    base = sorted({a for (_, a) in data})
    nxt = (max(base) + 1) if base else 0
    produced = {}
    slots = []
    for h, n in sorted(eff.plain.items()):
        if n > 0:
            produced[h] = (nxt, n)
            nxt += 1
        else:
            slots.extend([h] * (-n))
    out = []
    seen = set()

    def emit(assign):
        d = dict(data)
        for h, (a, n) in produced.items():
            d[(h, a)] = d.get((h, a), 0) + n
        for h, a in zip(slots, assign):
            d[(h, a)] = d.get((h, a), 0) - 1
        t = TransitionOrbit.make(State(STAR), DataVector(data=d), State(STAR), name)
        if t not in seen:
            seen.add(t)
            out.append(t)

    def rec(i, assign, nblocks):
        if i == len(slots):
            emit(assign)
            return
        for a in base:
            rec(i + 1, assign + [a], nblocks)
        for b in range(nblocks + 1):
            rec(i + 1, assign + [nxt + b], max(nblocks, b + 1))

    rec(0, [], 0)
    return out


def to_dvas(net: Dvass) -> tuple[Dvass, BackMap]:
    net1 = eliminate_registers(net) if net.registers else net
    locmap: dict = {}
    if net.registers:
        for loc in net.locations:
            for k in range(len(net.registers) + 1):
                for empty in itertools.combinations(net.registers, k):
                    locmap[split_location(loc, empty, False)] = (loc, frozenset(empty))
        for l1 in net1.locations:
            locmap.setdefault(l1, None)
    else:
        locmap = {loc: (loc, frozenset()) for loc in net.locations}
    h2 = list(net1.plain_places)
    for l1 in net1.locations:
        h2 += [loc_place(l1), tilde_place(l1)]
    ts = []
    for t in net1.transitions:
        eff = t.eff + DataVector({loc_place(t.src.location): -1,
                                  tilde_place(t.tgt.location): 1})
        ts.extend(_lift_transition(eff, t.name))
    for l1 in net1.locations:
        eff = DataVector({loc_place(l1): 1, tilde_place(l1): -1})
        ts.extend(_lift_transition(eff, f"{SIGIL}settle"))
    net3 = Dvass.make(f"{net.name}{SIGIL}dvas", [STAR], [], [],
                      list(net1.atom_places) + h2, ts)
    back = BackMap(tuple(net.plain_places), tuple(net.atom_places), tuple(net.registers),
                   locmap, tuple(h2))
    return net3, back


def dvas_config(c: Configuration, net: Dvass) -> Configuration:
    """Image of a configuration of ``net`` in :func:`to_dvas` (net)."""
    c1 = register_free_config(c) if net.registers else c
    plain = dict(c1.marking.plain)
    plain[loc_place(c1.state.location)] = plain.get(loc_place(c1.state.location), 0) + 1
    data = c1.marking.data
    avoid = set(a for (_, a) in data)
    for h, a in zip(sorted(plain), fresh_atoms(len(plain), avoid)):
        data[(h, a)] = plain[h]
    return Configuration(State(STAR), DataVector(data=data))


def _sum_place(v: OmegaValuation, h: str):
    if h in v.omega_places:
        return OMEGA
    return sum(n for (p, _), n in v.exceptions.items() if p == h)


def pull_back(ideals, back: BackMap) -> list[OmegaConfiguration]:
    out = []
    for f in ideals:
        v = f.valuation
        totals = {h: _sum_place(v, h) for h in back.lifted}
        keep_places = set(back.atom_places)
        for l1, origin in back.locations.items():
            if origin is None or totals.get(loc_place(l1), 0) < 1:
                continue
            loc, empty = origin
            plain = {h: totals[h] for h in back.plain_places if totals.get(h, 0)}
            exc = {k: n for k, n in v.exceptions.items() if k[0] in keep_places}
            omega = [p for p in v.omega_places if p in keep_places]
            base = OmegaValuation(plain, omega, exc)
            full = [r for r in back.registers if r not in empty]
            for val in _register_choices(v, full):
                regs = {r: None for r in back.registers}
                regs.update(val)
                out.append(OmegaConfiguration(State.make(loc, regs), base))
    return out


def _register_choices(v: OmegaValuation, regs: list):
    """Register contents compatible with the tokens on the register places:
    a named atom with a token there, or (on an ω place) a generic atom."""
    named = sorted(v.named_atoms())
    options = []
    for r in regs:
        p = reg_place(r)
        opts = [a for a in named if v.value(p, a) >= 1]
        if p in v.omega_places:
            opts.append(None)
        options.append(opts)
    avoid = set(named)
    for pick in itertools.product(*options):
        generic = [r for r, a in zip(regs, pick) if a is None]
        for part in set_partitions(generic):
            atoms = fresh_atoms(len(part), avoid)
            val = {r: a for r, a in zip(regs, pick) if a is not None}
            for block, a in zip(part, atoms):
                for r in block:
                    val[r] = a
            yield val


# -- entry point ------------------------------------------------------------------

def compute_cover(net: Dvass, c0, route: str = "direct",
                  max_nodes: int = DEFAULT_MAX_NODES,
                  max_depth: int = DEFAULT_MAX_DEPTH) -> CoverResult:
    if route not in ROUTES:
        raise ValueError(f"unknown route {route!r}")
    if route == "direct":
        ideals, size = km_cover(net, c0, max_nodes, max_depth)
        return CoverResult(ideals, {"route": route, "nodes": size})
    net3, back = to_dvas(net)
    if isinstance(c0, OmegaConfiguration):
        raise ValueError("the dvas route starts from a finite configuration")
    ideals3, size = km_cover(net3, dvas_config(c0, net), max_nodes, max_depth)
    return CoverResult(antichain(pull_back(ideals3, back)),
                       {"route": route, "nodes": size, "orbits": len(net3.transitions)})
