"""Usefulness of transition orbits and pumpability of places."""
from __future__ import annotations

from dataclasses import dataclass

from .atoms import canonical
from .coverability import (DEFAULT_MAX_DEPTH, DEFAULT_MAX_NODES, CoverCapExceeded,
                           compute_cover)
from .model import Configuration, Dvass, State, TransitionOrbit, reverse
from .msum import (SAT, UNSAT_CERTIFIED, UNSAT_WITHIN, MsumOutcome,
                   build_usefulness_instances, solve)
from .vectors import OMEGA, DataVector

USEFUL = "USEFUL"
USELESS = "USELESS"
UNKNOWN = "UNKNOWN"


@dataclass
class OrbitVerdict:
    orbit: TransitionOrbit
    status: str
    forward: MsumOutcome | None = None
    backward: MsumOutcome | None = None
    note: str = ""

    def to_json(self) -> dict:
        return {"orbit": repr(self.orbit), "name": self.orbit.name, "status": self.status,
                "forward": self.forward.kind if self.forward else self.note or None,
                "backward": self.backward.kind if self.backward else self.note or None}


@dataclass
class Phi1Report:
    verdicts: list

    def useless(self) -> list:
        return [v.orbit for v in self.verdicts if v.status == USELESS]

    def unknown(self) -> list:
        return [v.orbit for v in self.verdicts if v.status == UNKNOWN]

    def holds(self) -> bool:
        return all(v.status == USEFUL for v in self.verdicts)

    def to_json(self) -> list:
        return [v.to_json() for v in self.verdicts]


def _classify(out: MsumOutcome, assume_complete: bool) -> str:
    if out.kind == SAT:
        return USEFUL
    if out.kind == UNSAT_CERTIFIED or (assume_complete and out.kind == UNSAT_WITHIN):
        return USELESS
    return UNKNOWN


def check_phi1(net: Dvass, q: State, q2: State, budget: int | None = None,
               assume_complete: bool = False, stop_at_useless: bool = False,
               column_cap: int | None = None) -> Phi1Report:
    """Classify every orbit.  A witness multiset for one orbit also witnesses
    every orbit it uses, so those are marked without solving again."""
    kw = {} if column_cap is None else {"column_cap": column_cap}
    covered = {0: set(), 1: set()}  # direction -> orbits seen in some witness
    verdicts = []
    for o in net.transitions:
        fwd_inst, bwd_inst = build_usefulness_instances(net, q, q2, o)
        outs = []
        status = USEFUL
        for d, inst in enumerate((fwd_inst, bwd_inst)):
            if o in covered[d]:
                outs.append(MsumOutcome(SAT, stats={"by": "shared witness"}))
                continue
            out = solve(inst, budget, certified=False, **kw)
            outs.append(out)
            if out.kind == SAT:
                ts = list(net.transitions) + [o]
                covered[d].update(ts[g] for g, _, _ in out.witness)
                continue
            status = _classify(out, assume_complete)
            if status == USELESS:
                break
        if status == USEFUL and any(x.kind != SAT for x in outs):
            status = UNKNOWN
        outs += [None] * (2 - len(outs))
        verdicts.append(OrbitVerdict(o, status, outs[0], outs[1]))
        if stop_at_useless and status == USELESS:
            break
    return Phi1Report(verdicts)


# -- pumpability ------------------------------------------------------------------

ANALYSES = ("forward q", "forward q'", "backward q", "backward q'")


def place_value(ideal, c: str, plain: bool):
    """g(c): the plain value, or the size of an atom place (ω if any entry is ω)."""
    v = ideal.valuation
    if plain:
        return v.plain_value(c)
    if c in v.omega_places:
        return OMEGA
    total = 0
    for (p, _), n in v.exceptions.items():
        if p == c and n > 0:
            if n == OMEGA:
                return OMEGA
            total += n
    return total


def _same_state(a: State, b: State) -> bool:
    return canonical(a) == canonical(b)


@dataclass
class PlaceReport:
    place: str
    plain: bool
    pumpable: tuple  # four booleans in ANALYSES order
    bound: int | None = None  # smallest valid bound when unpumpable

    @property
    def is_pumpable(self) -> bool:
        return all(self.pumpable)

    def to_json(self) -> dict:
        return {"place": self.place, "kind": "plain" if self.plain else "atom",
                "pumpable": dict(zip(ANALYSES, self.pumpable)), "bound": self.bound}


@dataclass
class Phi2Report:
    places: list
    bound_B: int
    covers: tuple  # four CoverResult, ANALYSES order
    unknown: str = ""

    def unpumpable(self) -> list:
        return [p for p in self.places if not p.is_pumpable]

    def holds(self) -> bool:
        return not self.unknown and not self.unpumpable()

    def to_json(self) -> dict:
        return {"places": [p.to_json() for p in self.places], "bound_B": self.bound_B,
                "unknown": self.unknown or None,
                "covers": {name: c.to_json() for name, c in zip(ANALYSES, self.covers)}}


def check_phi2(net: Dvass, q: State, q2: State, route: str = "direct",
               max_nodes: int = DEFAULT_MAX_NODES,
               max_depth: int = DEFAULT_MAX_DEPTH) -> Phi2Report:
    rev = reverse(net)
    jobs = ((net, q), (net, q2), (rev, q), (rev, q2))
    covers = []
    for n, s in jobs:
        try:
            covers.append(compute_cover(n, Configuration(s, DataVector()), route,
                                        max_nodes, max_depth))
        except CoverCapExceeded as e:
            return Phi2Report([], 0, tuple(covers), unknown=str(e))
    places = [(h, True) for h in net.plain_places] + [(p, False) for p in net.atom_places]
    reports = []
    bound_B = 0
    for c, plain in places:
        pump = []
        for (_, s), cov in zip(jobs, covers):
            pump.append(any(_same_state(i.state, s) and place_value(i, c, plain) > 0
                            for i in cov))
        bound = None
        if not all(pump):
            per = []
            for ok, cov in zip(pump, covers):
                if ok:
                    continue
                finite = [place_value(i, c, plain) for i in cov]
                per.append(int(max((x for x in finite if x < OMEGA), default=0)))
            bound = min(per)
            bound_B = max(bound_B, max(per))
        reports.append(PlaceReport(c, plain, tuple(pump), bound))
    return Phi2Report(reports, bound_B, tuple(covers))
