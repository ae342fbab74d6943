"""Sparse vectors over plain places and (atom place, atom) pairs.

``DataVector`` is an integer vector with finitely many nonzero entries.
``OmegaValuation`` is its ω-extension in simple form: plain entries in
N ∪ {ω}, and per atom place a default of 0 or ω plus finitely many
exceptions.  ω is ``math.inf`` so ``ω + n == ω`` comes for free.
"""
from __future__ import annotations

import math
from typing import Iterable, Mapping

from .atoms import Renaming, fresh_atoms

OMEGA = math.inf


def fmt_value(n) -> str:
    return "ω" if n == OMEGA else str(n)


class DataVector:
    """Integer vector over ``H ∪ P×A``; plain keys are place names and data
    keys are ``(place, atom)`` pairs."""

    __slots__ = ("_plain", "_data", "_hash")

    def __init__(self, plain: Mapping[str, int] | None = None,
                 data: Mapping[tuple[str, int], int] | None = None):
        self._plain = tuple(sorted((h, n) for h, n in (plain or {}).items() if n))
        self._data = tuple(sorted((k, n) for k, n in (data or {}).items() if n))
        self._hash = None

    @classmethod
    def zero(cls) -> "DataVector":
        return cls()

    @classmethod
    def unit(cls, place: str, atom: int | None = None, n: int = 1) -> "DataVector":
        if atom is None:
            return cls(plain={place: n})
        return cls(data={(place, atom): n})

    @classmethod
    def tokens(cls, **places: Iterable[int]) -> "DataVector":
        data: dict = {}
        for p, atoms in places.items():
            for a in atoms:
                data[(p, a)] = data.get((p, a), 0) + 1
        return cls(data=data)

    @property
    def plain(self) -> dict[str, int]:
        return dict(self._plain)

    @property
    def data(self) -> dict[tuple[str, int], int]:
        return dict(self._data)

    def get(self, key) -> int:
        src = self._data if isinstance(key, tuple) else self._plain
        for k, n in src:
            if k == key:
                return n
        return 0

    def items(self):
        yield from self._plain
        yield from self._data

    def is_zero(self) -> bool:
        return not self._plain and not self._data

    def is_nonnegative(self) -> bool:
        return all(n >= 0 for _, n in self._plain) and all(n >= 0 for _, n in self._data)

    def __add__(self, other: "DataVector") -> "DataVector":
        plain = dict(self._plain)
        for h, n in other._plain:
            plain[h] = plain.get(h, 0) + n
        data = dict(self._data)
        for k, n in other._data:
            data[k] = data.get(k, 0) + n
        return DataVector(plain, data)

    def __neg__(self) -> "DataVector":
        return DataVector({h: -n for h, n in self._plain},
                          {k: -n for k, n in self._data})

    def __sub__(self, other: "DataVector") -> "DataVector":
        return self + (-other)

    def scale(self, c: int) -> "DataVector":
        return DataVector({h: c * n for h, n in self._plain},
                          {k: c * n for k, n in self._data})

    def __le__(self, other: "DataVector") -> bool:
        return (other - self).is_nonnegative()

    def __eq__(self, other):
        return (isinstance(other, DataVector) and self._plain == other._plain
                and self._data == other._data)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._plain, self._data))
        return self._hash

    def __lt__(self, other):
        return (self._plain, self._data) < (other._plain, other._data)

    def plain_places(self) -> set[str]:
        return {h for h, _ in self._plain}

    def atom_places(self) -> set[str]:
        return {p for (p, _), _ in self._data}

    def restrict(self, drop: Iterable[str]) -> "DataVector":
        """Drop every entry on the named (plain or atom) places."""
        drop = set(drop)
        return DataVector({h: n for h, n in self._plain if h not in drop},
                          {k: n for k, n in self._data if k[0] not in drop})

    def place_part(self, p: str) -> dict[int, int]:
        return {a: n for (q, a), n in self._data if q == p}

    def _atom_columns(self):
        cols: dict[int, list] = {}
        for (p, a), n in self._data:
            cols.setdefault(a, []).append(("d", p, n))
        return {a: tuple(c) for a, c in cols.items()}

    def _rename(self, m):
        if not self._data:
            return self
        return DataVector(dict(self._plain), {(p, m.get(a, a)): n for (p, a), n in self._data})

    def __repr__(self):
        return f"DataVector({render_vector(self)})"


def render_vector(v: DataVector) -> str:
    parts = []
    for h, n in v._plain:
        parts.append(f"{n:+d}{h}" if abs(n) != 1 else f"{'+' if n > 0 else '-'}{h}")
    for (p, a), n in v._data:
        parts.append(f"{n:+d}{p}({a})" if abs(n) != 1 else f"{'+' if n > 0 else '-'}{p}({a})")
    return " ".join(parts) or "0"


def support(v: DataVector) -> frozenset[int]:
    return frozenset(a for (_, a), _ in v._data)


def place_size(v: DataVector, p: str) -> int:
    if not v.is_nonnegative():
        raise ValueError("place size is defined for nonnegative vectors only")
    return sum(n for (q, _), n in v._data if q == p and n > 0)


class OmegaValuation:
    """Simple ω-valuation: plain values, per-place default (0 or ω) on atom
    places, and finitely many exceptions that differ from the default."""

    __slots__ = ("_plain", "_omega_places", "_exc", "_hash", "_cols", "_tot")

    def __init__(self, plain: Mapping[str, float] | None = None,
                 omega_places: Iterable[str] = (),
                 exceptions: Mapping[tuple[str, int], float] | None = None):
        self._plain = tuple(sorted((h, n) for h, n in (plain or {}).items() if n))
        self._omega_places = frozenset(omega_places)
        exc = {}
        for (p, a), n in (exceptions or {}).items():
            if n < 0:
                raise ValueError("ω-valuations are nonnegative")
            default = OMEGA if p in self._omega_places else 0
            if n != default:
                exc[(p, a)] = n
        self._exc = tuple(sorted(exc.items()))
        self._hash = None
        self._cols = None
        self._tot = None

    @classmethod
    def of(cls, v: DataVector) -> "OmegaValuation":
        if not v.is_nonnegative():
            raise ValueError("configurations carry nonnegative vectors")
        return cls(v.plain, (), v.data)

    @property
    def plain(self) -> dict[str, float]:
        return dict(self._plain)

    @property
    def omega_places(self) -> frozenset[str]:
        return self._omega_places

    @property
    def exceptions(self) -> dict[tuple[str, int], float]:
        return dict(self._exc)

    def default(self, p: str) -> float:
        return OMEGA if p in self._omega_places else 0

    def plain_value(self, h: str) -> float:
        for k, n in self._plain:
            if k == h:
                return n
        return 0

    def value(self, p: str, a: int) -> float:
        col = self.columns().get(a)
        if col is not None and p in col:
            return col[p]
        return self.default(p)

    def columns(self) -> dict[int, dict[str, float]]:
        """Exceptions grouped by atom (cached; treat as read-only)."""
        if self._cols is None:
            cols: dict[int, dict] = {}
            for (p, a), n in self._exc:
                cols.setdefault(a, {})[p] = n
            self._cols = cols
        return self._cols

    def named_atoms(self) -> frozenset[int]:
        return frozenset(self.columns())

    def atom_places(self) -> set[str]:
        return set(self._omega_places) | {p for (p, _), _ in self._exc}

    def column(self, a: int, places: Iterable[str]) -> dict[str, float]:
        return {p: self.value(p, a) for p in places}

    def place_total(self, c: str, plain: bool) -> float:
        """Value at a plain place, or the size of an atom place (ω if any
        entry, or the default, is ω)."""
        if plain:
            return self.plain_value(c)
        if c in self._omega_places:
            return OMEGA
        total = 0
        for (p, _), n in self._exc:
            if p == c:
                total += n
        return total

    def is_finite(self) -> bool:
        return (not self._omega_places and all(n != OMEGA for _, n in self._plain)
                and all(n != OMEGA for _, n in self._exc))

    def to_vector(self) -> DataVector:
        if not self.is_finite():
            raise ValueError("valuation has ω entries")
        return DataVector({h: int(n) for h, n in self._plain},
                          {k: int(n) for k, n in self._exc})

    def __eq__(self, other):
        return (isinstance(other, OmegaValuation) and self._plain == other._plain
                and self._omega_places == other._omega_places and self._exc == other._exc)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._plain, self._omega_places, self._exc))
        return self._hash

    def _atom_columns(self):
        cols: dict[int, list] = {}
        for (p, a), n in self._exc:
            cols.setdefault(a, []).append(("d", p, n))
        return {a: tuple(c) for a, c in cols.items()}

    def _rename(self, m):
        if not self._exc:
            return self
        return OmegaValuation(dict(self._plain), self._omega_places,
                              {(p, m.get(a, a)): n for (p, a), n in self._exc})

    def to_json(self) -> dict:
        return {
            "plain": {h: fmt_value(n) for h, n in self._plain},
            "omega_places": sorted(self._omega_places),
            "exceptions": [[p, a, fmt_value(n)] for (p, a), n in self._exc],
        }

    def __repr__(self):
        parts = [f"{h}:{fmt_value(n)}" for h, n in self._plain]
        parts += [f"{p}(*):ω" for p in sorted(self._omega_places)]
        parts += [f"{p}({a}):{fmt_value(n)}" for (p, a), n in self._exc]
        return "{" + ", ".join(parts) + "}"


def as_omega(x) -> OmegaValuation:
    return x if isinstance(x, OmegaValuation) else OmegaValuation.of(x)


def _state_parts(state):
    return state.location, state.valuation


def _finite_totals(f: OmegaValuation) -> dict[str, float]:
    if f._tot is None:
        out: dict[str, float] = {}
        for (p, _), n in f._exc:
            if p not in f._omega_places:
                out[p] = out.get(p, 0) + n
        f._tot = out
    return f._tot


def embeds(c1, c2) -> Renaming | None:
    """Witness σ with σ(state1) = state2 and σ(vec1) ≤ vec2, or None.

    ``c1``/``c2`` are configurations or ω-configurations (anything with a
    ``state`` and a ``valuation``/``marking``).  Atoms of ``c1`` that fit
    under the default column of ``c2`` are sent to fresh atoms of ``c2``'s
    ω region; the rest need an injective match onto named atoms of ``c2``,
    found by augmenting paths.
    """
    s1, s2 = c1.state, c2.state
    if s1.location != s2.location:
        return None
    f1, f2 = as_omega(c1.vector), as_omega(c2.vector)
    regs1, regs2 = dict(s1.valuation), dict(s2.valuation)
    if regs1.keys() != regs2.keys():
        return None
    forced: dict[int, int] = {}
    for r, x in regs1.items():
        y = regs2[r]
        if (x is None) != (y is None):
            return None
        if x is None:
            continue
        if forced.setdefault(x, y) != y:
            return None
    if len(set(forced.values())) != len(forced):
        return None
    for h, n in f1._plain:
        if n > f2.plain_value(h):
            return None
    if not f1.omega_places <= f2.omega_places:
        return None

    tot2 = _finite_totals(f2)
    for p, total in _finite_totals(f1).items():
        if p not in f2._omega_places and total > tot2.get(p, 0):
            return None
    cols1, cols2 = f1.columns(), f2.columns()
    named1 = f1.named_atoms() | frozenset(forced)
    named2 = f2.named_atoms() | frozenset(a for a in regs2.values() if a is not None)
    empty: dict = {}

    om1, om2 = f1._omega_places, f2._omega_places

    def fits(a, b) -> bool:
        c1, c2 = cols1.get(a, empty), cols2.get(b, empty)
        for p, n in c1.items():
            if n > c2.get(p, OMEGA if p in om2 else 0):
                return False
        for p, n in c2.items():
            if p not in c1 and p in om1 and n < OMEGA:
                return False
        return True

    def fits_generic(a) -> bool:
        for p, n in cols1.get(a, empty).items():
            if n > (OMEGA if p in om2 else 0):
                return False
        return True

    for x, y in forced.items():
        if not fits(x, y):
            return None

    used = set(forced.values())
    generic, hard = [], []
    for a in sorted(named1 - set(forced)):
        (generic if fits_generic(a) else hard).append(a)
    targets = sorted(named2 - used)
    adj = {a: [b for b in targets if fits(a, b)] for a in hard}
    match_of: dict[int, int] = {}  # target -> source

    def augment(a, seen) -> bool:
        for b in adj[a]:
            if b in seen:
                continue
            seen.add(b)
            if b not in match_of or augment(match_of[b], seen):
                match_of[b] = a
                return True
        return False

    for a in hard:
        if not augment(a, set()):
            return None
    inj = dict(forced)
    inj.update({a: b for b, a in match_of.items()})
    avoid = named2 | named1 | set(inj.values())
    for a, b in zip(generic, fresh_atoms(len(generic), avoid)):
        inj[a] = b
    return Renaming.from_injection(inj)


def leq(c1, c2) -> bool:
    return embeds(c1, c2) is not None
