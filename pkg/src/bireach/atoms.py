"""Atoms, finite-support renamings and canonical orbit representatives.

Atoms are plain non-negative ints.  Values that carry atoms implement two
hooks:

``_atom_columns()``
    a dict ``atom -> column`` where the column is a sortable tuple that
    describes everything the value says about that atom.  Two atoms with equal
    columns are interchangeable.
``_rename(mapping)``
    a copy with every atom ``a`` replaced by ``mapping.get(a, a)``.

Tuples of such values are supported directly.  Nothing in the model relates
two atoms other than by equality, so a value is determined (up to renaming)
by the multiset of its columns; canonicalization sorts columns instead of
searching permutations.
"""
from __future__ import annotations

from typing import Any, Iterable, Mapping

EMPTY = None


class Renaming:
    """A permutation of atoms that moves finitely many of them."""

    __slots__ = ("_map", "_hash")

    def __init__(self, mapping: Mapping[int, int] | None = None):
        m = {a: b for a, b in (mapping or {}).items() if a != b}
        if len(set(m.values())) != len(m) or set(m) != set(m.values()):
            raise ValueError(f"not a finite-support bijection: {m}")
        self._map = m
        self._hash = None

    @classmethod
    def identity(cls) -> "Renaming":
        return cls()

    @classmethod
    def from_injection(cls, inj: Mapping[int, int]) -> "Renaming":
        """Complete a partial injection into a finite-support permutation.

        Chains ``a -> b -> ... -> z`` (with ``z`` outside the domain) are
        closed by sending the atoms missing from the image back in sorted
        order.
        """
        inj = dict(inj)
        if len(set(inj.values())) != len(inj):
            raise ValueError("map is not injective")
        dom = set(inj)
        img = set(inj.values())
        free_src = sorted(img - dom)
        free_dst = sorted(dom - img)
        full = dict(inj)
        full.update(zip(free_src, free_dst))
        return cls(full)

    @property
    def mapping(self) -> dict[int, int]:
        return dict(self._map)

    def __call__(self, a):
        if a is None:
            return None
        return self._map.get(a, a)

    def support(self) -> frozenset[int]:
        return frozenset(self._map)

    def compose(self, other: "Renaming") -> "Renaming":
        """``self ∘ other``: apply ``other`` first."""
        atoms = set(self._map) | set(other._map)
        return Renaming({a: self(other(a)) for a in atoms})

    def inverse(self) -> "Renaming":
        return Renaming({b: a for a, b in self._map.items()})

    def __eq__(self, other):
        return isinstance(other, Renaming) and self._map == other._map

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._map.items()))
        return self._hash

    def __repr__(self):
        inner = ", ".join(f"{a}->{b}" for a, b in sorted(self._map.items()))
        return f"Renaming({{{inner}}})"


def atom_columns(x: Any) -> dict[int, tuple]:
    if isinstance(x, tuple):
        cols: dict[int, list] = {}
        for i, part in enumerate(x):
            for a, c in atom_columns(part).items():
                cols.setdefault(a, []).append((i, c))
        return {a: tuple(c) for a, c in cols.items()}
    if x is None or isinstance(x, (str, int, float, bool)):
        return {}
    return x._atom_columns()


def rename(x: Any, mapping: Mapping[int, int]) -> Any:
    if isinstance(x, tuple):
        return tuple(rename(part, mapping) for part in x)
    if x is None or isinstance(x, (str, int, float, bool)):
        return x
    return x._rename(mapping)


def apply(r: Renaming | Mapping[int, int], x: Any) -> Any:
    """Act on ``x`` by the renaming ``r``."""
    m = r._map if isinstance(r, Renaming) else dict(r)
    if not m:
        return x
    return rename(x, m)


def support(x: Any) -> frozenset[int]:
    return frozenset(atom_columns(x))


def canonicalize(x: Any, fixed: Iterable[int] = ()) -> tuple[Any, Renaming]:
    """Orbit representative of ``x`` under renamings that fix ``fixed``.

    Non-fixed atoms are renumbered, in order of their sorted columns, onto
    the smallest naturals not in ``fixed``.  Returns the representative and a
    renaming carrying ``x`` onto it.
    """
    fixed = frozenset(fixed)
    cols = atom_columns(x)
    movable = sorted((c, a) for a, c in cols.items() if a not in fixed)
    targets = []
    n = 0
    while len(targets) < len(movable):
        if n not in fixed:
            targets.append(n)
        n += 1
    inj = {a: t for (_, a), t in zip(movable, targets)}
    r = Renaming.from_injection(inj)
    return apply(inj, x), r


def canonical(x: Any, fixed: Iterable[int] = ()) -> Any:
    return canonicalize(x, fixed)[0]


def same_orbit(x: Any, y: Any, fixed: Iterable[int] = ()) -> bool:
    return canonical(x, fixed) == canonical(y, fixed)


def fresh_atoms(n: int, avoid: Iterable[int]) -> list[int]:
    avoid = set(avoid)
    out, a = [], 0
    while len(out) < n:
        if a not in avoid:
            out.append(a)
        a += 1
    return out


def set_partitions(items: list) -> Iterable[list[list]]:
    """All partitions of ``items`` into non-empty blocks (restricted growth)."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


class EqualityType:
    """Partition of index positions by equality, with a set of ⊥ positions."""

    __slots__ = ("blocks", "bottom")

    def __init__(self, blocks: Iterable[Iterable[int]], bottom: Iterable[int] = ()):
        self.blocks = tuple(sorted(tuple(sorted(b)) for b in blocks))
        self.bottom = tuple(sorted(bottom))
        seen = [i for b in self.blocks for i in b]
        if len(seen) != len(set(seen)) or set(seen) & set(self.bottom):
            raise ValueError("blocks must be disjoint and avoid ⊥ positions")

    @classmethod
    def of(cls, values) -> "EqualityType":
        groups: dict = {}
        bottom = []
        for i, v in enumerate(values):
            if v is None:
                bottom.append(i)
            else:
                groups.setdefault(v, []).append(i)
        return cls(groups.values(), bottom)

    def __eq__(self, other):
        return (isinstance(other, EqualityType)
                and self.blocks == other.blocks and self.bottom == other.bottom)

    def __hash__(self):
        return hash((self.blocks, self.bottom))

    def __repr__(self):
        return f"EqualityType(blocks={self.blocks}, bottom={self.bottom})"
