import itertools
import random

import pytest

from bireach.atoms import Renaming, apply, same_orbit
from bireach.dsl import load
from bireach.model import Configuration, OmegaConfiguration, State
from bireach.vectors import (OMEGA, DataVector, OmegaValuation, embeds, leq, place_size,
                             support)

from generators import CORPUS

L = State("l")


def conf(data, state=L, plain=None):
    return Configuration(state, DataVector(plain or {}, data))


class TestGroup:
    def test_identity_and_inverse(self):
        v = DataVector({"h": 2}, {("p", 1): -3})
        assert v + DataVector() == v
        assert (v - v).is_zero()
        assert -(-v) == v

    def test_split_transition_recombines(self):
        # the two halves of the split tight loop add up to the a=b type of t2
        net = load(CORPUS / "vprime.dvass").net
        by = {t.name: t for t in net.transitions}
        a, c = 0, 1
        w = DataVector(data={("pbar", a): 1, ("p1", a): -1, ("p2", a): -1})
        w2 = DataVector(data={("p1", c): 1, ("p1", a): 1, ("p2", a): 1, ("pbar", a): -1})
        assert same_orbit(w, by["w"].eff) and same_orbit(w2, by["w'"].eff)
        assert w + w2 == DataVector(data={("p1", c): 1})

    def test_zero_entries_pruned(self):
        v = DataVector({"h": 0}, {("p", 1): 0})
        assert v.is_zero() and v == DataVector()


class TestSupportAndSize:
    def test_support(self):
        assert support(DataVector()) == frozenset()
        assert support(DataVector(data={("p1", 3): 1, ("p1", 4): 1})) == {3, 4}
        assert support(DataVector({"h": 5})) == frozenset()

    def test_initial_marking_sizes(self):
        _, src, _ = load(CORPUS / "vprime.dvass").problem()
        assert place_size(src.marking, "p1") == 3
        assert place_size(src.marking, "p2") == 2

    def test_size_counts_multiplicity(self):
        assert place_size(DataVector(data={("p", 0): 2}), "p") == 2
        assert place_size(DataVector(), "p") == 0

    def test_size_rejects_negative(self):
        with pytest.raises(ValueError):
            place_size(DataVector(data={("p", 0): -1}), "p")

    def test_size_is_renaming_invariant(self):
        rng = random.Random(3)
        for _ in range(200):
            v = DataVector(data={("p", rng.randrange(5)): rng.randint(1, 3) for _ in range(4)})
            r = Renaming(dict(zip(range(6), rng.sample(range(6), 6))))
            assert place_size(apply(r, v), "p") == place_size(v, "p")


class TestOmega:
    def test_simple_form_drops_default_entries(self):
        f = OmegaValuation({}, {"p"}, {("p", 1): OMEGA, ("p", 2): 3, ("q", 1): 0})
        assert f.exceptions == {("p", 2): 3}
        assert f.value("p", 9) == OMEGA and f.value("q", 9) == 0

    def test_omega_absorbs(self):
        assert OMEGA + 5 == OMEGA and OMEGA + OMEGA == OMEGA and 10**9 < OMEGA

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            OmegaValuation({}, (), {("p", 1): -1})


class TestEmbedding:
    def test_reflexive_identity(self):
        c = conf({("p", 1): 2, ("q", 3): 1})
        sigma = embeds(c, c)
        assert sigma is not None and apply(sigma, c) == c

    def test_single_atom_match(self):
        sigma = embeds(conf({("p", 0): 1}), conf({("p", 5): 2}))
        assert sigma is not None and sigma(0) == 5

    def test_initial_marking_embeds_in_the_first_ideal(self):
        _, src, _ = load(CORPUS / "vprime.dvass").problem()
        a, b = 100, 101
        f = OmegaConfiguration(State("l"), OmegaValuation({}, {"p1"},
                                                          {("p2", a): 1, ("p2", b): 1}))
        sigma = embeds(src, f)
        assert sigma is not None
        # the two p2 atoms go onto the exceptional atoms, the third atom into the ω region
        p2_atoms = {k[1] for k in src.marking.data if k[0] == "p2"}
        assert {sigma(x) for x in p2_atoms} == {a, b}

    def test_location_and_registers_must_match(self):
        assert embeds(conf({}), conf({}, State("m"))) is None
        s1 = State.make("l", {"r": 1})
        s2 = State.make("l", {"r": None})
        assert embeds(conf({}, s1), conf({}, s2)) is None

    def test_register_atom_is_forced(self):
        c1 = conf({("p", 1): 1}, State.make("l", {"r": 1}))
        c2 = conf({("p", 2): 1, ("p", 3): 5}, State.make("l", {"r": 3}))
        sigma = embeds(c1, c2)
        assert sigma is not None and sigma(1) == 3

    def test_plain_place_order(self):
        assert leq(conf({}, plain={"h": 1}), conf({}, plain={"h": 2}))
        assert not leq(conf({}, plain={"h": 3}), conf({}, plain={"h": 2}))


def _brute_embeds(c1, c2):
    """Try every injection of supp(c1) into supp(c2) plus fresh atoms."""
    s1 = sorted(c1.support())
    pool = sorted(c2.support()) + [1000 + i for i in range(len(s1))]
    for img in itertools.permutations(pool, len(s1)):
        m = dict(zip(s1, img))
        x = apply(m, c1) if m else c1
        if x.state == c2.state and (c2.marking - x.marking).is_nonnegative():
            return True
    return False


def _random_conf(rng, atoms=4):
    data = {}
    for _ in range(rng.randint(0, 4)):
        k = (rng.choice("pq"), rng.randrange(atoms))
        data[k] = data.get(k, 0) + 1
    reg = rng.choice([None] + list(range(atoms)))
    return conf(data, State.make(rng.choice(["l", "m"]), {"r": reg}),
                {"h": rng.randint(0, 2)})


def test_embedding_matches_injection_search():
    rng = random.Random(11)
    for _ in range(3000):
        c1, c2 = _random_conf(rng, 3), _random_conf(rng, 5)
        sigma = embeds(c1, c2)
        assert (sigma is not None) == _brute_embeds(c1, c2)
        if sigma is not None:
            moved = apply(sigma, c1)
            assert moved.state == c2.state
            assert (c2.marking - moved.marking).is_nonnegative()


def test_wqo_stream_has_comparable_pair():
    """Bounded values, unbounded atom supply: a ⊑-comparable pair turns up
    early in every seeded stream."""
    for seed in range(60):
        rng = random.Random(seed)
        seen = []
        found = False
        for i in range(400):
            data = {}
            for _ in range(rng.randint(0, 3)):
                k = (rng.choice("pq"), rng.randrange(10_000))
                data[k] = min(2, data.get(k, 0) + 1)
            c = conf(data, State(rng.choice("lm")), {"h": rng.randint(0, 2)})
            if any(embeds(x, c) is not None for x in seen):
                found = True
                break
            seen.append(c)
        assert found, f"seed {seed}"


def _expand(f: OmegaConfiguration, spare: int, big: int = 50) -> Configuration:
    """A finite configuration above every configuration of size ≤ ``spare``
    atoms that lies below ``f``: ω becomes ``big``, the ω default is
    materialised on ``spare`` new atoms."""
    v = f.valuation
    plain = {h: big if n == OMEGA else n for h, n in v.plain.items()}
    data = {k: big if n == OMEGA else n for k, n in v.exceptions.items()}
    for p in v.omega_places:
        for a in v.named_atoms() | f.state.support():
            data.setdefault((p, a), big)
        for i in range(spare):
            data[(p, 500 + i)] = big
    return Configuration(f.state, DataVector(plain, {k: n for k, n in data.items() if n}))


def test_embedding_into_omega_configurations():
    rng = random.Random(5)
    for _ in range(1500):
        c = _random_conf(rng, 3)
        exc = {(rng.choice("pq"), rng.randrange(5)): rng.choice([1, 2, OMEGA])
               for _ in range(rng.randint(0, 3))}
        omega = {p for p in "pq" if rng.random() < 0.3}
        f = OmegaConfiguration(State.make(rng.choice(["l", "m"]),
                                          {"r": rng.choice([None, 0, 1, 2])}),
                               OmegaValuation({"h": rng.choice([0, 1, OMEGA])}, omega, exc))
        assert (embeds(c, f) is not None) == _brute_embeds(c, _expand(f, len(c.support())))
