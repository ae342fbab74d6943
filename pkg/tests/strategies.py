"""Hypothesis strategies for atoms-bearing values."""
from __future__ import annotations

from hypothesis import strategies as st

from bireach.atoms import Renaming
from bireach.model import Configuration, Dvass, OmegaConfiguration, State, TransitionOrbit
from bireach.vectors import OMEGA, DataVector, OmegaValuation

ATOMS = st.integers(min_value=0, max_value=6)
PLACES = ("p", "q")
LOCATIONS = ("l0", "l1")


@st.composite
def renamings(draw):
    atoms = draw(st.lists(st.integers(0, 9), unique=True, max_size=6))
    perm = draw(st.permutations(atoms))
    return Renaming(dict(zip(atoms, perm)))


@st.composite
def markings(draw, max_tokens=4):
    data = {}
    for _ in range(draw(st.integers(0, max_tokens))):
        k = (draw(st.sampled_from(PLACES)), draw(ATOMS))
        data[k] = data.get(k, 0) + 1
    plain = {"h": draw(st.integers(0, 3))}
    return DataVector(plain, data)


@st.composite
def states(draw, registers=("r",)):
    val = {r: draw(st.one_of(st.none(), ATOMS)) for r in registers}
    return State.make(draw(st.sampled_from(LOCATIONS)), val)


@st.composite
def configurations(draw, state: State | None = None):
    s = state if state is not None else draw(states())
    return Configuration(s, draw(markings()))


@st.composite
def omega_configurations(draw):
    s = draw(states())
    omega = draw(st.sets(st.sampled_from(PLACES)))
    values = st.one_of(st.integers(0, 3), st.just(OMEGA))
    exc = draw(st.dictionaries(st.tuples(st.sampled_from(PLACES), ATOMS), values, max_size=4))
    plain = {"h": draw(values)}
    return OmegaConfiguration(s, OmegaValuation(plain, omega, exc))


@st.composite
def _effect(draw, atoms):
    data = {}
    for a in atoms:
        for p in PLACES:
            n = draw(st.integers(-1, 1))
            if n:
                data[(p, a)] = n
    return DataVector({"h": draw(st.integers(-1, 1))}, data)


@st.composite
def transition_nets(draw):
    """A one-register net with a couple of orbits, plus two configurations."""
    ts = []
    for i in range(draw(st.integers(1, 3))):
        k = draw(st.integers(0, 2))
        atoms = list(range(k))
        src = State.make(draw(st.sampled_from(LOCATIONS)),
                         {"r": draw(st.sampled_from([None] + atoms))})
        tgt = State.make(draw(st.sampled_from(LOCATIONS)),
                         {"r": draw(st.sampled_from([None] + atoms))})
        ts.append(TransitionOrbit.make(src, draw(_effect(atoms)), tgt, f"t{i}"))
    net = Dvass.make("prop", LOCATIONS, ["r"], ["h"], list(PLACES), ts)
    return net, draw(configurations()), draw(configurations())
