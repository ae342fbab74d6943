"""Line-oriented text format for data VASS and Petri nets with data.

Comment lines of the form ``# key: value`` are collected as metadata (the
corpus runner reads ``expect`` and ``oracle`` from them).
"""
from __future__ import annotations

import re
import string
import warnings
from dataclasses import dataclass, field

from .model import (SIGIL, Configuration, Dvass, PetriNet, PetriTransition,
                    State, TransitionOrbit, compile_petri)
from .vectors import DataVector

IDENT = r"[A-Za-z_%'][\w%'.@~^]*"
_ident = re.compile(rf"^{IDENT}$")
_state = re.compile(rf"^\s*({IDENT})\s*(?:\[(.*?)\])?\s*$")
_term = re.compile(rf"([+-])\s*(\d*)\s*({IDENT})(?:\(\s*({IDENT})\s*\))?")
_meta = re.compile(r"^#\s*([A-Za-z_]\w*)\s*:\s*(.*?)\s*$")


class DslError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass
class Instance:
    net: Dvass | PetriNet
    source: Configuration | None = None
    target: Configuration | None = None
    meta: dict = field(default_factory=dict)

    def problem(self) -> tuple[Dvass, Configuration | None, Configuration | None]:
        """The instance as a data VASS with its endpoints (Petri nets are compiled)."""
        if isinstance(self.net, PetriNet):
            return compile_petri(self.net)
        return self.net, self.source, self.target


class _Atoms:
    def __init__(self):
        self.ids: dict[str, int] = {}

    def __call__(self, name):
        return self.ids.setdefault(name, len(self.ids))


def _names(text, lineno, allow_reserved):
    out = text.split()
    for n in out:
        if not _ident.match(n):
            raise DslError(lineno, f"bad name {n!r}")
        if SIGIL in n and not allow_reserved:
            raise DslError(lineno, f"name {n!r} uses the reserved character {SIGIL!r}")
    return out


def _check_name(n, lineno, allow_reserved, declared=None, what="name"):
    if not _ident.match(n):
        raise DslError(lineno, f"bad {what} {n!r}")
    if SIGIL in n and not allow_reserved:
        raise DslError(lineno, f"{what} {n!r} uses the reserved character {SIGIL!r}")
    if declared is not None and n not in declared:
        raise DslError(lineno, f"undeclared {what} {n!r}")


def _parse_state(text, lineno, hdr, atom, allow_reserved):
    m = _state.match(text)
    if not m:
        raise DslError(lineno, f"cannot parse state {text.strip()!r}")
    loc, body = m.group(1), m.group(2)
    _check_name(loc, lineno, allow_reserved, hdr["locations"], "location")
    val = {r: None for r in hdr["registers"]}
    if body and body.strip():
        for item in body.split(","):
            if "=" not in item:
                raise DslError(lineno, f"register assignment expected, got {item.strip()!r}")
            r, x = (s.strip() for s in item.split("=", 1))
            _check_name(r, lineno, allow_reserved, hdr["registers"], "register")
            if x == "-":
                val[r] = None
            else:
                _check_name(x, lineno, True, None, "variable")
                val[r] = atom(x)
    return State.make(loc, val)


def _parse_terms(text, lineno, hdr, atom, allow_reserved):
    text = text.strip()
    if text in ("", "0"):
        return DataVector()
    plain, data = {}, {}
    pos = 0
    for m in _term.finditer(text):
        if text[pos:m.start()].strip():
            raise DslError(lineno, f"unexpected {text[pos:m.start()].strip()!r} in effect")
        pos = m.end()
        sign = 1 if m.group(1) == "+" else -1
        k = int(m.group(2) or 1) * sign
        place, var = m.group(3), m.group(4)
        if var is None:
            _check_name(place, lineno, allow_reserved, hdr["plain"], "plain place")
            plain[place] = plain.get(place, 0) + k
        else:
            _check_name(place, lineno, allow_reserved, hdr["atom"], "atom place")
            key = (place, atom(var))
            data[key] = data.get(key, 0) + k
    if text[pos:].strip():
        raise DslError(lineno, f"unexpected {text[pos:].strip()!r} in effect")
    return DataVector(plain, data)


_block = re.compile(r"(plain|tokens)\s*\{(.*?)\}")
_tok_item = re.compile(rf"({IDENT})\s*:\s*\[(.*?)\]")


def _parse_config(text, lineno, hdr, atom, allow_reserved):
    first_block = _block.search(text)
    state_txt = text[:first_block.start()] if first_block else text
    state = _parse_state(state_txt, lineno, hdr, atom, allow_reserved)
    plain, data = {}, {}
    rest = text[first_block.start():] if first_block else ""
    pos = 0
    for m in _block.finditer(rest):
        if rest[pos:m.start()].strip():
            raise DslError(lineno, f"unexpected {rest[pos:m.start()].strip()!r}")
        pos = m.end()
        body = m.group(2)
        if m.group(1) == "plain":
            for item in filter(None, (s.strip() for s in body.split(","))):
                h, _, n = item.partition(":")
                h = h.strip()
                _check_name(h, lineno, allow_reserved, hdr["plain"], "plain place")
                try:
                    plain[h] = plain.get(h, 0) + int(n)
                except ValueError:
                    raise DslError(lineno, f"bad count in {item!r}") from None
        else:
            for p, atoms in _tok_item.findall(body):
                _check_name(p, lineno, allow_reserved, hdr["atom"], "atom place")
                for x in filter(None, (s.strip() for s in atoms.split(","))):
                    key = (p, atom(x))
                    data[key] = data.get(key, 0) + 1
    if rest[pos:].strip():
        raise DslError(lineno, f"unexpected {rest[pos:].strip()!r}")
    v = DataVector(plain, data)
    if not v.is_nonnegative():
        raise DslError(lineno, "configuration must be nonnegative")
    return Configuration(state, v)


def _lines(text):
    meta = {}
    out = []
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if not s:
            continue
        if s.startswith("#"):
            m = _meta.match(s)
            if m:
                meta[m.group(1)] = m.group(2)
            continue
        if "#" in s:
            s = s[:s.index("#")].strip()
        out.append((i, s))
    return out, meta


def parse(text: str, allow_reserved: bool = False) -> Instance:
    lines, meta = _lines(text)
    if not lines:
        raise DslError(1, "empty input")
    lineno, head = lines[0]
    kind, _, name = head.partition(" ")
    if kind == "dvass":
        inst = _parse_dvass(name.strip(), lines[1:], allow_reserved)
    elif kind == "petri":
        inst = _parse_petri(name.strip(), lines[1:], allow_reserved)
    else:
        raise DslError(lineno, "expected 'dvass NAME' or 'petri NAME'")
    inst.meta = meta
    return inst


def _parse_dvass(name, lines, allow_reserved):
    hdr = {"locations": [], "registers": [], "plain": [], "atom": []}
    shared_atoms = _Atoms()
    trans, src, tgt = [], None, None
    for lineno, s in lines:
        key, sep, rest = s.partition(":")
        key = key.strip()
        if key in hdr and sep:
            hdr[key] = _names(rest, lineno, allow_reserved)
        elif key.startswith("trans ") and sep:
            tname = key[6:].strip()
            if "->" not in rest or "eff:" not in rest:
                raise DslError(lineno, "expected 'trans NAME: STATE -> STATE eff: TERMS'")
            states, _, eff = rest.partition("eff:")
            a, _, b = states.partition("->")
            atom = _Atoms()
            s1 = _parse_state(a, lineno, hdr, atom, allow_reserved)
            s2 = _parse_state(b, lineno, hdr, atom, allow_reserved)
            v = _parse_terms(eff, lineno, hdr, atom, allow_reserved)
            trans.append((lineno, TransitionOrbit.make(s1, v, s2, tname)))
        elif key in ("source", "target") and sep:
            c = _parse_config(rest, lineno, hdr, shared_atoms, allow_reserved)
            if key == "source":
                src = c
            else:
                tgt = c
        else:
            raise DslError(lineno, f"unrecognised line {s!r}")
    seen = {}
    for lineno, t in trans:
        if t in seen:
            warnings.warn(f"line {lineno}: transition {t.name!r} denotes the same orbit as "
                          f"{seen[t].name!r}; merged")
        else:
            seen[t] = t
    try:
        net = Dvass.make(name, hdr["locations"], hdr["registers"], hdr["plain"],
                         hdr["atom"], seen.values())
    except ValueError as e:
        raise DslError(lines[0][0] if lines else 1, str(e)) from None
    return Instance(net, src, tgt)


_petri_term = re.compile(rf"({IDENT})\(\s*({IDENT})\s*\)")
_constraint = re.compile(rf"({IDENT})\s*(!=|=)\s*({IDENT})")


def _parse_petri(name, lines, allow_reserved):
    places, trans = [], []
    marking, target = {}, None
    for lineno, s in lines:
        key, sep, rest = s.partition(":")
        key = key.strip()
        if key == "places" and sep:
            places = _names(rest, lineno, allow_reserved)
        elif key.startswith("trans ") and sep:
            tname = key[6:].strip()
            body, _, where = rest.partition("where")
            m = re.match(r"^\s*(?:in\s+(.*?))?\s*(?:out\s+(.*?))?\s*$", body)
            if not m:
                raise DslError(lineno, "expected 'in TERMS out TERMS [where ...]'")
            ins = _petri_term.findall(m.group(1) or "")
            outs = _petri_term.findall(m.group(2) or "")
            for p, _ in ins + outs:
                _check_name(p, lineno, allow_reserved, places, "place")
            cons = []
            for item in filter(None, (c.strip() for c in where.split(","))):
                cm = _constraint.fullmatch(item)
                if not cm:
                    raise DslError(lineno, f"bad constraint {item!r}")
                cons.append((cm.group(1), "=" if cm.group(2) == "=" else "!=", cm.group(3)))
            trans.append(PetriTransition(tname, ins, outs, cons))
        elif key in ("marking", "target") and sep:
            mk = {p: [] for p in places}
            for p, atoms in _tok_item.findall(rest):
                _check_name(p, lineno, allow_reserved, places, "place")
                mk[p] = [x.strip() for x in atoms.split(",") if x.strip()]
            if key == "marking":
                marking = mk
            else:
                target = mk
        else:
            raise DslError(lineno, f"unrecognised line {s!r}")
    return Instance(PetriNet(name, places, trans, marking, target))


# -- rendering --------------------------------------------------------------

def _var(i: int) -> str:
    letters = string.ascii_lowercase
    return letters[i] if i < 26 else f"{letters[i % 26]}{i // 26}"


def _render_state(s: State, names) -> str:
    if not s.valuation:
        return s.location
    inner = ", ".join(f"{r}={'-' if a is None else names(a)}" for r, a in s.valuation)
    return f"{s.location}[{inner}]"


def _render_terms(v: DataVector, names) -> str:
    parts = []
    for h, n in v.plain.items():
        parts.append(("+" if n > 0 else "-") + (str(abs(n)) if abs(n) != 1 else "") + h)
    for (p, a), n in v.data.items():
        parts.append(("+" if n > 0 else "-") + (str(abs(n)) if abs(n) != 1 else "")
                     + f"{p}({names(a)})")
    return " ".join(parts) or "0"


def _render_config(kind, c: Configuration, names) -> str:
    out = f"{kind}: {_render_state(c.state, names)}"
    plain = c.marking.plain
    if plain:
        out += " plain{" + ", ".join(f"{h}:{n}" for h, n in plain.items()) + "}"
    toks: dict = {}
    for (p, a), n in c.marking.data.items():
        toks.setdefault(p, []).extend([names(a)] * n)
    if toks:
        out += " tokens{" + ", ".join(f"{p}:[{','.join(xs)}]" for p, xs in toks.items()) + "}"
    return out


def render(obj, source: Configuration | None = None, target: Configuration | None = None,
           meta: dict | None = None) -> str:
    if isinstance(obj, Instance):
        return render(obj.net, obj.source, obj.target, obj.meta)
    lines = [f"# {k}: {v}" for k, v in sorted((meta or {}).items())]
    if isinstance(obj, PetriNet):
        lines.append(f"petri {obj.name}")
        lines.append("places: " + " ".join(obj.places))
        for t in obj.transitions:
            s = f"trans {t.name}:"
            if t.inputs:
                s += " in " + " ".join(f"{p}({x})" for p, x in t.inputs)
            if t.outputs:
                s += " out " + " ".join(f"{p}({x})" for p, x in t.outputs)
            if t.constraint:
                s += " where " + ", ".join(f"{x}{op}{y}" for x, op, y in t.constraint)
            lines.append(s)
        for kind, mk in (("marking", obj.marking), ("target", obj.target)):
            if mk:
                lines.append(f"{kind}: " + " ".join(f"{p}:[{','.join(xs)}]" for p, xs in mk.items()))
        return "\n".join(lines) + "\n"
    net: Dvass = obj
    lines.append(f"dvass {net.name}")
    lines.append("locations: " + " ".join(net.locations))
    for key, names in (("registers", net.registers), ("plain", net.plain_places),
                       ("atom", net.atom_places)):
        if names:
            lines.append(f"{key}: " + " ".join(names))
    for i, t in enumerate(net.transitions):
        nm = (lambda a: _var(a))
        lines.append(f"trans {t.name or f't{i}'}: {_render_state(t.src, nm)} -> "
                     f"{_render_state(t.tgt, nm)} eff: {_render_terms(t.eff, nm)}")
    shared: dict[int, str] = {}

    def cname(a):
        return shared.setdefault(a, f"x{a}")

    for kind, c in (("source", source), ("target", target)):
        if c is not None:
            lines.append(_render_config(kind, c, cname))
    return "\n".join(lines) + "\n"


def parse_configurations(net: Dvass, *texts: str, allow_reserved: bool = True) -> list[Configuration]:
    """Configurations written as in ``source:`` lines; atom names are shared
    across all texts."""
    hdr = {"locations": list(net.locations), "registers": list(net.registers),
           "plain": list(net.plain_places), "atom": list(net.atom_places)}
    atom = _Atoms()
    return [_parse_config(t, 0, hdr, atom, allow_reserved) for t in texts]


def parse_marking(net: PetriNet, text: str) -> dict:
    """A Petri marking written as in ``marking:`` lines."""
    mk = {p: [] for p in net.places}
    pos = 0
    for m in _tok_item.finditer(text):
        if text[pos:m.start()].strip():
            raise DslError(0, f"unexpected {text[pos:m.start()].strip()!r} in marking")
        pos = m.end()
        _check_name(m.group(1), 0, True, net.places, "place")
        mk[m.group(1)] = [x.strip() for x in m.group(2).split(",") if x.strip()]
    if text[pos:].strip():
        raise DslError(0, f"unexpected {text[pos:].strip()!r} in marking")
    return mk


def load(path, allow_reserved: bool = False) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), allow_reserved)
