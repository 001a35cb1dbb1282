"""Reward programs: a small s-expression language of weighted shaping terms.

Grammar::

    program  := "(reward" weighted+ ")" "(success" pred+ ")" ["(bonus" FLOAT ")"]
    weighted := "(term" FLOAT term ")"
    term     := "(dist-ee" REF ")" | "(joint-err" REF FLOAT ")" | "(grasped" REF ")"
    pred     := "(joint-near" REF FLOAT [FLOAT] ")" | "(ee-near" REF FLOAT ")" | "(grasped" REF ")"
    REF      := ASSET "." NAME

A ``joint-near`` without tolerance uses 5% of the joint's range.

Programs are evaluated against any state object that provides
``ee_position``, ``grasp``, ``link_position(asset, link)``,
``joint_position(asset, joint)`` and ``joint_range(asset, joint)``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional, Tuple

from .errors import NegativeWeight, RewardSyntaxError, UnknownTermKind

DEFAULT_BONUS = 10.0
DEFAULT_JOINT_TOL_FRACTION = 0.05

_FLOAT = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?\Z")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*\Z")


@dataclass(frozen=True)
class DistEE:
    asset: str
    link: str
    pos: tuple = field(default=(0, 0), compare=False, repr=False)

    kind = "dist-ee"

    def source(self):
        return f"(dist-ee {self.asset}.{self.link})"


@dataclass(frozen=True)
class JointErr:
    asset: str
    joint: str
    target: float
    pos: tuple = field(default=(0, 0), compare=False, repr=False)

    kind = "joint-err"

    def source(self):
        return f"(joint-err {self.asset}.{self.joint} {self.target!r})"


@dataclass(frozen=True)
class Grasped:
    asset: str
    link: str
    pos: tuple = field(default=(0, 0), compare=False, repr=False)

    kind = "grasped"

    def source(self):
        return f"(grasped {self.asset}.{self.link})"


@dataclass(frozen=True)
class JointNear:
    asset: str
    joint: str
    target: float
    tol: Optional[float] = None
    pos: tuple = field(default=(0, 0), compare=False, repr=False)

    kind = "joint-near"

    def source(self):
        tail = "" if self.tol is None else f" {self.tol!r}"
        return f"(joint-near {self.asset}.{self.joint} {self.target!r}{tail})"


@dataclass(frozen=True)
class EENear:
    asset: str
    link: str
    tol: float
    pos: tuple = field(default=(0, 0), compare=False, repr=False)

    kind = "ee-near"

    def source(self):
        return f"(ee-near {self.asset}.{self.link} {self.tol!r})"


@dataclass(frozen=True)
class GraspedPred:
    asset: str
    link: str
    pos: tuple = field(default=(0, 0), compare=False, repr=False)

    kind = "grasped"

    def source(self):
        return f"(grasped {self.asset}.{self.link})"


@dataclass(frozen=True)
class RewardProgram:
    terms: Tuple[Tuple[float, object], ...]
    success: Tuple[object, ...]
    success_bonus: float = DEFAULT_BONUS

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((float(w), t) for w, t in self.terms))
        object.__setattr__(self, "success", tuple(self.success))
        object.__setattr__(self, "success_bonus", float(self.success_bonus))
        if not self.terms:
            raise ValueError("reward program needs at least one term")
        if not self.success:
            raise ValueError("reward program needs at least one success predicate")
        for w, _ in self.terms:
            if not math.isfinite(w) or w < 0:
                raise NegativeWeight(f"weight {w} must be finite and nonnegative")
        if not math.isfinite(self.success_bonus):
            raise ValueError("bonus must be finite")

    def to_source(self) -> str:
        terms = " ".join(f"(term {w!r} {t.source()})" for w, t in self.terms)
        preds = " ".join(p.source() for p in self.success)
        return f"(reward {terms})\n(success {preds})\n(bonus {self.success_bonus!r})"

    def references(self):
        """Yield ``(kind, asset, name)`` for every link/joint the program mentions."""
        for _, t in self.terms:
            yield t.kind, t.asset, getattr(t, "link", None) or t.joint
        for p in self.success:
            yield p.kind, p.asset, getattr(p, "link", None) or p.joint

    def first_link(self):
        """The first link referenced by any term or predicate, used as the target part."""
        for node in [t for _, t in self.terms] + list(self.success):
            if hasattr(node, "link"):
                return node.asset, node.link
        return None

    def scaled(self, c: float) -> "RewardProgram":
        return RewardProgram(tuple((w * c, t) for w, t in self.terms), self.success, self.success_bonus * c)


def combine_programs(programs, bonus: float = None) -> RewardProgram:
    """Sum all terms and conjoin all predicates (the undecomposed reward)."""
    terms = tuple(t for p in programs for t in p.terms)
    preds = []
    for p in programs:
        for s in p.success:
            if s not in preds:
                preds.append(s)
    if bonus is None:
        bonus = max(p.success_bonus for p in programs)
    return RewardProgram(terms, tuple(preds), bonus)


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s()]+")


def _tokenize(source):
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        text = m.group(0)
        if not (text[0].isspace() or text[0] == ";"):
            tokens.append((text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    return tokens, (line, col)


class _Parser:
    def __init__(self, source):
        self.tokens, self.end = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def where(self):
        tok = self.peek()
        return (tok[1], tok[2]) if tok else self.end

    def fail(self, expected):
        line, col = self.where()
        raise RewardSyntaxError(line, col, expected)

    def take(self, expected=None, what=None):
        tok = self.peek()
        if tok is None or (expected is not None and tok[0] != expected):
            self.fail(what or repr(expected))
        self.i += 1
        return tok

    def at(self, text):
        tok = self.peek()
        return tok is not None and tok[0] == text

    def at_head(self, word):
        nxt = self.tokens[self.i + 1] if self.i + 1 < len(self.tokens) else None
        return self.at("(") and nxt is not None and nxt[0] == word

    def number(self, what="number"):
        tok = self.peek()
        if tok is None or not _FLOAT.match(tok[0]):
            self.fail(what)
        self.i += 1
        return float(tok[0])

    def ref(self):
        tok = self.peek()
        text = tok[0] if tok else ""
        asset, dot, name = text.partition(".")
        if not dot or not _IDENT.match(asset) or not _IDENT.match(name):
            self.fail("reference ASSET.NAME")
        self.i += 1
        return asset, name

    def head(self):
        """Consume '(' and the head word, returning (word, position)."""
        start = self.take("(", "'('")
        word = self.take(None, "keyword")
        if word[0] in ("(", ")"):
            self.i -= 1
            self.fail("keyword")
        return word[0], (start[1], start[2])

    def term(self):
        word, pos = self.head()
        if word == "dist-ee":
            node = DistEE(*self.ref(), pos=pos)
        elif word == "joint-err":
            asset, joint = self.ref()
            node = JointErr(asset, joint, self.number("joint target"), pos=pos)
        elif word == "grasped":
            node = Grasped(*self.ref(), pos=pos)
        else:
            raise UnknownTermKind(f"line {pos[0]}, col {pos[1]}: unknown reward term {word!r}")
        self.take(")", "')'")
        return node

    def pred(self):
        word, pos = self.head()
        if word == "joint-near":
            asset, joint = self.ref()
            target = self.number("joint target")
            tol = None
            if not self.at(")"):
                line, col = self.where()
                tol = self.number("tolerance")
                if tol <= 0:
                    raise RewardSyntaxError(line, col, "positive tolerance")
            node = JointNear(asset, joint, target, tol, pos=pos)
        elif word == "ee-near":
            asset, link = self.ref()
            line, col = self.where()
            tol = self.number("tolerance")
            if tol <= 0:
                raise RewardSyntaxError(line, col, "positive tolerance")
            node = EENear(asset, link, tol, pos=pos)
        elif word == "grasped":
            node = GraspedPred(*self.ref(), pos=pos)
        else:
            raise UnknownTermKind(f"line {pos[0]}, col {pos[1]}: unknown success predicate {word!r}")
        self.take(")", "')'")
        return node

    def program(self):
        if not self.at_head("reward"):
            self.fail("'(reward'")
        self.head()
        terms = []
        while self.at_head("term"):
            _, _ = self.head()
            line, col = self.where()
            w = self.number("weight")
            if w < 0:
                raise NegativeWeight(f"line {line}, col {col}: negative weight {w}")
            terms.append((w, self.term()))
            self.take(")", "')'")
        if not terms:
            self.fail("'(term'")
        self.take(")", "')' or '(term'")
        if not self.at_head("success"):
            self.fail("'(success'")
        self.head()
        preds = []
        while self.at("("):
            preds.append(self.pred())
        if not preds:
            self.fail("success predicate")
        self.take(")", "')'")
        bonus = DEFAULT_BONUS
        if self.at_head("bonus"):
            self.head()
            bonus = self.number("bonus value")
            self.take(")", "')'")
        if self.peek() is not None:
            self.fail("end of program")
        return RewardProgram(tuple(terms), tuple(preds), bonus)


def parse_reward(source: str) -> RewardProgram:
    return _Parser(source).program()


# ---------------------------------------------------------------- evaluation

def term_value(term, state) -> float:
    if term.kind == "dist-ee":
        ee = state.ee_position
        p = state.link_position(term.asset, term.link)
        return -math.sqrt((ee[0] - p[0]) ** 2 + (ee[1] - p[1]) ** 2 + (ee[2] - p[2]) ** 2)
    if term.kind == "joint-err":
        lo, hi = state.joint_range(term.asset, term.joint)
        q = state.joint_position(term.asset, term.joint)
        span = hi - lo
        return -abs(q - term.target) / span if span > 0 else 0.0
    if term.kind == "grasped":
        return 1.0 if state.grasp == (term.asset, term.link) else 0.0
    raise UnknownTermKind(term.kind)


def predicate_holds(pred, state) -> bool:
    if pred.kind == "joint-near":
        tol = pred.tol
        if tol is None:
            lo, hi = state.joint_range(pred.asset, pred.joint)
            tol = DEFAULT_JOINT_TOL_FRACTION * (hi - lo)
        return abs(state.joint_position(pred.asset, pred.joint) - pred.target) <= tol
    if pred.kind == "ee-near":
        ee = state.ee_position
        p = state.link_position(pred.asset, pred.link)
        return math.sqrt((ee[0] - p[0]) ** 2 + (ee[1] - p[1]) ** 2 + (ee[2] - p[2]) ** 2) <= pred.tol
    if pred.kind == "grasped":
        return state.grasp == (pred.asset, pred.link)
    raise UnknownTermKind(pred.kind)


def check_success(program: RewardProgram, state) -> bool:
    return all(predicate_holds(p, state) for p in program.success)


def evaluate(program: RewardProgram, state) -> float:
    r = 0.0
    for w, t in program.terms:
        r += w * term_value(t, state)
    if check_success(program, state):
        r += program.success_bonus
    return r
