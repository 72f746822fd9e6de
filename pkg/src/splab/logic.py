"""Modal node classifiers: parsing, compilation to network weights, and a
brute-force evaluator.

A classifier is a formula with one free node variable built from color
atoms, boolean connectives and counting modal operators ``<S>^>=N`` whose
parameter S ranges over the eight canonical modal parameters (id, e_i,
!e_i & !id, id | e_i, !id, !e_i, e_i | !e_i, e_i & !e_i).  The compiler
emits one homogeneous truncated-ReLU layer (matrices C, A_1..A_k, R and a
bias) whose repeated application reproduces the formula's truth value per
node; ``eval_bruteforce`` computes the same thing from explicit
neighborhood sets and serves as the independent oracle.

The concrete grammar is documented in docs/formula-grammar.md.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .graphs import Graph
from .hops import HopIndex, build_hop_index


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.col = col


class CompileError(ValueError):
    """Raised for formulas the published construction does not cover."""


# Default color vocabulary; C<idx> names address color ids directly.
COLOR_NAMES = {
    "Red": 0, "Blue": 1, "Green": 2, "Yellow": 3, "Orange": 4,
    "Purple": 5, "Brown": 6, "Gray": 7, "Pink": 8, "Cyan": 9,
}

# Canonical modal parameter forms.
P_ID = "id"
P_EDGE = "e"
P_NOT_EDGE_NOT_ID = "!e&!id"
P_ID_OR_EDGE = "id|e"
P_NOT_ID = "!id"
P_NOT_EDGE = "!e"
P_EDGE_OR_NOT_EDGE = "e|!e"
P_EDGE_AND_NOT_EDGE = "e&!e"


@dataclass(frozen=True)
class ModalParam:
    form: str
    hop: Optional[int] = None  # 1-based edge predicate index, None for id forms

    def text(self) -> str:
        return self.form.replace("e", f"e{self.hop}") if self.hop else self.form


@dataclass(frozen=True)
class Atom:
    name: str

    def text(self) -> str:
        return f"{self.name}(x)"


@dataclass(frozen=True)
class Const:
    value: bool

    def text(self) -> str:
        return "True" if self.value else "False"


@dataclass(frozen=True)
class Not:
    child: "Formula"

    def text(self) -> str:
        return f"!({self.child.text()})"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"

    def text(self) -> str:
        return f"({self.left.text()} & {self.right.text()})"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"

    def text(self) -> str:
        return f"({self.left.text()} | {self.right.text()})"


@dataclass(frozen=True)
class Modal:
    param: ModalParam
    threshold: int
    child: "Formula"

    def text(self) -> str:
        return f"<{self.param.text()}>^>={self.threshold} ({self.child.text()})"


Formula = Atom | Const | Not | And | Or | Modal


def subformulas(formula: Formula) -> list[Formula]:
    """All subformula occurrences in post-order (root last)."""
    out: list[Formula] = []

    def walk(node: Formula):
        if isinstance(node, Not):
            walk(node.child)
        elif isinstance(node, (And, Or)):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, Modal):
            walk(node.child)
        out.append(node)

    walk(formula)
    return out


def quantifier_depth(formula: Formula) -> int:
    if isinstance(formula, (Atom, Const)):
        return 0
    if isinstance(formula, Not):
        return quantifier_depth(formula.child)
    if isinstance(formula, (And, Or)):
        return max(quantifier_depth(formula.left), quantifier_depth(formula.right))
    return 1 + quantifier_depth(formula.child)


def operator_height(formula: Formula) -> int:
    if isinstance(formula, (Atom, Const)):
        return 0
    if isinstance(formula, Not):
        return 1 + operator_height(formula.child)
    if isinstance(formula, (And, Or)):
        return 1 + max(operator_height(formula.left), operator_height(formula.right))
    return 1 + operator_height(formula.child)


def max_hop(formula: Formula) -> int:
    if isinstance(formula, (Atom, Const)):
        return 0
    if isinstance(formula, Not):
        return max_hop(formula.child)
    if isinstance(formula, (And, Or)):
        return max(max_hop(formula.left), max_hop(formula.right))
    own = formula.param.hop or 0
    return max(own, max_hop(formula.child))


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"[A-Za-z][A-Za-z0-9]*|\d+|>=|[()<>^&|!]")


def _tokenize(text: str):
    tokens = []
    for lineno, line in enumerate(text.splitlines() or [""], start=1):
        pos = 0
        while pos < len(line):
            if line[pos].isspace():
                pos += 1
                continue
            m = _TOKEN.match(line, pos)
            if not m:
                raise ParseError(f"unexpected character {line[pos]!r}", lineno, pos + 1)
            tokens.append((m.group(0), lineno, pos + 1))
            pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str, k: Optional[int] = None):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.k = k
        lines = text.splitlines() or [""]
        self.end = (len(lines), len(lines[-1]) + 1)

    def peek(self) -> Optional[str]:
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def where(self) -> tuple[int, int]:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos][1], self.tokens[self.pos][2]
        return self.end

    def take(self, expected: Optional[str] = None) -> str:
        if self.pos >= len(self.tokens):
            raise ParseError(f"unexpected end of input (expected {expected or 'a token'})", *self.end)
        tok, line, col = self.tokens[self.pos]
        if expected is not None and tok != expected:
            raise ParseError(f"expected {expected!r}, found {tok!r}", line, col)
        self.pos += 1
        return tok

    def parse(self) -> Formula:
        node = self.parse_or()
        if self.pos < len(self.tokens):
            raise ParseError(f"unexpected trailing token {self.peek()!r}", *self.where())
        return node

    def parse_or(self) -> Formula:
        node = self.parse_and()
        while self.peek() == "|":
            self.take("|")
            node = Or(node, self.parse_and())
        return node

    def parse_and(self) -> Formula:
        node = self.parse_unary()
        while self.peek() == "&":
            self.take("&")
            node = And(node, self.parse_unary())
        return node

    def parse_unary(self) -> Formula:
        tok = self.peek()
        if tok == "!":
            self.take("!")
            return Not(self.parse_unary())
        if tok == "<":
            return self.parse_modal()
        if tok == "(":
            self.take("(")
            node = self.parse_or()
            self.take(")")
            return node
        if tok == "True":
            self.take()
            return Const(True)
        if tok == "False":
            self.take()
            return Const(False)
        if tok is not None and tok[0].isalpha():
            name = self.take()
            self.take("(")
            self.take("x")
            self.take(")")
            return Atom(name)
        raise ParseError(f"expected a formula, found {tok!r}", *self.where())

    def parse_modal(self) -> Formula:
        self.take("<")
        param = self.parse_param()
        self.take(">")
        self.take("^")
        self.take(">=")
        line, col = self.where()
        tok = self.take()
        if not tok.isdigit() or int(tok) < 1:
            raise ParseError(f"expected a count >= 1, found {tok!r}", line, col)
        return Modal(param, int(tok), self.parse_unary())

    def parse_param_term(self) -> tuple[bool, Optional[int]]:
        """One literal: (negated, hop) with hop None meaning id."""
        negated = False
        if self.peek() == "!":
            self.take("!")
            negated = True
        line, col = self.where()
        tok = self.take()
        if tok == "id":
            return negated, None
        m = re.fullmatch(r"e(\d+)", tok)
        if not m:
            raise ParseError(f"expected 'id' or 'e<i>' in modal parameter, found {tok!r}", line, col)
        hop = int(m.group(1))
        if hop < 1:
            raise ParseError("edge predicate index must be >= 1", line, col)
        if self.k is not None and hop > self.k:
            raise ParseError(f"edge predicate e{hop} exceeds configured k={self.k}", line, col)
        return negated, hop

    def parse_param(self) -> ModalParam:
        line, col = self.where()
        first = self.parse_param_term()
        op = None
        second = None
        if self.peek() in ("&", "|"):
            op = self.take()
            second = self.parse_param_term()
        param = _classify_param(first, op, second)
        if param is None:
            raise ParseError("modal parameter is not one of the eight canonical forms", line, col)
        return param


def _classify_param(first, op, second) -> Optional[ModalParam]:
    if op is None:
        neg, hop = first
        if hop is None:
            return ModalParam(P_NOT_ID if neg else P_ID)
        return ModalParam(P_NOT_EDGE if neg else P_EDGE, hop)
    literals = {first, second}
    if op == "&":
        hops = {h for _, h in literals if h is not None}
        if len(literals) == 2 and (True, None) in literals and len(hops) == 1:
            neg_edge = (True, next(iter(hops)))
            if neg_edge in literals:
                return ModalParam(P_NOT_EDGE_NOT_ID, next(iter(hops)))
        if len(hops) == 1 and literals == {(False, next(iter(hops))), (True, next(iter(hops)))}:
            return ModalParam(P_EDGE_AND_NOT_EDGE, next(iter(hops)))
        return None
    hops = {h for _, h in literals if h is not None}
    if len(hops) != 1:
        return None
    hop = next(iter(hops))
    if literals == {(False, None), (False, hop)}:
        return ModalParam(P_ID_OR_EDGE, hop)
    if literals == {(False, hop), (True, hop)}:
        return ModalParam(P_EDGE_OR_NOT_EDGE, hop)
    return None


def parse_formula(text: str, k: Optional[int] = None) -> Formula:
    return _Parser(text, k).parse()


# ---------------------------------------------------------------------------
# compilation


@dataclass(frozen=True)
class CompiledClassifier:
    """One homogeneous layer capturing a node classifier.

    The update is h' = f(h C + sum_i (S_i h) A_i + (sum_v h_v) R + b) with f
    the truncated ReLU; ``layers`` applications make every dimension equal
    its subformula's truth value (extra applications are a fixed point).
    """

    dim: int
    k: int
    C: np.ndarray
    A: tuple[np.ndarray, ...]
    R: np.ndarray
    b: np.ndarray
    depth: int            # quantifier depth of the root formula
    layers: int           # applications needed (operator height)
    output_index: int
    atom_dims: tuple[tuple[int, int], ...]   # (dimension, color id)
    true_dims: tuple[int, ...]


def compile_formula(formula: Formula, k: int,
                    color_of: Optional[Callable[[str], int]] = None) -> CompiledClassifier:
    if max_hop(formula) > k:
        raise CompileError(f"formula uses edge predicates beyond k={k}")
    if color_of is None:
        color_of = _default_color_of
    nodes = subformulas(formula)
    index = {id(node): i for i, node in enumerate(nodes)}
    L = len(nodes)
    C = np.zeros((L, L))
    A = [np.zeros((L, L)) for _ in range(k)]
    R = np.zeros((L, L))
    b = np.zeros(L)
    atom_dims: list[tuple[int, int]] = []
    true_dims: list[int] = []

    for node in nodes:
        l = index[id(node)]
        if isinstance(node, Atom):
            C[l, l] = 1.0
            atom_dims.append((l, color_of(node.name)))
        elif isinstance(node, Const):
            if node.value:
                C[l, l] = 1.0
                true_dims.append(l)
        elif isinstance(node, Not):
            C[index[id(node.child)], l] = -1.0
            b[l] = 1.0
        elif isinstance(node, And):
            # += so that a literally shared child object still counts twice
            C[index[id(node.left)], l] += 1.0
            C[index[id(node.right)], l] += 1.0
            b[l] = -1.0
        elif isinstance(node, Or):
            C[index[id(node.left)], l] += 1.0
            C[index[id(node.right)], l] += 1.0
        else:
            c = index[id(node.child)]
            n_min = node.threshold
            form, hop = node.param.form, node.param.hop
            if form == P_ID:
                if n_min == 1:
                    C[c, l] = 1.0
                # threshold >= 2 over a singleton set is unsatisfiable: all zero
            elif form == P_EDGE:
                A[hop - 1][c, l] = 1.0
                b[l] = -n_min + 1.0
            elif form == P_NOT_EDGE_NOT_ID:
                R[c, l] = 1.0
                C[c, l] = -1.0
                A[hop - 1][c, l] = -1.0
                b[l] = -n_min + 1.0
            elif form == P_ID_OR_EDGE:
                C[c, l] = 1.0
                A[hop - 1][c, l] = 1.0
                b[l] = -n_min + 1.0
            elif form == P_NOT_ID:
                R[c, l] = 1.0
                C[c, l] = -1.0
                b[l] = -n_min + 1.0
            elif form == P_NOT_EDGE:
                R[c, l] = 1.0
                A[hop - 1][c, l] = -1.0
                b[l] = -n_min + 1.0
            elif form == P_EDGE_OR_NOT_EDGE:
                R[c, l] = 1.0
                b[l] = -n_min + 1.0
            else:
                raise CompileError(
                    "modal parameter e & !e has no published construction; "
                    "the brute-force evaluator still handles it")

    return CompiledClassifier(
        dim=L, k=k, C=C, A=tuple(A), R=R, b=b,
        depth=quantifier_depth(formula),
        layers=max(operator_height(formula), 1),
        output_index=L - 1,
        atom_dims=tuple(atom_dims),
        true_dims=tuple(true_dims),
    )


def _default_color_of(name: str) -> int:
    if name in COLOR_NAMES:
        return COLOR_NAMES[name]
    m = re.fullmatch(r"C(\d+)", name)
    if m:
        return int(m.group(1))
    raise CompileError(f"unknown color atom {name!r}; use a named color or C<id>")


def run_compiled(classifier: CompiledClassifier, graph: Graph,
                 hop_index: Optional[HopIndex] = None) -> np.ndarray:
    """Per-node booleans from repeated application of the compiled layer."""
    if hop_index is None:
        hop_index = build_hop_index(graph, classifier.k)
    if hop_index.k < classifier.k:
        raise ValueError("hop index has fewer hops than the classifier needs")
    n = graph.n
    hops_dense = []
    for i in range(1, classifier.k + 1):
        s = np.zeros((n, n))
        for u in range(n):
            for v in hop_index.hop(u, i):
                s[u, v] = 1.0
        hops_dense.append(s)

    h = np.zeros((n, classifier.dim))
    colors = np.asarray(graph.colors)
    for dim, color in classifier.atom_dims:
        h[:, dim] = (colors == color).astype(float)
    for dim in classifier.true_dims:
        h[:, dim] = 1.0

    for _ in range(classifier.layers):
        pre = h @ classifier.C + classifier.b
        for i in range(classifier.k):
            pre += (hops_dense[i] @ h) @ classifier.A[i]
        pre += np.tile(h.sum(axis=0) @ classifier.R, (n, 1))
        h = np.clip(pre, 0.0, 1.0)
        deviation = np.abs(h - np.round(h)).max() if h.size else 0.0
        if deviation >= 1e-9:
            raise AssertionError(f"compiled activations left {{0,1}}: deviation {deviation}")
    return h[:, classifier.output_index] > 0.5


# ---------------------------------------------------------------------------
# brute-force oracle


def _eval_all(formula: Formula, graph: Graph, hop_index: HopIndex,
              color_of: Callable[[str], int]) -> list[bool]:
    n = graph.n
    if isinstance(formula, Atom):
        cid = color_of(formula.name)
        return [c == cid for c in graph.colors]
    if isinstance(formula, Const):
        return [formula.value] * n
    if isinstance(formula, Not):
        child = _eval_all(formula.child, graph, hop_index, color_of)
        return [not x for x in child]
    if isinstance(formula, And):
        left = _eval_all(formula.left, graph, hop_index, color_of)
        right = _eval_all(formula.right, graph, hop_index, color_of)
        return [a and b for a, b in zip(left, right)]
    if isinstance(formula, Or):
        left = _eval_all(formula.left, graph, hop_index, color_of)
        right = _eval_all(formula.right, graph, hop_index, color_of)
        return [a or b for a, b in zip(left, right)]

    child = _eval_all(formula.child, graph, hop_index, color_of)
    everything = set(range(n))
    out = []
    for v in range(n):
        form, hop = formula.param.form, formula.param.hop
        edge_set = set(hop_index.hop(v, hop)) if hop is not None else set()
        if form == P_ID:
            eps = {v}
        elif form == P_EDGE:
            eps = edge_set
        elif form == P_NOT_EDGE_NOT_ID:
            eps = everything - edge_set - {v}
        elif form == P_ID_OR_EDGE:
            eps = {v} | edge_set
        elif form == P_NOT_ID:
            eps = everything - {v}
        elif form == P_NOT_EDGE:
            eps = everything - edge_set
        elif form == P_EDGE_OR_NOT_EDGE:
            eps = everything
        else:
            eps = set()
        count = sum(1 for u in eps if child[u])
        out.append(count >= formula.threshold)
    return out


def eval_bruteforce_all(formula: Formula, graph: Graph,
                        hop_index: Optional[HopIndex] = None,
                        color_of: Optional[Callable[[str], int]] = None) -> np.ndarray:
    k = max(max_hop(formula), 1)
    if hop_index is None:
        hop_index = build_hop_index(graph, k)
    return np.asarray(_eval_all(formula, graph, hop_index, color_of or _default_color_of))


def eval_bruteforce(formula: Formula, graph: Graph, node: int,
                    hop_index: Optional[HopIndex] = None) -> bool:
    return bool(eval_bruteforce_all(formula, graph, hop_index)[node])


# ---------------------------------------------------------------------------
# random formulas for fuzzing the compiler against the oracle

_COMPILABLE_FORMS = (P_ID, P_EDGE, P_NOT_EDGE_NOT_ID, P_ID_OR_EDGE,
                     P_NOT_ID, P_NOT_EDGE, P_EDGE_OR_NOT_EDGE)


def random_formula(rng: np.random.Generator, n_colors: int = 3, k: int = 3,
                   max_depth: int = 3, max_threshold: int = 3,
                   compilable_only: bool = True) -> Formula:
    """A random classifier with quantifier depth at most ``max_depth``."""

    def gen(depth_left: int, size_left: int) -> Formula:
        choices = ["atom", "const"]
        if size_left > 1:
            choices += ["not", "and", "or"]
            if depth_left > 0:
                choices += ["modal", "modal"]
        pick = choices[rng.integers(len(choices))]
        if pick == "atom":
            return Atom(f"C{rng.integers(n_colors)}")
        if pick == "const":
            return Const(bool(rng.integers(2)))
        if pick == "not":
            return Not(gen(depth_left, size_left - 1))
        if pick in ("and", "or"):
            left = gen(depth_left, size_left // 2)
            right = gen(depth_left, size_left // 2)
            return And(left, right) if pick == "and" else Or(left, right)
        forms = _COMPILABLE_FORMS if compilable_only else _COMPILABLE_FORMS + (P_EDGE_AND_NOT_EDGE,)
        form = forms[rng.integers(len(forms))]
        hop = None if form in (P_ID, P_NOT_ID) else int(rng.integers(1, k + 1))
        return Modal(ModalParam(form, hop), int(rng.integers(1, max_threshold + 1)),
                     gen(depth_left - 1, size_left - 1))

    return gen(max_depth, 8)
