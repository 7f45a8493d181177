"""The ambient free product G = F * (*_i G_i): factors, normal-form words and invariants.

Factor groups are always materialized as permutation tables. Numerical
invariants are exact: rationals are ``Fraction`` and an infinite height is
``math.inf``.
"""

from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

from .permcore import (
    FiniteGroupTable,
    Permutation,
    alternating_generators,
    closure,
    cyclic_generators,
    klein_generators,
    parse_cycles,
    symmetric_generators,
)

INFINITE = math.inf


class SpecParseError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Factors


@dataclass(frozen=True, eq=False)
class FactorSpec:
    name: str
    kind: str
    param: int | None
    table: FiniteGroupTable = field(repr=False)

    @property
    def order(self) -> int:
        return self.table.order

    @property
    def generators(self) -> list[int]:
        return self.table.generators

    def element_word(self, g: int) -> tuple[int, ...]:
        """Shortest word (generator positions) reaching element ``g`` from the identity."""
        return self._words()[g]

    def _words(self) -> list[tuple[int, ...]]:
        cached = self.__dict__.get("_word_cache")
        if cached is None:
            mul = self.table.mul_table()
            cached = [None] * self.order
            cached[0] = ()
            queue = deque([0])
            while queue:
                a = queue.popleft()
                for pos, s in enumerate(self.generators):
                    b = mul[a][s]
                    if cached[b] is None:
                        cached[b] = cached[a] + (pos,)
                        queue.append(b)
            object.__setattr__(self, "_word_cache", cached)
        return cached

    def label(self, g: int) -> str:
        word = self.element_word(g)
        if not word:
            return "1"
        if len(self.generators) == 1:
            return self.name if len(word) == 1 else f"{self.name}^{len(word)}"
        toks = [f"{self.name}.{pos + 1}" for pos in word]
        return toks[0] if len(toks) == 1 else "(" + " ".join(toks) + ")"


def make_factor(name: str, kind: str, param: int | None = None,
                gens: Sequence[Permutation] | None = None) -> FactorSpec:
    if kind == "cyclic":
        table = closure(cyclic_generators(param), degree=param)
    elif kind == "klein":
        table = closure(klein_generators())
    elif kind == "sym":
        table = closure(symmetric_generators(param), degree=param)
    elif kind == "alt":
        table = closure(alternating_generators(param), degree=param)
    elif kind == "perm":
        if not gens:
            raise ValueError(f"factor {name}: perm kind needs generators")
        table = closure(gens)
        param = table.degree
    else:
        raise ValueError(f"unknown factor kind {kind!r}")
    if table.order < 2:
        raise ValueError(f"factor {name} is trivial; trivial factors are not allowed")
    return FactorSpec(name, kind, param, table)


def cyclic(name: str, n: int) -> FactorSpec:
    return make_factor(name, "cyclic", n)


def klein(name: str) -> FactorSpec:
    return make_factor(name, "klein")


# ---------------------------------------------------------------------------
# Words


class Syllable(NamedTuple):
    """``kind`` is "g" (factor ``index``, element ``value``) or "x" (free letter ``index``, exponent ``value``)."""
    kind: str
    index: int
    value: int


Word = tuple  # tuple[Syllable, ...] in normal form


@dataclass(frozen=True, eq=False)
class FreeProductSpec:
    factors: tuple[FactorSpec, ...]
    free_rank: int = 0

    def __post_init__(self):
        names = [f.name for f in self.factors]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate factor names in {names}")
        if self.free_rank < 0:
            raise ValueError("free rank must be nonnegative")
        for f in self.factors:
            if f.order < 2:
                raise ValueError(f"factor {f.name} is trivial")

    def factor_index(self, name: str) -> int:
        for i, f in enumerate(self.factors):
            if f.name == name:
                return i
        raise KeyError(name)

    def describe(self) -> str:
        parts = [f"{f.name}:{f.kind}{'' if f.param is None else f.param}" for f in self.factors]
        if self.free_rank:
            parts.append(f"F{self.free_rank}")
        return " * ".join(parts) if parts else "1"

    # word arithmetic -----------------------------------------------------

    def factor_letter(self, i: int, g: int) -> Word:
        return (Syllable("g", i, g),) if g != 0 else ()

    def free_letter(self, j: int, e: int = 1) -> Word:
        if not 0 <= j < self.free_rank:
            raise IndexError(f"free letter {j} out of range")
        return (Syllable("x", j, 1 if e > 0 else -1),)

    def multiply(self, u: Word, v: Word) -> Word:
        out = list(u)
        for syl in v:
            self._push(out, syl)
        return tuple(out)

    def _push(self, stack: list, syl: Syllable) -> None:
        if stack:
            top = stack[-1]
            if top.kind == syl.kind == "g" and top.index == syl.index:
                prod = self.factors[syl.index].table.mul(top.value, syl.value)
                stack.pop()
                if prod != 0:
                    stack.append(Syllable("g", syl.index, prod))
                return
            if top.kind == syl.kind == "x" and top.index == syl.index and top.value == -syl.value:
                stack.pop()
                return
        stack.append(syl)

    def inverse(self, u: Word) -> Word:
        out = []
        for syl in reversed(u):
            if syl.kind == "g":
                out.append(Syllable("g", syl.index, self.factors[syl.index].table.inv(syl.value)))
            else:
                out.append(Syllable("x", syl.index, -syl.value))
        return tuple(out)

    def normalize(self, syllables) -> Word:
        out: list = []
        for syl in syllables:
            syl = Syllable(*syl)
            if syl.kind == "g" and syl.value == 0:
                continue
            self._push(out, syl)
        return tuple(out)

    def power(self, u: Word, e: int) -> Word:
        base = u if e >= 0 else self.inverse(u)
        out: Word = ()
        for _ in range(abs(e)):
            out = self.multiply(out, base)
        return out

    def cyclic_reduction(self, u: Word) -> Word:
        w = list(u)
        while len(w) >= 2:
            first, last = w[0], w[-1]
            if first.kind == last.kind == "x" and first.index == last.index and first.value == -last.value:
                w = w[1:-1]
            elif first.kind == last.kind == "g" and first.index == last.index:
                # conjugate by the first syllable: w' = middle * (last * first)
                prod = self.factors[first.index].table.mul(last.value, first.value)
                w = w[1:-1] + ([Syllable("g", first.index, prod)] if prod != 0 else [])
            else:
                break
        return tuple(w)

    def word_order(self, u: Word) -> int | float:
        w = self.cyclic_reduction(u)
        if not w:
            return 1
        if len(w) == 1 and w[0].kind == "g":
            return self.factors[w[0].index].table.elements[w[0].value].order()
        return INFINITE

    def format_word(self, u: Word) -> str:
        if not u:
            return "1"
        toks = []
        for syl in u:
            if syl.kind == "g":
                toks.append(self.factors[syl.index].label(syl.value))
            else:
                toks.append(f"x{syl.index + 1}" + ("" if syl.value > 0 else "^-1"))
        return " ".join(toks)

    def generator_words(self) -> list[tuple[str, Word]]:
        """Generators in the fixed order: factor generators first, then free letters."""
        out = []
        for i, f in enumerate(self.factors):
            for pos, g in enumerate(f.generators):
                out.append((f"{f.name}.{pos + 1}", self.factor_letter(i, g)))
        for j in range(self.free_rank):
            out.append((f"x{j + 1}", self.free_letter(j)))
        return out

    def without_factor(self, j: int) -> "FreeProductSpec":
        return FreeProductSpec(self.factors[:j] + self.factors[j + 1:], self.free_rank)


def word_multiply(spec: FreeProductSpec, u: Word, v: Word) -> Word:
    return spec.multiply(u, v)


def word_order(spec: FreeProductSpec, u: Word) -> int | float:
    return spec.word_order(u)


# ---------------------------------------------------------------------------
# Invariants


def f_of(height: int | float) -> Fraction:
    """x / (x - 2) on [3, inf], with f(inf) = 1."""
    if height == INFINITE:
        return Fraction(1)
    if height < 3:
        raise ValueError("f is defined on [3, inf]")
    return Fraction(int(height), int(height) - 2)


def _odd_prime_factors(n: int) -> list[int]:
    out = []
    m = n
    p = 2
    while p * p <= m:
        if m % p == 0:
            out.append(p)
            while m % p == 0:
                m //= p
        p += 1
    if m > 1:
        out.append(m)
    return [p for p in out if p % 2]


def height_finite(table: FiniteGroupTable) -> int | float:
    """Least order >= 3 of a subgroup; always an odd prime, 4, or inf."""
    orders = table.element_orders()
    best: int | float = INFINITE
    for o in orders:
        for p in _odd_prime_factors(o):
            best = min(best, p)
    if any(o % 4 == 0 for o in orders):
        best = min(best, 4)
    elif best > 4:
        invols = [i for i, o in enumerate(orders) if o == 2]
        mul = table.mul_table() if invols else None
        for a in invols:
            if any(b != a and mul[a][b] == mul[b][a] for b in invols):
                best = 4
                break
    return best


def has_involution(table: FiniteGroupTable) -> bool:
    return table.order % 2 == 0


@dataclass(frozen=True)
class BoundsReport:
    chi: Fraction
    height: int | float
    fheight: Fraction
    depth: int
    sigma_lower: Fraction
    sigma_upper: Fraction


def euler_characteristic(spec: FreeProductSpec) -> Fraction:
    return (1 + sum((Fraction(1, f.order) for f in spec.factors), Fraction(0))
            - (len(spec.factors) + spec.free_rank))


def compute_bounds(spec: FreeProductSpec) -> BoundsReport:
    height = min((height_finite(f.table) for f in spec.factors), default=INFINITE)
    fh = f_of(height)
    depth = 2 if any(has_involution(f.table) for f in spec.factors) else 1
    return BoundsReport(euler_characteristic(spec), height, fh, depth, depth * fh, 2 * fh)


def validate_nondegenerate(spec: FreeProductSpec) -> tuple[bool, str]:
    """Whether some free subgroup meeting all factor conjugates trivially has rank >= 2."""
    if not spec.factors:
        if spec.free_rank >= 2:
            return True, f"case (i): no factors and free rank {spec.free_rank} >= 2"
        return False, f"free group of rank {spec.free_rank} has no free subgroup of rank 2"
    for i0, f in enumerate(spec.factors):
        rest = len(spec.factors) - 1
        if spec.free_rank >= 1 or rest >= 2:
            other: int | float = INFINITE
        elif rest == 1:
            other = spec.factors[1 - i0].order
        else:
            other = 1
        if f.order >= 2 and other >= 3:
            return True, f"case (ii): factor {f.name} has order {f.order} and its complement has order {other}"
    if len(spec.factors) == 1 and spec.free_rank == 0:
        return False, f"G = {spec.factors[0].name} is finite"
    return False, "G is infinite dihedral (C2 * C2)"


# ---------------------------------------------------------------------------
# Spec file format


def parse_spec(text: str) -> FreeProductSpec:
    """Parse the line-oriented group spec format (``free_rank`` and ``factor`` lines, ``#`` comments)."""
    factors = []
    free_rank = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        try:
            if toks[0] == "free_rank" and len(toks) == 2:
                free_rank = int(toks[1])
                if free_rank < 0:
                    raise ValueError("free rank must be nonnegative")
            elif toks[0] == "factor" and len(toks) >= 3:
                factors.append(_parse_factor(toks[1], toks[2], line))
            else:
                raise ValueError(f"unrecognized line {line!r}")
        except ValueError as exc:
            raise SpecParseError(f"line {lineno}: {exc}") from exc
    try:
        return FreeProductSpec(tuple(factors), free_rank)
    except ValueError as exc:
        raise SpecParseError(str(exc)) from exc


_PERM_RE = re.compile(r"^factor\s+\S+\s+perm\s+(\d+)\s+gens\s+(.*)$")


def _parse_factor(name: str, kind: str, line: str) -> FactorSpec:
    toks = line.split()
    if kind == "klein":
        if len(toks) != 3:
            raise ValueError("klein takes no parameter")
        return make_factor(name, "klein")
    if kind in ("cyclic", "sym", "alt"):
        if len(toks) != 4:
            raise ValueError(f"{kind} takes one integer parameter")
        return make_factor(name, kind, int(toks[3]))
    if kind == "perm":
        m = _PERM_RE.match(line)
        if not m:
            raise ValueError("expected 'factor <name> perm <degree> gens <perm>, <perm>, ...'")
        degree = int(m.group(1))
        gens = [parse_cycles(chunk, degree) for chunk in _split_perm_list(m.group(2))]
        return make_factor(name, "perm", degree, gens)
    raise ValueError(f"unknown factor kind {kind!r}")


def _split_perm_list(text: str) -> list[str]:
    """Split ``"(1 2 3), (1 2)"`` on commas that sit outside parentheses."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if "".join(cur).strip():
        out.append("".join(cur))
    return [s.strip() for s in out if s.strip()]
