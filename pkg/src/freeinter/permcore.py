"""Permutations and small finite groups given by explicit element lists.

Points are 1-based. Composition is "apply the left factor first", so
``p * q`` sends ``k`` to ``q(p(k))``; this makes permutations act on the
right, ``k ^ (p * q) = (k ^ p) ^ q``, matching the convention
``b^a = a^-1 b a`` used for conjugation throughout the package.
"""

from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence


class GroupTooLarge(RuntimeError):
    """Closure enumeration went past its element cap."""


class CycleSyntaxError(ValueError):
    pass


DEFAULT_CAP = 200_000


@dataclass(frozen=True)
class Permutation:
    """A bijection of {1..degree}; ``images[k - 1]`` is the image of ``k``."""

    images: tuple[int, ...]

    def __post_init__(self):
        n = len(self.images)
        if n == 0:
            raise ValueError("degree must be positive")
        if sorted(self.images) != list(range(1, n + 1)):
            raise ValueError(f"{self.images} is not a permutation of 1..{n}")

    @classmethod
    def identity(cls, degree: int) -> "Permutation":
        return cls(tuple(range(1, degree + 1)))

    @classmethod
    def from_cycles(cls, cycles: Iterable[Sequence[int]], degree: int) -> "Permutation":
        p = cls.identity(degree)
        for cyc in cycles:
            p = p * _single_cycle(cyc, degree)
        return p

    @property
    def degree(self) -> int:
        return len(self.images)

    def __call__(self, k: int) -> int:
        return self.images[k - 1]

    def __mul__(self, other: "Permutation") -> "Permutation":
        return compose(self, other)

    def __pow__(self, e: int) -> "Permutation":
        base = self if e >= 0 else self.inverse()
        result = Permutation.identity(self.degree)
        for _ in range(abs(e)):
            result = result * base
        return result

    def inverse(self) -> "Permutation":
        inv = [0] * self.degree
        for k, img in enumerate(self.images, start=1):
            inv[img - 1] = k
        return Permutation(tuple(inv))

    def is_identity(self) -> bool:
        return all(img == k for k, img in enumerate(self.images, start=1))

    def fixed_points(self) -> list[int]:
        return [k for k, img in enumerate(self.images, start=1) if img == k]

    def cycles(self) -> list[tuple[int, ...]]:
        """Nontrivial cycles, each starting from its smallest point."""
        seen = set()
        out = []
        for start in range(1, self.degree + 1):
            if start in seen:
                continue
            cyc = [start]
            seen.add(start)
            k = self(start)
            while k != start:
                cyc.append(k)
                seen.add(k)
                k = self(k)
            if len(cyc) > 1:
                out.append(tuple(cyc))
        return out

    def order(self) -> int:
        return element_order(self)

    def __str__(self) -> str:
        cyc = self.cycles()
        if not cyc:
            return "()"
        return "".join("(" + " ".join(map(str, c)) + ")" for c in cyc)

    def __repr__(self) -> str:
        return f"Permutation({self}, degree={self.degree})"


def _single_cycle(points: Sequence[int], degree: int) -> Permutation:
    points = list(points)
    images = list(range(1, degree + 1))
    if len(set(points)) != len(points):
        raise CycleSyntaxError(f"repeated point in cycle {tuple(points)}")
    for k in points:
        if not 1 <= k <= degree:
            raise CycleSyntaxError(f"point {k} out of range 1..{degree}")
    for a, b in zip(points, points[1:] + points[:1]):
        images[a - 1] = b
    return Permutation(tuple(images))


_CYCLE_RE = re.compile(r"\(([^()]*)\)")


def parse_cycles(text: str, degree: int) -> Permutation:
    """Parse cycle notation such as ``"(1 2)(3,4,5)"``; ``"()"`` is the identity.

    Cycles are multiplied left to right with the package's composition rule.
    """
    if degree < 1:
        raise ValueError("degree must be positive")
    s = text.strip()
    if not s:
        raise CycleSyntaxError("empty permutation text")
    pos = 0
    cycles: list[list[int]] = []
    for m in _CYCLE_RE.finditer(s):
        if s[pos:m.start()].strip():
            raise CycleSyntaxError(f"unexpected text {s[pos:m.start()]!r} in {text!r}")
        pos = m.end()
        body = m.group(1).strip()
        if not body:
            cycles.append([])
            continue
        tokens = [t for t in re.split(r"[,\s]+", body) if t]
        if not all(t.isdigit() for t in tokens):
            raise CycleSyntaxError(f"non-integer point in cycle ({body})")
        pts = [int(t) for t in tokens]
        if len(pts) < 2:
            raise CycleSyntaxError(f"cycle ({body}) needs at least two points")
        cycles.append(pts)
    if s[pos:].strip() or pos == 0:
        raise CycleSyntaxError(f"malformed cycle notation {text!r}")
    if any(not c for c in cycles) and len(cycles) > 1:
        raise CycleSyntaxError("'()' must stand alone")
    return Permutation.from_cycles([c for c in cycles if c], degree)


def compose(p: Permutation, q: Permutation) -> Permutation:
    """Apply ``p`` first, then ``q``."""
    if p.degree != q.degree:
        raise ValueError(f"degree mismatch: {p.degree} vs {q.degree}")
    qi = q.images
    return Permutation(tuple(qi[i - 1] for i in p.images))


def element_order(p: Permutation) -> int:
    return math.lcm(*(len(c) for c in p.cycles())) if p.cycles() else 1


@dataclass(eq=False)
class FiniteGroupTable:
    """A finite permutation group with its elements listed in BFS order.

    ``elements[0]`` is the identity; ``generators`` holds element indices.
    The multiplication table is filled lazily since large closures are
    mostly used only for their order.
    """

    elements: list[Permutation]
    generators: list[int]
    index: dict[Permutation, int] = field(repr=False)
    _mul: list[list[int]] | None = field(default=None, repr=False)
    _inv: list[int] | None = field(default=None, repr=False)

    identity = 0

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def degree(self) -> int:
        return self.elements[0].degree

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, p: Permutation) -> bool:
        return p in self.index

    def mul_table(self) -> list[list[int]]:
        if self._mul is None:
            idx = self.index
            els = self.elements
            self._mul = [[idx[a * b] for b in els] for a in els]
        return self._mul

    def mul(self, i: int, j: int) -> int:
        return self.mul_table()[i][j]

    def inverses(self) -> list[int]:
        if self._inv is None:
            self._inv = [self.index[e.inverse()] for e in self.elements]
        return self._inv

    def inv(self, i: int) -> int:
        return self.inverses()[i]

    def element_orders(self) -> list[int]:
        return [element_order(e) for e in self.elements]

    def generator_perms(self) -> list[Permutation]:
        return [self.elements[g] for g in self.generators]

    def is_closed(self) -> bool:
        return all(a * b in self.index for a in self.elements for b in self.elements)


def closure(generators: Iterable[Permutation], cap: int = DEFAULT_CAP, degree: int | None = None) -> FiniteGroupTable:
    """Breadth-first closure from the identity under right multiplication by ``generators``."""
    gens = list(generators)
    if cap < 1:
        raise ValueError("cap must be positive")
    if gens:
        degree = gens[0].degree
        if any(g.degree != degree for g in gens):
            raise ValueError("generators must share a degree")
    elif degree is None:
        degree = 1
    ident = Permutation.identity(degree)
    elements = [ident]
    index = {ident: 0}
    queue = deque([ident])
    while queue:
        a = queue.popleft()
        for g in gens:
            b = a * g
            if b not in index:
                if len(elements) >= cap:
                    raise GroupTooLarge(f"closure exceeds cap of {cap} elements")
                index[b] = len(elements)
                elements.append(b)
                queue.append(b)
    return FiniteGroupTable(elements, [index[g] for g in gens], index)


def orbits(subgroup: FiniteGroupTable | Iterable[Permutation], domain: Iterable[int]) -> list[tuple[int, ...]]:
    """Orbits of ``subgroup`` on ``domain``, each sorted, listed by smallest point."""
    els = subgroup.elements if isinstance(subgroup, FiniteGroupTable) else list(subgroup)
    remaining = sorted(set(domain))
    seen: set[int] = set()
    out = []
    for k in remaining:
        if k in seen:
            continue
        orb = {g(k) for g in els} | {k}
        seen |= orb
        out.append(tuple(sorted(orb)))
    return out


def is_semiregular(subgroup: FiniteGroupTable | Iterable[Permutation], domain: Iterable[int]) -> bool:
    els = subgroup.elements if isinstance(subgroup, FiniteGroupTable) else list(subgroup)
    pts = list(domain)
    return not any(not g.is_identity() and any(g(k) == k for k in pts) for g in els)


def semiregularity_witness(subgroup: FiniteGroupTable, domain: Iterable[int]) -> tuple[Permutation, int] | None:
    """First (non-identity element, fixed point) pair, or None if the action is semiregular."""
    pts = list(domain)
    for g in subgroup.elements:
        if g.is_identity():
            continue
        for k in pts:
            if g(k) == k:
                return g, k
    return None


# ---------------------------------------------------------------------------
# Named groups: c<n>, klein, s<n>, a<n>, d<n>

def cyclic_generators(n: int) -> list[Permutation]:
    if n < 1:
        raise ValueError("cyclic order must be positive")
    if n == 1:
        return []
    return [Permutation.from_cycles([range(1, n + 1)], n)]


def klein_generators() -> list[Permutation]:
    return [parse_cycles("(1 2)", 4), parse_cycles("(3 4)", 4)]


def symmetric_generators(n: int) -> list[Permutation]:
    if n < 2:
        return []
    if n == 2:
        return [parse_cycles("(1 2)", 2)]
    return [parse_cycles("(1 2)", n), Permutation.from_cycles([range(1, n + 1)], n)]


def alternating_generators(n: int) -> list[Permutation]:
    if n < 3:
        return []
    three = parse_cycles("(1 2 3)", n)
    if n == 3:
        return [three]
    long = range(1, n + 1) if n % 2 else range(2, n + 1)
    return [three, Permutation.from_cycles([long], n)]


def dihedral_generators(n: int) -> list[Permutation]:
    """Dihedral group of order 2n acting on the n-gon (n >= 3)."""
    if n < 3:
        raise ValueError("dihedral d<n> needs n >= 3")
    rot = Permutation.from_cycles([range(1, n + 1)], n)
    refl = Permutation(tuple(n + 1 - k for k in range(1, n + 1)))
    return [rot, refl]


_NAME_RE = re.compile(r"^(c|s|a|d)(\d+)$|^(klein)$")


def named_group(name: str, cap: int = DEFAULT_CAP) -> FiniteGroupTable:
    m = _NAME_RE.match(name.strip().lower())
    if not m:
        raise ValueError(f"unknown group name {name!r}; expected c<n>, klein, s<n>, a<n> or d<n>")
    if m.group(3):
        return closure(klein_generators(), cap)
    kind, n = m.group(1), int(m.group(2))
    gens = {"c": cyclic_generators, "s": symmetric_generators,
            "a": alternating_generators, "d": dihedral_generators}[kind](n)
    return closure(gens, cap, degree=max(n, 1))
