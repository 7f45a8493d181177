"""Finite-index free subgroups as actions with a basepoint, and their intersections.

A subgroup is the stabilizer of a basepoint under a transitive right action
of G on {1..n}; a kernel is the special case of the regular action on the
image group. Intersections H^s n K over double coset representatives s are
read off the orbits of the product action on pairs of points.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from . import coregraph
from .fpspec import INFINITE, BoundsReport, FreeProductSpec, Word, compute_bounds, euler_characteristic
from .permcore import DEFAULT_CAP, FiniteGroupTable, Permutation, closure, named_group
from .sumsetlab import TableAmbient, verify_family


class ActionValidationError(ValueError):
    """Raised when generator images do not define a free subgroup; names the factor and a witness."""

    def __init__(self, message: str, factor: str | None = None, witness=None):
        super().__init__(message)
        self.factor = factor
        self.witness = witness


class SpecMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# Actions


@dataclass
class RawAction:
    """Unvalidated generator images: free letters by 1-based index, factors by name."""

    degree: int
    free: dict[int, Permutation] = field(default_factory=dict)
    factors: dict[str, list[Permutation]] = field(default_factory=dict)
    basepoint: int = 1
    mode: str = "kernel"


@dataclass(frozen=True, eq=False)
class ActionAssignment:
    spec: FreeProductSpec
    degree: int
    free: tuple[Permutation, ...]
    factor_gens: tuple[tuple[Permutation, ...], ...]
    factor_maps: tuple[tuple[Permutation, ...], ...]  # image of every factor element, by table index
    images: tuple[FiniteGroupTable, ...]
    validated: bool = True

    def factor_orbits(self, i: int) -> list[tuple[int, ...]]:
        seen: set[int] = set()
        out = []
        maps = self.factor_maps[i]
        for w in range(1, self.degree + 1):
            if w in seen:
                continue
            orb = tuple(sorted({m(w) for m in maps}))
            seen.update(orb)
            out.append(orb)
        return out

    def generator_perms(self) -> list[tuple[str, Word, Permutation]]:
        """Generator labels, words and images: factor generators first, then free letters."""
        out = []
        words = dict(self.spec.generator_words())
        for i, f in enumerate(self.spec.factors):
            for k, g in enumerate(f.generators):
                label = f"{f.name}.{k + 1}"
                out.append((label, self.spec.factor_letter(i, g), self.factor_gens[i][k]))
        for j, perm in enumerate(self.free):
            out.append((f"x{j + 1}", self.spec.free_letter(j), perm))
        assert all(lbl in words for lbl, _, _ in out)
        return out

    def apply_word(self, point: int, word: Word) -> int:
        for syl in word:
            if syl.kind == "g":
                point = self.factor_maps[syl.index][syl.value](point)
            else:
                perm = self.free[syl.index]
                if syl.value < 0:
                    perm = perm.inverse()
                for _ in range(abs(syl.value)):
                    point = perm(point)
        return point


def _factor_map(spec: FreeProductSpec, i: int, gen_images: Sequence[Permutation], degree: int) -> list[Permutation]:
    """Extend generator images over the factor's Cayley graph, certifying a homomorphism."""
    f = spec.factors[i]
    table = f.table
    if len(gen_images) != len(f.generators):
        raise ActionValidationError(
            f"factor {f.name}: expected {len(f.generators)} generator images, got {len(gen_images)}", f.name)
    mul = table.mul_table()
    images: list[Permutation | None] = [None] * table.order
    images[0] = Permutation.identity(degree)
    queue = deque([0])
    while queue:
        a = queue.popleft()
        for k, g in enumerate(f.generators):
            b = mul[a][g]
            img = images[a] * gen_images[k]
            if images[b] is None:
                images[b] = img
                queue.append(b)
            elif images[b] != img:
                raise ActionValidationError(
                    f"factor {f.name}: generator images are not a homomorphism "
                    f"(element {f.label(b)} gets images {images[b]} and {img})", f.name, f.label(b))
    return images  # type: ignore[return-value]


def validate_action(spec: FreeProductSpec, raw: RawAction, require_free: bool = True) -> ActionAssignment:
    n = raw.degree
    if n < 1:
        raise ActionValidationError("degree must be positive")
    for perm in list(raw.free.values()) + [p for ps in raw.factors.values() for p in ps]:
        if perm.degree != n:
            raise ActionValidationError(f"permutation {perm} has degree {perm.degree}, expected {n}")
    names = {f.name for f in spec.factors}
    unknown = set(raw.factors) - names
    if unknown:
        raise ActionValidationError(f"unknown factor(s) {sorted(unknown)}", sorted(unknown)[0])
    bad_free = [j for j in raw.free if not 1 <= j <= spec.free_rank]
    if bad_free:
        raise ActionValidationError(f"free letter x{bad_free[0]} not in spec (free rank {spec.free_rank})")
    free = []
    for j in range(1, spec.free_rank + 1):
        if j not in raw.free:
            raise ActionValidationError(f"no image given for free letter x{j}")
        free.append(raw.free[j])
    gens, maps, imgs = [], [], []
    for i, f in enumerate(spec.factors):
        if f.name not in raw.factors:
            raise ActionValidationError(f"no images given for factor {f.name}", f.name)
        g_imgs = tuple(raw.factors[f.name])
        fmap = _factor_map(spec, i, g_imgs, n)
        if require_free:
            seen: dict[Permutation, int] = {}
            for g, img in enumerate(fmap):
                if img in seen:
                    raise ActionValidationError(
                        f"factor {f.name}: image is not injective; {f.label(g)} and {f.label(seen[img])} "
                        f"both map to {img} (image order {len(set(fmap))} < {f.order})", f.name, f.label(g))
                seen[img] = g
            for g, img in enumerate(fmap):
                if g == 0:
                    continue
                fixed = img.fixed_points()
                if fixed:
                    raise ActionValidationError(
                        f"factor {f.name}: image is not semiregular; {f.label(g)} -> {img} fixes point {fixed[0]}",
                        f.name, fixed[0])
        gens.append(g_imgs)
        maps.append(tuple(fmap))
        imgs.append(closure(g_imgs, degree=n))
    return ActionAssignment(spec, n, tuple(free), tuple(gens), tuple(maps), tuple(imgs))


def _all_images(spec: FreeProductSpec, raw: RawAction) -> list[Permutation]:
    out = []
    for f in spec.factors:
        out.extend(raw.factors.get(f.name, []))
    out.extend(raw.free[j] for j in sorted(raw.free))
    return out


# ---------------------------------------------------------------------------
# Subgroup handles


@dataclass(frozen=True, eq=False)
class SubgroupHandle:
    spec: FreeProductSpec
    action: ActionAssignment
    basepoint: int
    transitive_component: tuple[int, ...]
    mode: str = "stabilizer"
    image: FiniteGroupTable | None = None  # the image group Q for kernels

    @property
    def index(self) -> int:
        return len(self.transitive_component)


def _regular_action(spec: FreeProductSpec, raw: RawAction, Q: FiniteGroupTable) -> RawAction:
    els, idx = Q.elements, Q.index

    def right_mult(gamma: Permutation) -> Permutation:
        return Permutation(tuple(idx[e * gamma] + 1 for e in els))

    return RawAction(
        Q.order,
        {j: right_mult(p) for j, p in raw.free.items()},
        {name: [right_mult(p) for p in ps] for name, ps in raw.factors.items()},
        1,
        "kernel",
    )


def from_kernel(spec: FreeProductSpec, raw: RawAction, cap: int = DEFAULT_CAP) -> SubgroupHandle:
    """Handle for the kernel of the homomorphism given by ``raw``'s generator images."""
    validate_action(spec, raw, require_free=False)
    Q = closure(_all_images(spec, raw), cap=cap, degree=raw.degree)
    action = validate_action(spec, _regular_action(spec, raw, Q))
    return SubgroupHandle(spec, action, 1, tuple(range(1, Q.order + 1)), "kernel", Q)


def _component(action_gens: Sequence[Permutation], start: int) -> list[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        w = queue.popleft()
        for p in action_gens:
            u = p(w)
            if u not in seen:
                seen.add(u)
                queue.append(u)
    return sorted(seen)


def from_stabilizer(spec: FreeProductSpec, raw: RawAction) -> SubgroupHandle:
    """Handle for the stabilizer of ``raw.basepoint``, restricted to its transitive component."""
    if not 1 <= raw.basepoint <= raw.degree:
        raise ActionValidationError(f"basepoint {raw.basepoint} outside 1..{raw.degree}")
    validate_action(spec, raw, require_free=False)
    comp = _component(_all_images(spec, raw), raw.basepoint)
    relabel = {w: k for k, w in enumerate(comp, start=1)}

    def restrict(p: Permutation) -> Permutation:
        return Permutation(tuple(relabel[p(w)] for w in comp))

    sub = RawAction(len(comp), {j: restrict(p) for j, p in raw.free.items()},
                    {name: [restrict(p) for p in ps] for name, ps in raw.factors.items()},
                    relabel[raw.basepoint], "stabilizer")
    action = validate_action(spec, sub)
    return SubgroupHandle(spec, action, sub.basepoint, tuple(range(1, len(comp) + 1)), "stabilizer")


def handle_from_raw(spec: FreeProductSpec, raw: RawAction, cap: int = DEFAULT_CAP) -> SubgroupHandle:
    if raw.mode == "kernel":
        return from_kernel(spec, raw, cap)
    if raw.mode == "stabilizer":
        return from_stabilizer(spec, raw)
    raise ValueError(f"mode must be 'kernel' or 'stabilizer', not {raw.mode!r}")


def kernel_from_images(spec: FreeProductSpec, degree: int, factors: dict[str, Sequence[str]],
                       free: dict[int, str] | None = None, cap: int = DEFAULT_CAP) -> SubgroupHandle:
    """Convenience wrapper taking images in cycle notation."""
    from .permcore import parse_cycles

    raw = RawAction(degree,
                    {j: parse_cycles(t, degree) for j, t in (free or {}).items()},
                    {name: [parse_cycles(t, degree) for t in ts] for name, ts in factors.items()})
    return from_kernel(spec, raw, cap)


def quotient_graph_of(h: SubgroupHandle) -> coregraph.QuotientGraph:
    return coregraph.build_quotient_graph(h.spec, h.action)


def reduced_rank_of(h: SubgroupHandle) -> int:
    return coregraph.reduced_rank(coregraph.core(quotient_graph_of(h)))


# ---------------------------------------------------------------------------
# Intersections


@dataclass
class OrbitInfo:
    rep_word: Word
    rep_text: str
    size: int
    rbar: int
    smallest_pair: tuple[int, int]
    graph: coregraph.QuotientGraph = field(repr=False)
    core: coregraph.CoreGraph = field(repr=False)


@dataclass
class FiberCheck:
    factor: str
    h_orbit: int
    k_orbit: int
    members: int
    slack: Fraction


@dataclass
class IntersectionReport:
    rbar_h: int
    rbar_k: int
    orbits: list[OrbitInfo]
    total: int
    principal: int
    double_coset_count: int
    bound_rhs: Fraction
    hk_equals_g: bool
    bounds: BoundsReport
    fiber_checks: list[FiberCheck] = field(default_factory=list)
    proposition_holds: bool | None = None

    @property
    def tight(self) -> bool:
        return self.total == self.bound_rhs


def _orbit_coords(action: ActionAssignment, i: int) -> dict[int, tuple[int, int]]:
    """Point -> (orbit id, a) where a is the factor element carrying the orbit's least point to it."""
    coords = {}
    for oid, orb in enumerate(action.factor_orbits(i)):
        base = orb[0]
        for g, img in enumerate(action.factor_maps[i]):
            coords[img(base)] = (oid, g)
    return coords


def bfs_words(action: ActionAssignment, start: int) -> dict[int, Word]:
    """Shortest words (factor generators first, then free letters) from ``start`` to each point."""
    gens = action.generator_perms()
    spec = action.spec
    words = {start: ()}
    queue = deque([start])
    while queue:
        w = queue.popleft()
        for _, word, perm in gens:
            u = perm(w)
            if u not in words:
                words[u] = spec.multiply(words[w], word)
                queue.append(u)
    return words


def intersect_all(h: SubgroupHandle, k: SubgroupHandle, check_fibers: bool = True) -> IntersectionReport:
    if h.spec is not k.spec and h.spec != k.spec:
        raise SpecMismatch("handles belong to different specs")
    spec = h.spec
    bounds = compute_bounds(spec)
    ah, ak = h.action, k.action
    nh, nk = ah.degree, ak.degree
    gens_h = [p.images for _, _, p in ah.generator_perms()]
    gens_k = [p.images for _, _, p in ak.generator_perms()]

    orbit_of: dict[tuple[int, int], int] = {}
    orbit_pairs: list[list[tuple[int, int]]] = []
    for w in range(1, nh + 1):
        for v in range(1, nk + 1):
            if (w, v) in orbit_of:
                continue
            oid = len(orbit_pairs)
            members = [(w, v)]
            orbit_of[(w, v)] = oid
            queue = deque(members)
            while queue:
                a, b = queue.popleft()
                for gh, gk in zip(gens_h, gens_k):
                    pair = (gh[a - 1], gk[b - 1])
                    if pair not in orbit_of:
                        orbit_of[pair] = oid
                        members.append(pair)
                        queue.append(pair)
            orbit_pairs.append(sorted(members))

    words_h = bfs_words(ah, h.basepoint)
    nfac = len(spec.factors)
    coords_h = [_orbit_coords(ah, i) for i in range(nfac)]
    coords_k = [_orbit_coords(ak, i) for i in range(nfac)]
    families: dict[tuple[int, int, int], list[frozenset]] = {}

    orbits = []
    for members in orbit_pairs:
        mset = set(members)
        # representative s: least w with (w, basepoint_K) in this orbit
        w0 = min(w for w, v in members if v == k.basepoint)
        s = words_h[w0]
        factor_orbits = []
        for i in range(nfac):
            maps = list(zip((m.images for m in ah.factor_maps[i]), (m.images for m in ak.factor_maps[i])))
            seen: set = set()
            orbs = []
            for a, b in members:
                if (a, b) in seen:
                    continue
                orb = sorted({(mh[a - 1], mk[b - 1]) for mh, mk in maps})
                seen.update(orb)
                orbs.append(orb)
                if check_fibers:
                    x, _ = coords_h[i][a]
                    y, _ = coords_k[i][b]
                    fam = frozenset((coords_h[i][p][1], coords_k[i][q][1]) for p, q in orb)
                    families.setdefault((i, x, y), []).append(fam)
            factor_orbits.append(orbs)
        free_maps = [{(a, b): (ph.images[a - 1], pk.images[b - 1]) for a, b in members}
                     for ph, pk in zip(ah.free, ak.free)]
        assert all(set(fm.values()) <= mset for fm in free_maps)
        g = coregraph.build_from_maps(members, factor_orbits, free_maps, [f.name for f in spec.factors])
        c = coregraph.core(g)
        orbits.append(OrbitInfo(s, spec.format_word(s), len(members), coregraph.reduced_rank(c),
                                members[0], g, c))

    fiber_checks = []
    for (i, x, y), fam in sorted(families.items()):
        f = spec.factors[i]
        amb = _factor_ambient(f)
        A = amb.set({coords_h[i][p][1] for p in ah.factor_orbits(i)[x]})
        B = amb.set({coords_k[i][q][1] for q in ak.factor_orbits(i)[y]})
        slack = verify_family(A, B, fam, "quotient", bounds.fheight)
        fiber_checks.append(FiberCheck(f.name, x, y, len(fam), slack))

    rh, rk = reduced_rank_of(h), reduced_rank_of(k)
    principal = orbits[orbit_of[(h.basepoint, k.basepoint)]].rbar
    total = sum(o.rbar for o in orbits)
    hk = len(orbits) == 1
    report = IntersectionReport(rh, rk, orbits, total, principal, len(orbits),
                                2 * bounds.fheight * rh * rk, hk, bounds, fiber_checks)
    if hk:
        chi = euler_characteristic(spec)
        report.proposition_holds = Fraction(principal) == Fraction(-1) / chi * rh * rk
    return report


_AMBIENTS: dict[int, TableAmbient] = {}


def _factor_ambient(f) -> TableAmbient:
    key = id(f.table)
    if key not in _AMBIENTS:
        _AMBIENTS[key] = TableAmbient(f.table, f.name)
    return _AMBIENTS[key]


# ---------------------------------------------------------------------------
# Bounds


@dataclass
class BoundCheck:
    name: str
    lhs: int
    rhs: Fraction
    holds: bool
    tight: bool


@dataclass
class BoundsVerdict:
    ok: bool
    checks: list[BoundCheck]


def check_upper_bounds(report: IntersectionReport, bounds: BoundsReport) -> BoundsVerdict:
    prod = report.rbar_h * report.rbar_k
    rhs = [("2*fheight", 2 * bounds.fheight * prod), ("6", Fraction(6 * prod))]
    if bounds.height == INFINITE:
        rhs.append(("2 (height inf)", Fraction(2 * prod)))
    checks = [BoundCheck(name, report.total, r, report.total <= r, report.total == r) for name, r in rhs]
    return BoundsVerdict(all(c.holds for c in checks), checks)


# ---------------------------------------------------------------------------
# Double coset bijection in a finite group


def _subgroup(Q: FiniteGroupTable, gens: Iterable) -> frozenset[int]:
    idx = [g if isinstance(g, int) else Q.index[g] for g in gens]
    mul = Q.mul_table()
    seen = {0}
    queue = deque([0])
    while queue:
        a = queue.popleft()
        for g in idx:
            b = mul[a][g]
            if b not in seen:
                seen.add(b)
                queue.append(b)
    return frozenset(seen)


def verify_coset_bijection(Q: FiniteGroupTable, H_gens: Iterable, K_gens: Iterable,
                           sample: random.Random | int | None = None) -> bool:
    """Check that (H^s n K)g -> (Hsg, Kg) is a bijection onto (H\\Q) x (K\\Q).

    Generators are Q's permutations or element indices. With ``sample`` the
    double coset representatives are drawn at random instead of taken least.
    """
    rng = random.Random(sample) if isinstance(sample, int) else sample
    mul, inv = Q.mul_table(), Q.inverses()
    H, K = _subgroup(Q, H_gens), _subgroup(Q, K_gens)

    def coset(S, g):
        return frozenset(mul[x][g] for x in S)

    covered: set[int] = set()
    reps = []
    for g in range(Q.order):
        if g in covered:
            continue
        dc = {mul[mul[h][g]][k] for h in H for k in K}
        covered |= dc
        reps.append(rng.choice(sorted(dc)) if rng else g)

    domain_size = 0
    image: set = set()
    for s in reps:
        sinv = inv[s]
        L = frozenset(k for k in K if mul[mul[s][k]][sinv] in H)
        done: set[int] = set()
        for g in range(Q.order):
            if g in done:
                continue
            cos = coset(L, g)
            done |= cos
            domain_size += 1
            targets = {(coset(H, mul[s][y]), coset(K, y)) for y in cos}
            if len(targets) != 1:
                return False
            image |= targets
    codomain = len({coset(H, g) for g in range(Q.order)}) * len({coset(K, g) for g in range(Q.order)})
    return len(image) == domain_size == codomain


_RANDOM_GROUPS = ("c2", "c3", "c4", "c6", "c8", "c12", "klein", "s3", "s4", "a4", "d4", "d5", "d6", "d8", "d12",
                  "c24", "d24")


def random_coset_instance(rng: random.Random, max_order: int = 48):
    """A random (Q, H generators, K generators) with |Q| <= max_order, for bijection sweeps."""
    names = [n for n in _RANDOM_GROUPS if named_group(n).order <= max_order]
    Q = named_group(rng.choice(names))
    pick = lambda: [rng.randrange(Q.order) for _ in range(rng.randint(0, 2))]
    return Q, pick(), pick()
