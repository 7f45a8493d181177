"""Explicit pairs of finite-index free subgroups with known rank triples.

Each constructor returns a ``WitnessCase`` holding the two kernel handles and
the expected triple (rbar H, rbar K, rbar(H n K)); ``evaluate`` runs the
intersection and compares.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import islice

from .fpspec import (
    INFINITE,
    FreeProductSpec,
    Word,
    compute_bounds,
    cyclic,
    euler_characteristic,
    klein,
    validate_nondegenerate,
)
from .intersector import (
    IntersectionReport,
    SubgroupHandle,
    bfs_words,
    check_upper_bounds,
    intersect_all,
    kernel_from_images,
    reduced_rank_of,
)
from .permcore import DEFAULT_CAP, Permutation, parse_cycles


class WitnessError(ValueError):
    pass


@dataclass
class WitnessCase:
    name: str
    spec: FreeProductSpec
    H: SubgroupHandle
    K: SubgroupHandle
    expected_triple: tuple[int, int, int]
    expects_hk_equals_g: bool
    source: str

    def ratio(self) -> Fraction:
        a, b, c = self.expected_triple
        return Fraction(c, a * b)


@dataclass
class WitnessResult:
    case: WitnessCase
    triple: tuple[int, int, int]
    report: IntersectionReport
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def evaluate(case: WitnessCase) -> WitnessResult:
    rep = intersect_all(case.H, case.K)
    triple = (rep.rbar_h, rep.rbar_k, rep.principal)
    chi = euler_characteristic(case.spec)
    verdict = check_upper_bounds(rep, rep.bounds)
    checks = {
        "triple": triple == tuple(case.expected_triple),
        "hk_equals_g": rep.hk_equals_g == case.expects_hk_equals_g,
        "euler_H": rep.rbar_h == case.H.index * -chi,
        "euler_K": rep.rbar_k == case.K.index * -chi,
        "upper_bound": verdict.ok,
        "fibers": all(f.slack >= 0 for f in rep.fiber_checks),
    }
    if rep.hk_equals_g:
        checks["proposition"] = bool(rep.proposition_holds)
    return WitnessResult(case, triple, rep, checks)


def _kernel(spec, degree, factors, cap=DEFAULT_CAP):
    return kernel_from_images(spec, degree, factors, cap=cap)


def example_222() -> WitnessCase:
    spec = FreeProductSpec((cyclic("x", 2), cyclic("y", 2), cyclic("z", 2)))
    H = _kernel(spec, 2, {"x": ["(1 2)"], "y": ["(1 2)"], "z": ["(1 2)"]})
    K = _kernel(spec, 4, {"x": ["(1 2)"], "y": ["(3 4)"], "z": ["(1 2)(3 4)"]})
    return WitnessCase("222", spec, H, K, (1, 2, 4), True, "C2*C2*C2 example")


def example_2V() -> WitnessCase:
    # the Klein factor's two generators play the roles of y and z
    spec = FreeProductSpec((cyclic("x", 2), klein("V")))
    H = _kernel(spec, 4, {"x": ["(1 2)(3 4)"], "V": ["(1 2)", "(3 4)"]})
    K = _kernel(spec, 4, {"x": ["(1 3)"], "V": ["(1 2)", "(3 4)"]})
    return WitnessCase("2V", spec, H, K, (1, 6, 24), True, "C2*V example")


def _is_odd_prime(p: int) -> bool:
    return p > 2 and p % 2 == 1 and all(p % d for d in range(3, int(p ** 0.5) + 1, 2))


def _cycle(points) -> str:
    return "(" + " ".join(map(str, points)) + ")"


def _projective_line_images(p: int) -> tuple[str, str]:
    """t -> -1/t and t -> t+1 on F_p u {inf}; point k+1 stands for k in F_p, point p+1 for inf."""
    inf = p

    def s(t):
        if t == inf:
            return 0
        if t == 0:
            return inf
        return (-pow(t, -1, p)) % p

    def u(t):
        return inf if t == inf else (t + 1) % p

    def as_text(f):
        perm = Permutation(tuple(f(t) + 1 for t in range(p + 1)))
        return str(perm)

    return as_text(s), as_text(u)


def _main_2p_images(p: int) -> tuple[str, str]:
    x = f"(1 {p + 1})(2 3)"
    y = _cycle(range(1, p + 1)) + _cycle(range(p + 1, 2 * p + 1))
    return x, y


def _formula_triple(p: int) -> tuple[int, int, int]:
    a = p - 2
    b = (p * p - 1) * (p - 2) // 4
    return a, b, 2 * p * b


def example_2p(p: int, variant: str = "main", cap: int = DEFAULT_CAP) -> WitnessCase:
    """C2 * C_p (p = 4 or an odd prime) with H and K as in the construction.

    ``variant`` selects K: "main" (degree 2p), "alt" (degree 4 for p = 4,
    the projective line for p >= 5) or "psl2" (p = 3 only: the level 2 and
    level 3 congruence kernels).
    """
    if not (p == 4 or _is_odd_prime(p)):
        raise WitnessError(f"p must be 4 or an odd prime, got {p}")
    if variant not in ("main", "alt", "psl2"):
        raise WitnessError(f"unknown variant {variant!r}")
    if variant == "alt" and p < 4:
        raise WitnessError("variant 'alt' needs p >= 4")
    if variant == "psl2":
        if p != 3:
            raise WitnessError("variant 'psl2' is only defined for p = 3")
        case = example_psl2_pair()
        case.name = "2p"
        return case
    spec = FreeProductSpec((cyclic("x", 2), cyclic("y", p)))
    q = 2 if p == 4 else p
    hx = "(1 3)(2 4)" if p == 4 else f"({p + 1} {p + 2})"
    H = _kernel(spec, q + 2, {"x": [hx], "y": [_cycle(range(1, p + 1))]})
    if variant == "alt":
        kx, ky = ("(1 2)", "(1 2 3 4)") if p == 4 else _projective_line_images(p)
        K = _kernel(spec, 4 if p == 4 else p + 1, {"x": [kx], "y": [ky]}, cap)
    else:
        kx, ky = _main_2p_images(p)
        K = _kernel(spec, 2 * p, {"x": [kx], "y": [ky]}, cap)
    if p == 4 and variant == "alt":
        expected = (1, 6, 24)
    elif p >= 5:
        expected = _formula_triple(p)
    else:
        # main K at p = 3 or 4: no printed value; derive from the image orders
        chi = euler_characteristic(spec)
        rh, rk = int(H.index * -chi), int(K.index * -chi)
        expected = (rh, rk, int(Fraction(-1) / chi * rh * rk))
    return WitnessCase("2p", spec, H, K, expected, True, f"C2*C{p} example, {variant} K")


def example_pp(p: int) -> WitnessCase:
    if not _is_odd_prime(p):
        raise WitnessError(f"p must be an odd prime, got {p}")
    spec = FreeProductSpec((cyclic("x", p), cyclic("y", p)))
    up, down = _cycle(range(1, p + 1)), _cycle(range(p, 0, -1))
    H = _kernel(spec, p, {"x": [up], "y": [up]})
    K = _kernel(spec, p, {"x": [up], "y": [down]})
    return WitnessCase("pp", spec, H, K, (p - 2, p - 2, p * (p - 2)), True, f"C{p}*C{p} example")


_GAMMA2 = {"x": ["(1 2)"], "y": ["(1 2 3)"]}
_GAMMA3 = {"x": ["(1 2)(3 4)"], "y": ["(1 2 3)"]}
_GAMMA6 = {"x": ["(1 2)(4 5)(6 7)"], "y": ["(1 2 3)(4 5 6)"]}


def _modular_spec() -> FreeProductSpec:
    return FreeProductSpec((cyclic("x", 2), cyclic("y", 3)))


def example_psl2_pair() -> WitnessCase:
    spec = _modular_spec()
    H = _kernel(spec, 3, _GAMMA2)
    K = _kernel(spec, 4, _GAMMA3)
    return WitnessCase("psl2", spec, H, K, (1, 2, 12), True, "C2*C3, level 2 and level 3 kernels")


@dataclass
class PSL2Facts:
    orders: tuple[int, int, int]
    rbars: tuple[int, int, int]
    ranks: tuple[int, int, int]
    relations: dict[str, bool]
    kernel_equality: bool


def psl2_facts() -> PSL2Facts:
    spec = _modular_spec()
    g2, g3, g6 = (_kernel(spec, n, imgs) for n, imgs in ((3, _GAMMA2), (4, _GAMMA3), (7, _GAMMA6)))
    orders = (g2.image.order, g3.image.order, g6.image.order)
    rbars = tuple(reduced_rank_of(h) for h in (g2, g3, g6))

    def xy_order(n, imgs):
        return (parse_cycles(imgs["x"][0], n) * parse_cycles(imgs["y"][0], n)).order()

    relations = {"(xy)^2 in level 2": xy_order(3, _GAMMA2) == 2, "(xy)^3 in level 3": xy_order(4, _GAMMA3) == 3}
    rep = intersect_all(g2, g3)
    kernel_equality = (rep.double_coset_count == 1 and rep.principal == rbars[2]
                       and _pair_action_matches(g2, g3, g6))
    return PSL2Facts(orders, rbars, tuple(r + 1 for r in rbars), relations, kernel_equality)


def _pair_action_matches(h: SubgroupHandle, k: SubgroupHandle, hk: SubgroupHandle) -> bool:
    """True when hk's action is G-isomorphic to the product action on the basepoint pair's orbit.

    The map sends each point u (reached from hk's basepoint by a word w)
    to (basepoint_H . w, basepoint_K . w); a bijective equivariant map means
    the point stabilizers agree, i.e. hk's subgroup is H n K.
    """
    words = bfs_words(hk.action, hk.basepoint)
    phi = {u: (h.action.apply_word(h.basepoint, w), k.action.apply_word(k.basepoint, w))
           for u, w in words.items()}
    if len(words) != hk.index or len(set(phi.values())) != len(phi):
        return False
    for (_, _, pg), (_, _, ph), (_, _, pk) in zip(hk.action.generator_perms(), h.action.generator_perms(),
                                                  k.action.generator_perms()):
        for u, (a, b) in phi.items():
            if phi[pg(u)] != (ph(a), pk(b)):
                return False
    return True


# ---------------------------------------------------------------------------
# Lower bound witnesses


@dataclass
class LowerBoundWitness:
    case_label: str
    witness: WitnessCase
    embedding: dict[str, Word]
    ratio: Fraction


def _complement_elements(spec: FreeProductSpec, j: int, count: int) -> list[Word]:
    """The first ``count`` distinct elements of G_{not j}, by word length, as words of G."""
    letters = []
    for i, f in enumerate(spec.factors):
        if i != j:
            letters.extend(spec.factor_letter(i, g) for g in range(1, f.order))
    for k in range(spec.free_rank):
        letters.extend((spec.free_letter(k, 1), spec.free_letter(k, -1)))

    def gen():
        seen = {()}
        frontier = [()]
        yield ()
        while frontier:
            nxt = []
            for w in frontier:
                for a in letters:
                    u = spec.multiply(w, a)
                    if u not in seen:
                        seen.add(u)
                        nxt.append(u)
                        yield u
            frontier = nxt

    return list(islice(gen(), count))


def _complement_size(spec: FreeProductSpec, j: int) -> int | float:
    rest = [f.order for i, f in enumerate(spec.factors) if i != j]
    if spec.free_rank or len(rest) >= 2:
        return INFINITE
    return rest[0] if rest else 1


def lower_bound_witness(spec: FreeProductSpec) -> LowerBoundWitness:
    ok, why = validate_nondegenerate(spec)
    if not ok:
        raise WitnessError(f"degenerate spec: {why}")
    b = compute_bounds(spec)
    p = b.height
    if b.depth == 2:
        j = next(i for i, f in enumerate(spec.factors)
                 if f.order % 2 == 0 and _complement_size(spec, i) >= 3)
        elts = _complement_elements(spec, j, 3)
        emb = dict(zip("abc", elts))
        if p == INFINITE:
            label, w = "depth 2, height inf", example_222()
        elif p == 4:
            has_c4 = any(o % 4 == 0 for f in spec.factors for o in f.table.element_orders())
            label = "depth 2, p=4"
            w = example_2p(4, "alt") if has_c4 else example_2V()
        else:
            label = f"depth 2, p={p}"
            w = example_2p(p, "psl2" if p == 3 else "alt")
    else:
        if p == INFINITE:
            sub = FreeProductSpec((), 2)
            H = kernel_from_images(sub, 2, {}, {1: "(1 2)", 2: "()"})
            K = kernel_from_images(sub, 2, {}, {1: "()", 2: "(1 2)"})
            w = WitnessCase("free2", sub, H, K, (2, 2, 4), True, "rank 2 free subgroup")
            return LowerBoundWitness("depth 1, height inf", w,
                                     {"x1": spec.free_letter(0), "x2": spec.free_letter(1)}, w.ratio())
        j = next(i for i, f in enumerate(spec.factors) if any(o % p == 0 for o in f.table.element_orders()))
        elts = _complement_elements(spec, j, 2)
        emb = dict(zip("ab", elts))
        label, w = f"depth 1, p={p}", example_pp(p)
    return LowerBoundWitness(label, w, emb, w.ratio())

