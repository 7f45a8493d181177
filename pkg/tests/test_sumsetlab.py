import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from freeinter.fpspec import f_of, parse_spec
from freeinter.permcore import closure, named_group
from freeinter.sumsetlab import (
    AmbientMismatch,
    DescentError,
    FamilyPreconditionError,
    PreconditionError,
    SweepTooLarge,
    TableAmbient,
    WordAmbient,
    blocks_count,
    descent_chain,
    first_common_selector,
    indicator_compare,
    is_sound,
    kemperman_transform,
    pair_state,
    rep_set,
    sweep_all_pairs,
    transform_violations,
    verify_deficiency_bound,
    verify_family,
    verify_key_inequality,
)

TABLES = {name: named_group(name) for name in ("c5", "c6", "c7", "c12", "s3", "s4", "klein", "a4", "d4")}
AMBIENTS = {name: TableAmbient(t, name) for name, t in TABLES.items()}
C6, C5 = AMBIENTS["c6"], AMBIENTS["c5"]


def S(amb, items):
    return amb.set(items)


# --- oracles ---------------------------------------------------------------


def oracle_stats(amb, A, B):
    """|AB|, |A.2B| by counting every product."""
    counts = {}
    for a in A:
        for b in B:
            x = amb.mul(a, b)
            counts[x] = counts.get(x, 0) + 1
    return len(counts), sum(1 for c in counts.values() if c >= 2)


def oracle_blocks(table, C):
    """Count cosets gP inside C over every subgroup P of order 4 or an odd prime (2-generated closures)."""
    els = table.elements
    subgroups = set()
    for a, b in itertools.combinations_with_replacement(range(table.order), 2):
        sub = closure([els[a], els[b]], degree=table.degree)
        n = sub.order
        if n == 4 or (n > 2 and n % 2 and all(n % d for d in range(3, n))):
            subgroups.add(frozenset(table.index[p] for p in sub.elements))
    mul = table.mul_table()
    cosets = {frozenset(mul[g][h] for h in P) for P in subgroups for g in range(table.order)}
    return sum(1 for c in cosets if c <= set(C))


# --- pair statistics -------------------------------------------------------


def test_pair_state_c6_small():
    st_ = pair_state(S(C6, [0, 1]), S(C6, [0, 1]))
    assert set(st_.product) == {0, 1, 2} and set(st_.doubly) == {1}
    assert st_.omega == -4
    assert set(st_.product_AB) == {0, 1, 2} and set(st_.singly_represented) == {0, 2}


def test_pair_state_whole_c5():
    A = S(C5, range(5))
    st_ = pair_state(A, A)
    assert len(st_.product) == len(st_.doubly) == 5 and st_.omega == -10


def test_pair_state_singletons():
    st_ = pair_state(S(C6, [2]), S(C6, [3]))
    assert set(st_.product) == {5} and not st_.doubly and st_.omega == -3


def test_rep_set():
    A = S(C6, [0, 1])
    assert rep_set(1, A, A) == {(0, 1), (1, 0)}
    assert rep_set(5, A, A) == set()
    C3 = S(AMBIENTS["c6"], [0, 2, 4])
    assert all(len(rep_set(x, C3, C3)) == 3 for x in (0, 2, 4))


def test_ambient_mismatch():
    with pytest.raises(AmbientMismatch):
        pair_state(S(C6, [0]), S(C5, [0]))


@given(st.sampled_from(sorted(TABLES)), st.data())
def test_pair_state_matches_oracle(name, data):
    amb, n = AMBIENTS[name], TABLES[name].order
    A = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
    B = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
    st_ = pair_state(S(amb, A), S(amb, B))
    assert (len(st_.product), len(st_.doubly)) == oracle_stats(amb, A, B)
    assert st_.product == st_.doubly | st_.singly and not (st_.doubly & st_.singly)
    assert sum(len(rep_set(x, st_.A, st_.B)) for x in st_.product) == len(A) * len(B)


# --- blocks and soundness --------------------------------------------------


def test_blocks_examples():
    assert blocks_count(S(C5, range(5))) == 1
    assert blocks_count(S(C6, [0, 1, 2])) == 0
    assert blocks_count(S(C6, [0, 2, 4])) == 1
    assert blocks_count(S(C6, [])) == 0


@settings(max_examples=150)
@given(st.sampled_from(["c6", "s3", "klein", "d4", "c12", "a4", "s4"]), st.data())
def test_blocks_match_global_enumeration(name, data):
    table = TABLES[name]
    C = data.draw(st.sets(st.integers(0, table.order - 1)))
    assert blocks_count(S(AMBIENTS[name], C)) == oracle_blocks(table, C)


def test_blocks_in_words():
    spec = parse_spec("factor x cyclic 2\nfactor y cyclic 3")
    amb = WordAmbient(spec)
    x, y = spec.factor_letter(0, 1), spec.factor_letter(1, 1)
    ys = [(), y, spec.power(y, 2)]
    assert blocks_count(amb.set(ys)) == 1
    # xy has infinite order and is skipped, never an error
    xy = spec.multiply(x, y)
    assert blocks_count(amb.set([(), xy, spec.power(xy, 2)])) == 0
    # a conjugate coset x{1, y, y^2}
    assert blocks_count(amb.set([spec.multiply(x, w) for w in ys])) == 1


def test_is_sound_examples():
    ok, why = is_sound(S(C6, [0, 1]), S(C6, [0, 1]))
    assert ok and "omega" in why
    A = S(C5, range(5))
    ok, why = is_sound(A, A)
    assert ok and "A.2B" in why
    with pytest.raises(PreconditionError):
        is_sound(S(C6, [0]), S(C6, [0, 1]))


# --- inequalities ----------------------------------------------------------


def test_key_inequality_examples():
    assert verify_key_inequality(S(C6, [0, 1]), S(C6, [0, 1]), 3) == 0
    A = S(C5, range(5))
    assert verify_key_inequality(A, A, 5) == 0


def test_deficiency_examples():
    A = S(C5, range(5))
    assert verify_deficiency_bound(A, A, Fraction(5, 3)) == 0
    T = S(C6, [0, 1, 2])
    assert verify_deficiency_bound(T, T, f_of(3)) == 3 - 1


@given(st.sampled_from(sorted(TABLES)), st.data())
def test_deficiency_lower_bound(name, data):
    amb, n = AMBIENTS[name], TABLES[name].order
    A = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
    B = data.draw(st.sets(st.integers(0, n - 1), min_size=2))
    s1, s2 = oracle_stats(amb, A, B)
    assert s1 + s2 >= 2 * len(A)
    if len(B) == 2:
        assert s1 + s2 == 2 * len(A) + 2 * len(B) - 4


@given(st.sampled_from(sorted(TABLES)), st.data())
def test_duality(name, data):
    amb, n = AMBIENTS[name], TABLES[name].order
    A = data.draw(st.sets(st.integers(0, n - 1), min_size=2))
    B = data.draw(st.sets(st.integers(0, n - 1), min_size=2))
    p = pair_state(S(amb, A), S(amb, B))
    q = pair_state(S(amb, {amb.inv(b) for b in B}), S(amb, {amb.inv(a) for a in A}))
    assert (len(p.product), len(p.doubly), p.omega) == (len(q.product), len(q.doubly), q.omega)
    assert blocks_count(p.product_AB) == blocks_count(q.product_AB)
    assert blocks_count(p.doubly_represented) == blocks_count(q.doubly_represented)
    assert is_sound(p.A, p.B)[0] == is_sound(q.A, q.B)[0]


# --- families --------------------------------------------------------------


def test_family_diagonal():
    T = S(C6, [0, 2, 4])
    slack = verify_family(T, T, [{(0, 0), (2, 2), (4, 4)}], "quotient", f_of(3))
    assert slack == 3 - 1


def test_family_subgroup_partition():
    # A = B = L, family {{(xy, y) : y in L} : x in L}
    for name, L in (("c5", range(5)), ("c6", [0, 2, 4]), ("klein", range(4))):
        amb = AMBIENTS[name]
        fam = [{(amb.mul(x, y), y) for y in L} for x in L]
        n = len(L)
        for fh in (f_of(n), f_of(3)):
            slack = verify_family(S(amb, L), S(amb, L), fam, "quotient", fh)
            assert slack == (fh - Fraction(n, n - 2)) * (n - 2) ** 2
            assert slack >= 0


def test_family_empty():
    A = S(C6, [0, 1, 2])
    assert verify_family(A, A, [], "product", Fraction(3)) == 3


def test_family_violations_reported():
    A = S(C6, [0, 1, 2])
    with pytest.raises(FamilyPreconditionError) as ei:
        verify_family(A, A, [{(0, 0), (1, 0)}, {(1, 0), (2, 2)}], "quotient", 3)
    kinds = {v["kind"] for v in ei.value.violations}
    assert "overlap" in kinds and "not single-quotient" in kinds
    with pytest.raises(FamilyPreconditionError):
        verify_family(A, A, [{(0, 5)}], "product", 3)


# --- transform -------------------------------------------------------------


def oracle_transform_sets(amb, A, B, x):
    return ({amb.mul(a, x) for a in A} | set(A), {b for b in B if amb.mul(x, b) in B},
            {a for a in A if amb.mul(a, x) in A}, set(B) | {amb.mul(x, b) for b in B})


def test_transform_c6_example():
    A, B = S(C6, [0, 1, 2]), S(C6, [0, 1, 3])
    rep = kemperman_transform(A, B, 1)
    ap, bm, am, bp = oracle_transform_sets(C6, A, B, 1)
    assert (set(rep.A_plus), set(rep.B_minus), set(rep.A_minus), set(rep.B_plus)) == (ap, bm, am, bp)
    assert rep.delta_plus["A"] + rep.delta_minus["A"] == 0
    for d, (a2, b2) in ((rep.delta_plus, (ap, bm)), (rep.delta_minus, (am, bp))):
        s1, s2 = oracle_stats(C6, a2, b2)
        t1, t2 = oracle_stats(C6, A, B)
        assert d == {"A": len(a2) - 3, "B": len(b2) - 3, "dot1": s1 - t1, "dot2": s2 - t2,
                     "omega": (s1 + s2 - 2 * len(a2) - 2 * len(b2)) - (t1 + t2 - 12)}
    assert rep.case_taken in (1, 2, 3, 4)
    assert not transform_violations(A, B, 1)


def test_transform_stationary():
    A, B = S(C6, [0, 3]), S(C6, [0, 1])
    rep = kemperman_transform(A, B, 3)
    assert rep.chosen == "stationary" and rep.case_taken == 0
    assert rep.result.A == A and rep.result.B == B
    assert kemperman_transform(A, B, 0).chosen == "stationary"


def test_transform_c6_omega_minus4_case():
    A = S(C6, [0, 1])
    rep = kemperman_transform(A, A, 1)
    assert rep.base.omega == -4
    assert rep.result.indicator < rep.base.indicator


@settings(max_examples=300)
@given(st.sampled_from(["c6", "c12", "s3", "s4", "a4", "d4", "klein", "c7"]), st.data())
def test_transform_properties(name, data):
    amb, n = AMBIENTS.get(name) or TableAmbient(named_group(name)), TABLES[name].order
    A = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
    B = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
    x = data.draw(st.integers(0, n - 1))
    assert transform_violations(S(amb, A), S(amb, B), x) == []


def test_transform_properties_words():
    spec = parse_spec("factor x cyclic 2\nfactor y cyclic 3")
    amb = WordAmbient(spec)
    ball = _word_ball(spec, 3)
    rng = random.Random(5)
    for _ in range(300):
        A = amb.set(rng.sample(ball, rng.randint(1, 6)))
        B = amb.set(rng.sample(ball, rng.randint(1, 6)))
        x = rng.choice(ball)
        assert transform_violations(A, B, x) == []


def _word_ball(spec, radius):
    letters = [spec.factor_letter(i, g) for i, f in enumerate(spec.factors) for g in range(1, f.order)]
    ball, frontier = {()}, [()]
    for _ in range(radius):
        frontier = [spec.multiply(w, a) for w in frontier for a in letters]
        ball.update(frontier)
    return sorted(ball, key=lambda w: (len(w), w))


# --- indicator and descent -------------------------------------------------


def test_indicator_compare():
    assert indicator_compare((3, -4, 2, 2), (3, -4, 2, 3)) == -1
    assert indicator_compare((3, -4, 2, 2), (3, -4, 2, 2)) == 0
    assert indicator_compare((2, -4, 2, 2), (3, -10, 5, 5)) == -1


def test_descent_chain_c6():
    A = S(C6, [0, 1, 2, 3])
    trace = descent_chain(A, A, first_common_selector)
    assert len(trace) >= 2
    for a, b in zip(trace, trace[1:]):
        assert indicator_compare(b, a) == -1


def test_descent_stop_immediately():
    A = S(C6, [0, 1])
    assert len(descent_chain(A, A, lambda A, B: None)) == 1


def test_descent_bad_selector():
    A = S(C6, [0, 3])
    with pytest.raises(DescentError):
        descent_chain(A, A, lambda A, B: 3)


@settings(max_examples=100)
@given(st.sampled_from(["c12", "s4", "d4"]), st.data())
def test_descent_terminates(name, data):
    amb, n = AMBIENTS[name], TABLES[name].order
    A = data.draw(st.sets(st.integers(0, n - 1), min_size=2))
    B = data.draw(st.sets(st.integers(0, n - 1), min_size=2))
    trace = descent_chain(S(amb, A), S(amb, B))
    assert all(b.indicator < a.indicator for a, b in zip(trace, trace[1:]))


# --- sweeps ----------------------------------------------------------------


def test_sweep_examples():
    assert sweep_all_pairs(TABLES["c6"], "key").violations == []
    assert sweep_all_pairs(TABLES["s3"], "sound").violations == []
    assert sweep_all_pairs(TABLES["c5"], "deficiency", fheight=Fraction(5, 3)).violations == []
    r = sweep_all_pairs(TABLES["c7"], "sound")
    assert r.violations == [] and r.pairs_checked == (2 ** 7 - 8) ** 2


def test_sweep_transform_small_exhaustive():
    r = sweep_all_pairs(TABLES["klein"], "transform", min_size=1)
    assert r.violations == [] and r.pairs_checked == 15 * 15 * 4


def test_sweep_guard():
    with pytest.raises(SweepTooLarge):
        sweep_all_pairs(named_group("s4"), "key")
    assert sweep_all_pairs(named_group("s4"), "key", samples=200).violations == []


def test_sweep_unknown_check():
    with pytest.raises(ValueError):
        sweep_all_pairs(TABLES["c5"], "nope")


def test_sweep_workers_agree():
    a = sweep_all_pairs(TABLES["c6"], "sound", workers=1)
    b = sweep_all_pairs(TABLES["c6"], "sound", workers=2)
    assert (a.pairs_checked, a.violations, a.discoveries) == (b.pairs_checked, b.violations, b.discoveries)


def test_mask_path_matches_generic():
    """The bitmask sweep must flag exactly the pairs the set-based checks flag, with a tightened bound."""
    table = TABLES["c6"]
    amb = AMBIENTS["c6"]
    # with fheight 1 (smaller than the true f(3) = 3) some pairs fail; both paths must agree
    r = sweep_all_pairs(table, "deficiency", fheight=Fraction(1))
    masks = {(a, b) for a, b, _ in r.violations}
    expected = set()
    for ma in range(1, 64):
        for mb in range(1, 64):
            if bin(ma).count("1") < 2 or bin(mb).count("1") < 2:
                continue
            A = S(amb, [g for g in range(6) if ma >> g & 1])
            B = S(amb, [g for g in range(6) if mb >> g & 1])
            if verify_deficiency_bound(A, B, Fraction(1)) < 0:
                expected.add((ma, mb))
    assert masks == expected and masks
