import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrna_coopt.energy import load_energy_params
from mrna_coopt.seq_core import PairSet
from mrna_coopt.structure import (
    Quartet, build_model, build_universe, decode, default_penalty, enumerate_quartets, format_qubo,
    parse_qubo, quartets_conflict, stacking_partners, to_penalty_qubo, ua_terminal_set, valid_pair,
)

PARAMS = load_energy_params()
rna = st.text(alphabet="ACGU", min_size=4, max_size=20)


def q(i, j, seq="G" * 40):
    outer, inner = seq[i - 1] + seq[j - 1], seq[i] + seq[j - 2]
    return Quartet(i, j, outer, inner, 0.0)


def all_bits(n):
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int8).reshape(2 ** n, n)


@pytest.mark.parametrize("a, b, ok", [("G", "U", True), ("A", "C", False), ("A", "A", False),
                                      ("C", "G", True), ("U", "A", True)])
def test_valid_pair(a, b, ok):
    assert valid_pair(a, b) is ok


def test_enumerate_ggg():
    keys = [x.key for x in enumerate_quartets("GGGAAACCC", params=PARAMS)]
    assert keys == [(1, 9, 2, 8), (2, 8, 3, 7)]


def test_enumerate_no_pairs():
    assert enumerate_quartets("AAAAAAAAA", params=PARAMS) == []


@pytest.mark.parametrize("seq, top", [("ACUCUGCCGAAGGCAGAC", 7), ("ACUCUGCCUAAGGCGGAC", 7),
                                      ("AUCAUGCAGUGGAUCGGCUGCUAC", 22)])
def test_counts_within_qubit_budget(seq, top):
    assert len(enumerate_quartets(seq, params=PARAMS)) <= top


def test_min_stem_two_keeps_isolated_stacks():
    assert len(enumerate_quartets("ACUCUGCCGAAGGCAGAC", params=PARAMS, min_stem=2)) >= \
        len(enumerate_quartets("ACUCUGCCGAAGGCAGAC", params=PARAMS))


@given(rna, st.integers(2, 4))
def test_enumerated_quartets_are_valid(seq, min_stem):
    for x in enumerate_quartets(seq, params=PARAMS, min_stem=min_stem):
        assert valid_pair(seq[x.i - 1], seq[x.j - 1]) and valid_pair(seq[x.i], seq[x.j - 2])
        assert x.j - x.i >= 6
        assert x.energy == PARAMS.stack_energy(x.outer, x.inner)


def test_conflict_examples():
    assert not quartets_conflict(q(1, 9), q(2, 8))
    assert quartets_conflict(q(1, 8), q(4, 12))  # 1 < 4 < 8 < 12
    assert quartets_conflict(q(5, 12), q(5, 14))  # base 5 with two partners


def test_stacking_partners():
    qs = enumerate_quartets("GGGAAACCC", params=PARAMS)
    assert stacking_partners(qs[0], qs) == {1}
    assert stacking_partners(qs[1], qs) == set()
    assert stacking_partners(qs[0], qs[:1]) == set()


def test_ua_terminal():
    qs = enumerate_quartets("UGGAAACCA", params=PARAMS, min_stem=2)
    first = [k for k, x in enumerate(qs) if x.key == (1, 9, 2, 8)]
    assert first and first[0] in ua_terminal_set(qs)
    gc = enumerate_quartets("GGGAAACCC", params=PARAMS)
    assert ua_terminal_set(gc) == set()
    with pytest.raises(ValueError):
        ua_terminal_set(gc, "sometimes")


def test_model_ggg():
    m = build_model("GGGAAACCC", PARAMS)
    assert m.num_vars == 2 and len(m.quadratic) == 1 and m.constraints == ()
    assert m.universe.ua_terminal == frozenset()


def test_model_empty():
    m = build_model("AAAAAAAAA", PARAMS)
    assert m.num_vars == 0
    qubo = to_penalty_qubo(m)
    assert qubo.energy("") == 0.0


@settings(max_examples=40, deadline=None)
@given(rna)
def test_universe_invariants(seq):
    u = build_universe(seq, PARAMS, min_stem=2)
    for a, b in u.conflicts:
        assert a < b
    stack_edges = {(min(a, b), max(a, b)) for a, nb in u.stacks.items() for b in nb}
    assert not (stack_edges & u.conflicts)
    for a, nb in u.stacks.items():
        for b in nb:
            qa, qb = u.quartets[a], u.quartets[b]
            assert (qb.i, qb.j) == (qa.i + 1, qa.j - 1)
    m = build_model(seq, PARAMS, min_stem=2)
    assert len(m.constraints) == len(u.conflicts)
    assert all(a != b for a, b in m.quadratic)


@settings(max_examples=40, deadline=None)
@given(rna, st.floats(-3, 0), st.floats(0, 2), st.sampled_from(["outer", "outer_or_inner"]))
def test_coefficients_reproduce_direct_objective(seq, r, p, rule):
    m = build_model(seq, PARAMS, stack_reward=r, ua_penalty=p, min_stem=2, ua_rule=rule)
    if m.num_vars > 12:
        return
    for bits in all_bits(m.num_vars):
        assert m.coefficient_energy(bits) == pytest.approx(m.objective(bits), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(rna)
def test_penalty_qubo_matches_model_on_feasible(seq):
    m = build_model(seq, PARAMS, min_stem=2)
    if m.num_vars > 12:
        return
    qubo = to_penalty_qubo(m)
    states = all_bits(m.num_vars)
    energies = qubo.energies(states)
    feasible = qubo.feasible_mask(states)
    for bits, e, ok in zip(states, energies, feasible):
        assert ok == m.is_feasible(bits)
        if ok:
            assert e == pytest.approx(m.objective(bits), abs=1e-9)
    if (~feasible).any():
        assert energies[~feasible].min() > energies[feasible].min()


def test_no_conflicts_means_qubo_is_model():
    m = build_model("GGGAAACCC", PARAMS)
    qubo = to_penalty_qubo(m)
    assert qubo.quadratic == m.quadratic
    np.testing.assert_array_equal(qubo.linear, m.linear)


def test_penalty_must_be_positive():
    m = build_model("GGGAAACCC", PARAMS)
    with pytest.raises(ValueError):
        to_penalty_qubo(m, penalty=0.0)
    assert default_penalty(m) > 1


def test_batch_energy_matches_scalar():
    rng = random.Random(5)
    seq = "".join(rng.choice("ACGU") for _ in range(30))
    qubo = to_penalty_qubo(build_model(seq, PARAMS, min_stem=2))
    states = np.array([[rng.randint(0, 1) for _ in range(qubo.num_vars)] for _ in range(50)])
    np.testing.assert_allclose(qubo.energies(states), [qubo.energy(s) for s in states])


def test_decode_examples():
    u = build_universe("GGGAAACCC", PARAMS)
    d = decode("11", u)
    assert d.feasible and set(d.pairs) == {(1, 9), (2, 8), (3, 7)} and d.dot_bracket == "(((...)))"
    empty = decode("00", u)
    assert empty.feasible and len(empty.pairs) == 0


def test_decode_reports_violation():
    seq = "GGGGAAACCCCAAAAGGGG"
    u = build_universe(seq, PARAMS, min_stem=2)
    bad = next((a, b) for a, b in u.conflicts)
    bits = ["0"] * len(u)
    bits[bad[0]] = bits[bad[1]] = "1"
    d = decode("".join(bits), u)
    assert not d.feasible and bad in d.violations


@settings(max_examples=40, deadline=None)
@given(rna, st.data())
def test_decode_feasible_selection_is_matching(seq, data):
    u = build_universe(seq, PARAMS, min_stem=2)
    chosen = []
    for k in data.draw(st.permutations(range(len(u)))):
        if all(not u.conflicting(k, c) for c in chosen):
            chosen.append(k)
    bits = "".join("1" if k in chosen else "0" for k in range(len(u)))
    d = decode(bits, u)
    assert d.feasible and isinstance(d.pairs, PairSet)


def test_qubo_text_roundtrip():
    m = build_model("GGGGAAACCCCAAAAGGGGAAAUCCCC", PARAMS)
    qubo = to_penalty_qubo(m)
    back = parse_qubo(format_qubo(qubo))
    states = all_bits(min(qubo.num_vars, 10))
    if qubo.num_vars <= 10:
        np.testing.assert_allclose(back.energies(states), qubo.energies(states))
    assert format_qubo(back) == format_qubo(qubo)


def test_export_header():
    assert format_qubo(to_penalty_qubo(build_model("GGGAAACCC", PARAMS))).startswith("vars 2 ")
