import csv
import itertools
import math
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrna_coopt.codon import (
    CodonTableError, Theta, build_codon_table, build_problem, cai, gc_count, load_codon_table,
    objective_value, parse_codon_table, rarity, repeat_score, solve_codon, solve_codon_brute_force,
)
from mrna_coopt.seq_core import AMINO_ACIDS, parse_nucleotide_sequence, translate

TABLE = load_codon_table()


def _raw_frequencies():
    text = resources.files("mrna_coopt.data").joinpath("h_sapiens_9606.csv").read_text()
    rows = csv.reader(line for line in text.splitlines() if line and not line.startswith("#"))
    return {codon: (aa, float(f)) for aa, codon, f in rows}


def _reference_cai(seq):
    freqs = _raw_frequencies()
    best = {}
    for aa, f in freqs.values():
        best[aa] = max(best.get(aa, 0.0), f)
    codons = [seq[k:k + 3] for k in range(0, len(seq), 3)]
    weights = [freqs[c][1] / best[freqs[c][0]] for c in codons]
    return math.prod(weights) ** (1 / len(weights))


def test_bundled_table_covers_all_amino_acids():
    assert set(TABLE.entries) == set(AMINO_ACIDS)
    assert len(TABLE.codons("L")) == 6
    assert sum(len(v) for v in TABLE.entries.values()) == 61


def test_table_invariants():
    for aa, usages in TABLE.entries.items():
        assert 1 <= len(usages) <= 6
        assert abs(sum(u.frequency for u in usages) - 1) <= 0.02
        assert sum(u.weight == 1.0 for u in usages) == 1, aa
        for u in usages:
            assert u.gc == sum(b in "GC" for b in u.codon)
            assert translate(parse_nucleotide_sequence(u.codon)).residues == aa


def test_single_codon_amino_acid():
    met = TABLE.usage("AUG")
    assert met.weight == 1.0 and met.rarity == 0.0


@pytest.mark.parametrize("row", ["M,AUGX,1.0", "M,AUG,abc", "M,AUG", "M,GCU,1.0", "M,AUG,0"])
def test_malformed_rows_rejected(row):
    with pytest.raises(CodonTableError):
        parse_codon_table(row)


def test_bad_frequency_sum_rejected():
    with pytest.raises(CodonTableError, match="sum"):
        build_codon_table([("K", "AAA", 0.5), ("K", "AAG", 0.3)], require_all=False)


def test_missing_amino_acid_rejected():
    with pytest.raises(CodonTableError, match="missing"):
        build_codon_table([("M", "AUG", 1.0)])


def test_table_accepts_dna_codons_and_skips_stops(tmp_path):
    raw = _raw_frequencies()
    lines = [f"{aa},{codon.replace('U', 'T')},{f}" for codon, (aa, f) in raw.items()]
    lines.append("*,TAA,0.3")
    path = tmp_path / "t.csv"
    path.write_text("\n".join(lines))
    assert load_codon_table(path).usage("CUG").frequency == pytest.approx(0.40)


@pytest.mark.parametrize("codon, gc", [("GCG", 3), ("AUA", 0), ("GAC", 2)])
def test_gc_count(codon, gc):
    assert gc_count(codon) == gc


def test_rarity_values():
    single = build_codon_table([("K", "AAA", 0.5), ("K", "AAG", 0.5)], require_all=False)
    assert rarity("AAA", single) == pytest.approx(0.6931, abs=1e-4)
    assert rarity("AUG", TABLE) == 0.0
    assert rarity("CUG", TABLE) == pytest.approx(-math.log(_raw_frequencies()["CUG"][1]))


@pytest.mark.parametrize("j, k, expected", [("AAA", "AAG", 16), ("ACG", "UAC", 0), ("ACC", "CGU", 4)])
def test_repeat_score(j, k, expected):
    assert repeat_score(j, k) == expected


def test_repeat_alternate_rule():
    assert repeat_score("AAA", "AAG", "run_squared_minus_one") == 24
    assert repeat_score("ACG", "UAC", "run_squared_minus_one") == 0
    with pytest.raises(ValueError):
        repeat_score("AAA", "AAA", "cubic")


def test_cai_examples():
    assert cai("ACUCUGCCGAAGGCAGAC", TABLE) == pytest.approx(0.718, abs=0.005)
    assert cai("ACUCUGCCGAAGGCAGAC", TABLE) == pytest.approx(_reference_cai("ACUCUGCCGAAGGCAGAC"), rel=1e-12)
    assert cai("CUGGCC", TABLE) == pytest.approx(1.0)
    two = build_codon_table([("K", "AAA", 0.8), ("K", "AAG", 0.2)], require_all=False)
    assert cai("AAAAAG", two) == pytest.approx(0.5)


@given(st.lists(st.sampled_from(sorted(_raw_frequencies())), min_size=1, max_size=8), st.randoms())
def test_cai_permutation_invariant(codons, rnd):
    shuffled = codons[:]
    rnd.shuffle(shuffled)
    assert cai("".join(codons), TABLE) == pytest.approx(cai("".join(shuffled), TABLE), rel=1e-12)


@given(st.lists(st.sampled_from(sorted(_raw_frequencies())), min_size=1, max_size=8))
def test_cai_one_iff_all_preferred(codons):
    all_top = all(TABLE.usage(c).weight == 1.0 for c in codons)
    assert (abs(cai("".join(codons), TABLE) - 1.0) < 1e-12) == all_top


def test_objective_examples():
    p = build_problem("TLPKAD", TABLE, (0, 0, 0))
    assert objective_value(p, [0] * 6) == 0.0
    p = build_problem("AAAA", TABLE, (1, 0, 0))
    gcg = [c.codon for c in TABLE.codons("A")].index("GCG")
    assert objective_value(p, [gcg] * 4) == 12.0


def test_zero_theta_picks_first_codons():
    sol = solve_codon(build_problem("TLPKAD", TABLE, (0, 0, 0)))
    assert sol.assignment == (0,) * 6 and sol.objective == 0.0


def test_single_methionine_forced():
    for theta in [(0, 0, 0), (3, -2, 5), (-1, 1, -1)]:
        assert str(solve_codon(build_problem("M", TABLE, theta)).sequence) == "AUG"


def test_fixture_theta_dp_matches_brute_force():
    p = build_problem("TLPKAD", TABLE, (0.955, 6.476, 7.234))
    dp, bf = solve_codon(p), solve_codon_brute_force(p)
    assert dp.objective == pytest.approx(bf.objective, abs=1e-12)
    assert str(translate(dp.sequence)) == "TLPKAD"


def _product_oracle(problem):
    """Straight itertools enumeration scored by objective_value, lexicographic ties."""
    best, best_a = math.inf, None
    for a in itertools.product(*(range(len(o)) for o in problem.options)):
        v = objective_value(problem, a)
        if best_a is None or v < best - 1e-9 * max(1.0, abs(best)):
            best, best_a = v, a
    return best, best_a


amino = st.text(alphabet=AMINO_ACIDS, min_size=1, max_size=4)
thetas = st.tuples(*(st.floats(-10, 10, allow_nan=False) for _ in range(3)))
# quarter-steps make exact ties frequent, which exercises the tie rule
grid_thetas = st.tuples(*(st.integers(-40, 40).map(lambda k: k / 4) for _ in range(3)))
signs = st.sampled_from(["log", "neg_log"])
rules = st.sampled_from(["run_minus_one_squared", "run_squared_minus_one"])


@settings(max_examples=150, deadline=None)
@given(amino, grid_thetas, signs, rules)
def test_dp_matches_enumeration(aa, theta, sign, rule):
    p = build_problem(aa, TABLE, theta, repeat_rule=rule, rarity_sign=sign)
    dp = solve_codon(p)
    value, assignment = _product_oracle(p)
    assert dp.objective == pytest.approx(value, abs=1e-9)
    assert dp.assignment == assignment
    assert str(translate(dp.sequence)) == aa


@settings(max_examples=150, deadline=None)
@given(amino, thetas, signs)
def test_dp_value_matches_enumeration_any_theta(aa, theta, sign):
    p = build_problem(aa, TABLE, theta, rarity_sign=sign)
    value, _ = _product_oracle(p)
    assert solve_codon(p).objective == pytest.approx(value, abs=1e-8)


@settings(max_examples=100, deadline=None)
@given(amino, thetas)
def test_objective_linear_in_theta(aa, theta):
    rng = np.random.default_rng(0)
    p1 = build_problem(aa, TABLE, theta)
    p2 = build_problem(aa, TABLE, tuple(2 * t for t in theta))
    a = [int(rng.integers(len(o))) for o in p1.options]
    assert objective_value(p2, a) == pytest.approx(2 * objective_value(p1, a), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.text(alphabet=AMINO_ACIDS, min_size=1, max_size=10), st.floats(-5, 5), st.floats(-5, 5))
def test_no_repeat_weight_decouples_positions(aa, tc, tp):
    p = build_problem(aa, TABLE, (tc, tp, 0.0))
    sol = solve_codon(p)
    for k, usage in enumerate(sol.assignment):
        costs = p.node_costs[k]
        assert costs[usage] <= costs.min() + 1e-9 * max(1.0, abs(costs.min()))


def test_theta_rejects_nan():
    with pytest.raises(ValueError):
        Theta(float("nan"), 0, 0)


def test_brute_force_limit():
    p = build_problem("L" * 10, TABLE, (1, 1, 1))
    with pytest.raises(ValueError, match="limit"):
        solve_codon_brute_force(p)
