import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aclp.bayesnet import DataSet, forward_sample, parse_network, random_dag, random_net
from aclp.mag import CapabilityError
from aclp.structlearn import (
    ScoringContext,
    consistent_extension,
    dag_to_cpdag,
    exact_dag,
    find_neighbors,
    find_spouses,
    ges,
    learn_local_dag,
    local_bic,
    local_structure,
)

from oracles import all_dags, bic_loops


def data(cols: dict, cards=None) -> DataSet:
    names = tuple(cols)
    values = np.column_stack([np.asarray(cols[n], dtype=np.int64) for n in names])
    cards = cards or tuple(int(values[:, i].max()) + 1 for i in range(len(names)))
    return DataSet(names, tuple(cards), values)


def rows_of(d: DataSet):
    return [dict(zip(d.names, r)) for r in d.values.tolist()]


def net_from(parents, strength, rng):
    """Binary net; P(child = 1) runs linearly from 1 - strength to strength with the share of parents at 1."""
    text = []
    for x in parents:
        text.append(f"variable {x} {{ type discrete [ 2 ] {{ s0, s1 }}; }}")
    for x, ps in parents.items():
        if not ps:
            p = rng.uniform(0.3, 0.7)
            text.append(f"probability ( {x} ) {{ table {p}, {1 - p}; }}")
            continue
        rows = []
        for cfg in np.ndindex(*(2,) * len(ps)):
            p1 = (1 - strength) + (2 * strength - 1) * sum(cfg) / len(ps)
            probs = (1 - p1, p1)
            rows.append(f"({', '.join('s%d' % c for c in cfg)}) {probs[0]}, {probs[1]};")
        text.append(f"probability ( {x} | {', '.join(ps)} ) {{ {' '.join(rows)} }}")
    return parse_network("\n".join(text))


def test_bic_hand_example():
    ctx = ScoringContext(data({"X": [0, 0, 1, 1]}))
    assert local_bic(ctx, "X", []) == pytest.approx(-5.0, abs=1e-9)
    copy = ScoringContext(data({"P": [0, 1, 0, 1], "X": [0, 1, 0, 1]}))
    assert copy.local_bic("X", ["P"]) == pytest.approx(-2.0 * 1 / 2 * math.log2(4), abs=1e-9)


def test_bic_zero_count_cells():
    d = data({"P": [0, 0, 0], "X": [1, 1, 2]}, cards=(2, 3))
    # the unseen parent state and unseen X value contribute nothing to the likelihood
    expected = 2 * math.log2(2 / 3) + math.log2(1 / 3) - 2 * 2 / 2 * math.log2(3)
    assert ScoringContext(d).local_bic("X", ["P"]) == pytest.approx(expected, abs=1e-9)


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_bic_matches_counting_oracle_and_decomposes(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    dag = random_dag(n, int(rng.integers(0, n * (n - 1) // 2 + 1)), rng)
    net = random_net(dag, rng, card=int(rng.integers(2, 4)))
    d = forward_sample(net, int(rng.integers(5, 300)), seed)
    ctx = ScoringContext(d)
    rows = rows_of(d)
    cards = dict(zip(d.names, d.cards))
    total = 0.0
    for x, ps in dag.items():
        fresh = bic_loops(rows, x, list(ps), cards)
        assert ctx.local_bic(x, ps) == pytest.approx(fresh, abs=1e-9)
        total += fresh
    assert ctx.score_dag(dag) == pytest.approx(total, abs=1e-9)
    assert ctx.score_dag(dag) == sum(ctx.local_bic(x, ps) for x, ps in dag.items())


def test_cache_transparency():
    rng = np.random.default_rng(2)
    d = forward_sample(random_net(random_dag(5, 6, rng), rng, card=3), 400, 2)
    warm = ScoringContext(d)
    for x in d.names:
        for ps in combinations([v for v in d.names if v != x], 2):
            first = warm.local_bic(x, ps)
            assert warm.local_bic(x, reversed(ps)) == first
            assert ScoringContext(d).local_bic(x, ps) == first
    with pytest.raises(ValueError):
        warm.local_bic("V0", ["V0"])


def test_duplicated_rows_score_identity():
    rng = np.random.default_rng(4)
    d = forward_sample(random_net(random_dag(4, 4, rng), rng, card=3), 500, 4)
    d2 = DataSet(d.names, d.cards, np.vstack([d.values, d.values]))
    c1, c2 = ScoringContext(d), ScoringContext(d2)
    logm = math.log2(d.m)
    for x in d.names:
        for ps in [(), *combinations([v for v in d.names if v != x], 1), *combinations([v for v in d.names if v != x], 2)]:
            k = np.prod([d.cards[d.index(p)] for p in ps], dtype=int) * (d.cards[d.index(x)] - 1)
            assert c2.local_bic(x, ps) == pytest.approx(2 * c1.local_bic(x, ps) + k * (logm - 1) / 2, abs=1e-7)


def test_duplicated_rows_keep_well_separated_choices():
    # every dependency here is strong, so no choice sits near the penalty margin
    rng = np.random.default_rng(7)
    d = forward_sample(net_from({"A": (), "B": ("A",), "C": ("B",), "D": ("B", "C")}, 0.85, rng), 3000, 7)
    d2 = DataSet(d.names, d.cards, np.vstack([d.values, d.values]))
    assert ges(ScoringContext(d2), d.names) == ges(ScoringContext(d), d.names)


def _best_by_enumeration(ctx, nodes):
    return max(ctx.score_dag(p) for p in all_dags(nodes))


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_exact_search_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    dag = random_dag(n, int(rng.integers(0, n * (n - 1) // 2 + 1)), rng)
    d = forward_sample(random_net(dag, rng, card=2), int(rng.integers(30, 500)), seed)
    ctx = ScoringContext(d)
    assert ctx.score_dag(exact_dag(ctx, d.names)) == pytest.approx(_best_by_enumeration(ctx, d.names), abs=1e-9)


def test_ges_reaches_exact_optimum_on_most_random_nets():
    hits = 0
    for s in range(30):
        rng = np.random.default_rng(s)
        n = int(rng.integers(3, 7))
        dag = random_dag(n, int(rng.integers(0, n * (n - 1) // 2 + 1)), rng)
        d = forward_sample(random_net(dag, rng, card=int(rng.integers(2, 4))), 2000, s)
        ctx = ScoringContext(d)
        g = ges(ctx, d.names)
        ext = consistent_extension(g)
        assert dag_to_cpdag(d.names, ext) == g
        hits += abs(ctx.score_dag(ext) - ctx.score_dag(exact_dag(ctx, d.names))) < 1e-6
    assert hits >= 24


def test_ges_small_generators():
    rng = np.random.default_rng(0)
    indep = ScoringContext(data({"X": rng.integers(0, 2, 5000), "Y": rng.integers(0, 2, 5000)}))
    assert not ges(indep, ["X", "Y"]).adjacent("X", "Y")

    d = forward_sample(net_from({"X": (), "Y": ("X",)}, 0.8, rng), 5000, 1)
    assert ges(ScoringContext(d), ["X", "Y"]).is_undirected("X", "Y")

    d = forward_sample(net_from({"A": (), "B": (), "C": ("A", "B")}, 0.9, rng), 5000, 2)
    g = ges(ScoringContext(d), ["A", "B", "C"])
    assert g.is_directed("A", "C") and g.is_directed("B", "C") and not g.adjacent("A", "B")


def test_ges_deterministic_and_capped():
    rng = np.random.default_rng(5)
    d = forward_sample(random_net(random_dag(6, 7, rng), rng), 800, 5)
    assert ges(ScoringContext(d), d.names) == ges(ScoringContext(d), reversed(d.names))
    with pytest.raises(CapabilityError):
        learn_local_dag(ScoringContext(d, cap=4), d.names)
    g = learn_local_dag(ScoringContext(d), d.names, method="exact")
    assert consistent_extension(g) is not None


def test_local_consistency_across_seeds():
    # dependence floor: P(Y = X) = 0.65
    for seed in range(20):
        rng = np.random.default_rng(seed)
        d = forward_sample(net_from({"X": (), "Y": ("X",)}, 0.65, rng), 1000, seed)
        ctx = ScoringContext(d)
        assert ctx.score_dag({"X": [], "Y": ["X"]}) > ctx.score_dag({"X": [], "Y": []})


CHAIN = {"A": (), "T": ("A",), "B": ("T",), "N": ()}


def test_neighbors_on_generators():
    rng = np.random.default_rng(1)
    ctx = ScoringContext(forward_sample(net_from(CHAIN, 0.85, rng), 5000, 1))
    h, ch, pa = find_neighbors(ctx, "T")
    assert h == {"A", "B"} and ch | pa <= h
    assert find_neighbors(ctx, "N")[0] == set()
    assert find_spouses(ctx, "T") == {}


def test_symmetry_correction_removes_one_sided_candidate():
    rng = np.random.default_rng(1)
    ctx = ScoringContext(forward_sample(net_from(CHAIN, 0.85, rng), 2000, 1))
    ctx.memo[("potential", "T")] = frozenset({"A", "B", "N"})
    assert find_neighbors(ctx, "T")[0] == {"A", "B"}


def test_spouses_of_collider():
    rng = np.random.default_rng(3)
    ctx = ScoringContext(forward_sample(net_from({"A": (), "B": (), "C": ("A", "B")}, 0.9, rng), 5000, 3))
    assert find_spouses(ctx, "A") == {"B": "C"}
    assert find_spouses(ctx, "C") == {}
    ls = local_structure(ctx, "A")
    # over {A, C} alone the edge stays unoriented, so the witness comes from the neighbour set
    assert ls.H_star == {"C"} and ls.ch == set() and not ls.S_star.keys() & ls.H_star


def test_neighbor_sets_are_symmetric(alarm):
    ctx = ScoringContext(forward_sample(alarm, 1500, 8))
    names = ["VENTTUBE", "VENTLUNG", "PRESS", "KINKEDTUBE", "INTUBATION", "VENTMACH", "DISCONNECT"]
    hs = {x: find_neighbors(ctx, x)[0] for x in names}
    for x in names:
        for v in hs[x]:
            if v in hs:
                assert x in hs[v]


def test_unknown_update_rule():
    with pytest.raises(ValueError):
        ScoringContext(data({"X": [0, 1]}), update="sideways")
