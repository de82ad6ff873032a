import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpdlab.factor_graph import (
    AlistFormatError,
    EnsembleParams,
    ExpansionBudgetError,
    ExpansionSpec,
    FactorGraph,
    GraphError,
    check_expansion_exhaustive,
    neighborhood,
    read_alist,
    sample_bit_regular,
    write_alist,
)

from conftest import make_graph


def test_sample_bit_regular_shape():
    params = EnsembleParams(rate=0.5, d_v=8, n=1000, seed=7)
    g = sample_bit_regular(params)
    assert g.n == 1000 and g.m == 500
    assert all(g.var_degree(i) == 8 for i in range(g.n))


def test_sample_degree_one():
    params = EnsembleParams(rate=0.5, d_v=1, n=4, seed=123)
    g = sample_bit_regular(params)
    assert all(g.var_degree(i) == 1 for i in range(4))


def test_mean_check_degree_matches_expectation():
    # E[check degree] = n*d_v/m = 1000*8/500 = 16 exactly; the sample mean of
    # each graph equals 16 identically (edge count is fixed), so averaging
    # over graphs must land inside 16.0 +- 0.5.
    means = []
    for seed in range(20):
        g = sample_bit_regular(EnsembleParams(rate=0.5, d_v=8, n=1000, seed=seed))
        means.append(np.mean([g.check_degree(a) for a in range(g.m)]))
    assert abs(np.mean(means) - 16.0) <= 0.5


def test_sampling_determinism():
    params = EnsembleParams(rate=0.4, d_v=5, n=60, seed=99)
    assert sample_bit_regular(params) == sample_bit_regular(params)
    other = EnsembleParams(rate=0.4, d_v=5, n=60, seed=100)
    assert sample_bit_regular(params) != sample_bit_regular(other)


def test_ensemble_params_validation():
    with pytest.raises(GraphError):
        EnsembleParams(rate=0.5, d_v=8, n=10, seed=0)  # m = 5 < d_v
    with pytest.raises(GraphError):
        EnsembleParams(rate=1.5, d_v=2, n=10, seed=0)


def test_graph_invariants_rejects_bad_adjacency():
    with pytest.raises(GraphError):
        make_graph(2, 3, [[0, 3], [1]])      # out of range
    with pytest.raises(GraphError):
        make_graph(1, 3, [[1, 1]])           # duplicate edge


def test_transpose_consistency():
    g = sample_bit_regular(EnsembleParams(rate=0.5, d_v=4, n=30, seed=5))
    for i in range(g.n):
        for a in g.var_adj[i]:
            assert i in g.check_adj[a]
    for a in range(g.m):
        for i in g.check_adj[a]:
            assert a in g.var_adj[i]


def test_neighborhood_basic():
    g = make_graph(2, 5, [[0, 1, 2], [2, 3, 4]])
    assert neighborhood(g, []) == set()
    assert neighborhood(g, [0]) == {0, 1, 2}
    # two variables sharing exactly one check: |N| = 2*d_v - 1
    assert len(neighborhood(g, [0, 1])) == 2 * 3 - 1
    with pytest.raises(GraphError):
        neighborhood(g, [2])


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_neighborhood_monotone(data):
    g = sample_bit_regular(EnsembleParams(rate=0.5, d_v=3, n=20, seed=11))
    sub = data.draw(st.sets(st.integers(0, 19), max_size=8))
    sup = sub | data.draw(st.sets(st.integers(0, 19), max_size=8))
    assert neighborhood(g, sub) <= neighborhood(g, sup)


def test_expansion_private_checks_pass():
    # 3 variables with disjoint degree-3 neighborhoods: |N(S)| = 3|S| always
    g = make_graph(3, 9, [[0, 1, 2], [3, 4, 5], [6, 7, 8]])
    assert check_expansion_exhaustive(g, ExpansionSpec(mu=1.0, p_expand=3)) is None


def test_expansion_identical_pair_counterexample():
    g = make_graph(4, 8, [[0, 1, 2], [0, 1, 2], [3, 4, 5], [5, 6, 7]])
    bad = check_expansion_exhaustive(g, ExpansionSpec(mu=0.5, p_expand=3))
    assert bad == (0, 1)
    # soundness: the returned subset verifiably violates the bound
    assert len(neighborhood(g, bad)) < 3 * len(bad)


def test_expansion_no_singleton_counterexample():
    # p <= min degree: single-variable sets always expand, so any returned
    # counterexample has size >= 2
    g = make_graph(4, 8, [[0, 1, 2], [0, 1, 2], [3, 4, 5], [5, 6, 7]])
    bad = check_expansion_exhaustive(g, ExpansionSpec(mu=1.0, p_expand=3))
    assert bad is not None and len(bad) >= 2


def test_expansion_budget_guard():
    g = sample_bit_regular(EnsembleParams(rate=0.5, d_v=3, n=40, seed=3))
    with pytest.raises(ExpansionBudgetError):
        check_expansion_exhaustive(g, ExpansionSpec(mu=0.5, p_expand=2), budget=10_000)


def test_expansion_sampling_estimator_agrees(rng):
    # sampled cross-check of the exhaustive verdict: when the checker passes,
    # no sampled subset may violate the bound
    g = sample_bit_regular(EnsembleParams(rate=0.5, d_v=4, n=24, seed=8))
    spec = ExpansionSpec(mu=0.15, p_expand=3)
    verdict = check_expansion_exhaustive(g, spec)
    kmax = int(spec.mu * g.n)
    sampled_violation = None
    for _ in range(3000):
        k = int(rng.integers(1, kmax + 1))
        subset = rng.choice(g.n, size=k, replace=False)
        if len(neighborhood(g, subset)) < spec.p_expand * k:
            sampled_violation = tuple(sorted(int(i) for i in subset))
            break
    if verdict is None:
        assert sampled_violation is None
    else:
        assert len(neighborhood(g, verdict)) < spec.p_expand * len(verdict)


def test_alist_roundtrip(tmp_path):
    g = sample_bit_regular(EnsembleParams(rate=0.4, d_v=3, n=25, seed=17))
    path = tmp_path / "code.alist"
    write_alist(g, str(path))
    assert read_alist(str(path)) == g


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_alist_roundtrip_random(seed, tmp_path_factory):
    g = sample_bit_regular(EnsembleParams(rate=0.5, d_v=4, n=18, seed=seed))
    path = tmp_path_factory.mktemp("alist") / "g.alist"
    write_alist(g, str(path))
    assert read_alist(str(path)) == g


def test_alist_zero_padding_is_not_an_edge(tmp_path):
    path = tmp_path / "pad.alist"
    path.write_text(
        "2 2\n2 2\n2 1\n2 1\n1 2\n1 0\n1 2\n1 0\n"
    )
    g = read_alist(str(path))
    assert g.var_adj == ((0, 1), (0,))
    assert g.check_adj == ((0, 1), (0,))


def test_alist_transpose_mismatch(tmp_path):
    path = tmp_path / "bad.alist"
    # variable lists say edge (0,0) and (1,1); check lists disagree
    path.write_text("2 2\n1 1\n1 1\n1 1\n1\n2\n2 0\n1 0\n")
    with pytest.raises(AlistFormatError) as err:
        read_alist(str(path))
    assert err.value.line == 7


def test_alist_malformed_header(tmp_path):
    path = tmp_path / "hdr.alist"
    path.write_text("3\n1 1\n1 1 1\n1 1 1\n1\n1\n1\n1\n1\n1\n")
    with pytest.raises(AlistFormatError) as err:
        read_alist(str(path))
    assert err.value.line == 1


def test_alist_out_of_range_neighbor(tmp_path):
    path = tmp_path / "oor.alist"
    path.write_text("2 2\n1 1\n1 1\n1 1\n3\n2\n1 0\n2 0\n")
    with pytest.raises(AlistFormatError) as err:
        read_alist(str(path))
    assert err.value.line == 5


def test_json_roundtrip():
    g = sample_bit_regular(EnsembleParams(rate=0.5, d_v=3, n=12, seed=1))
    assert FactorGraph.from_json(g.to_json()) == g
