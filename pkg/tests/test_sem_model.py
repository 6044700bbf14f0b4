import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from layerdag.exceptions import CycleError, InvalidParameterError
from layerdag.sem_model import (
    LAPLACE,
    STUDENT_T,
    UNIFORM,
    Dag,
    Dataset,
    LayerDecomposition,
    NoiseSpec,
    SemModel,
    generate_ba,
    generate_hub,
    layer_decompose,
    make_model,
    make_noise,
    population_covariance,
    population_precision,
    sample_coefficients,
    simulate,
    total_effects,
    toy_model,
)

from conftest import random_dag


def brute_force_layers(dag):
    # longest path to a sink by explicit path enumeration
    children = {k: dag.children(k) for k in range(dag.p)}

    def longest(k):
        return max((1 + longest(c) for c in children[k]), default=0)

    depth = {k: longest(k) for k in range(dag.p)}
    T = max(depth.values(), default=-1) + 1
    return [{k for k in depth if depth[k] == t} for t in range(T)]


class TestDag:
    def test_cycle_is_rejected_with_witness(self):
        with pytest.raises(CycleError) as info:
            Dag(3, frozenset({(0, 1), (1, 2), (2, 0)}))
        w = info.value.witness
        assert w[0] == w[-1]
        assert set(w) == {0, 1, 2}
        for a, b in zip(w, w[1:]):
            assert (a, b) in {(0, 1), (1, 2), (2, 0)}

    def test_self_loop(self):
        with pytest.raises(CycleError):
            Dag(2, frozenset({(1, 1)}))

    def test_edge_out_of_range(self):
        with pytest.raises(InvalidParameterError):
            Dag(2, frozenset({(0, 2)}))

    def test_topological_order_respects_edges(self, rng):
        for _ in range(20):
            dag = random_dag(rng, 7)
            pos = {k: i for i, k in enumerate(dag.topological_order())}
            assert all(pos[j] < pos[k] for j, k in dag.edges)

    def test_from_weights_roundtrip(self):
        B = np.zeros((3, 3))
        B[2, 0] = 0.7
        B[1, 0] = -1e-12
        assert Dag.from_weights(B).edges == {(0, 2), (0, 1)}
        assert Dag.from_weights(B, tol=1e-9).edges == {(0, 2)}


class TestLayers:
    def test_hub(self):
        for p in (2, 3, 10):
            assert layer_decompose(generate_hub(p)) == [set(range(1, p)), {0}]

    def test_chain(self):
        dag = Dag(4, frozenset({(0, 1), (1, 2), (2, 3)}))
        assert layer_decompose(dag) == [{3}, {2}, {1}, {0}]

    def test_isolated_nodes_are_bottom(self):
        dag = Dag(3, frozenset({(0, 1)}))
        assert layer_decompose(dag) == [{1, 2}, {0}]

    def test_toy(self):
        assert layer_decompose(toy_model().dag) == [{2, 3}, {1}, {0}]

    def test_empty_graph(self):
        assert layer_decompose(Dag(0)).T == 0

    def test_matches_brute_force(self, rng):
        for _ in range(50):
            dag = random_dag(rng, int(rng.integers(1, 8)))
            assert layer_decompose(dag) == brute_force_layers(dag)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 9))
    @settings(max_examples=60, deadline=None)
    def test_edges_point_down_layers(self, seed, p):
        dag = random_dag(np.random.default_rng(seed), p)
        layer_of = layer_decompose(dag).layer_of()
        assert sorted(layer_of) == list(range(p))
        for j, k in dag.edges:
            assert layer_of[j] > layer_of[k]

    def test_equality_against_lists(self):
        assert LayerDecomposition(({1}, {0})) == [[1], [0]]
        assert LayerDecomposition(({1}, {0})) != [[0], [1]]


class TestGenerators:
    def test_hub_edges(self):
        assert generate_hub(4).edges == {(0, 1), (0, 2), (0, 3)}
        assert generate_hub(2).edges == {(0, 1)}
        with pytest.raises(InvalidParameterError):
            generate_hub(1)

    def test_ba_small(self):
        assert generate_ba(1, 2, seed=0).edges == frozenset()
        assert generate_ba(3, 2, seed=0).edges == {(0, 1), (0, 2), (1, 2)}

    def test_ba_edge_count_and_determinism(self):
        g = generate_ba(50, 2, seed=3)
        assert len(g.edges) == sum(min(2, v) for v in range(1, 50)) == 97
        assert g.edges == generate_ba(50, 2, seed=3).edges
        assert g.edges != generate_ba(50, 2, seed=4).edges

    def test_ba_in_degree(self):
        g = generate_ba(30, 3, seed=1)
        for v in range(30):
            assert len(g.parents(v)) == min(3, v)
            assert all(j < v for j in g.parents(v))

    def test_ba_prefers_high_degree(self):
        # node 0 ends up with far more children than a late node on average
        early = np.mean([len(generate_ba(40, 1, seed=s).children(0)) for s in range(200)])
        late = np.mean([len(generate_ba(40, 1, seed=s).children(20)) for s in range(200)])
        assert early > 3 * late

    def test_coefficients_range_and_sign_balance(self):
        dag = generate_hub(10001)
        B = sample_coefficients(dag, seed=0)
        w = B[1:, 0]
        assert np.all((np.abs(w) >= 0.5) & (np.abs(w) <= 1.5))
        assert abs(np.mean(w > 0) - 0.5) < 0.02
        assert not B[0].any()

    def test_coefficients_invalid(self):
        with pytest.raises(InvalidParameterError):
            sample_coefficients(generate_hub(3), 1.5, 0.5)
        with pytest.raises(InvalidParameterError):
            sample_coefficients(generate_hub(3), 0.0, 1.0)

    def test_no_edges(self):
        assert not sample_coefficients(Dag(3), seed=1).any()


class TestNoise:
    @pytest.mark.parametrize("spec,var", [(UNIFORM, 3.0), (STUDENT_T, 9 / 7), (LAPLACE, 3.0),
                                          (NoiseSpec("scaled_uniform", (0.5,)), 0.75)])
    def test_moments(self, spec, var):
        x = spec.sample(np.random.default_rng(0), 200_000)
        assert spec.variance == pytest.approx(var)
        assert x.var() == pytest.approx(var, rel=0.03)
        assert x.mean() == pytest.approx(spec.mean, abs=0.02)

    @pytest.mark.parametrize("law,params", [("uniform", (1, 0)), ("t", (2,)), ("laplace", (0, 0)),
                                            ("scaled_uniform", (-1,)), ("gauss", (0, 1))])
    def test_invalid(self, law, params):
        with pytest.raises(InvalidParameterError):
            NoiseSpec(law, params)

    def test_make_noise(self):
        s = make_noise("scaled_uniform", 500, seed=0)
        sig = np.array([nz.params[0] for nz in s])
        assert sig.min() >= 0.2 and sig.max() <= 1.0
        mixed = make_noise("mixed", 60, seed=0)
        assert {nz.law for nz in mixed} == {"uniform", "t", "laplace"}
        with pytest.raises(InvalidParameterError):
            make_noise("normal", 3)


class TestSimulate:
    def test_independent_uniform_moments(self):
        model = SemModel.from_weights(np.zeros((3, 3)), UNIFORM)
        X = simulate(model, 100_000, seed=0).X
        assert np.allclose(X.mean(axis=0), 0, atol=0.05)
        assert np.allclose(X.var(axis=0), 3, atol=0.05)

    def test_toy_covariance(self):
        model = toy_model()
        X = simulate(model, 100_000, seed=1).X
        assert np.allclose(np.cov(X.T, bias=True), population_covariance(model), atol=0.05)

    def test_empty(self):
        d = simulate(toy_model(), 0, seed=0)
        assert d.X.shape == (0, 4)

    def test_reproducible(self):
        m = make_model(generate_ba(8, 2, seed=1), "mixed", seed=1)
        a, b = simulate(m, 50, seed=9), simulate(m, 50, seed=9)
        assert np.array_equal(a.X, b.X)
        assert not np.array_equal(a.X, simulate(m, 50, seed=10).X)

    def test_structural_equations_hold(self):
        m = make_model(generate_ba(8, 2, seed=2), "uniform", seed=2)
        X = simulate(m, 30, seed=3).X
        eps = X - X @ m.B.T
        # residual noise of each node is uniform on [-3, 3]
        assert np.all(np.abs(eps) <= 3 + 1e-9)

    def test_default_labels(self):
        assert simulate(toy_model(), 2, seed=0).labels == ("x1", "x2", "x3", "x4")
        with pytest.raises(InvalidParameterError):
            Dataset(np.zeros((2, 2)), ("a",))


class TestPopulation:
    def test_identity(self):
        m = SemModel.from_weights(np.zeros((3, 3)), NoiseSpec("uniform", (-np.sqrt(3), np.sqrt(3))))
        assert np.allclose(population_precision(m).theta, np.eye(3))

    def test_toy_entries(self):
        m = toy_model()
        theta = population_precision(m).theta
        s2 = m.noise[2].variance
        assert theta[2, 0] == pytest.approx(-m.B[2, 0] / s2)
        assert theta[2, 1] == pytest.approx(-m.B[2, 1] / s2)

    def test_precision_inverts_covariance(self, rng):
        for seed in range(20):
            m = make_model(random_dag(rng, 5), "mixed", seed=seed)
            theta = population_precision(m).theta
            assert np.abs(theta @ population_covariance(m) - np.eye(5)).max() < 1e-10
            assert np.array_equal(theta, theta.T)
            assert np.linalg.eigvalsh(theta).min() > 0

    def test_total_effects(self, rng):
        for seed in range(10):
            m = make_model(random_dag(rng, 6), "uniform", seed=seed)
            A = total_effects(m)
            assert np.allclose(A, np.linalg.inv(np.eye(6) - m.B), atol=1e-12)


def test_model_json_roundtrip():
    m = make_model(generate_ba(6, 2, seed=0), "mixed", seed=0)
    back = SemModel.from_dict(json.loads(json.dumps(m.to_dict())))
    assert np.array_equal(back.B, m.B)
    assert back.dag.edges == m.dag.edges
    assert back.noise == m.noise


def test_model_support_must_match():
    with pytest.raises(InvalidParameterError):
        SemModel(generate_hub(3), np.zeros((3, 3)), (UNIFORM,) * 3)
