"""Synthetic topology generation and its manifest guarantees."""

from __future__ import annotations

import numpy as np
import pytest

from asrecon import SimConfig, SimulationError, generate, read_manifest, write_simulation


def adjacencies_in_paths(corpus):
    pairs = set()
    reg = corpus.registry
    for record in corpus.records:
        for a, b in zip(record.nodes, record.nodes[1:]):
            as_a, as_b = reg.as_of(a), reg.as_of(b)
            pairs.add((min(as_a, as_b), max(as_a, as_b)))
    return pairs


def test_deterministic_output(tmp_path):
    config = SimConfig(
        n_nodes=60, n_collectors=3, n_periods=3, density=0.08,
        p_miss=0.1, p_false_edge=0.02, p_reroute=0.2, seed=99,
    )
    p1, m1 = write_simulation(generate(config), tmp_path / "a")
    p2, m2 = write_simulation(generate(config), tmp_path / "b")
    assert p1.read_bytes() == p2.read_bytes()
    assert m1.read_bytes() == m2.read_bytes()

    different = write_simulation(
        generate(SimConfig(**{**config.__dict__, "seed": 100})), tmp_path / "c"
    )
    assert p1.read_bytes() != different[0].read_bytes()


def test_noise_free_paths_are_true_shortest_paths():
    config = SimConfig(n_nodes=50, n_collectors=2, n_periods=1, density=0.1, seed=3)
    sim = generate(config)
    true_as = set(sim.true_edges_as())
    assert adjacencies_in_paths(sim.corpus) <= true_as
    assert sim.corruptions == []
    assert sim.dropped_paths == 0
    # Collectors saw only truth, so observed frequencies are exact.
    assert np.allclose(sim.empirical_alpha, 1.0)
    assert np.allclose(sim.empirical_beta, 0.0)


def test_corruption_log_accounts_for_every_fake_adjacency(tmp_path):
    config = SimConfig(
        n_nodes=80, n_collectors=3, n_periods=4, density=0.07,
        p_miss=0.05, p_false_edge=0.05, seed=17,
    )
    sim = generate(config)
    assert sim.corruptions, "expected at least one corruption at p_false_edge=0.05"
    _, manifest_path = write_simulation(sim, tmp_path)
    manifest = read_manifest(manifest_path)

    emitted = adjacencies_in_paths(sim.corpus)
    fake_emitted = emitted - set(sim.true_edges_as())
    assert fake_emitted == manifest.fake_edges()


def test_manifest_round_trip(tmp_path):
    config = SimConfig(
        n_nodes=40, n_collectors=2, n_periods=2, density=0.12,
        p_miss=0.1, p_false_edge=0.01, seed=8,
    )
    sim = generate(config)
    _, manifest_path = write_simulation(sim, tmp_path)
    manifest = read_manifest(manifest_path)
    assert manifest.config["n_nodes"] == "40"
    assert manifest.config["seed"] == "8"
    assert manifest.true_edges == set(sim.true_edges_as())
    assert len(manifest.roots) == 2
    assert set(manifest.empirical_alpha) == set(sim.corpus.collector_labels)
    assert manifest.dropped_paths == sim.dropped_paths
    for label, root_as in manifest.roots.items():
        assert root_as in sim.corpus.registry.as_number_to_id


def test_dropped_plus_emitted_accounts_for_all_paths():
    config = SimConfig(
        n_nodes=50, n_collectors=2, n_periods=3, density=0.1, p_miss=0.3, seed=21
    )
    sim = generate(config)
    expected = config.n_collectors * config.n_periods * (config.n_nodes - 1)
    assert len(sim.corpus.records) + sim.dropped_paths == expected


def test_rerouting_varies_paths_across_periods():
    base = SimConfig(n_nodes=60, n_collectors=1, n_periods=2, density=0.15, seed=4)
    static = generate(base)
    churny = generate(SimConfig(**{**base.__dict__, "p_reroute": 1.0}))

    def paths_by_period(sim):
        out = {0: set(), 1: set()}
        for r in sim.corpus.records:
            out[r.time_period].add(tuple(r.nodes))
        return out

    sp = paths_by_period(static)
    assert sp[0] == sp[1]
    cp = paths_by_period(churny)
    assert cp[0] != cp[1]


def test_preferential_model_connected_and_sized():
    config = SimConfig(
        n_nodes=70, n_collectors=2, n_periods=1, graph_model="preferential",
        edges_per_node=3, seed=12,
    )
    sim = generate(config)
    assert len(sim.true_edges) == 3 * (70 - 3)
    degrees = np.zeros(70, dtype=int)
    for u, v in sim.true_edges:
        degrees[u] += 1
        degrees[v] += 1
    assert degrees.max() > 3  # hubs emerge


def test_disconnected_graph_exhausts_retries():
    config = SimConfig(
        n_nodes=60, n_collectors=1, n_periods=1, density=0.005, seed=0, retry_limit=3
    )
    with pytest.raises(SimulationError, match="connected"):
        generate(config)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_nodes": 2, "n_collectors": 3, "n_periods": 1},
        {"n_nodes": 5, "n_collectors": 1, "n_periods": 0},
        {"n_nodes": 5, "n_collectors": 1, "n_periods": 1, "p_miss": 1.5},
        {"n_nodes": 5, "n_collectors": 1, "n_periods": 1, "density": 0.0},
        {"n_nodes": 5, "n_collectors": 1, "n_periods": 1, "graph_model": "smallworld"},
        {
            "n_nodes": 5,
            "n_collectors": 1,
            "n_periods": 1,
            "graph_model": "preferential",
            "edges_per_node": 5,
        },
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(SimulationError):
        SimConfig(**kwargs)


def test_empirical_rates_respond_to_noise():
    noisy = generate(
        SimConfig(
            n_nodes=80, n_collectors=3, n_periods=4, density=0.08,
            p_miss=0.2, p_false_edge=0.05, p_reroute=0.3, seed=33,
        )
    )
    assert np.all(noisy.empirical_alpha <= 1.0)
    assert np.any(noisy.empirical_beta > 0.0)
    assert np.all(noisy.empirical_beta < 0.05)  # fakes are rare events per pair
