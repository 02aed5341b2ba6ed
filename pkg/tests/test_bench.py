"""Experiment harness: spec round-trip, catalog geometry, report plumbing."""
import dataclasses
import json

import numpy as np
import pytest

from stimloop.bench import (
    CatalogSpec,
    ExperimentSpec,
    compute_metrics,
    default_spec,
    make_clustered_catalog,
    run_rate_sim,
    run_retrieval_experiment,
)
from stimloop.core import RngHandle
from stimloop.features import SemanticDecoder, psd_target, semantic_target
from stimloop.oracle import OracleConfig, make_oracle
from stimloop.search import SearchConfig, run_search


def test_clustered_catalog_shape_and_labels():
    spec = CatalogSpec(n_clusters=5, members=4, dim=6, spread=0.2, seed=3)
    catalog, labels = make_clustered_catalog(spec)
    assert len(catalog) == 20
    assert sorted(set(labels.values())) == [0, 1, 2, 3, 4]
    assert all(labels[it.id] == int(it.id[1:3]) for it in catalog)
    norms = np.linalg.norm(catalog.matrix, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-12)


def test_clustered_catalog_members_stay_near_center():
    catalog, labels = make_clustered_catalog(
        CatalogSpec(n_clusters=8, members=6, dim=16, spread=0.1, seed=1))
    # within-cluster cosine must dominate cross-cluster cosine
    sims = catalog.matrix @ catalog.matrix.T
    ids = catalog.ids
    within = [sims[i, j] for i in range(len(ids)) for j in range(i + 1, len(ids))
              if labels[ids[i]] == labels[ids[j]]]
    across = [sims[i, j] for i in range(len(ids)) for j in range(i + 1, len(ids))
              if labels[ids[i]] != labels[ids[j]]]
    assert min(within) > max(across)


def test_clustered_catalog_deterministic():
    a, _ = make_clustered_catalog(CatalogSpec(seed=5))
    b, _ = make_clustered_catalog(CatalogSpec(seed=5))
    assert a.ids == b.ids
    assert np.array_equal(a.matrix, b.matrix)


def test_catalog_spec_validation():
    with pytest.raises(ValueError):
        CatalogSpec(n_clusters=0).validate()
    with pytest.raises(ValueError):
        CatalogSpec(dim=1).validate()
    with pytest.raises(ValueError):
        CatalogSpec(spread=-0.1).validate()
    with pytest.raises(ValueError):
        CatalogSpec(n_clusters=1, members=1).validate()


def test_experiment_spec_round_trip():
    spec = default_spec("retrieval", seeds=(3, 1, 4))
    blob = json.dumps(spec.to_json())
    back = ExperimentSpec.from_json(json.loads(blob))
    assert back == spec


def test_experiment_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(scenario="nope").validate()
    with pytest.raises(ValueError):
        ExperimentSpec(scenario="grid", seeds=()).validate()
    with pytest.raises(ValueError):
        ExperimentSpec(scenario="grid", seeds=(1, 1)).validate()
    with pytest.raises(ValueError):
        ExperimentSpec(scenario="retrieval", target_r=1.5).validate()
    with pytest.raises(ValueError):
        ExperimentSpec(scenario="efficiency", budgets=(1,)).validate()
    with pytest.raises(ValueError):
        default_spec("what")


def test_retrieval_report_is_deterministic():
    spec = default_spec("retrieval", seeds=(0, 1, 2))
    a = run_retrieval_experiment(spec)
    b = run_retrieval_experiment(spec)
    assert a.summary == b.summary
    assert a.rows == b.rows
    assert [(s, r.to_json()) for s, r in a.traces] == \
           [(s, r.to_json()) for s, r in b.traces]


def test_retrieval_rows_cover_seeds_and_iterations():
    spec = default_spec("retrieval", seeds=(0, 1))
    rep = run_retrieval_experiment(spec)
    assert len(rep.rows) == 2 * 10
    assert {r["seed"] for r in rep.rows} == {0, 1}
    by_seed = [r["iteration"] for r in rep.rows if r["seed"] == 0]
    assert by_seed == list(range(1, 11))


def test_report_write_emits_artifact_trio(tmp_path):
    spec = default_spec("rating-sim", seeds=(0,))
    rep = run_rate_sim(spec)
    paths = rep.write(tmp_path)
    assert set(paths) == {"report", "trace", "spec"}
    with open(paths["spec"]) as fh:
        stored = json.load(fh)
    assert stored["spec"]["seeds"] == [0]
    assert stored["spec"]["scenario"] == "rating-sim"
    with open(paths["trace"]) as fh:
        lines = [json.loads(x) for x in fh]
    assert len(lines) == 10
    assert lines[0]["seed"] == 0
    assert len(lines[0]["item_ids"]) == 10
    with open(paths["report"]) as fh:
        header = fh.readline().strip().split(",")
    assert header == ["seed", "iteration", "mean_rating"]


def test_report_write_without_out_dir_raises():
    rep = run_rate_sim(default_spec("rating-sim", seeds=(0,)))
    with pytest.raises(ValueError):
        rep.write()


def _tiny_world():
    catalog, _ = make_clustered_catalog(
        CatalogSpec(n_clusters=4, members=3, dim=6, spread=0.1, seed=2))
    oracle = make_oracle(OracleConfig(embed_dim=6, hidden_dim=16, channels=3,
                                      timepoints=20, seed=2))
    decoder = SemanticDecoder.for_oracle(oracle)
    return catalog, oracle, decoder


def test_compute_metrics_self_target_is_perfect():
    catalog, oracle, decoder = _tiny_world()
    target_item = catalog[5]
    target = semantic_target(oracle, decoder, target_item)

    def fn(item):
        return float(decoder.decode(oracle.noiseless(item.embedding)).values
                     @ target.feature.values)

    cfg = SearchConfig(batch_size=4, max_iterations=4, top_k=1,
                       temperature=1e-5)
    _, trace = run_search(catalog, cfg, fn, RngHandle(0))
    metrics = compute_metrics(trace, target, catalog, oracle, decoder=decoder)
    assert set(metrics) == {"SS", "IS", "L1", "best_step"}
    assert 1 <= metrics["best_step"] <= 4
    best = catalog[catalog.index_of(trace[-1].best_id)]
    if best.id == target_item.id:
        assert metrics["SS"] == pytest.approx(1.0, abs=1e-9)
        assert metrics["IS"] == pytest.approx(1.0, abs=1e-9)
        assert metrics["L1"] == pytest.approx(0.0, abs=1e-9)
    else:
        assert metrics["SS"] <= 1.0


def test_compute_metrics_psd_target_and_errors():
    catalog, oracle, decoder = _tiny_world()
    target = psd_target(oracle, catalog[0])
    cfg = SearchConfig(batch_size=3, max_iterations=2, top_k=1)

    def fn(item):
        return 1.0 if item.id == catalog[0].id else 0.0

    _, trace = run_search(catalog, cfg, fn, RngHandle(1))
    metrics = compute_metrics(trace, target, catalog, oracle)
    assert np.isfinite(metrics["SS"]) and np.isfinite(metrics["L1"])

    sem = semantic_target(oracle, decoder, catalog[0])
    with pytest.raises(ValueError, match="decoder"):
        compute_metrics(trace, sem, catalog, oracle)
    with pytest.raises(ValueError, match="empty"):
        compute_metrics([], sem, catalog, oracle, decoder=decoder)


def test_best_step_is_first_iteration_reaching_best():
    catalog, oracle, decoder = _tiny_world()
    target = semantic_target(oracle, decoder, catalog[0])
    cfg = SearchConfig(batch_size=12, max_iterations=3, top_k=1)

    # every item shown in round one; later rounds cannot improve
    def fn(item):
        return float(item.embedding @ catalog[0].embedding)

    _, trace = run_search(catalog, cfg, fn, RngHandle(3))
    metrics = compute_metrics(trace, target, catalog, oracle, decoder=decoder)
    assert metrics["best_step"] == 1


def test_rate_sim_traces_match_session_helper():
    from stimloop.bench import rate_sim_session

    spec = default_spec("rating-sim", seeds=(7,))
    rep = run_rate_sim(spec)
    catalog, _ = make_clustered_catalog(spec.catalog)
    _, records = rate_sim_session(catalog, SearchConfig(**spec.search), 7)
    assert [r.to_json() for _, r in rep.traces] == \
           [r.to_json() for r in records]


def test_grid_spec_from_json_rejects_unknown_field():
    with pytest.raises(TypeError):
        ExperimentSpec.from_json({"scenario": "grid", "typo": 1})
