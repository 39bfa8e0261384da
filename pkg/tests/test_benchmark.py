"""Chain generator and timing-harness tests."""

import io
import os

import pytest

from n3compose import benchmark, n3, reason, restdesc
from n3compose.benchmark import ChainSpec, generate_chain
from n3compose.n3 import UniversalVar, Uri
from n3compose.reason import Budget


def prove_chain(bundle, budget=Budget()):
    kb = reason.KnowledgeBase()
    kb.add_source("initial", bundle.initial)
    return reason.prove(kb, bundle.descriptions, bundle.goal, budget)


# ---------------------------------------------------------------------------
# Spec validation
# ---------------------------------------------------------------------------

def test_spec_bounds():
    with pytest.raises(ValueError):
        ChainSpec(n=1)
    with pytest.raises(ValueError):
        ChainSpec(n=2, d=0)
    with pytest.raises(ValueError):
        ChainSpec(n=2, dummies=-1)


# ---------------------------------------------------------------------------
# Generation shape
# ---------------------------------------------------------------------------

def test_descriptions_have_the_documented_shape():
    bundle = generate_chain(ChainSpec(n=3, d=2))
    assert [iri for iri, _ in bundle.descriptions] == ["desc1", "desc2", "desc3"]
    _, middle = bundle.descriptions[1]
    desc = restdesc.validate_description(middle, "desc2")
    assert isinstance(desc, restdesc.RestDescription)
    # d antecedent links over rel_2, d promised links over rel_3
    pre_preds = {t.predicate for t in desc.precondition.atoms}
    assert pre_preds == {Uri(benchmark.CHAIN_NS + "rel2")}
    assert len(desc.precondition.atoms) == 2
    post_preds = {t.predicate for t in desc.postcondition.atoms}
    assert post_preds == {Uri(benchmark.CHAIN_NS + "rel3")}
    assert len(desc.postcondition.atoms) == 2
    assert desc.request.method_name == n3.Literal("GET")
    # the GET targets the endpoint variable of the antecedent path
    assert desc.request.request_uri == desc.precondition.atoms[-1].object
    assert isinstance(desc.request.request_uri, UniversalVar)


def test_initial_facts_ground_only_the_first_level():
    bundle = generate_chain(ChainSpec(n=4, d=3))
    assert len(bundle.initial.body.atoms) == 3
    preds = {t.predicate for t in bundle.initial.body.atoms}
    assert preds == {Uri(benchmark.CHAIN_NS + "rel1")}
    assert n3.is_ground(bundle.initial.body)


def test_generation_is_deterministic():
    a = generate_chain(ChainSpec(n=4, d=2, dummies=5, seed=9))
    b = generate_chain(ChainSpec(n=4, d=2, dummies=5, seed=9))
    assert n3.serialize(a.initial) == n3.serialize(b.initial)
    assert [(i, n3.serialize(d)) for i, d in a.descriptions] \
        == [(i, n3.serialize(d)) for i, d in b.descriptions]
    assert a.link_table == b.link_table


def test_seeds_produce_distinct_node_spaces():
    a = generate_chain(ChainSpec(n=2, seed=0))
    b = generate_chain(ChainSpec(n=2, seed=1))
    assert n3.serialize(a.initial) != n3.serialize(b.initial)


def test_write_chain_is_byte_identical(tmp_path):
    spec = ChainSpec(n=3, d=2, dummies=4, seed=5)
    first = benchmark.write_chain(generate_chain(spec), tmp_path / "a")
    second = benchmark.write_chain(generate_chain(spec), tmp_path / "b")
    assert [os.path.basename(p) for p in first] == [os.path.basename(p) for p in second]
    for fa, fb in zip(first, second):
        with open(fa) as ha, open(fb) as hb:
            assert ha.read() == hb.read()


def test_dummies_are_split_into_families_of_at_most_n():
    bundle = generate_chain(ChainSpec(n=3, dummies=7))
    dummy_iris = [iri for iri, _ in bundle.descriptions if iri.startswith("dummy")]
    assert len(dummy_iris) == 7
    families = {iri.split("_")[0] for iri in dummy_iris}
    assert families == {"dummy1", "dummy2", "dummy3"}
    assert bundle.plan == ["desc1", "desc2", "desc3"]


# ---------------------------------------------------------------------------
# Proof counts
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n,d", [(2, 1), (3, 2), (5, 3)])
def test_pre_proof_has_exactly_n_applications(n, d):
    bundle = generate_chain(ChainSpec(n=n, d=d))
    proof = prove_chain(bundle)
    assert reason.count_rule_applications(proof, bundle.rule_iris()) == n


def test_dummies_change_nothing_about_the_proof():
    plain = prove_chain(generate_chain(ChainSpec(n=4, d=1)))
    noisy = prove_chain(generate_chain(ChainSpec(n=4, d=1, dummies=64)))
    for proof in (plain, noisy):
        assert reason.count_rule_applications(
            proof, [f"desc{i}" for i in range(1, 5)]) == 4
    dummy_iris = [iri for iri, _ in
                  generate_chain(ChainSpec(n=4, d=1, dummies=64)).descriptions
                  if iri.startswith("dummy")]
    assert reason.count_rule_applications(noisy, dummy_iris) == 0


def test_link_table_covers_the_whole_plan():
    bundle = generate_chain(ChainSpec(n=5, d=2))
    assert len(bundle.link_table) == 5
    for body in bundle.link_table.values():
        doc = n3.parse_document(body)
        assert n3.is_ground(doc.body)
        assert len(doc.body.atoms) == 2


# ---------------------------------------------------------------------------
# Timing harness
# ---------------------------------------------------------------------------

def test_run_benchmark_produces_one_record_per_trial():
    grid = [ChainSpec(n=2), ChainSpec(n=3)]
    records = benchmark.run_benchmark(grid, trials=2)
    assert len(records) == 4
    assert {r.trial for r in records} == {0, 1}     # warm-up discarded
    for r in records:
        assert r.n_pre == r.spec.n
        assert r.error == ""
        assert r.total_s == pytest.approx(r.parse_s + r.reason_s)


def test_run_benchmark_records_failures_instead_of_crashing():
    records = benchmark.run_benchmark(
        [ChainSpec(n=8)], trials=1, budget=Budget(max_steps=2, max_seconds=60))
    assert len(records) == 1
    assert records[0].n_pre is None
    assert "BudgetExceeded" in records[0].error


def test_run_benchmark_requires_a_trial():
    with pytest.raises(ValueError):
        benchmark.run_benchmark([ChainSpec(n=2)], trials=0)


def test_csv_round_trip():
    records = benchmark.run_benchmark([ChainSpec(n=2, d=2, dummies=3)], trials=1)
    buf = io.StringIO()
    benchmark.write_csv(records, buf)
    buf.seek(0)
    rows = benchmark.read_csv(buf)
    assert len(rows) == 1
    row = rows[0]
    assert list(row) == benchmark.CSV_COLUMNS
    assert (row["n"], row["d"], row["dummies"]) == ("2", "2", "3")
    assert row["n_pre"] == "2"
    assert float(row["total_ms"]) == pytest.approx(
        float(row["parse_ms"]) + float(row["reason_ms"]), abs=0.01)
