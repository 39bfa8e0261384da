"""Composition-loop tests: the image scenario end to end, fault paths,
state handling across retirements, and loop invariants."""

import pytest

from n3compose import agent, benchmark, n3, reason, restdesc, simulator
from n3compose.n3 import Document, Formula, Uri
from n3compose.simulator import FaultConfig, ImageServer, WireResponse

import helpers

DBPEDIA_OWL = "http://dbpedia.org/ontology/"


def image_problem():
    kb, rule_sources, descriptions, goal = helpers.image_setup()
    return agent.CompositionProblem(
        initial=[("agent_knowledge", helpers.load_doc("agent_knowledge"))],
        goal=goal, rules=descriptions)


def chain_problem(n=4, d=1):
    bundle = benchmark.generate_chain(benchmark.ChainSpec(n=n, d=d))
    descs = [restdesc.validate_description(doc, iri)
             for iri, doc in bundle.descriptions]
    problem = agent.CompositionProblem(
        initial=[("initial", bundle.initial)], goal=bundle.goal, rules=descs)
    return problem, bundle


# ---------------------------------------------------------------------------
# Image scenario
# ---------------------------------------------------------------------------

def test_image_run_succeeds_with_expected_trace():
    outcome = agent.run(image_problem(), ImageServer())
    assert outcome.success
    assert [s.request.method for s in outcome.trace] == ["POST", "GET"]
    assert outcome.trace[0].request.target == "/images/"
    assert outcome.trace[1].request.target == "/images/24/thumbnail"
    assert [(s.n_pre, s.n_post) for s in outcome.trace] == [(2, 1), (1, 0)]
    assert all(s.decision == "advance" for s in outcome.trace)
    assert outcome.retired == []
    instance = outcome.goal_instance
    assert n3.is_ground(instance)
    assert instance.atoms[0] == n3.Triple(
        Uri("lena.jpg"), Uri(DBPEDIA_OWL + "thumbnail"),
        Uri("/images/24/thumbnail"))


def test_get_target_comes_from_the_previous_response():
    server = ImageServer(counter_start=37)
    outcome = agent.run(image_problem(), server)
    assert outcome.success
    assert outcome.trace[1].request.target == "/images/37/thumbnail"


def test_goal_already_satisfied_executes_nothing():
    kb_doc = n3.parse_document(
        "<lena.jpg> <http://dbpedia.org/ontology/thumbnail> <t>.")
    _, _, descriptions, goal = helpers.image_setup()
    problem = agent.CompositionProblem(
        initial=[("observed", kb_doc)], goal=goal, rules=descriptions)

    class Untouchable:
        def send(self, req):
            raise AssertionError("no request should be sent")

    outcome = agent.run(problem, Untouchable())
    assert outcome.success and outcome.trace == []
    assert outcome.goal_instance.atoms[0].object == Uri("t")


def test_unreachable_goal_fails_before_executing():
    goal = reason.FilterRule.from_document("goal", n3.parse_document(
        "{ <a> <unrelated> ?x. } => { <a> <unrelated> ?x. }."))
    _, _, descriptions, _ = helpers.image_setup()
    problem = agent.CompositionProblem(
        initial=[("agent_knowledge", helpers.load_doc("agent_knowledge"))],
        goal=goal, rules=descriptions)
    outcome = agent.run(problem, ImageServer())
    assert not outcome.success and outcome.trace == []


# ---------------------------------------------------------------------------
# Fault handling (retirement path)
# ---------------------------------------------------------------------------

def test_empty_response_retires_the_rule_and_fails():
    server = ImageServer(faults=FaultConfig(drop_body=True))
    outcome = agent.run(image_problem(), server)
    assert not outcome.success
    first = outcome.trace[0]
    assert first.decision == "retire"
    assert first.n_post == first.n_pre        # no progress observed
    assert outcome.retired == ["desc_images"]


def test_wrong_triples_also_retire():
    server = ImageServer(faults=FaultConfig(wrong_triples=True))
    outcome = agent.run(image_problem(), server)
    assert not outcome.success
    assert outcome.retired == ["desc_images"]


def test_server_error_yields_empty_g_with_warning():
    server = ImageServer(faults=FaultConfig(server_error=True))
    outcome = agent.run(image_problem(), server)
    assert not outcome.success
    first = outcome.trace[0]
    assert first.response_status == 500
    assert not first.g
    assert any("non-success" in w for w in first.warnings)


def test_fault_toggle_pair():
    faults = FaultConfig(drop_body=True)
    assert not agent.run(image_problem(), ImageServer(faults=faults)).success
    assert agent.run(image_problem(), ImageServer()).success


def test_retirement_restarts_from_original_h():
    # after desc1 retires, desc2's precondition (learned only from desc1's
    # response) is gone again, so the run fails instead of looping
    problem, bundle = chain_problem(n=2)
    server = simulator.ChainServer({})      # 404 for everything
    outcome = agent.run(problem, server)
    assert not outcome.success
    assert outcome.retired == ["desc1"]
    assert len(outcome.trace) == 1


def test_keep_learned_retains_responses_across_retirement():
    # good responses for the first chain, then the server goes dark;
    # keeping learned facts preserves the progress already made
    problem, bundle = chain_problem(n=3)
    real = simulator.ChainServer(bundle.link_table)

    class FlakyLast:
        def __init__(self):
            self.count = 0

        def send(self, req):
            self.count += 1
            if self.count >= 3:
                return WireResponse(status=500, body="")
            return real.send(req)

    fresh = agent.run(problem, FlakyLast())
    assert not fresh.success

    problem2, bundle2 = chain_problem(n=3)
    real2 = simulator.ChainServer(bundle2.link_table)

    class FlakyLast2(FlakyLast):
        def send(self, req):
            self.count += 1
            if self.count >= 3:
                return WireResponse(status=500, body="")
            return real2.send(req)

    kept = agent.run(problem2, FlakyLast2(), keep_learned=True)
    # with desc3 retired but responses kept, the goal is still unreachable,
    # yet the learned facts keep n_pre below the from-scratch value
    assert not kept.success
    assert kept.retired == ["desc3"]


# ---------------------------------------------------------------------------
# Response incorporation
# ---------------------------------------------------------------------------

def test_incorporate_keeps_only_ground_triples():
    warnings = []
    g = agent.incorporate_response(Formula(), WireResponse(
        status=200, body="<a> <p> <b>. _:x <p> <c>. ?v <p> <d>."), warnings)
    assert len(g.atoms) == 1
    assert len(warnings) == 2


def test_incorporate_drops_rules_with_warning():
    warnings = []
    g = agent.incorporate_response(Formula(), WireResponse(
        status=200, body="<a> <p> <b>. { <x> <y> <z>. } => { <u> <v> <w>. }."),
        warnings)
    assert len(g.atoms) == 1 and not g.implications
    assert any("rules" in w for w in warnings)


def test_incorporate_handles_unparseable_body():
    warnings = []
    g = agent.incorporate_response(Formula(), WireResponse(
        status=200, body="this is not n3 {"), warnings)
    assert not g
    assert any("unparseable" in w for w in warnings)


def test_incorporate_ignores_error_statuses():
    assert not agent.incorporate_response(
        Formula(), WireResponse(status=404, body="<a> <p> <b>."))


# ---------------------------------------------------------------------------
# Selection
# ---------------------------------------------------------------------------

def test_select_request_picks_first_sufficient_in_order():
    kb, rule_sources, descriptions, goal = helpers.image_setup()
    proof = reason.prove(kb, rule_sources, goal)
    selected = agent.select_request(proof, descriptions)
    assert selected.rule_source == "desc_images"


def test_select_request_raises_when_nothing_is_executable():
    # a non-ground fact leaves the only request with a variable hole
    kb = reason.KnowledgeBase()
    kb.add_text("facts", "<lena.jpg> <http://example.org/image#smallThumbnail> _:x.")
    thumb = helpers.load_doc("desc_thumbnail")
    goal = reason.FilterRule.from_document("goal", helpers.load_doc("agent_goal"))
    proof = reason.prove(kb, [("desc_thumbnail", thumb)], goal)
    desc = restdesc.validate_description(thumb, "desc_thumbnail")
    with pytest.raises(agent.NoneSelectable):
        agent.select_request(proof, [desc])


# ---------------------------------------------------------------------------
# Problem validation and trace output
# ---------------------------------------------------------------------------

def test_problem_rejects_non_ground_initial_state():
    _, _, descriptions, goal = helpers.image_setup()
    bad = n3.parse_document("_:x a <http://dbpedia.org/resource/Image>.")
    with pytest.raises(agent.CompositionError):
        agent.CompositionProblem(initial=[("h", bad)], goal=goal,
                                 rules=descriptions)


def test_problem_rejects_existential_background_heads():
    _, _, descriptions, goal = helpers.image_setup()
    bad = n3.parse_document("{ ?x <p> ?y. } => { ?x <q> _:n. }.")
    with pytest.raises(agent.CompositionError):
        agent.CompositionProblem(
            initial=[("agent_knowledge", helpers.load_doc("agent_knowledge"))],
            goal=goal, rules=descriptions, background=[("b", bad)])


def test_problem_rejects_duplicate_rule_sources():
    _, _, descriptions, goal = helpers.image_setup()
    with pytest.raises(agent.CompositionError):
        agent.CompositionProblem(
            initial=[("agent_knowledge", helpers.load_doc("agent_knowledge"))],
            goal=goal, rules=descriptions + [descriptions[0]])


def test_trace_document_round_trips_through_n3():
    outcome = agent.run(image_problem(), ImageServer())
    doc = agent.trace_document(outcome)
    again = n3.parse_document(n3.serialize(doc))
    assert again.body == doc.body
    statuses = [t.object for t in doc.body.atoms
                if t.predicate == Uri(agent.TRACE_NS + "status")]
    assert n3.Literal("success") in statuses


# ---------------------------------------------------------------------------
# Loop invariants on the chain benchmark
# ---------------------------------------------------------------------------

def test_chain_run_descends_strictly():
    problem, bundle = chain_problem(n=4, d=2)
    server = simulator.ChainServer(bundle.link_table)
    outcome = agent.run(problem, server)
    assert outcome.success
    assert server.operations == 4
    assert [s.rule_source for s in outcome.trace] == bundle.plan
    n_pres = [s.n_pre for s in outcome.trace]
    assert n_pres == [4, 3, 2, 1]
    assert all(s.n_post == s.n_pre - 1 for s in outcome.trace)


def test_every_get_target_was_seen_in_state_or_responses():
    problem, bundle = chain_problem(n=4)
    server = simulator.ChainServer(bundle.link_table)
    outcome = agent.run(problem, server)
    known = {t.object.value for t in bundle.initial.body.atoms
             if isinstance(t.object, Uri)}
    known |= {t.subject.value for t in bundle.initial.body.atoms
              if isinstance(t.subject, Uri)}
    for step in outcome.trace:
        assert step.request.target in known
        for atom in step.g.atoms:
            for term in atom.terms():
                if isinstance(term, Uri):
                    known.add(term.value)
