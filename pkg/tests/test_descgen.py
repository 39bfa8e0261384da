"""Description-skeleton generation tests: trace parsing, clustering,
generalization, and the linking step."""

import pytest

from n3compose import descgen, n3, restdesc
from n3compose.descgen import (
    canonical_body, cluster_responses, generate_skeletons, levenshtein,
    parse_trace, similarity,
)
from n3compose.n3 import (
    ExistentialVar, Formula, GraphTerm, Implication, Literal, Triple,
    UniversalVar, Uri,
)

import helpers


def load_trace():
    with open(helpers.fixture_path("interaction_trace.txt")) as fh:
        return parse_trace(fh.read())


# ---------------------------------------------------------------------------
# Trace parsing
# ---------------------------------------------------------------------------

def test_delimited_trace_parses_into_four_entries():
    trace = load_trace()
    assert [(e.request.method, e.request.target) for e in trace] == [
        ("POST", "/images/"), ("GET", "/images/24/thumbnail"),
        ("POST", "/images/"), ("GET", "/images/25/thumbnail")]
    assert trace[0].request.body_ref == "image1.jpg"
    assert trace[1].request.body_ref is None
    body = n3.parse_document(trace[0].response.body).body
    assert len(body.atoms) == 3


def test_n3_trace_format_is_equivalent():
    delimited = load_trace()
    first_body = delimited[0].response.body.replace('"', '\\"')
    text = f"""
        @prefix http: <http://www.w3.org/2011/http#>.
        _:r1 http:methodName "POST";
             http:requestURI "/images/";
             http:body <image1.jpg>;
             http:resp [ http:body "{first_body}" ].
    """
    entries = parse_trace(text)
    assert len(entries) == 1
    entry = entries[0]
    assert entry.request.method == "POST"
    assert entry.request.target == "/images/"
    assert entry.request.body_ref == "image1.jpg"
    assert n3.parse_document(entry.response.body).body \
        == n3.parse_document(delimited[0].response.body).body


def test_empty_trace_raises():
    with pytest.raises(descgen.DescGenError):
        parse_trace("just some text without requests")


# ---------------------------------------------------------------------------
# Similarity
# ---------------------------------------------------------------------------

def test_levenshtein_basics():
    assert levenshtein("", "abc") == 3
    assert levenshtein("kitten", "sitting") == 3
    assert levenshtein("same", "same") == 0


def test_similarity_bounds():
    assert similarity("", "") == 1.0
    assert similarity("abc", "abc") == 1.0
    assert similarity("abc", "xyz") == 0.0


def test_canonical_body_is_order_and_prefix_insensitive():
    a = "@prefix ex: <http://e/>.\nex:a ex:p ex:b.\nex:c ex:p ex:d.\n"
    b = "<http://e/c> <http://e/p> <http://e/d>. <http://e/a> <http://e/p> <http://e/b>."
    assert canonical_body(a) == canonical_body(b)


# ---------------------------------------------------------------------------
# Clustering
# ---------------------------------------------------------------------------

def test_default_threshold_gives_two_clusters():
    trace = load_trace()
    clusters = cluster_responses(trace)
    assert len(clusters) == 2
    assert [c.method for c in clusters] == ["POST", "GET"]
    assert clusters[0].members == [0, 2]
    assert clusters[1].members == [1, 3]


def test_threshold_one_keeps_every_entry_separate():
    clusters = cluster_responses(load_trace(), threshold=1.0)
    assert len(clusters) == 4
    assert all(len(c.members) == 1 for c in clusters)


def test_identical_bodies_with_different_methods_stay_apart():
    from n3compose.restdesc import WireRequest
    from n3compose.simulator import WireResponse
    body = "<a> <p> <b>.\n"
    trace = [
        descgen.TraceEntry(WireRequest("GET", "/x"), WireResponse(200, body=body)),
        descgen.TraceEntry(WireRequest("POST", "/x"), WireResponse(200, body=body)),
    ]
    assert len(cluster_responses(trace)) == 2


def test_empty_cluster_input_raises():
    with pytest.raises(descgen.DescGenError):
        cluster_responses([])


# ---------------------------------------------------------------------------
# Skeletons
# ---------------------------------------------------------------------------

def make_skeletons():
    trace = load_trace()
    clusters = cluster_responses(trace)
    return generate_skeletons(clusters, trace), clusters


def test_post_skeleton_shape():
    skeletons, _ = make_skeletons()
    post = skeletons[0].document
    imp = post.body.implications[0]
    # posted local files become a universal typed in the antecedent
    assert imp.antecedent.formula.atoms == (
        Triple(UniversalVar("object1"), Uri(n3.RDF_TYPE), descgen.LOCAL_FILE),)
    consequent = imp.consequent.formula
    uri = [t.object for t in consequent.atoms if t.predicate == restdesc.REQUEST_URI]
    assert uri == [Literal("/images/")]      # constant across members
    body = [t.object for t in consequent.atoms if t.predicate == restdesc.BODY
            and t.subject == ExistentialVar("request")]
    assert body == [UniversalVar("object1")]
    # the created resource stays an existential placeholder
    created = [t.subject for t in consequent.atoms
               if t.predicate == Uri("http://example.org/image#comments")]
    assert created == [ExistentialVar("object2")]
    assert skeletons[0].generalized["object1"] == ["image1.jpg", "image2.jpg"]
    assert skeletons[0].generalized["object2"] == ["/images/24", "/images/25"]


def test_get_skeleton_is_isomorphic_to_the_thumbnail_description():
    skeletons, _ = make_skeletons()
    get = skeletons[1].document
    target = helpers.load_doc("desc_thumbnail")
    assert n3.formulas_isomorphic(get.body, target.body)


def test_linking_step_lifts_the_mentioning_pattern():
    skeletons, _ = make_skeletons()
    ant = skeletons[1].document.body.implications[0].antecedent.formula
    assert len(ant.atoms) == 1
    link = ant.atoms[0]
    assert link.predicate == Uri("http://example.org/image#smallThumbnail")
    assert isinstance(link.subject, UniversalVar)
    assert isinstance(link.object, UniversalVar)


def test_refined_post_skeleton_matches_the_upload_description():
    # the documented human refinements: identify the posted file with the
    # created resource and move its typing into the antecedent
    skeletons, _ = make_skeletons()
    imp = skeletons[0].document.body.implications[0]
    merge = n3.Substitution({ExistentialVar("object2"): UniversalVar("object1")})
    consequent = n3.apply_substitution(imp.consequent.formula, merge, mode="total")
    typing = Triple(UniversalVar("object1"), Uri(n3.RDF_TYPE),
                    Uri("http://dbpedia.org/resource/Image"))
    assert typing in consequent.atoms
    refined = Implication(
        GraphTerm(Formula([typing])),
        GraphTerm(Formula([t for t in consequent.atoms if t != typing])))
    target = helpers.load_doc("desc_images")
    assert n3.formulas_isomorphic(Formula((), (refined,)), target.body)


def test_singleton_cluster_generalizes_nothing():
    trace = load_trace()[:2]
    clusters = cluster_responses(trace)
    skeletons = generate_skeletons(clusters, trace)
    post = skeletons[0]
    assert post.generalized == {}
    consequent = post.document.body.implications[0].consequent.formula
    assert Triple(ExistentialVar("request"), restdesc.BODY,
                  Uri("image1.jpg")) in consequent.atoms


def test_skeleton_generation_is_deterministic():
    a, _ = make_skeletons()
    b, _ = make_skeletons()
    assert [n3.serialize(s.document) for s in a] \
        == [n3.serialize(s.document) for s in b]


def test_generated_skeletons_validate_as_descriptions():
    skeletons, _ = make_skeletons()
    for s in skeletons:
        result = restdesc.validate_description(s.document, f"skeleton{s.cluster}")
        assert isinstance(result, restdesc.RestDescription)
