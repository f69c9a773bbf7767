import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from termcee.corpus import Document, EventRecord, ParsedToken, filter_stopwords
from termcee.ontology import DupGroup, EventOntology, EventTypeDef, number_roles
from termcee.synthetic import SynthConfig, generate_synthetic
from termcee.terstruct import (
    ComplexityInputs,
    RowPlan,
    Scheme,
    StructureError,
    TerMatrix,
    build_gold_matrices,
    build_gold_matrix,
    build_pairs,
    complexity_cells,
    plan_duplicates,
    required_fields,
)


@pytest.fixture(scope="module")
def sample(sample_raw, stoplist):
    return filter_stopwords(sample_raw, stoplist)


def doc_of(pos_list, records=()):
    return Document("d", tuple(ParsedToken(f"t{i}", p, "ATT", 0, i) for i, p in enumerate(pos_list)), records)


def test_pairs_token_major():
    pairs = build_pairs(doc_of(["n", "n", "n"]), 2)
    assert [(p.token + 1, p.event) for p in pairs] == [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1), (3, 2)]
    assert len(build_pairs(doc_of(["n"]), 1)) == 1
    assert len(build_pairs(doc_of(["n"] * 100), 34)) == 3400


def test_pairs_reject_small_m():
    recs = (EventRecord(1, "EO", {"EquityHolder": (0,)}), EventRecord(2, "EO", {"EquityHolder": (0,)}))
    with pytest.raises(StructureError):
        build_pairs(doc_of(["n"], recs), 1)


def test_time_token_duplicated(sample, ont):
    plan = plan_duplicates(sample, ont)
    january = next(i for i, t in enumerate(sample.tokens) if t.text == "January")
    assert plan.copies(january) == 2
    r = plan.first_row(january)
    assert plan.rows[r:r + 2] == ((january, 0), (january, 1))
    assert plan.row_count == sample.n + 3  # December, January, March


def test_no_predicate_tokens_no_duplication(ont):
    assert plan_duplicates(doc_of(["n", "v", "m"]), ont).row_count == 3


def test_max_group_size_across_types():
    ont = EventOntology((
        EventTypeDef("A", ("a1", "a2"), (DupGroup(frozenset({"a1", "a2"}), frozenset({"nt"})),)),
        EventTypeDef("B", ("b1", "b2", "b3"), (DupGroup(frozenset({"b1", "b2", "b3"}), frozenset({"nt"})),)),
    ))
    plan = plan_duplicates(doc_of(["nt"]), ont)
    # one token, groups of size 2 and 3 both match: original + 2 copies
    assert plan.rows == ((0, 0), (0, 1), (0, 2))


def test_sample_eo_matrix(sample, ont, num):
    plan = plan_duplicates(sample, ont)
    mat = build_gold_matrix(sample, ont, num, 8, plan, "EO")
    text = lambda r: sample.tokens[plan.token_of(r)].text
    cells = {(text(r), plan.rows[r][1], c + 1): tag for r, c, tag in mat.nonzero_cells()}
    assert cells == {
        ("Zhang Chunji", 0, 2): 1, ("1,500,000", 0, 2): 2, ("January", 0, 2): 3, ("January", 1, 2): 4,
        ("8.52", 0, 2): 6,
        ("Liu Hong", 0, 3): 1, ("600,000", 0, 3): 2, ("March", 0, 3): 3, ("March", 1, 3): 4,
        ("2,100,000", 0, 3): 5,
    }
    assert not mat.tags[:, 0].any() and not mat.tags[:, 3:].any()


def test_no_events_of_type_gives_zero_matrix(sample, ont, num):
    plan = plan_duplicates(sample, ont)
    assert not build_gold_matrix(sample, ont, num, 8, plan, "EP").tags.any()


def test_minimal_single_cell(ont, num):
    doc = doc_of(["nh"], (EventRecord(1, "EO", {"EquityHolder": (0,)}),))
    mat = build_gold_matrix(doc, ont, num, 3, plan_duplicates(doc, ont), "EO")
    assert mat.nonzero_cells() == [(0, 0, 1)]


def test_missing_dup_group_rejected(ont, num):
    doc = doc_of(["nh"], (EventRecord(1, "EO", {"EquityHolder": (0,), "StartDate": (0,)}),))
    with pytest.raises(StructureError, match="duplicate group"):
        build_gold_matrix(doc, ont, num, 2, plan_duplicates(doc, ont), "EO")


def test_matrix_json_roundtrip(sample, ont, num):
    mat = build_gold_matrix(sample, ont, num, 8, plan_duplicates(sample, ont), "EO")
    raw = json.loads(json.dumps(mat.to_dict()))
    assert set(raw) == {"type", "m", "rows", "cells"}
    assert TerMatrix.from_dict(raw) == mat


def test_structure_properties_on_synthetic(ont, num):
    docs = generate_synthetic(SynthConfig(doc_count=60, multi_role_rate=0.5, shared_arg_rate=0.4, seed=9), ont)
    for doc in docs:
        plan = plan_duplicates(doc, ont)
        mats = build_gold_matrices(doc, ont, num, 8, plan)
        assert plan.row_count >= doc.n
        assert len(build_pairs(doc, 8)) == doc.n * 8
        stacked = np.stack([mats[t].tags != 0 for t in ont.names])
        assert (stacked.any(axis=1).sum(axis=0) <= 1).all()  # column-type exclusivity
        for t in ont.names:
            fills = sum(len(idxs) for r in doc.gold_records if r.event_type == t for idxs in r.args.values())
            assert np.count_nonzero(mats[t].tags) == fills
            assert mats[t].tags.max(initial=0) <= ont.get(t).role_count
        # row plan invariants
        tokens = [tok for tok, _ in plan.rows]
        assert tokens == sorted(tokens)
        for tok in set(tokens):
            copies = [c for t2, c in plan.rows if t2 == tok]
            assert copies == list(range(len(copies)))


@pytest.mark.parametrize("scheme, inp, expected", [
    (Scheme.DE_PPN, ComplexityInputs(n=10, m=34, r=6), 2040),
    (Scheme.TER_ENTITY, ComplexityInputs(n=10, m=34), 340),
    (Scheme.GIT, ComplexityInputs(n=10, p=3, r=6), 280),
    (Scheme.DOC2EDAG, ComplexityInputs(n=10, p=3, r=6), 180),
    (Scheme.REDEE, ComplexityInputs(n=10, s=5, r=6), 1350),
    (Scheme.SCDEE, ComplexityInputs(s=5, m=34, m_prime=2, k=4, r=6), 218),
    (Scheme.PTPCG, ComplexityInputs(n=10, m_prime=2, k=4, r=6), 148),
    (Scheme.TER_TOKEN, ComplexityInputs(N=200, m=34), 6800),
])
def test_complexity_values(scheme, inp, expected):
    assert complexity_cells(scheme, inp) == expected


def test_complexity_missing_field():
    with pytest.raises(StructureError, match="'p'"):
        complexity_cells("git", ComplexityInputs(n=10, r=6))


FIELDS = ("n", "N", "m", "m_prime", "r", "s", "p", "k")


@settings(max_examples=60, deadline=None)
@given(scheme=st.sampled_from(list(Scheme)), vals=st.lists(st.integers(0, 50), min_size=8, max_size=8),
       which=st.sampled_from(FIELDS), bump=st.integers(1, 20))
def test_complexity_monotone(scheme, vals, which, bump):
    base = dict(zip(FIELDS, vals))
    bigger = dict(base, **{which: base[which] + bump})
    assert complexity_cells(scheme, ComplexityInputs(**bigger)) >= complexity_cells(scheme, ComplexityInputs(**base))


def test_required_fields_cover_formula():
    for scheme in Scheme:
        inp = ComplexityInputs(**{f: 2 for f in required_fields(scheme)})
        assert complexity_cells(scheme, inp) > 0
