import numpy as np
import pytest
from hypothesis import given, strategies as st

from nag.corpus import drop_evidence
from nag.evidence import (
    EVIDENCE_KINDS,
    EncoderParams,
    EvidenceSet,
    encode_evidence,
    encode_item,
    evidence,
    format_evidence,
    parse_evidence,
    posterior,
    posterior_of,
    split_identifier,
)


def test_split_identifier_camel_and_delimiters():
    assert split_identifier("writeLinesToFile") == ("write", "lines", "to", "file")
    assert split_identifier("java.io.FileWriter") == ("java", "io", "file", "writer")
    assert split_identifier("HTTPServer") == ("http", "server")


def test_empty_evidence_encodes_to_nothing():
    assert encode_evidence(EvidenceSet(), EncoderParams()) == []


def test_multiset_items_encode_identically():
    p = EncoderParams()
    x = evidence(fieldTypes=[("file", "writer"), ("file", "writer")])
    encoded = encode_evidence(x, p)
    assert len(encoded) == 2
    assert np.array_equal(encoded[0][1], encoded[1][1])


def test_token_order_is_irrelevant():
    p = EncoderParams()
    a = encode_item("javadocKeywords", ("write", "lines", "to"), p)
    b = encode_item("javadocKeywords", ("to", "write", "lines"), p)
    assert np.array_equal(a, b)


def test_posterior_prior_with_no_evidence():
    post = posterior([], EncoderParams())
    assert np.allclose(post.mean, 0.0)
    assert post.variance == pytest.approx(1.0)


def test_posterior_single_unit_item():
    p = EncoderParams(dim=4)
    e1 = np.array([1.0, 0.0, 0.0, 0.0])
    post = posterior([(0, e1)], p)
    assert np.allclose(post.mean, e1 / 2.0)
    assert post.variance == pytest.approx(0.5)


def test_posterior_two_identical_items():
    p = EncoderParams(dim=4)
    e1 = np.array([1.0, 0.0, 0.0, 0.0])
    post = posterior([(0, e1), (0, e1)], p)
    assert np.allclose(post.mean, 2.0 * e1 / 3.0)
    assert post.variance == pytest.approx(1.0 / 3.0)


def test_posterior_rejects_bad_sigma():
    with pytest.raises(ValueError):
        EncoderParams(sigma2=np.zeros(len(EVIDENCE_KINDS)))


@given(st.integers(min_value=0, max_value=30))
def test_variance_strictly_decreases_with_items(n):
    p = EncoderParams(dim=4)
    items = [(i % len(EVIDENCE_KINDS), np.ones(4)) for i in range(n + 1)]
    more = posterior(items, p).variance
    fewer = posterior(items[:-1], p).variance
    assert more < fewer


def test_evidence_text_roundtrip():
    x = evidence(
        classNameKeywords=[("file", "util")],
        formalParamTypes=[("file",), ("string",)],
        javadocKeywords=[("write", "lines", "to", "file")],
    )
    assert parse_evidence(format_evidence(x)) == x


def test_drop_evidence_extremes():
    x = evidence(fieldTypes=[("a",), ("b",)], returnType=[("void",)])
    assert drop_evidence(x, 1.0, seed=4) == x
    assert drop_evidence(x, 0.0, seed=4).total_items() == 0


def test_drop_evidence_binomial_concentration():
    many = evidence(fieldTypes=[(f"t{i}",) for i in range(10000)])
    kept = drop_evidence(many, 0.25, seed=9).total_items()
    assert abs(kept / 10000 - 0.25) < 0.02


def test_drop_evidence_deterministic_per_seed():
    x = evidence(fieldTypes=[(f"t{i}",) for i in range(50)])
    assert drop_evidence(x, 0.5, seed=7) == drop_evidence(x, 0.5, seed=7)
    assert drop_evidence(x, 0.5, seed=7) != drop_evidence(x, 0.5, seed=8)


def test_posterior_of_is_deterministic(fig_ctx):
    x = evidence(methodNameKeywords=[("write",)],
                 formalParamTypes=[("file",), ("string",)])
    p = EncoderParams()
    a, b = posterior_of(x, p), posterior_of(x, p)
    assert np.array_equal(a.mean, b.mean) and a.variance == b.variance
