import math
import random

import pytest

from podfed.policy import PUBLIC_KEY, KeyStore, PolicyKeyMap
from podfed.quads import Quad, iri, literal
from podfed.summary import (
    ANY_SOURCE,
    AmfParams,
    BloomFilter,
    ExactFilter,
    FileSummary,
    ParamsMismatchError,
    create_file_summary,
    false_positive_estimate,
    false_positive_rate,
    summary_add,
    summary_combine,
    summary_contains,
    summary_initialize,
)

PARAMS = AmfParams(m=4096, h=5)
SRC = "urn:test:file"


def random_terms(rng, n, tag="t"):
    return [iri(f"urn:{tag}:{i}:{rng.getrandbits(32):08x}") for i in range(n)]


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            AmfParams(m=4, h=5)
        with pytest.raises(ValueError):
            AmfParams(m=4096, h=0)
        with pytest.raises(ValueError):
            AmfParams(m=4096, h=5, hash_alg=2)


class TestMembership:
    def test_no_false_negatives(self):
        rng = random.Random(101)
        f = summary_initialize(PARAMS)
        entries = [
            (term, rng.randbytes(8), f"urn:src:{rng.getrandbits(16)}")
            for term in random_terms(rng, 200)
        ]
        for term, key, src in entries:
            summary_add(f, term, key, src)
        for term, key, src in entries:
            assert summary_contains(f, term, key, src)
            assert summary_contains(f, term, key, ANY_SOURCE)

    def test_wrong_key_or_source_not_found(self):
        # large filter, so a false positive here would be astronomically rare
        f = summary_initialize(AmfParams(m=2**17, h=11))
        summary_add(f, iri("urn:secret"), b"right-key", SRC)
        assert not summary_contains(f, iri("urn:secret"), b"wrong-key", SRC)
        assert not summary_contains(f, iri("urn:secret"), b"right-key", "urn:test:other")
        assert not summary_contains(f, iri("urn:other"), b"right-key", SRC)

    def test_adding_under_wildcard_source_is_rejected(self):
        f = summary_initialize(PARAMS)
        with pytest.raises(ValueError):
            summary_add(f, iri("urn:x"), b"k", ANY_SOURCE)

    def test_each_add_counts_two_effective_inserts(self):
        f = summary_initialize(PARAMS)
        for i in range(7):
            summary_add(f, iri(f"urn:x:{i}"), b"k", SRC)
        assert f.approx_inserts == 14

    def test_exact_filter_has_no_false_positives(self):
        f = summary_initialize(PARAMS, ExactFilter)
        for i in range(50):
            summary_add(f, iri(f"urn:in:{i}"), b"k", SRC)
        assert all(summary_contains(f, iri(f"urn:in:{i}"), b"k", SRC) for i in range(50))
        assert not any(
            summary_contains(f, iri(f"urn:out:{i}"), b"k", SRC) for i in range(1000)
        )


class TestCombine:
    def build(self, elements, filter_cls=BloomFilter):
        f = summary_initialize(PARAMS, filter_cls)
        for term, key, src in elements:
            summary_add(f, term, key, src)
        return f

    def elements(self, rng, n):
        return [(t, rng.randbytes(4), SRC) for t in random_terms(rng, n)]

    def test_union_equals_build_from_union(self):
        rng = random.Random(77)
        a_elems, b_elems = self.elements(rng, 40), self.elements(rng, 25)
        combined = summary_combine(self.build(a_elems), self.build(b_elems))
        assert combined == self.build(a_elems + b_elems)
        assert combined.approx_inserts == 2 * (40 + 25)

    def test_algebraic_laws(self):
        rng = random.Random(78)
        for _ in range(30):
            a = self.build(self.elements(rng, rng.randrange(0, 30)))
            b = self.build(self.elements(rng, rng.randrange(0, 30)))
            c = self.build(self.elements(rng, rng.randrange(0, 30)))
            assert summary_combine(a, b) == summary_combine(b, a)
            assert summary_combine(summary_combine(a, b), c) == summary_combine(
                a, summary_combine(b, c)
            )
            assert summary_combine(a, a) == a

    def test_exact_filters_combine_too(self):
        rng = random.Random(79)
        a_elems, b_elems = self.elements(rng, 10), self.elements(rng, 10)
        a = self.build(a_elems, ExactFilter)
        b = self.build(b_elems, ExactFilter)
        assert summary_combine(a, b) == self.build(a_elems + b_elems, ExactFilter)

    def test_mismatched_params_rejected(self):
        with pytest.raises(ParamsMismatchError):
            summary_combine(
                summary_initialize(PARAMS), summary_initialize(AmfParams(m=8192, h=5))
            )

    def test_mismatched_types_rejected(self):
        with pytest.raises(ParamsMismatchError):
            summary_combine(
                summary_initialize(PARAMS), summary_initialize(PARAMS, ExactFilter)
            )


class TestSerialization:
    def test_filter_header_layout(self):
        f = BloomFilter(AmfParams(m=64, h=3))
        f.insert_digest(bytes(range(32)))
        data = f.to_bytes()
        assert data[:4] == b"PPFS"
        assert data[4] == 1  # format version
        assert data[5] == 1  # hash algorithm tag
        assert data[6:8] == (3).to_bytes(2, "little")
        assert data[8:16] == (64).to_bytes(8, "little")
        assert len(data) == 16 + 64 // 8

    def test_bit_placement_is_lsb_first(self):
        f = BloomFilter(AmfParams(m=16, h=1))
        # h1 = 13, h2 irrelevant at h=1: bit 13 lives in byte 1, position 5
        f.insert_digest((13).to_bytes(8, "little") + bytes(24))
        assert bytes(f.bits) == bytes([0x00, 0x20])

    def test_filter_round_trip_with_offset(self):
        f = summary_initialize(PARAMS)
        summary_add(f, iri("urn:x"), b"k", SRC)
        blob = b"prefix" + f.to_bytes()
        parsed, end = BloomFilter.from_bytes(blob, offset=6)
        assert parsed == f
        assert end == len(blob)

    def test_filter_rejects_bad_magic_and_truncation(self):
        f = summary_initialize(PARAMS)
        with pytest.raises(ValueError, match="magic"):
            BloomFilter.from_bytes(b"XXXX" + f.to_bytes()[4:])
        with pytest.raises(ValueError, match="truncated"):
            BloomFilter.from_bytes(f.to_bytes()[:-1])

    def test_file_summary_round_trip(self):
        quads = [Quad(iri("urn:s"), iri("urn:p"), literal("o"))]
        key_map = PolicyKeyMap({quads[0]: frozenset()})
        summary = create_file_summary(quads, SRC, key_map, PARAMS)
        parsed = FileSummary.from_bytes(summary.to_bytes())
        assert parsed.source_uri == SRC
        assert parsed.filters() == summary.filters()
        assert parsed.to_bytes()[:4] == b"PPSF"


class TestFileSummary:
    def test_uncovered_quads_contribute_nothing(self):
        quad = Quad(iri("urn:s"), iri("urn:p"), literal("o"))
        summary = create_file_summary([quad], SRC, PolicyKeyMap({quad: frozenset()}), PARAMS)
        assert all(f.popcount == 0 for f in summary.filters())

    def test_covered_quads_probe_positive_per_component(self):
        quad = Quad(iri("urn:s"), iri("urn:p"), literal("o"))
        key_map = _single_key_map(quad, b"k1")
        summary = create_file_summary([quad], SRC, key_map, PARAMS)
        for name in ("subject", "predicate", "object", "graph"):
            assert summary_contains(summary.component(name), quad.component(name), b"k1", SRC)
            assert summary_contains(
                summary.component(name), quad.component(name), b"k1", ANY_SOURCE
            )


def _single_key_map(quad, key):
    from podfed.policy import AccessPolicy, SubjectGroup

    policy = AccessPolicy(
        id="p", subject_group=SubjectGroup("urn:pod", "friends"), effect="permit",
        file_uri=SRC,
    )
    return PolicyKeyMap({quad: frozenset({(policy, key)})})


class TestEstimate:
    def test_empty_filter_never_false_positive(self):
        assert false_positive_estimate(PARAMS, 0) == 0.0

    def test_matches_spelled_out_formula(self):
        params = AmfParams(m=16384, h=11)
        by_hand = (1.0 - math.exp(-11 * (2 * 500) / 16384)) ** 11
        assert false_positive_estimate(params, 500) == pytest.approx(by_hand, rel=1e-12)
        assert false_positive_rate(params, 1000) == pytest.approx(by_hand, rel=1e-12)

    def test_monotone_in_inserts_and_size(self):
        assert false_positive_estimate(PARAMS, 100) < false_positive_estimate(PARAMS, 200)
        assert false_positive_estimate(AmfParams(m=8192, h=5), 100) < false_positive_estimate(
            AmfParams(m=4096, h=5), 100
        )

    def test_negative_inserts_rejected(self):
        with pytest.raises(ValueError):
            false_positive_estimate(PARAMS, -1)
