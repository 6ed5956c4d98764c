"""Privacy-preserving approximate-membership summaries over quad components.

Elements are (term, access key, source URI) triples. Each triple is encoded
as SHA-256 over a length-prefixed concatenation of its three byte strings,
which makes the encoding injective; the access key is mixed into the hash so
parties without the key see nothing beyond false-positive noise. Probe
positions come from standard double hashing: with ``h1`` the first eight
digest bytes (little-endian) and ``h2`` the next eight with the lowest bit
forced odd, probe ``i`` is ``(h1 + i*h2) mod m``.

Every add inserts the element twice: once under its concrete source URI and
once under the wildcard source (the empty URI), so a client can ask "is this
value in any source?" with a single probe.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .policy import AccessKey, PolicyKeyMap
from .quads import COMPONENTS, Quad, Term, canonical_bytes

# Wildcard source URI: matches elements from every source.
ANY_SOURCE = ""

HASH_SHA256 = 1

FILTER_MAGIC = b"PPFS"
FILE_SUMMARY_MAGIC = b"PPSF"
FORMAT_VERSION = 1


class ParamsMismatchError(ValueError):
    """Raised when combining summaries built with incompatible parameters."""


@dataclass(frozen=True)
class AmfParams:
    """Bitmap size in bits, number of hash probes, and hash algorithm id."""

    m: int
    h: int
    hash_alg: int = HASH_SHA256

    def __post_init__(self):
        if self.m < 8:
            raise ValueError(f"bitmap must have at least 8 bits, got m={self.m}")
        if self.h < 1:
            raise ValueError(f"need at least one hash probe, got h={self.h}")
        if self.hash_alg != HASH_SHA256:
            raise ValueError(f"unsupported hash algorithm id {self.hash_alg}")


# Defaults give < 0.1% false positives at ~5000 effective inserts.
DEFAULT_PARAMS = AmfParams(m=2**17, h=11)


def encode_element(component: bytes, key: AccessKey, source_uri: str) -> bytes:
    """Injective digest of a (component bytes, key, source URI) triple."""
    buf = bytearray()
    for chunk in (component, key, source_uri.encode("utf-8")):
        buf += len(chunk).to_bytes(4, "little")
        buf += chunk
    return hashlib.sha256(bytes(buf)).digest()


class BloomFilter:
    """Mergeable bitmap filter; false positives possible, false negatives never.

    Adds require exclusive access; a filter that is no longer mutated can be
    shared between threads for concurrent reads.
    """

    __slots__ = ("params", "bits", "approx_inserts")

    def __init__(self, params: AmfParams, bits: bytearray | None = None, approx_inserts: int = 0):
        self.params = params
        nbytes = (params.m + 7) // 8
        if bits is None:
            bits = bytearray(nbytes)
        elif len(bits) != nbytes:
            raise ValueError(f"bitmap has {len(bits)} bytes, expected {nbytes}")
        self.bits = bits
        self.approx_inserts = approx_inserts

    def insert_digest(self, digest: bytes):
        m = self.params.m
        h1 = int.from_bytes(digest[:8], "little")
        h2 = int.from_bytes(digest[8:16], "little") | 1
        bits = self.bits
        for i in range(self.params.h):
            j = (h1 + i * h2) % m
            bits[j >> 3] |= 1 << (j & 7)
        self.approx_inserts += 1

    def contains_digest(self, digest: bytes) -> bool:
        m = self.params.m
        h1 = int.from_bytes(digest[:8], "little")
        h2 = int.from_bytes(digest[8:16], "little") | 1
        bits = self.bits
        for i in range(self.params.h):
            j = (h1 + i * h2) % m
            if not bits[j >> 3] & (1 << (j & 7)):
                return False
        return True

    @property
    def popcount(self) -> int:
        return sum(bin(b).count("1") for b in self.bits)

    def copy(self) -> "BloomFilter":
        return BloomFilter(self.params, bytearray(self.bits), self.approx_inserts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BloomFilter):
            return NotImplemented
        return self.params == other.params and self.bits == other.bits

    def __repr__(self) -> str:
        return f"BloomFilter(m={self.params.m}, h={self.params.h}, popcount={self.popcount})"

    def to_bytes(self) -> bytes:
        """Binary form: magic, version, hash-alg, h (LE16), m in bits (LE64),
        then the bitmap with bit j at byte j>>3, position j&7, LSB-first."""
        return (
            FILTER_MAGIC
            + bytes([FORMAT_VERSION, self.params.hash_alg])
            + self.params.h.to_bytes(2, "little")
            + self.params.m.to_bytes(8, "little")
            + bytes(self.bits)
        )

    @classmethod
    def from_bytes(cls, data: bytes, offset: int = 0) -> tuple["BloomFilter", int]:
        if data[offset : offset + 4] != FILTER_MAGIC:
            raise ValueError("bad filter magic")
        version, hash_alg = data[offset + 4], data[offset + 5]
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported filter format version {version}")
        h = int.from_bytes(data[offset + 6 : offset + 8], "little")
        m = int.from_bytes(data[offset + 8 : offset + 16], "little")
        params = AmfParams(m=m, h=h, hash_alg=hash_alg)
        nbytes = (m + 7) // 8
        end = offset + 16 + nbytes
        if len(data) < end:
            raise ValueError("truncated filter bitmap")
        return cls(params, bytearray(data[offset + 16 : end])), end


class ExactFilter:
    """Exact-membership stand-in for a Bloom filter, used as a test oracle.

    Same interface, zero false positives: it simply remembers every inserted
    digest. Not serializable.
    """

    __slots__ = ("params", "digests", "approx_inserts")

    def __init__(self, params: AmfParams, digests: set[bytes] | None = None, approx_inserts: int = 0):
        self.params = params
        self.digests = digests if digests is not None else set()
        self.approx_inserts = approx_inserts

    def insert_digest(self, digest: bytes):
        self.digests.add(digest)
        self.approx_inserts += 1

    def contains_digest(self, digest: bytes) -> bool:
        return digest in self.digests

    @property
    def popcount(self) -> int:
        return len(self.digests)

    def copy(self) -> "ExactFilter":
        return ExactFilter(self.params, set(self.digests), self.approx_inserts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExactFilter):
            return NotImplemented
        return self.params == other.params and self.digests == other.digests

    def __repr__(self) -> str:
        return f"ExactFilter(entries={len(self.digests)})"


FilterFactory = Callable[[AmfParams], "BloomFilter | ExactFilter"]


def summary_initialize(params: AmfParams, filter_cls: FilterFactory = BloomFilter):
    """Fresh, empty filter for the given parameters."""
    return filter_cls(params)


def summary_add(f, term: Term, key: AccessKey, source_uri: str):
    """Insert a term under (key, source URI) and under (key, wildcard source).

    The source URI must be concrete here; the wildcard entry is what lets
    clients later probe with the source left open.
    """
    if source_uri == ANY_SOURCE:
        raise ValueError("source URI must be concrete when adding")
    component = canonical_bytes(term)
    f.insert_digest(encode_element(component, key, source_uri))
    f.insert_digest(encode_element(component, key, ANY_SOURCE))
    return f


def summary_contains(f, term: Term, key: AccessKey, source_uri: str) -> bool:
    """Probe for a term under (key, source URI); pass ANY_SOURCE to ask
    whether any source contains it."""
    return f.contains_digest(encode_element(canonical_bytes(term), key, source_uri))


def summary_combine(a, b):
    """Union of two filters; must share parameters (and filter type).

    Commutative, associative, idempotent, and equal to a filter built by
    adding both element multisets directly.
    """
    if type(a) is not type(b) or a.params != b.params:
        raise ParamsMismatchError(
            f"cannot combine incompatible summaries: {a!r} vs {b!r}"
        )
    if isinstance(a, ExactFilter):
        return ExactFilter(a.params, a.digests | b.digests, a.approx_inserts + b.approx_inserts)
    merged = int.from_bytes(a.bits, "little") | int.from_bytes(b.bits, "little")
    bits = bytearray(merged.to_bytes(len(a.bits), "little"))
    return BloomFilter(a.params, bits, a.approx_inserts + b.approx_inserts)


@dataclass
class FileSummary:
    """Per-file summary: one filter per quad component."""

    source_uri: str
    subject: BloomFilter | ExactFilter
    predicate: BloomFilter | ExactFilter
    object: BloomFilter | ExactFilter
    graph: BloomFilter | ExactFilter

    @property
    def params(self) -> AmfParams:
        return self.subject.params

    def component(self, name: str):
        return getattr(self, name)

    def filters(self):
        return [self.component(name) for name in COMPONENTS]

    def to_bytes(self) -> bytes:
        uri = self.source_uri.encode("utf-8")
        out = bytearray(FILE_SUMMARY_MAGIC)
        out.append(FORMAT_VERSION)
        out += len(uri).to_bytes(4, "little")
        out += uri
        for f in self.filters():
            out += f.to_bytes()
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "FileSummary":
        if data[:4] != FILE_SUMMARY_MAGIC:
            raise ValueError("bad file-summary magic")
        if data[4] != FORMAT_VERSION:
            raise ValueError(f"unsupported file-summary format version {data[4]}")
        uri_len = int.from_bytes(data[5:9], "little")
        uri = data[9 : 9 + uri_len].decode("utf-8")
        offset = 9 + uri_len
        filters = []
        for _ in COMPONENTS:
            f, offset = BloomFilter.from_bytes(data, offset)
            filters.append(f)
        return cls(uri, *filters)


def create_file_summary(
    quads: Sequence[Quad],
    source_uri: str,
    key_map: PolicyKeyMap,
    params: AmfParams = DEFAULT_PARAMS,
    filter_cls: FilterFactory = BloomFilter,
) -> FileSummary:
    """Summarize a file's quads, component by component, under each access
    key that permits them.

    Quads with no permitting policy contribute nothing (fail closed): data
    nobody may read must not be discoverable either.
    """
    filters = {name: summary_initialize(params, filter_cls) for name in COMPONENTS}
    for quad in quads:
        for key in key_map.permit_keys_for(quad):
            for name in COMPONENTS:
                summary_add(filters[name], quad.component(name), key, source_uri)
    return FileSummary(source_uri, **filters)


def false_positive_rate(params: AmfParams, effective_inserts: int) -> float:
    """Analytic false-positive rate after ``effective_inserts`` raw digest
    insertions (a filter's ``approx_inserts`` counts exactly these)."""
    if effective_inserts < 0:
        raise ValueError("insert count must be non-negative")
    if effective_inserts == 0:
        return 0.0
    return (1.0 - math.exp(-params.h * effective_inserts / params.m)) ** params.h


def false_positive_estimate(params: AmfParams, added: int) -> float:
    """Analytic false-positive rate after ``added`` summary_add calls.

    Each add inserts two elements (concrete and wildcard source), so the
    effective insert count is ``2 * added``.
    """
    return false_positive_rate(params, 2 * added)
