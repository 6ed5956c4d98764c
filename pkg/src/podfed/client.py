"""Client-side query engine.

Source selection happens entirely on the client against the aggregator's
combined summary: for each ground pattern component the client probes the
matching filter with every key on its ring. A source is kept only if every
ground component matches under at least one key. Because the underlying
filters never produce false negatives, skipping a pruned source can never
lose results; false positives only cost a wasted pod query.

The any-source slot of the combined summary serves as a cheap global
pre-check: if a ground component matches nowhere in the whole federation,
no per-source probing is needed at all.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .aggregator import Aggregator, CombinedSummary, SourceList
from .policy import Identity, KeyRing
from .quads import Quad, QuadPattern
from .summary import ANY_SOURCE, summary_contains

logger = logging.getLogger(__name__)

# query_fn(identity, pattern, file_uri) -> matching quads the caller may see
QueryFn = Callable[[Identity | None, QuadPattern, str], set[Quad]]


@dataclass(frozen=True)
class SelectionReport:
    """What the selection step looked at and what survived."""

    pattern: QuadPattern
    candidates: SourceList
    selected: tuple[str, ...]
    pruned_by_global: bool = False
    probes_performed: int = 0


@dataclass(frozen=True)
class QueryResult:
    """Union of per-source results, each quad tagged with its origin."""

    bindings: frozenset[tuple[Quad, str]]
    failures: dict[str, str] = field(default_factory=dict)

    def quads(self) -> set[Quad]:
        return {quad for quad, _ in self.bindings}

    def sources(self) -> set[str]:
        return {uri for _, uri in self.bindings}

    def __len__(self) -> int:
        return len(self.bindings)


def _matches_any_key(f, term, keyring: KeyRing, source_uri: str) -> tuple[bool, int]:
    probes = 0
    for key in keyring.keys:
        probes += 1
        if summary_contains(f, term, key, source_uri):
            return True, probes
    return False, probes


def select_sources(
    pattern: QuadPattern,
    keyring: KeyRing,
    combined: CombinedSummary,
    sources: SourceList,
) -> tuple[tuple[str, ...], SelectionReport]:
    """Pick the sources that may hold matches for ``pattern``.

    All-variable patterns have nothing to probe with and select every
    source. Otherwise a source survives only if each ground component is
    present in the combined summary under some key the client holds.
    """
    ground = pattern.ground_components()
    if not ground:
        report = SelectionReport(pattern, sources, tuple(sources))
        return report.selected, report

    probes = 0
    for name, term in ground:
        hit, n = _matches_any_key(combined.component(name), term, keyring, ANY_SOURCE)
        probes += n
        if not hit:
            report = SelectionReport(
                pattern, sources, (), pruned_by_global=True, probes_performed=probes
            )
            return report.selected, report

    selected = []
    for uri in sources:
        keep = True
        for name, term in ground:
            hit, n = _matches_any_key(combined.component(name), term, keyring, uri)
            probes += n
            if not hit:
                keep = False
                break
        if keep:
            selected.append(uri)
    report = SelectionReport(pattern, sources, tuple(selected), probes_performed=probes)
    return report.selected, report


def query_sources(
    identity: Identity | None,
    pattern: QuadPattern,
    uris: Sequence[str],
    query_fn: QueryFn,
    parallel: bool = False,
) -> QueryResult:
    """Run ``pattern`` against each source and union the results.

    A failing source is recorded under its URI and does not abort the
    rest of the query.
    """
    bindings: set[tuple[Quad, str]] = set()
    failures: dict[str, str] = {}

    def run_one(uri: str):
        return uri, query_fn(identity, pattern, uri)

    if parallel and len(uris) > 1:
        with ThreadPoolExecutor(max_workers=min(8, len(uris))) as pool:
            futures = {pool.submit(run_one, uri): uri for uri in uris}
            for future, uri in futures.items():
                try:
                    _, quads = future.result()
                except Exception as exc:
                    logger.warning("query against %s failed: %s", uri, exc)
                    failures[uri] = str(exc)
                else:
                    bindings.update((q, uri) for q in quads)
    else:
        for uri in uris:
            try:
                _, quads = run_one(uri)
            except Exception as exc:
                logger.warning("query against %s failed: %s", uri, exc)
                failures[uri] = str(exc)
            else:
                bindings.update((q, uri) for q in quads)
    return QueryResult(frozenset(bindings), failures)


def federated_query(
    identity: Identity | None,
    keyring: KeyRing,
    pattern: QuadPattern,
    aggregator: Aggregator,
    query_fn: QueryFn,
    parallel: bool = False,
) -> tuple[QueryResult, SelectionReport]:
    """Select sources from one aggregator snapshot, then query them."""
    combined, sources = aggregator.snapshot()
    selected, report = select_sources(pattern, keyring, combined, sources)
    result = query_sources(identity, pattern, selected, query_fn, parallel)
    return result, report
