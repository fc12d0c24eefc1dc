"""Search for plausible alternative entities for a target node.

A pool entry qualifies as an alternative when it shares at least one
relation-map pair and at least one entity type with the target, comes from
a different document, its best mention-surface similarity sits strictly
inside (tau_e_min, tau_e_max), and its best context similarity is strictly
above tau_c. The mention band keeps alternatives that are plausible but not
near-synonyms of the target; the context floor keeps ones seen in similar
running text.

Qualifying candidates are ordered by descending (shared relation pairs,
mention similarity, context similarity), with ties broken by ascending
(doc_title, node_index) for reproducible output. Finally any candidate
whose mention-surface set is a subset of another candidate's set is
dropped (equal sets keep the earlier candidate).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import normalize_rows, segment_max_dot
from .pool import CandidateEntry, Pool


@dataclass(frozen=True)
class SearchThresholds:
    tau_e_max: float = 0.8
    tau_e_min: float = 0.2
    tau_c: float = 0.4

    def __post_init__(self):
        if not 0.0 <= self.tau_e_min < self.tau_e_max <= 1.0:
            raise ValueError(
                f"need 0 <= tau_e_min < tau_e_max <= 1, got "
                f"[{self.tau_e_min}, {self.tau_e_max}]"
            )


@dataclass(frozen=True, eq=False)
class AltCandidate:
    """A retained alternative with its similarity scores."""

    entry: CandidateEntry
    r_sim: int
    m_sim: float
    c_sim: float

    @property
    def surfaces(self) -> tuple[str, ...]:
        return self.entry.mention_surfaces

    @property
    def surface_set(self) -> frozenset[str]:
        return self.entry.surface_set


def _drop_subset_surface_sets(ranked: list[AltCandidate]) -> list[AltCandidate]:
    # equal sets keep the earlier candidate; proper subsets always drop
    sets = [c.surface_set for c in ranked]
    out = []
    for i, cand in enumerate(ranked):
        dominated = False
        for j, other in enumerate(sets):
            if i == j:
                continue
            if sets[i] < other or (sets[i] == other and j < i):
                dominated = True
                break
        if not dominated:
            out.append(cand)
    return out


def get_alts(
    target: CandidateEntry, pool: Pool, th: SearchThresholds
) -> list[AltCandidate]:
    """Ranked, subset-pruned alternatives for ``target`` drawn from ``pool``.

    Pair maxima accumulate from 0, so all-negative similarities read as 0.
    An empty list is a valid result.
    """
    candidates: list[int] = []
    r_sims: list[int] = []
    for idx, entry in enumerate(pool.entries):
        r_sim = len(entry.rel_map & target.rel_map)
        if r_sim == 0:
            continue
        if entry.doc_title == target.doc_title:
            continue
        if not (entry.types & target.types):
            continue
        candidates.append(idx)
        r_sims.append(r_sim)

    if not candidates:
        return []

    sel = np.asarray(candidates, dtype=np.int64)
    mention_query = normalize_rows(target.mention_vecs, "target mentions")
    context_query = normalize_rows(target.context_vecs, "target contexts")
    pm = pool.packed_mentions()
    pc = pool.packed_contexts()
    m_sims = np.maximum(
        segment_max_dot(mention_query, pm.matrix, pm.starts, pm.ends, sel), 0.0
    )
    c_sims = np.maximum(
        segment_max_dot(context_query, pc.matrix, pc.starts, pc.ends, sel), 0.0
    )

    retained = [
        AltCandidate(
            entry=pool.entries[idx],
            r_sim=r_sim,
            m_sim=float(m_sim),
            c_sim=float(c_sim),
        )
        for idx, r_sim, m_sim, c_sim in zip(candidates, r_sims, m_sims, c_sims)
        if th.tau_e_min < m_sim < th.tau_e_max and c_sim > th.tau_c
    ]
    retained.sort(
        key=lambda c: (
            -c.r_sim,
            -c.m_sim,
            -c.c_sim,
            c.entry.doc_title,
            c.entry.node_index,
        )
    )
    return _drop_subset_surface_sets(retained)
