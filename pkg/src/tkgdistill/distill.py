"""Knowledge-transfer machinery: pseudo-alignment generation by one-to-one
assignment over candidate similarities, and explicit temporal event transfer
from the source graph through the alignment map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .numerics import cosine_rows_guarded
from .tkg import (
    PSEUDO,
    AlignmentPair,
    AlignmentSet,
    Quadruple,
    TemporalKG,
)


@dataclass(frozen=True)
class PseudoGenConfig:
    candidate_scope: str = "neighbors-of-aligned"
    top_k_budget: int | float = 0.1  # count, or fraction of target entities
    min_similarity: float = 0.0
    exact_solver_cap: int = 64
    replace_existing: bool = True

    def __post_init__(self):
        if isinstance(self.top_k_budget, float) and not 0 < self.top_k_budget <= 1:
            raise ValueError("fractional budget must be in (0, 1]")
        if isinstance(self.top_k_budget, int) and self.top_k_budget <= 0:
            raise ValueError("budget must be positive")
        if self.exact_solver_cap < 1:
            raise ValueError("exact_solver_cap must be >= 1")


@dataclass
class CandidateTable:
    """Similarity block over candidate source rows and target columns.

    ``existing_sim`` carries the mean similarity of current ground-truth
    pairs whose target is a candidate, so replacement can be arbitrated.
    """

    source_ids: np.ndarray
    target_ids: np.ndarray
    sim: np.ndarray  # (len(source_ids), len(target_ids))
    existing_sim: dict[tuple[int, int], float] = field(default_factory=dict)


@dataclass
class PseudoGenResult:
    added: list[AlignmentPair]
    replaced: list[tuple[AlignmentPair, AlignmentPair]]  # (old gt, new pseudo)
    audit: list[tuple[int, int, float, str]]  # (source, target, sim, action)


@dataclass
class TransferRecord:
    quadruple: Quadruple
    origin: Quadruple
    mechanism: str  # "alignment-lookup" | "student-top1"
    round_index: int


def mean_similarity(h_source: np.ndarray, h_target: np.ndarray) -> float:
    """Average cosine correspondence over all integration time steps."""
    return float(cosine_rows_guarded(h_source, h_target).mean())


def _solve_exact(sim: np.ndarray) -> list[tuple[int, int]]:
    # Maximum-weight partial matching: clamping negatives at zero makes the
    # complete rectangular assignment equivalent to the best partial one;
    # matched pairs with non-positive similarity are then discarded.
    rows, cols = linear_sum_assignment(-np.maximum(sim, 0.0))
    return [(int(r), int(c)) for r, c in zip(rows, cols) if sim[r, c] > 0.0]


def _solve_greedy(sim: np.ndarray) -> list[tuple[int, int]]:
    order = sorted(
        ((r, c) for r in range(sim.shape[0]) for c in range(sim.shape[1])
         if sim[r, c] > 0.0),
        key=lambda rc: (-sim[rc[0], rc[1]], rc[0], rc[1]),
    )
    used_r: set[int] = set()
    used_c: set[int] = set()
    out = []
    for r, c in order:
        if r in used_r or c in used_c:
            continue
        used_r.add(r)
        used_c.add(c)
        out.append((r, c))
    return out


def matching_total(sim: np.ndarray, matches: list[tuple[int, int]]) -> float:
    """Total similarity of a matching, summed in row order (canonical)."""
    return float(sum(sim[r, c] for r, c in sorted(matches)))


def generate_pseudo_alignments(
    table: CandidateTable,
    cfg: PseudoGenConfig,
    existing: AlignmentSet,
    n_target_entities: int | None = None,
) -> PseudoGenResult:
    """Select pseudo pairs by one-to-one matching, throttled to the budget.

    Small candidate blocks are matched optimally with an exact assignment
    solver; blocks above ``exact_solver_cap`` fall back to greedy selection
    in descending similarity with (source id, target id) tie-breaking. The
    chosen pairs are pruned to the budget and the similarity floor. A pair
    whose target already carries a ground-truth alignment is kept only when
    replacement is enabled and it beats the existing pair's similarity.
    """
    ns, nt = table.sim.shape
    if ns == 0 or nt == 0:
        return PseudoGenResult([], [], [])
    if not np.all(np.isfinite(table.sim)):
        raise ValueError("similarity table contains non-finite values")

    if max(ns, nt) <= cfg.exact_solver_cap:
        matches = _solve_exact(table.sim)
    else:
        matches = _solve_greedy(table.sim)

    # Throttle: order by descending similarity (deterministic ties), then
    # apply the budget and the similarity floor.
    matches.sort(
        key=lambda rc: (
            -table.sim[rc[0], rc[1]],
            int(table.source_ids[rc[0]]),
            int(table.target_ids[rc[1]]),
        )
    )
    budget = cfg.top_k_budget
    if isinstance(budget, float):
        if n_target_entities is None:
            raise ValueError("fractional budget needs n_target_entities")
        budget = max(1, int(np.floor(budget * n_target_entities + 0.5)))
    matches = matches[:budget]
    matches = [rc for rc in matches if table.sim[rc] >= cfg.min_similarity]

    gt_by_target = {
        p.target_entity: p for p in existing if p.provenance != PSEUDO
    }
    added: list[AlignmentPair] = []
    replaced: list[tuple[AlignmentPair, AlignmentPair]] = []
    audit: list[tuple[int, int, float, str]] = []
    for r, c in matches:
        src = int(table.source_ids[r])
        tgt = int(table.target_ids[c])
        sim = float(table.sim[r, c])
        pair = AlignmentPair(src, tgt, PSEUDO, sim)
        old = gt_by_target.get(tgt)
        if old is None:
            added.append(pair)
            audit.append((src, tgt, sim, "add"))
            continue
        if not cfg.replace_existing:
            continue
        old_sim = table.existing_sim.get((old.source_entity, tgt), -np.inf)
        if sim > old_sim:
            replaced.append((old, pair))
            audit.append((src, tgt, sim, "replace"))
    return PseudoGenResult(added, replaced, audit)


def candidate_targets(
    target_kg: TemporalKG, alignments: AlignmentSet, horizon: int
) -> list[int]:
    """Graph neighbors (either direction, t < horizon) of aligned targets.

    Already-aligned entities stay in the pool, which is what lets a later
    generation round replace a noisy ground-truth pair.
    """
    aligned = alignments.target_entities()
    out: set[int] = set()
    for e in aligned:
        for nbr, _, t in target_kg.adjacency(e):
            if t < horizon:
                out.add(nbr)
    return sorted(out)


def brute_force_best_matching(sim: np.ndarray) -> float:
    """Enumerate every partial one-to-one assignment; exact oracle for tests."""
    ns, nt = sim.shape
    best = 0.0

    def recurse(row: int, used_cols: int, chosen: list[tuple[int, int]]):
        nonlocal best
        if row == ns:
            total = matching_total(sim, chosen)
            if total > best:
                best = total
            return
        recurse(row + 1, used_cols, chosen)  # leave this source unmatched
        for c in range(nt):
            if not used_cols & (1 << c):
                chosen.append((row, c))
                recurse(row + 1, used_cols | (1 << c), chosen)
                chosen.pop()

    recurse(0, 0, [])
    return best


def transfer_events(
    source_kg: TemporalKG,
    target_kg: TemporalKG,
    alignments: AlignmentSet,
    rank_object_fn,
    rank_subject_fn,
    horizon: int,
    round_index: int = 0,
    already: set[Quadruple] | None = None,
) -> list[TransferRecord]:
    """Map source events of aligned entities into the target graph.

    When both endpoints are aligned the event maps directly; otherwise the
    student ranks the open slot and the top candidate completes the event
    (``rank_object_fn(e, r, t)`` / ``rank_subject_fn(r, e, t)`` both return
    the argmax target entity). Duplicates of existing or previously
    transferred quadruples are skipped.
    """
    if len(alignments) == 0:
        raise ValueError("transfer requires at least one alignment pair")
    src_to_tgt: dict[int, int] = {}
    for p in sorted(alignments, key=lambda p: (p.source_entity, p.target_entity)):
        src_to_tgt.setdefault(p.source_entity, p.target_entity)
    present: set[Quadruple] = set(target_kg.quadruples)
    if already:
        present |= already
    shared_relations = len(target_kg.relations)

    records: list[TransferRecord] = []
    for e_s in sorted(src_to_tgt):
        e_t = src_to_tgt[e_s]
        for q in source_kg.quadruples:
            if q.time >= horizon or q.relation >= shared_relations:
                continue
            if q.subject == e_s:
                other = q.object
                if other in src_to_tgt:
                    mapped = Quadruple(e_t, q.relation, src_to_tgt[other], q.time)
                    mech = "alignment-lookup"
                else:
                    top = rank_object_fn(e_t, q.relation, q.time)
                    if top is None:  # completion below the confidence gate
                        continue
                    mapped = Quadruple(e_t, q.relation, int(top), q.time)
                    mech = "student-top1"
            elif q.object == e_s:
                other = q.subject
                if other in src_to_tgt:
                    # emitted when iterating that aligned subject
                    continue
                top = rank_subject_fn(q.relation, e_t, q.time)
                if top is None:
                    continue
                mapped = Quadruple(int(top), q.relation, e_t, q.time)
                mech = "student-top1"
            else:
                continue
            if mapped in present:
                continue
            present.add(mapped)
            records.append(TransferRecord(mapped, q, mech, round_index))
    return records
