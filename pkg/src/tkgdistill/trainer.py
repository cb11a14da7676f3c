"""Teacher pretraining, student initialization, and the alternating
alignment/student optimization with pseudo-alignment generation and
temporal event transfer paced across epochs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields

import numpy as np

from .alignment import (
    AlignParams,
    alignment_loss_bwd,
    alignment_loss_fwd,
    init_align_params,
    temporal_integrate_batch_fwd,
)
from .distill import (
    CandidateTable,
    PseudoGenConfig,
    TransferRecord,
    candidate_targets,
    generate_pseudo_alignments,
    transfer_events,
)
from .encoder import (
    NetworkParams,
    encode_trajectories_bwd,
    encode_trajectories_fwd,
    init_network_params,
)
from .evaluation import EncodingCache, evaluate, score_object_queries
from .numerics import AdamState, ParamDict, adam_step
from .scoring import (
    BOTH_SIDES,
    NegativeSamplerConfig,
    reasoning_loss_bwd,
    reasoning_loss_fwd,
)
from .tkg import (
    GROUND_TRUTH,
    AlignmentPair,
    AlignmentSet,
    Quadruple,
    SplitSpec,
    TemporalKG,
    split_by_time,
)

# rng stream tags so every sampling site owns an independent, order-free seed
_RNG_TEACHER, _RNG_ALIGN, _RNG_STUDENT, _RNG_CHANNEL, _RNG_SHUFFLE, _RNG_DROPOUT, _RNG_INIT = range(7)


def rng_for(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, tags)]))


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters; the defaults are the reported operating point."""

    dim: int = 128
    margin_reasoning: float = 0.5
    margin_alignment: float = 0.5
    learning_rate: float = 0.01
    batch_size: int = 256
    epochs: int = 50
    neighbors: int = 8
    layers: int = 1
    dropout: float = 0.5
    reasoning_negatives: int = 10
    alignment_negatives: int = 50
    time_intervals: int = 4
    warmup_epochs_before_generation: int = 10
    pseudo_fraction_start: float = 0.10
    pseudo_fraction_end: float = 0.40
    pseudo_min_similarity: float = 0.0
    pseudo_replace_existing: bool = True
    exact_solver_cap: int = 64
    transfer_min_top1_prob: float = 0.0  # 0 disables the confidence gate
    patience: int = 5
    select_best_val: bool = True  # False keeps the final-epoch parameters
    split_train_steps: int = 28
    split_val_steps: int = 4
    split_test_steps: int = 8
    seed: int = 0
    uniform_strength: bool = False
    pure_training: bool = False
    no_pseudo: bool = False
    no_event_transfer: bool = False
    transfer_after_student: bool = False

    def split(self) -> SplitSpec:
        total = self.split_train_steps + self.split_val_steps + self.split_test_steps
        return SplitSpec(
            total, self.split_train_steps, self.split_val_steps, self.split_test_steps
        )

    def digest(self) -> str:
        text = "\n".join(
            f"{f.name} = {getattr(self, f.name)}" for f in fields(self)
        )
        return hashlib.sha256(text.encode()).hexdigest()


_BOOL_WORDS = {"true": True, "false": False, "1": True, "0": False}


def parse_config_file(path) -> TrainConfig:
    """``key = value`` lines mirroring TrainConfig fields; unknown keys raise."""
    by_name = {f.name: f for f in fields(TrainConfig)}
    overrides = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if "=" not in text:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = (part.strip() for part in text.partition("="))
            if key not in by_name:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            ftype = by_name[key].type
            if ftype == "bool":
                if value.lower() not in _BOOL_WORDS:
                    raise ValueError(f"{path}:{lineno}: bad boolean {value!r}")
                overrides[key] = _BOOL_WORDS[value.lower()]
            elif ftype == "int":
                overrides[key] = int(value)
            else:
                overrides[key] = float(value)
    return TrainConfig(**overrides)


@dataclass
class TrainState:
    teacher: NetworkParams
    student: NetworkParams
    align: AlignParams
    adam_student: AdamState
    adam_align: AdamState
    alignments: AlignmentSet
    transferred: list[TransferRecord]
    union_kg: TemporalKG
    gt_train: list[Quadruple]
    epoch: int = 0
    loss_trace: list = field(default_factory=list)
    val_trace: list = field(default_factory=list)
    log_rows: list = field(default_factory=list)
    pseudo_audit: list = field(default_factory=list)
    best_val: float = -1.0
    best_epoch: int = -1


def pretrain_teacher(
    source_kg: TemporalKG, cfg: TrainConfig, log_rows: list | None = None
) -> NetworkParams:
    """Minimize the reasoning loss on the source graph; returns frozen params."""
    if not source_kg.quadruples:
        raise ValueError("source graph is empty")
    params = init_network_params(
        len(source_kg.entities), len(source_kg.relations), cfg.dim,
        int(rng_for(cfg.seed, _RNG_INIT, 0).integers(2**31)), cfg.dropout,
    )
    state = AdamState.like(params.trainable())
    neg = NegativeSamplerConfig(cfg.reasoning_negatives, BOTH_SIDES, cfg.seed)
    quads = list(source_kg.quadruples)
    for epoch in range(cfg.epochs):
        order = rng_for(cfg.seed, _RNG_SHUFFLE, _RNG_TEACHER, epoch).permutation(len(quads))
        losses = []
        for bi in range(0, len(quads), cfg.batch_size):
            batch = [quads[i] for i in order[bi : bi + cfg.batch_size]]
            rng = rng_for(cfg.seed, _RNG_TEACHER, epoch, bi)
            drop = rng_for(cfg.seed, _RNG_DROPOUT, _RNG_TEACHER, epoch, bi)
            loss, cache = reasoning_loss_fwd(
                params, source_kg, batch, neg, cfg.margin_reasoning, rng,
                cfg.neighbors, cfg.layers, drop,
            )
            if not np.isfinite(loss):
                raise RuntimeError(f"teacher loss diverged at epoch {epoch}")
            grads = params.zero_grads()
            reasoning_loss_bwd(cache, params, grads)
            adam_step(params.trainable(), grads, state, cfg.learning_rate)
            losses.append(loss)
        if log_rows is not None:
            log_rows.append((epoch, "teacher", float(np.mean(losses)), "", 0, 0))
    return params


def init_student_from_teacher(
    teacher: NetworkParams,
    n_target_entities: int,
    n_target_relations: int,
    cfg: TrainConfig,
    seed: int,
) -> NetworkParams:
    """Copy the shared blocks; target entity rows are freshly seeded.

    Relations must be a shared vocabulary (target ids index the teacher
    table), so the relation rows, transform, attention vector and time
    frequencies carry over bitwise.
    """
    if n_target_relations > teacher.n_relations:
        raise ValueError(
            f"target relation vocabulary ({n_target_relations}) exceeds "
            f"teacher's ({teacher.n_relations})"
        )
    rng = np.random.default_rng(seed)
    bound = 6.0 / np.sqrt(teacher.dim)
    entity_emb = rng.uniform(-bound, bound, size=(n_target_entities, teacher.dim))
    return NetworkParams(
        entity_emb,
        teacher.relation_emb.copy(),
        teacher.transform_W.copy(),
        teacher.attn_a.copy(),
        teacher.time_freq.copy(),
        teacher.dropout_rate,
        teacher.n_relations,
    )


# ---------------------------------------------------------------------------
# Loss assembly over ground-truth and pseudo sets
# ---------------------------------------------------------------------------


@dataclass
class EpochBatches:
    gt_quads: list[Quadruple]
    ps_quads: list[Quadruple]
    gt_pairs: list[AlignmentPair]
    ps_pairs: list[AlignmentPair]


def set_size_weights(n_gt: int, n_ps: int) -> tuple[float, float]:
    """Set-size convex pair, summing to 1 exactly; (1, 0) when both absent."""
    total = n_gt + n_ps
    if total == 0:
        return 1.0, 0.0
    w_gt = n_gt / total
    return w_gt, 1.0 - w_gt


def _pair_arrays(
    pairs: list[AlignmentPair], alignments: AlignmentSet
) -> tuple[np.ndarray, np.ndarray, list[set[int]]]:
    src = np.array([p.source_entity for p in pairs], dtype=np.int64)
    tgt = np.array([p.target_entity for p in pairs], dtype=np.int64)
    excl = [
        {p.target_entity} | alignments.targets_of(p.source_entity) for p in pairs
    ]
    return src, tgt, excl


def _alignment_terms(
    align: AlignParams,
    source_traj_bank: np.ndarray,
    target_trajs: np.ndarray,
    gt_pairs: list[AlignmentPair],
    ps_pairs: list[AlignmentPair],
    alignments: AlignmentSet,
    weights: tuple[float, float],
    cfg: TrainConfig,
    rng: np.random.Generator,
    strength_overrides: tuple | None = None,
):
    """Weighted ground-truth + pseudo alignment hinge, with grads.

    Returns (loss, align_grads, grad wrt target trajectories).
    """
    w_gt, w_ps = weights
    loss = 0.0
    align_grads = align.zero_grads()
    grad_tgt = np.zeros_like(target_trajs)
    for idx, (pairs, w) in enumerate(((gt_pairs, w_gt), (ps_pairs, w_ps))):
        if not pairs or w == 0.0:
            continue
        src, tgt, excl = _pair_arrays(pairs, alignments)
        override = strength_overrides[idx] if strength_overrides else None
        term, cache = alignment_loss_fwd(
            align, source_traj_bank[src], target_trajs, tgt, excl,
            cfg.alignment_negatives, cfg.margin_alignment, rng,
            uniform_strength=cfg.uniform_strength, strength_override=override,
        )
        part = align.zero_grads()
        _, g_tgt = alignment_loss_bwd(cache, align, part)
        loss += w * term
        grad_tgt += w * g_tgt
        for k in align_grads:
            align_grads[k] += w * part[k]
    return loss, align_grads, grad_tgt


def _reasoning_terms(
    student: NetworkParams,
    union_kg: TemporalKG,
    gt_batch: list[Quadruple],
    ps_batch: list[Quadruple],
    weights: tuple[float, float],
    cfg: TrainConfig,
    rng: np.random.Generator,
    dropout_rng: np.random.Generator | None,
):
    """Weighted ground-truth + pseudo reasoning hinge, with grads."""
    w_gt, w_ps = weights
    neg = NegativeSamplerConfig(cfg.reasoning_negatives, BOTH_SIDES, cfg.seed)
    loss = 0.0
    grads = student.zero_grads()
    for batch, w in ((gt_batch, w_gt), (ps_batch, w_ps)):
        if not batch or w == 0.0:
            continue
        term, cache = reasoning_loss_fwd(
            student, union_kg, batch, neg, cfg.margin_reasoning, rng,
            cfg.neighbors, cfg.layers, dropout_rng,
        )
        part = student.zero_grads()
        reasoning_loss_bwd(cache, student, part)
        loss += w * term
        for k in grads:
            grads[k] += w * part[k]
    return loss, grads


def combined_loss_and_grad(
    student: NetworkParams,
    align: AlignParams,
    union_kg: TemporalKG,
    source_traj_bank: np.ndarray,
    alignments: AlignmentSet,
    batches: EpochBatches,
    cfg: TrainConfig,
    seed_tag: int = 0,
    strength_overrides: tuple | None = None,
) -> tuple[float, ParamDict, ParamDict]:
    """Full four-term objective with gradients for the student and the
    alignment module; every sampling site is seeded, so the value is a pure
    deterministic function of the parameters."""
    if not (batches.gt_quads or batches.ps_quads or batches.gt_pairs or batches.ps_pairs):
        raise ValueError("all four training sets are empty")
    w_graph = set_size_weights(len(batches.gt_quads), len(batches.ps_quads))
    w_align = set_size_weights(len(batches.gt_pairs), len(batches.ps_pairs))

    loss, student_grads = _reasoning_terms(
        student, union_kg, batches.gt_quads, batches.ps_quads, w_graph, cfg,
        rng_for(cfg.seed, _RNG_STUDENT, seed_tag), None,
    )
    align_grads = align.zero_grads()
    if batches.gt_pairs or batches.ps_pairs:
        t_train = cfg.split_train_steps
        all_targets = np.arange(student.n_entities, dtype=np.int64)
        tgt_trajs, traj_cache = encode_trajectories_fwd(
            student, union_kg, all_targets, t_train, cfg.layers, cfg.neighbors
        )
        a_loss, align_grads, grad_tgt = _alignment_terms(
            align, source_traj_bank, tgt_trajs, batches.gt_pairs,
            batches.ps_pairs, alignments, w_align, cfg,
            rng_for(cfg.seed, _RNG_CHANNEL, seed_tag), strength_overrides,
        )
        loss += a_loss
        encode_trajectories_bwd(grad_tgt, traj_cache, student, student_grads)
    return loss, student_grads, align_grads


def combined_loss(
    student: NetworkParams,
    align: AlignParams,
    union_kg: TemporalKG,
    source_traj_bank: np.ndarray,
    alignments: AlignmentSet,
    batches: EpochBatches,
    cfg: TrainConfig,
    seed_tag: int = 0,
    strength_overrides: tuple | None = None,
) -> float:
    return combined_loss_and_grad(
        student, align, union_kg, source_traj_bank, alignments, batches, cfg,
        seed_tag, strength_overrides,
    )[0]


# ---------------------------------------------------------------------------
# The outer loop
# ---------------------------------------------------------------------------


def pseudo_fraction_at(cfg: TrainConfig, epoch: int) -> float:
    """Linear ramp from the first generation epoch to the final epoch."""
    first = cfg.warmup_epochs_before_generation
    last = max(cfg.epochs - 1, first)
    if epoch < first:
        return 0.0
    if last == first:
        return cfg.pseudo_fraction_end
    frac = (epoch - first) / (last - first)
    return cfg.pseudo_fraction_start + frac * (
        cfg.pseudo_fraction_end - cfg.pseudo_fraction_start
    )


def _interval_bounds(train_steps: int, k: int) -> list[tuple[int, int]]:
    """k contiguous chunks of [0, train_steps), most recent first."""
    edges = np.linspace(0, train_steps, k + 1).astype(int)
    return [(int(edges[i]), int(edges[i + 1])) for i in range(k)][::-1]


def _chunks(items: list, size: int) -> list[list]:
    if not items:
        return []
    return [items[i : i + size] for i in range(0, len(items), size)]


def _student_top1_fns(student: NetworkParams, kg: TemporalKG, b: int,
                      min_top1_prob: float = 0.0):
    """Argmax completion functions; an optional confidence gate rejects
    completions whose softmax probability over all candidates is too low."""
    cache = EncodingCache(student, kg, b)

    def top1(e: int, r: int, t: int):
        scores = score_object_queries(
            student, cache.at(t), np.array([e]), np.array([r])
        )[0]
        best = int(np.argmax(scores))
        if min_top1_prob > 0.0:
            shifted = np.exp(scores - scores[best])
            if 1.0 / shifted.sum() < min_top1_prob:
                return None
        return best

    def rank_object(e: int, r: int, t: int):
        return top1(e, r, t)

    def rank_subject(r: int, e: int, t: int):
        return top1(e, r + student.n_relations, t)

    return rank_object, rank_subject


def _mean_sim_matrix(h_src: np.ndarray, h_tgt: np.ndarray) -> np.ndarray:
    """Mean-over-time cosine between every source row and target row.

    ``h_src`` is (ns, T, d), ``h_tgt`` (nt, T, d); returns (ns, nt).
    """
    def unit(h):
        norms = np.linalg.norm(h, axis=-1, keepdims=True)
        return np.divide(h, norms, out=np.zeros_like(h), where=norms > 0)

    us, ut = unit(h_src), unit(h_tgt)
    t_len = h_src.shape[1]
    return np.tensordot(us, ut, axes=([1, 2], [1, 2])) / t_len


def train_mpkd(
    source_kg: TemporalKG,
    target_kg: TemporalKG,
    alignments: AlignmentSet,
    cfg: TrainConfig,
    teacher: NetworkParams | None = None,
) -> TrainState:
    """Run the full alternating optimization and return the final state.

    Per epoch: (a) fit the alignment module on the current pair sets with
    both encoders frozen; (b) transfer source events through the alignment
    map using the current student for open slots; (c) update the student on
    ground-truth plus transferred events, sweeping the training span from
    the most recent interval to the earliest, with the alignment terms
    providing the distillation gradient; (d) past the warmup, regenerate
    pseudo alignments under the paced budget. Early-stops on validation MRR.
    """
    if len(alignments) == 0 and not cfg.pure_training:
        raise ValueError("alignments may be empty only in pure_training mode")
    split = cfg.split()
    if target_kg.horizon != split.total_steps:
        raise ValueError("target horizon does not match the configured split")
    train_part, val_part, _ = split_by_time(target_kg, split)
    gt_train = list(train_part.quadruples)
    val_quads = list(val_part.quadruples)
    val_history = target_kg.with_quadruples(
        gt_train + val_quads
    )  # evaluation sees ground-truth data only

    log_rows: list = []
    if teacher is None:
        teacher = pretrain_teacher(source_kg, cfg, log_rows)
    teacher = teacher.copy()  # frozen; nothing below may touch the original

    student = init_student_from_teacher(
        teacher, len(target_kg.entities), len(target_kg.relations), cfg,
        int(rng_for(cfg.seed, _RNG_INIT, 1).integers(2**31)),
    )
    align = init_align_params(
        cfg.dim, int(rng_for(cfg.seed, _RNG_INIT, 2).integers(2**31))
    )

    t_train = cfg.split_train_steps
    source_traj_bank, _ = encode_trajectories_fwd(
        teacher, source_kg, np.arange(teacher.n_entities), t_train,
        cfg.layers, cfg.neighbors,
    )
    active_sources = frozenset(
        e
        for e in range(teacher.n_entities)
        if any(t < t_train for _, _, t in source_kg.adjacency(e))
    )

    state = TrainState(
        teacher=teacher,
        student=student,
        align=align,
        adam_student=AdamState.like(student.trainable()),
        adam_align=AdamState.like(align.trainable()),
        alignments=AlignmentSet(list(alignments.pairs)),
        transferred=[],
        union_kg=target_kg.with_quadruples(gt_train),
        gt_train=gt_train,
        log_rows=log_rows,
    )
    all_targets = np.arange(student.n_entities, dtype=np.int64)
    best_student, best_align = student.copy(), align.copy()

    for epoch in range(cfg.epochs):
        state.epoch = epoch
        gt_pairs = [p for p in state.alignments if p.provenance == GROUND_TRUTH]
        ps_pairs = [p for p in state.alignments if p.provenance != GROUND_TRUTH]
        w_align = set_size_weights(len(gt_pairs), len(ps_pairs))

        # (a) alignment module fit, encoders frozen
        align_losses = []
        if gt_pairs or ps_pairs:
            tgt_trajs, _ = encode_trajectories_fwd(
                student, state.union_kg, all_targets, t_train, cfg.layers,
                cfg.neighbors,
            )
            order = rng_for(cfg.seed, _RNG_SHUFFLE, _RNG_ALIGN, epoch).permutation(
                len(state.alignments.pairs)
            )
            shuffled = [state.alignments.pairs[i] for i in order]
            for bi, chunk in enumerate(_chunks(shuffled, cfg.batch_size)):
                loss, grads, _ = _alignment_terms(
                    align, source_traj_bank, tgt_trajs,
                    [p for p in chunk if p.provenance == GROUND_TRUTH],
                    [p for p in chunk if p.provenance != GROUND_TRUTH],
                    state.alignments, w_align, cfg,
                    rng_for(cfg.seed, _RNG_ALIGN, epoch, bi),
                )
                if not np.isfinite(loss):
                    raise RuntimeError(f"alignment loss diverged at epoch {epoch}")
                adam_step(align.trainable(), grads, state.adam_align,
                          cfg.learning_rate)
                align_losses.append(loss)

        def do_transfer():
            # transfer shares the pseudo-data warmup: both halves of the
            # generated data start once the student has structure to offer
            if cfg.no_event_transfer or cfg.pure_training or not len(state.alignments):
                return
            if epoch < cfg.warmup_epochs_before_generation:
                return
            rank_obj, rank_subj = _student_top1_fns(
                student, state.union_kg, cfg.neighbors, cfg.transfer_min_top1_prob
            )
            already = {r.quadruple for r in state.transferred}
            new = transfer_events(
                source_kg, state.union_kg, state.alignments, rank_obj,
                rank_subj, t_train, epoch, already,
            )
            if new:
                state.transferred.extend(new)
                state.union_kg = target_kg.with_quadruples(
                    gt_train + [r.quadruple for r in state.transferred]
                )

        if not cfg.transfer_after_student:
            do_transfer()  # (b)

        # (c) student update: recent intervals first, Eq-weighted terms
        ps_quads = [r.quadruple for r in state.transferred]
        w_graph = set_size_weights(len(gt_train), len(ps_quads))
        student_losses = []
        for iv, (lo, hi) in enumerate(_interval_bounds(t_train, cfg.time_intervals)):
            gt_iv = [q for q in gt_train if lo <= q.time < hi]
            ps_iv = [q for q in ps_quads if lo <= q.time < hi]
            if not gt_iv and not ps_iv:
                continue
            shuffle = rng_for(cfg.seed, _RNG_SHUFFLE, _RNG_STUDENT, epoch, iv)
            gt_iv = [gt_iv[i] for i in shuffle.permutation(len(gt_iv))]
            ps_iv = [ps_iv[i] for i in shuffle.permutation(len(ps_iv))]
            gt_chunks = _chunks(gt_iv, cfg.batch_size)
            ps_chunks = _chunks(ps_iv, cfg.batch_size)
            for bi in range(max(len(gt_chunks), len(ps_chunks))):
                gt_b = gt_chunks[bi] if bi < len(gt_chunks) else []
                ps_b = ps_chunks[bi] if bi < len(ps_chunks) else []
                loss, grads = _reasoning_terms(
                    student, state.union_kg, gt_b, ps_b, w_graph, cfg,
                    rng_for(cfg.seed, _RNG_STUDENT, epoch, iv, bi),
                    rng_for(cfg.seed, _RNG_DROPOUT, _RNG_STUDENT, epoch, iv, bi),
                )
                if not np.isfinite(loss):
                    raise RuntimeError(
                        f"student loss diverged at epoch {epoch}, interval {iv}"
                    )
                adam_step(student.trainable(), grads, state.adam_student,
                          cfg.learning_rate)
                student_losses.append(loss)

        if gt_pairs or ps_pairs:
            # distillation channel: the alignment terms pull the student's
            # trajectories toward the teacher's through the frozen module
            tgt_trajs, traj_cache = encode_trajectories_fwd(
                student, state.union_kg, all_targets, t_train, cfg.layers,
                cfg.neighbors,
            )
            loss, _, grad_tgt = _alignment_terms(
                align, source_traj_bank, tgt_trajs, gt_pairs, ps_pairs,
                state.alignments, w_align, cfg,
                rng_for(cfg.seed, _RNG_CHANNEL, epoch),
            )
            grads = student.zero_grads()
            encode_trajectories_bwd(grad_tgt, traj_cache, student, grads)
            adam_step(student.trainable(), grads, state.adam_student,
                      cfg.learning_rate)
            student_losses.append(loss)

        if cfg.transfer_after_student:
            do_transfer()  # (b), deferred variant

        # (d) pseudo-alignment generation under the paced budget
        fraction = pseudo_fraction_at(cfg, epoch)
        if not (cfg.no_pseudo or cfg.pure_training) and fraction > 0.0:
            _generate_pseudo_round(
                state, source_traj_bank, active_sources, cfg, fraction, epoch
            )

        val_mrr = float("nan")
        if val_quads:
            report = evaluate(
                student, val_history, val_quads, cfg.neighbors,
                cfg.digest(), cfg.seed,
            )
            val_mrr = report.mrr
            state.val_trace.append((epoch, val_mrr))
        mean_align = float(np.mean(align_losses)) if align_losses else 0.0
        mean_student = float(np.mean(student_losses)) if student_losses else 0.0
        state.loss_trace.append((epoch, mean_align, mean_student))
        n_pseudo = sum(1 for p in state.alignments if p.provenance != GROUND_TRUTH)
        state.log_rows.append(
            (epoch, "align", mean_align, "", n_pseudo, len(state.transferred))
        )
        state.log_rows.append(
            (epoch, "student", mean_student, val_mrr, n_pseudo, len(state.transferred))
        )

        if val_quads and val_mrr > state.best_val:
            state.best_val = val_mrr
            state.best_epoch = epoch
            best_student, best_align = student.copy(), align.copy()
        if val_quads and epoch - state.best_epoch >= cfg.patience:
            break

    if cfg.select_best_val and state.best_epoch >= 0:
        state.student = best_student
        state.align = best_align
    else:
        state.student = student
        state.align = align
    return state


def _generate_pseudo_round(
    state: TrainState,
    source_traj_bank: np.ndarray,
    active_sources: frozenset,
    cfg: TrainConfig,
    fraction: float,
    epoch: int,
) -> None:
    """One pseudo-alignment generation round; rewrites the pseudo subset."""
    student, align = state.student, state.align
    n_targets = student.n_entities
    budget = int(np.floor(fraction * n_targets + 0.5))
    if budget < 1:
        return
    cands = candidate_targets(state.union_kg, state.alignments, cfg.split_train_steps)
    if not cands:
        return
    all_targets = np.arange(n_targets, dtype=np.int64)
    tgt_trajs, _ = encode_trajectories_fwd(
        student, state.union_kg, all_targets, cfg.split_train_steps,
        cfg.layers, cfg.neighbors,
    )
    h_src, _ = temporal_integrate_batch_fwd(align, source_traj_bank)
    h_tgt, _ = temporal_integrate_batch_fwd(align, tgt_trajs)

    cand_ids = np.asarray(cands, dtype=np.int64)
    gt_pairs = [p for p in state.alignments if p.provenance == GROUND_TRUTH]
    # pseudo pairs expand coverage: sources that already own an alignment
    # stay out of the pool (their cone-aligned rows match spuriously), and
    # so do inactive sources, whose flat trajectories match anything
    aligned_sources = {p.source_entity for p in gt_pairs}
    src_ids = np.array(
        [
            s
            for s in range(source_traj_bank.shape[0])
            if s not in aligned_sources and s in active_sources
        ],
        dtype=np.int64,
    )
    if src_ids.size == 0:
        return
    sim = _mean_sim_matrix(h_src[src_ids], h_tgt[cand_ids])
    existing_sim = {}
    cand_set = set(cands)
    for p in gt_pairs:
        if p.target_entity in cand_set:
            existing_sim[(p.source_entity, p.target_entity)] = float(
                _mean_sim_matrix(
                    h_src[p.source_entity : p.source_entity + 1],
                    h_tgt[p.target_entity : p.target_entity + 1],
                )[0, 0]
            )
    table = CandidateTable(src_ids, cand_ids, sim, existing_sim)
    gen_cfg = PseudoGenConfig(
        top_k_budget=budget,
        min_similarity=cfg.pseudo_min_similarity,
        exact_solver_cap=cfg.exact_solver_cap,
        replace_existing=cfg.pseudo_replace_existing,
    )
    result = generate_pseudo_alignments(
        table, gen_cfg, AlignmentSet(gt_pairs), n_targets
    )
    dropped = {id(old) for old, _ in result.replaced}
    kept_gt = [p for p in gt_pairs if id(p) not in dropped]
    new_pseudo = result.added + [new for _, new in result.replaced]
    state.alignments = AlignmentSet(kept_gt + new_pseudo)
    state.pseudo_audit.extend(
        (epoch, src, tgt, sim_v, action) for src, tgt, sim_v, action in result.audit
    )
