"""Cross-lingual alignment module: causal temporal integration of entity
trajectories, cosine correspondence, adaptive per-time alignment strength,
and the strength-weighted ranking loss over alignment pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import (
    ParamDict,
    cosine_rows_backward,
    cosine_rows_guarded,
    softmax_masked_rows,
    softmax_rows_backward,
)


@dataclass
class AlignParams:
    """Trainable arrays: one temporal attention shared by both languages,
    and a cross-lingual attention whose masked diagonal is the strength."""

    temporal_WQ: np.ndarray
    temporal_WK: np.ndarray
    temporal_WV: np.ndarray
    cross_WQ: np.ndarray
    cross_WK: np.ndarray

    @property
    def dim(self) -> int:
        return self.temporal_WQ.shape[0]

    def trainable(self) -> ParamDict:
        return {
            "temporal_WQ": self.temporal_WQ,
            "temporal_WK": self.temporal_WK,
            "temporal_WV": self.temporal_WV,
            "cross_WQ": self.cross_WQ,
            "cross_WK": self.cross_WK,
        }

    def zero_grads(self) -> ParamDict:
        return {k: np.zeros_like(v) for k, v in self.trainable().items()}

    def copy(self) -> "AlignParams":
        return AlignParams(*(v.copy() for v in self.trainable().values()))


def init_align_params(dim: int, seed: int) -> AlignParams:
    """Temporal attention starts random (it is trained); the cross attention
    starts at identity so the strength diagonal reads raw correspondence
    peaks from the very first epoch (its gradient path is detached, see
    ``alignment_loss_fwd``)."""
    rng = np.random.default_rng(seed)
    bound = np.sqrt(6.0 / (2 * dim))
    mats = [rng.uniform(-bound, bound, size=(dim, dim)) for _ in range(3)]
    eye = np.eye(dim)
    return AlignParams(*mats, eye.copy(), eye.copy())


def _causal_mask(t_len: int) -> np.ndarray:
    # allowed where key index <= query index
    return np.tril(np.ones((t_len, t_len), dtype=bool))


def temporal_integrate_batch_fwd(
    ap: AlignParams, trajs: np.ndarray
) -> tuple[np.ndarray, dict]:
    """Causally-masked self attention over (n, T, d) trajectories.

    Row t of each output depends only on trajectory rows 1..t.
    """
    if trajs.ndim != 3 or trajs.shape[1] == 0:
        raise ValueError("empty trajectory")
    n, t_len, d = trajs.shape
    q = trajs @ ap.temporal_WQ
    k = trajs @ ap.temporal_WK
    v = trajs @ ap.temporal_WV
    scores = (q @ k.transpose(0, 2, 1)) / np.sqrt(d)
    mask = np.broadcast_to(_causal_mask(t_len), scores.shape)
    beta = softmax_masked_rows(scores, mask)
    out = beta @ v
    cache = {"trajs": trajs, "q": q, "k": k, "v": v, "beta": beta}
    return out, cache


def temporal_integrate_batch_bwd(
    grad_out: np.ndarray, cache: dict, ap: AlignParams, grads: ParamDict
) -> np.ndarray:
    """Accumulate attention-parameter grads; return d loss / d trajectories."""
    trajs, q, k, v, beta = (
        cache["trajs"], cache["q"], cache["k"], cache["v"], cache["beta"],
    )
    d = trajs.shape[-1]
    g_beta = grad_out @ v.transpose(0, 2, 1)
    g_v = beta.transpose(0, 2, 1) @ grad_out
    g_scores = softmax_rows_backward(beta, g_beta) / np.sqrt(d)
    g_q = g_scores @ k
    g_k = g_scores.transpose(0, 2, 1) @ q
    grads["temporal_WQ"] += np.tensordot(trajs, g_q, axes=([0, 1], [0, 1]))
    grads["temporal_WK"] += np.tensordot(trajs, g_k, axes=([0, 1], [0, 1]))
    grads["temporal_WV"] += np.tensordot(trajs, g_v, axes=([0, 1], [0, 1]))
    return (
        g_q @ ap.temporal_WQ.T + g_k @ ap.temporal_WK.T + g_v @ ap.temporal_WV.T
    )


def temporal_integrate(ap: AlignParams, traj: np.ndarray) -> np.ndarray:
    """Integrate one (T, d) trajectory; row t summarizes history up to t."""
    out, _ = temporal_integrate_batch_fwd(ap, traj[None])
    return out[0]


def correspondence(h_source: np.ndarray, h_target: np.ndarray, t: int) -> float:
    """Cosine of the two integrations at time step ``t`` (1-based)."""
    if not 1 <= t <= min(h_source.shape[0], h_target.shape[0]):
        raise ValueError(f"time step {t} outside both integrations")
    u, v = h_source[t - 1], h_target[t - 1]
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("undefined cosine: zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def strength_diagonal(
    ap: AlignParams, h_source: np.ndarray, h_target: np.ndarray
) -> np.ndarray:
    """Per-time alignment strength: diagonal of the masked cross attention.

    ``h_source``/``h_target`` are (..., T, d) integrations; queries come from
    the source side, keys from the target side. Row 1 has a single live
    entry, so the strength at t = 1 is exactly 1.
    """
    d = h_source.shape[-1]
    q = h_source @ ap.cross_WQ
    k = h_target @ ap.cross_WK
    scores = (q @ np.swapaxes(k, -1, -2)) / np.sqrt(d)
    t_len = scores.shape[-1]
    mask = np.broadcast_to(_causal_mask(t_len), scores.shape)
    weights = softmax_masked_rows(scores, mask)
    return np.diagonal(weights, axis1=-2, axis2=-1)


def alignment_strength(
    ap: AlignParams, h_source: np.ndarray, h_target: np.ndarray, t: int
) -> float:
    """Strength for one pair at 1-based time ``t``; lies in (0, 1]."""
    t_len = h_source.shape[0]
    if not 1 <= t <= t_len:
        raise ValueError(f"time step {t} outside integration of length {t_len}")
    return float(strength_diagonal(ap, h_source, h_target)[t - 1])


def sample_alignment_negatives(
    n_targets: int,
    exclusions: list[set[int]],
    neg_factor: int,
    rng: np.random.Generator,
    max_attempts: int = 100,
) -> np.ndarray:
    """(P, N) negative target ids, uniform with per-pair exclusion sets.

    Collisions are resampled up to ``max_attempts``; an irreducible collision
    (tiny vocabularies) keeps the last draw but is flagged via -1.
    """
    p = len(exclusions)
    negs = rng.integers(0, n_targets, size=(p, neg_factor))
    for row, excl in enumerate(exclusions):
        if not excl:
            continue
        for col in range(neg_factor):
            attempts = 0
            while int(negs[row, col]) in excl:
                negs[row, col] = rng.integers(0, n_targets)
                attempts += 1
                if attempts >= max_attempts:
                    negs[row, col] = -1
                    break
    return negs


def alignment_loss_fwd(
    ap: AlignParams,
    source_trajs: np.ndarray,
    target_trajs: np.ndarray,
    pair_targets: np.ndarray,
    exclusions: list[set[int]],
    neg_factor: int,
    margin: float,
    rng: np.random.Generator,
    uniform_strength: bool = False,
    strength_override: np.ndarray | None = None,
) -> tuple[float, dict]:
    """Strength-weighted margin loss over alignment pairs.

    ``source_trajs`` is (P, T, d), one trajectory per pair (teacher side);
    ``target_trajs`` is (n_targets, T, d) covering the whole target
    vocabulary so sampled negatives can index it. The strength weight is a
    constant in the gradient (detached): it scales the hinge but is not
    itself optimized, which blocks the degenerate all-zero-strength solution.
    ``strength_override`` freezes the weights explicitly (used by the
    finite-difference checks and by the uniform-strength ablation via ones).
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    p = source_trajs.shape[0]
    if p == 0:
        raise ValueError("empty alignment pair set")
    h_src, cache_src = temporal_integrate_batch_fwd(ap, source_trajs)
    h_tgt, cache_tgt = temporal_integrate_batch_fwd(ap, target_trajs)

    negs = sample_alignment_negatives(
        target_trajs.shape[0], exclusions, neg_factor, rng
    )
    valid = negs >= 0
    safe_negs = np.where(valid, negs, 0)

    h_pos = h_tgt[pair_targets]  # (P, T, d)
    h_neg = h_tgt[safe_negs]  # (P, N, T, d)
    g_pos = cosine_rows_guarded(h_src, h_pos)  # (P, T)
    g_neg = cosine_rows_guarded(h_src[:, None], h_neg)  # (P, N, T)

    if strength_override is not None:
        beta = strength_override
    elif uniform_strength:
        beta = np.ones_like(g_pos)
    else:
        beta = strength_diagonal(ap, h_src, h_pos)

    hinge = np.maximum(0.0, margin - g_pos[:, None, :] + g_neg)
    hinge = hinge * valid[..., None]
    weight = 1.0 / hinge.size
    loss = float((beta[:, None, :] * hinge).sum() * weight)
    cache = {
        "cache_src": cache_src, "cache_tgt": cache_tgt,
        "h_src": h_src, "h_pos": h_pos, "h_neg": h_neg,
        "g_pos": g_pos, "g_neg": g_neg, "beta": beta, "hinge": hinge,
        "valid": valid, "safe_negs": safe_negs, "pair_targets": pair_targets,
        "margin": margin, "weight": weight,
        "n_targets": target_trajs.shape[0],
    }
    return loss, cache


def alignment_loss_bwd(
    cache: dict, ap: AlignParams, grads: ParamDict
) -> tuple[np.ndarray, np.ndarray]:
    """Return (grad wrt source trajectories, grad wrt target trajectories)."""
    h_src, h_pos, h_neg = cache["h_src"], cache["h_pos"], cache["h_neg"]
    beta, hinge, valid = cache["beta"], cache["hinge"], cache["valid"]
    weight = cache["weight"]

    active = (hinge > 0.0) & valid[..., None]
    g_hinge = beta[:, None, :] * active * weight  # (P, N, T)
    g_gpos = -g_hinge.sum(axis=1)  # (P, T)
    g_gneg = g_hinge

    d_hsrc_pos, d_hpos = cosine_rows_backward(h_src, h_pos, g_gpos)
    d_hsrc_neg, d_hneg = cosine_rows_backward(
        np.broadcast_to(h_src[:, None], h_neg.shape), h_neg, g_gneg
    )
    grad_h_src = d_hsrc_pos + d_hsrc_neg.sum(axis=1)

    grad_h_tgt = np.zeros(
        (cache["n_targets"],) + h_src.shape[1:], dtype=np.float64
    )
    np.add.at(grad_h_tgt, cache["pair_targets"], d_hpos)
    np.add.at(grad_h_tgt, cache["safe_negs"].reshape(-1),
              d_hneg.reshape((-1,) + d_hneg.shape[2:]))

    grad_src_trajs = temporal_integrate_batch_bwd(
        grad_h_src, cache["cache_src"], ap, grads
    )
    grad_tgt_trajs = temporal_integrate_batch_bwd(
        grad_h_tgt, cache["cache_tgt"], ap, grads
    )
    return grad_src_trajs, grad_tgt_trajs


def alignment_loss(
    ap: AlignParams,
    source_trajs: np.ndarray,
    target_trajs: np.ndarray,
    pair_targets: np.ndarray,
    exclusions: list[set[int]],
    neg_factor: int,
    margin: float,
    rng: np.random.Generator,
    uniform_strength: bool = False,
    strength_override: np.ndarray | None = None,
) -> float:
    loss, _ = alignment_loss_fwd(
        ap, source_trajs, target_trajs, pair_targets, exclusions,
        neg_factor, margin, rng, uniform_strength, strength_override,
    )
    return loss
