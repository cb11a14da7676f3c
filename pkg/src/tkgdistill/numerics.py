"""Dense numerical core: masked softmax, cosine, Adam, finite-difference checks.

All arithmetic is float64. Parameter collections are plain ``dict[str, np.ndarray]``
so the optimizer and the gradient checker stay agnostic of model structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ParamDict = dict[str, np.ndarray]


def assert_finite(x: np.ndarray, what: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite values in {what}")
    return x


def softmax_masked(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax over the unmasked positions; masked positions are exactly 0.

    ``mask`` is True where a position is live. Stabilized by max-subtraction
    over the live support. Raises on empty support.
    """
    logits = np.asarray(logits, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if logits.shape != mask.shape:
        raise ValueError("logits and mask must have equal shape")
    if not mask.any():
        raise ValueError("empty support: all positions masked")
    shifted = np.where(mask, logits, -np.inf)
    shifted = shifted - shifted.max()
    exps = np.where(mask, np.exp(shifted), 0.0)
    return exps / exps.sum()


def softmax_masked_rows(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-wise masked softmax for arrays of shape (..., k).

    Rows with empty support come back all-zero; callers that need a
    distribution on every row must handle such rows themselves.
    """
    mask = np.asarray(mask, dtype=bool)
    neg = np.where(mask, logits, -np.inf)
    mx = neg.max(axis=-1, keepdims=True)
    # rows with no live entries have mx == -inf; keep them quiet
    mx = np.where(np.isfinite(mx), mx, 0.0)
    exps = np.where(mask, np.exp(neg - mx), 0.0)
    denom = exps.sum(axis=-1, keepdims=True)
    return np.divide(exps, denom, out=np.zeros_like(exps), where=denom > 0)


def softmax_rows_backward(alpha: np.ndarray, grad_alpha: np.ndarray) -> np.ndarray:
    """d loss / d logits for a row-wise softmax with weights ``alpha``."""
    inner = (alpha * grad_alpha).sum(axis=-1, keepdims=True)
    return alpha * (grad_alpha - inner)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError("cosine requires equal dimensions")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("undefined cosine: zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def cosine_rows(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Cosine along the last axis with broadcasting; zero rows raise."""
    nu = np.linalg.norm(u, axis=-1)
    nv = np.linalg.norm(v, axis=-1)
    if np.any(nu == 0.0) or np.any(nv == 0.0):
        raise ValueError("undefined cosine: zero vector")
    return np.clip((u * v).sum(axis=-1) / (nu * nv), -1.0, 1.0)


def cosine_rows_guarded(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Like cosine_rows but a zero row scores 0 instead of raising.

    A rectified representation can be exactly zero (dead fallback rows);
    inside the losses that reads as neutral correspondence with a zero
    subgradient rather than an error.
    """
    nu = np.linalg.norm(u, axis=-1)
    nv = np.linalg.norm(v, axis=-1)
    denom = nu * nv
    dot = (u * v).sum(axis=-1)
    out = np.divide(dot, denom, out=np.zeros_like(dot), where=denom > 0)
    return np.clip(out, -1.0, 1.0)


def cosine_rows_backward(
    u: np.ndarray, v: np.ndarray, grad_cos: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of cosine along the last axis; zero rows get zero gradient."""
    nu = np.linalg.norm(u, axis=-1, keepdims=True)
    nv = np.linalg.norm(v, axis=-1, keepdims=True)
    live = (nu > 0) & (nv > 0)
    nu = np.where(nu > 0, nu, 1.0)
    nv = np.where(nv > 0, nv, 1.0)
    dot = (u * v).sum(axis=-1, keepdims=True)
    g = np.asarray(grad_cos)[..., None] * live
    du = g * (v / (nu * nv) - dot * u / (nu**3 * nv))
    dv = g * (u / (nu * nv) - dot * v / (nu * nv**3))
    return du, dv


@dataclass
class GradCheckReport:
    max_abs_err: float
    max_rel_err: float
    worst_index: tuple[str, int]
    passed: bool

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"grad_check {status}: abs={self.max_abs_err:.3e} "
            f"rel={self.max_rel_err:.3e} worst={self.worst_index}"
        )


def grad_check(
    loss_and_grad,
    params: ParamDict,
    step: float = 1e-5,
    tol: float = 1e-5,
) -> GradCheckReport:
    """Compare analytic gradients against central differences, coordinate-wise.

    ``loss_and_grad(params) -> (loss, grads)`` must be pure and deterministic
    for fixed parameters (freeze any sampling before calling). A coordinate
    passes when max(abs_err, rel_err) <= tol, where rel_err is floored by
    max(|analytic|, |numeric|, 1).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    base_loss, grads = loss_and_grad(params)
    if not np.isfinite(base_loss):
        raise FloatingPointError("non-finite loss at base point")

    max_abs = 0.0
    max_rel = 0.0
    worst = ("", -1)
    passed = True
    for name in sorted(params):
        p = params[name]
        g = np.asarray(grads[name], dtype=np.float64).reshape(-1)
        flat = p.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lo_hi = loss_and_grad(params)[0]
            flat[i] = orig - step
            lo_lo = loss_and_grad(params)[0]
            flat[i] = orig
            if not (np.isfinite(lo_hi) and np.isfinite(lo_lo)):
                raise FloatingPointError(f"non-finite loss perturbing {name}[{i}]")
            numeric = (lo_hi - lo_lo) / (2.0 * step)
            abs_err = abs(g[i] - numeric)
            rel_err = abs_err / max(abs(g[i]), abs(numeric), 1.0)
            err = max(abs_err, rel_err)
            if err > max(max_abs, max_rel):
                worst = (name, i)
            max_abs = max(max_abs, abs_err)
            max_rel = max(max_rel, rel_err)
            if err > tol:
                passed = False
    return GradCheckReport(max_abs, max_rel, worst, passed)


@dataclass
class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    m: ParamDict = field(default_factory=dict)
    v: ParamDict = field(default_factory=dict)
    t: int = 0

    @classmethod
    def like(cls, params: ParamDict) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            t=0,
        )


def adam_step(
    params: ParamDict,
    grads: ParamDict,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update, in place on ``params``."""
    state.t += 1
    t = state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"shape mismatch for {name}: {g.shape} vs {p.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)
