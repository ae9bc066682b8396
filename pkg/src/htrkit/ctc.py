"""CTC loss, gradients, and best-path decoding.

The loss marginalizes over every frame-level path that collapses to
the target labels under the merge function: collapse runs of repeated
symbols, then delete blanks. Recursions run over the blank-augmented
label sequence (blank, y1, blank, y2, ..., blank) entirely in log
space; no probability-space rescaling is ever needed.

Blank is index 0 everywhere (see alphabet module).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .alphabet import BLANK_INDEX
from .errors import ConfigError, InfeasibleAlignmentError

NEG_INF = -np.inf


def merge_beta(path, blank_index: int = BLANK_INDEX) -> list[int]:
    """Collapse repeated consecutive symbols, then remove blanks."""
    out = []
    prev = None
    for s in path:
        if s != prev and s != blank_index:
            out.append(int(s))
        prev = s
    return out


def best_path_decode(posteriors: np.ndarray) -> list[int]:
    """Per-frame argmax (ties to the lowest index), merged by merge_beta."""
    p = np.asarray(posteriors, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] < 1:
        raise ConfigError("posteriors must be a (T, K) matrix with T >= 1")
    return merge_beta(np.argmax(p, axis=1))


def augment_labels(labels) -> np.ndarray:
    """Interleave blanks: y1..yL -> blank, y1, blank, ..., yL, blank."""
    labels = list(labels)
    aug = np.full(2 * len(labels) + 1, BLANK_INDEX, dtype=np.int64)
    aug[1::2] = labels
    return aug


def min_frames(labels) -> int:
    """Fewest frames that can align to the label sequence."""
    labels = list(labels)
    repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    return len(labels) + repeats


def _check_labels(labels, num_classes: int) -> list[int]:
    labels = [int(y) for y in labels]
    for y in labels:
        if y == BLANK_INDEX or not 0 <= y < num_classes:
            raise ConfigError(f"label {y} is not a real class in [1, {num_classes})")
    return labels


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _forward(logp_aug: np.ndarray, skip: np.ndarray) -> np.ndarray:
    """Alpha recursion. logp_aug[t, s] = log p_t(aug[s]); includes emission."""
    t_len, s_len = logp_aug.shape
    alpha = np.full((t_len, s_len), NEG_INF)
    alpha[0, 0] = logp_aug[0, 0]
    if s_len > 1:
        alpha[0, 1] = logp_aug[0, 1]
    for t in range(1, t_len):
        prev = alpha[t - 1]
        cand = prev.copy()
        cand[1:] = np.logaddexp(cand[1:], prev[:-1])
        cand[skip] = np.logaddexp(cand[skip], prev[np.flatnonzero(skip) - 2])
        alpha[t] = cand + logp_aug[t]
    return alpha


@dataclass
class CtcResult:
    loss: float  # -log P(labels | inputs), natural log
    grad: np.ndarray  # dloss/dlogits, shape (T, K)
    gamma: np.ndarray  # per-frame symbol occupancy, shape (T, K)


def ctc_loss_grad(logits: np.ndarray, labels) -> CtcResult:
    """Loss and exact gradient of -log P(labels | logits) w.r.t. the logits.

    Softmax is applied internally. Raises InfeasibleAlignmentError when
    the sequence is too short to align (T < L + adjacent repeats)
    rather than silently returning an infinite loss.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[0] < 1:
        raise ConfigError("logits must be a (T, K) matrix with T >= 1")
    t_len, k = logits.shape
    labels = _check_labels(labels, k)
    need = min_frames(labels)
    if t_len < need:
        raise InfeasibleAlignmentError(
            f"{len(labels)} labels (min {need} frames) cannot align to {t_len} frames"
        )
    aug = augment_labels(labels)
    s_len = aug.shape[0]
    # skip transition allowed into non-blank positions whose label differs
    # from the one two slots back
    skip = np.zeros(s_len, dtype=bool)
    if s_len > 2:
        skip[2:] = (aug[2:] != BLANK_INDEX) & (aug[2:] != aug[:-2])

    logp = log_softmax(logits)
    logp_aug = logp[:, aug]
    alpha = _forward(logp_aug, skip)
    beta = _forward(logp_aug[::-1, ::-1], skip[::-1].copy())[::-1, ::-1]

    tail = alpha[-1, -1]
    if s_len > 1:
        tail = np.logaddexp(tail, alpha[-1, -2])
    log_z = float(tail)

    # occupancy: alpha and beta both include the emission at t, divide it out
    with np.errstate(invalid="ignore"):
        occ = np.exp(alpha + beta - logp_aug - log_z)
    occ[np.isnan(occ)] = 0.0
    gamma = np.zeros((t_len, k), dtype=np.float64)
    np.add.at(gamma.T, aug, occ.T)
    grad = np.exp(logp) - gamma
    return CtcResult(loss=-log_z, grad=grad, gamma=gamma)


@dataclass
class BatchCtcResult:
    mean_loss: float
    grads: list[np.ndarray | None]  # None for skipped members
    skipped: list[int]  # indices of infeasible members


def ctc_loss_batch(items: list[tuple[np.ndarray, list]]) -> BatchCtcResult:
    """CTC over a batch of (logits, labels) pairs.

    Returns the mean loss over the feasible members and each member's
    gradient already scaled by 1/n_feasible, so summing the per-member
    gradients yields the gradient of the mean. Infeasible members are
    skipped and recorded, not fatal.
    """
    if not items:
        raise ConfigError("empty CTC batch")
    losses: list[float] = []
    raw: list[np.ndarray | None] = []
    skipped: list[int] = []
    for i, (logits, labels) in enumerate(items):
        try:
            res = ctc_loss_grad(logits, labels)
        except InfeasibleAlignmentError:
            raw.append(None)
            skipped.append(i)
            continue
        losses.append(res.loss)
        raw.append(res.grad)
    if not losses:
        return BatchCtcResult(mean_loss=float("nan"), grads=raw, skipped=skipped)
    scale = 1.0 / len(losses)
    grads = [g * scale if g is not None else None for g in raw]
    return BatchCtcResult(mean_loss=float(np.mean(losses)), grads=grads,
                          skipped=skipped)
