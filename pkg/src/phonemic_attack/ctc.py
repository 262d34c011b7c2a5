"""Character alphabet, CTC loss (log-space forward-backward) and greedy decoding."""

from __future__ import annotations

import numpy as np

BLANK = 0
CHARS = "abcdefghijklmnopqrstuvwxyz "
N_CLASSES = len(CHARS) + 1  # 28
_INDEX = {c: i + 1 for i, c in enumerate(CHARS)}

NEG_INF = -np.inf


class InfeasibleLabelError(ValueError):
    """The label cannot be aligned to the available frames (loss would be +inf)."""


def encode(text: str) -> np.ndarray:
    text = " ".join(text.lower().replace("'", "").split())
    try:
        return np.array([_INDEX[c] for c in text], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"character {exc.args[0]!r} not in alphabet") from None


def decode_ids(ids) -> str:
    return "".join(CHARS[i - 1] for i in ids if i != BLANK)


def greedy_decode(logits: np.ndarray) -> str:
    """Per-frame argmax, collapse repeats, drop blanks."""
    best = np.argmax(logits, axis=1)
    if best.size == 0:
        return ""
    keep = np.ones(best.shape[0], dtype=bool)
    keep[1:] = best[1:] != best[:-1]
    return decode_ids(best[keep])


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def min_frames(label) -> int:
    label = np.asarray(label)
    repeats = int(np.sum(label[1:] == label[:-1])) if label.size > 1 else 0
    return int(label.size) + repeats


def _extend(label: np.ndarray, blank: int):
    ext = np.full(2 * label.size + 1, blank, dtype=np.int64)
    ext[1::2] = label
    # a skip s-2 -> s is allowed into a non-blank that differs from the previous non-blank
    skip = np.zeros(ext.size, dtype=bool)
    if label.size > 1:
        skip[3::2] = label[1:] != label[:-1]
    return ext, skip


def ctc_loss(logits: np.ndarray, label, blank: int = BLANK) -> tuple[float, np.ndarray]:
    """Negative log-likelihood of ``label`` and its gradient w.r.t. ``logits``.

    ``logits`` is (frames, classes), unnormalized. Returns ``(loss, dloss/dlogits)``
    where the gradient is ``softmax - per-frame symbol posterior``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    label = np.asarray(label, dtype=np.int64).reshape(-1)
    n_t, n_v = logits.shape
    if np.any(label == blank) or np.any((label < 0) | (label >= n_v)):
        raise ValueError("label ids must be non-blank classes")
    if min_frames(label) > n_t:
        raise InfeasibleLabelError(
            f"label of length {label.size} needs {min_frames(label)} frames, got {n_t}")

    lp = log_softmax(logits)
    ext, skip = _extend(label, blank)
    n_s = ext.size
    emit = lp[:, ext]  # (T, S)

    alpha = np.full((n_t, n_s), NEG_INF)
    alpha[0, 0] = emit[0, 0]
    if n_s > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, n_t):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        acc[2:] = np.where(skip[2:], np.logaddexp(acc[2:], prev[:-2]), acc[2:])
        alpha[t] = acc + emit[t]

    beta = np.full((n_t, n_s), NEG_INF)
    beta[-1, -1] = emit[-1, -1]
    if n_s > 1:
        beta[-1, -2] = emit[-1, -2]
    skip_fwd = np.zeros(n_s, dtype=bool)  # s -> s+2 allowed
    skip_fwd[:-2] = skip[2:]
    for t in range(n_t - 2, -1, -1):
        nxt = beta[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        acc[:-2] = np.where(skip_fwd[:-2], np.logaddexp(acc[:-2], nxt[2:]), acc[:-2])
        beta[t] = acc + emit[t]

    log_p = np.logaddexp(alpha[-1, -1], alpha[-1, -2]) if n_s > 1 else alpha[-1, -1]
    if not np.isfinite(log_p):
        raise InfeasibleLabelError("label has zero probability under these logits")

    # occupation log-probabilities gamma[t, s] = log P(path passes (t, s) | label)
    gamma = alpha + beta - emit - log_p
    occ = np.exp(gamma)
    post = np.zeros((n_t, n_v))
    for v in np.unique(ext):
        post[:, v] = occ[:, ext == v].sum(axis=1)
    grad = np.exp(lp) - post
    return float(-log_p), grad


def sequence_log_prob(logits: np.ndarray, label, blank: int = BLANK) -> float:
    """log p(label | logits); -inf when the label cannot fit."""
    try:
        loss, _ = ctc_loss(logits, label, blank)
    except InfeasibleLabelError:
        return NEG_INF
    return -loss
