"""Connectionist temporal classification: path collapse, loss and gradient.

Class 0 is the blank. The forward-backward recursion runs in log space over
the blank-augmented target, so posteriors down to 1e-300 stay finite.
"""

import numpy as np

__all__ = ["BLANK", "CTCInfeasibleError", "collapse", "min_frames", "ctc_loss_grad", "ctc_loss"]

BLANK = 0


class CTCInfeasibleError(ValueError):
    """The target needs more frames than the posterior matrix has."""


def collapse(path):
    """Merge adjacent repeats, then drop blanks."""
    out = []
    prev = None
    for k in path:
        k = int(k)
        if k != prev and k != BLANK:
            out.append(k)
        prev = k
    return out


def min_frames(target):
    """Shortest path length that collapses to `target`."""
    target = list(target)
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def _extend(target):
    ext = np.zeros(2 * len(target) + 1, dtype=np.int64)
    ext[1::2] = target
    # s-2 skip is allowed onto a label that differs from the label two back
    skip = np.zeros(len(ext), dtype=bool)
    if len(target) > 1:
        skip[3::2] = np.asarray(target[1:]) != np.asarray(target[:-1])
    return ext, skip


def _forward_backward(logp, ext, skip):
    T = logp.shape[0]
    S = len(ext)
    emit = logp[:, ext]  # (T, S)
    alpha = np.full((T, S), -np.inf)
    alpha[0, 0] = emit[0, 0]
    if S > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, T):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        acc[2:] = np.where(skip[2:], np.logaddexp(acc[2:], prev[:-2]), acc[2:])
        alpha[t] = acc + emit[t]
    beta = np.full((T, S), -np.inf)
    beta[T - 1, S - 1] = 0.0
    if S > 1:
        beta[T - 1, S - 2] = 0.0
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1] + emit[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        acc[:-2] = np.where(skip[2:], np.logaddexp(acc[:-2], nxt[2:]), acc[:-2])
        beta[t] = acc
    return alpha, beta


def ctc_loss_grad(probs, target):
    """Negative log likelihood of `target` and its gradient w.r.t. the logits.

    `probs` is the (T, C+1) softmax output; `target` a sequence of class
    indices in [1, C]. Raises CTCInfeasibleError if T is too short.
    """
    probs = np.asarray(probs, dtype=np.float64)
    target = [int(k) for k in target]
    T, n_classes = probs.shape
    if any(k < 1 or k >= n_classes for k in target):
        raise ValueError(f"target labels must lie in [1, {n_classes - 1}]")
    need = min_frames(target)
    if T < need:
        raise CTCInfeasibleError(f"target of length {len(target)} needs {need} frames, got {T}")
    if T == 0:
        return 0.0, np.zeros_like(probs)
    with np.errstate(divide="ignore"):
        logp = np.log(probs)
    ext, skip = _extend(target)
    alpha, beta = _forward_backward(logp, ext, skip)
    S = len(ext)
    log_total = alpha[T - 1, S - 1] if S == 1 else np.logaddexp(alpha[T - 1, S - 1], alpha[T - 1, S - 2])
    occ = alpha + beta - log_total  # log posterior of being in state s at t
    post = np.zeros_like(probs)
    np.add.at(post.T, ext, np.exp(occ).T)
    return float(-log_total), probs - post


def ctc_loss(probs, target):
    return ctc_loss_grad(probs, target)[0]
