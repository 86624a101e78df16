"""Independent reference implementations used by the tests."""

import itertools
import math

import numpy as np

from argus_htr.ctc import collapse


def word_path_logprob(segment, labels):
    """Best single CTC alignment of `labels` (log prob), by its own DP; -inf if none."""
    T = segment.shape[0]
    ext = [0]
    for k in labels:
        ext += [k, 0]
    S = len(ext)
    with np.errstate(divide="ignore"):
        lp = np.log(segment)
    v = np.full(S, -np.inf)
    v[0] = lp[0, ext[0]]
    if S > 1:
        v[1] = lp[0, ext[1]]
    for t in range(1, T):
        nv = np.full(S, -np.inf)
        for s in range(S):
            best = v[s]
            if s >= 1:
                best = max(best, v[s - 1])
            if s >= 2 and ext[s] != 0 and ext[s] != ext[s - 2]:
                best = max(best, v[s - 2])
            nv[s] = best + lp[t, ext[s]]
        v = nv
    return max(v[-1], v[-2]) if S > 1 else v[-1]


def word_path_logprob_brute(segment, labels):
    T, K = segment.shape
    best = -math.inf
    for path in itertools.product(range(K), repeat=T):
        if collapse(path) == list(labels):
            best = max(best, float(np.sum(np.log(segment[np.arange(T), path]))))
    return best


def exhaustive_word_viterbi(segment, words, alphabet):
    """Score every word separately; ties go to the lexicographically smallest."""
    T = segment.shape[0]
    best_w, best = None, -math.inf
    for w in sorted(words):
        s = word_path_logprob(segment, alphabet.encode(w))
        if s > best:
            best_w, best = w, s
    if best_w is None:
        return None, 0.0
    return best_w, math.exp(best / T)
