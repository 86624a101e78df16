"""Word and character error rates."""


def edit_distance(ref, hyp):
    """Levenshtein distance between two sequences (unit costs)."""
    hyp = list(hyp)
    prev = list(range(len(hyp) + 1))
    for i, r in enumerate(ref, 1):
        cur = [i]
        for j, h in enumerate(hyp, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (r != h)))
        prev = cur
    return prev[-1]


def words(text):
    return [w for w in text.split(" ") if w]


def error_counts(refs, hyps):
    """(word errors, reference words, char errors, reference chars)."""
    we = nw = ce = nc = 0
    for r, h in zip(refs, hyps, strict=True):
        we += edit_distance(words(r), words(h))
        nw += len(words(r))
        ce += edit_distance(r, h)
        nc += len(r)
    return we, nw, ce, nc


def wer_cer(refs, hyps):
    """Corpus-level WER and CER in percent."""
    refs, hyps = list(refs), list(hyps)
    if not refs:
        raise ValueError("empty reference set")
    we, nw, ce, nc = error_counts(refs, hyps)
    return 100.0 * we / max(nw, 1), 100.0 * ce / max(nc, 1)
