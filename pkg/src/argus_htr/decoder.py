"""Turning posterior matrices into text.

Best-path decoding takes the per-frame argmax and collapses it. Dictionary
decoding runs a CTC Viterbi search over a prefix tree of permitted words; if
the best word's per-frame geometric-mean probability falls below a threshold
the raw best path is kept instead. Finally the word order is brought from
image (left-to-right) order into reading order, reversing Arabic words.
"""

import bisect
import math
import unicodedata
from dataclasses import dataclass

import numpy as np

from .ctc import BLANK, collapse

__all__ = [
    "Alphabet",
    "Lexicon",
    "DecoderConfig",
    "UnspellableError",
    "AlphabetFormatError",
    "LexiconFormatError",
    "best_path",
    "word_viterbi",
    "decode_segment",
    "decode_line",
    "is_arabic_word",
    "bidi_fix",
    "visual_order",
    "THETA_DEFAULT",
    "THETA_ENLARGED",
]

THETA_DEFAULT = 1.0 / math.e
THETA_ENLARGED = 1.0 / math.sqrt(math.e)

SPACE = " "
BLANK_PLACEHOLDER = "<blank>"

ARABIC_RANGES = ((0x0600, 0x06FF), (0x0750, 0x077F), (0xFB50, 0xFDFF), (0xFE70, 0xFEFF))


class UnspellableError(ValueError):
    pass


class AlphabetFormatError(ValueError):
    pass


class LexiconFormatError(ValueError):
    pass


class Alphabet:
    """Ordered character classes; index 0 is the implicit blank.

    A class is a non-empty string, so multi-codepoint classes such as ".."
    and "..." are allowed. Text is encoded by greedy longest match.
    """

    def __init__(self, classes, blank=BLANK_PLACEHOLDER):
        classes = list(classes)
        if len(set(classes)) != len(classes):
            dup = sorted({c for c in classes if classes.count(c) > 1})
            raise AlphabetFormatError(f"duplicate classes: {dup!r}")
        if any(not c for c in classes):
            raise AlphabetFormatError("classes must be non-empty strings")
        if SPACE not in classes:
            raise AlphabetFormatError("alphabet has no space class")
        self.blank = blank
        self.classes = tuple(classes)
        self._index = {c: i + 1 for i, c in enumerate(classes)}
        self._max_len = max(len(c) for c in classes)

    def __len__(self):
        return len(self.classes)

    def __eq__(self, other):
        return isinstance(other, Alphabet) and (self.classes, self.blank) == (other.classes, other.blank)

    def __repr__(self):
        return f"Alphabet({len(self)} classes)"

    @property
    def n_outputs(self):
        return len(self.classes) + 1

    @property
    def space(self):
        return self._index[SPACE]

    def index(self, cls):
        return self._index[cls]

    def label(self, k):
        return self.classes[k - 1]

    def encode(self, text):
        out = []
        i = 0
        while i < len(text):
            for n in range(min(self._max_len, len(text) - i), 0, -1):
                k = self._index.get(text[i : i + n])
                if k is not None:
                    out.append(k)
                    i += n
                    break
            else:
                raise UnspellableError(f"cannot spell {text[i]!r} (U+{ord(text[i]):04X}) in {text!r}")
        return out

    def decode(self, labels):
        return "".join(self.classes[k - 1] for k in labels)

    def can_spell(self, text):
        try:
            self.encode(text)
        except UnspellableError:
            return False
        return True

    def to_text(self):
        return "\n".join([self.blank, *self.classes]) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if not lines:
            raise AlphabetFormatError("empty alphabet file")
        return cls(lines[1:], blank=lines[0])

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.to_text())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8", newline="") as f:
            return cls.from_text(f.read())


class Lexicon:
    """Set of permitted words with a prefix tree over their class sequences."""

    def __init__(self, words, alphabet):
        self.alphabet = alphabet
        self.words = sorted(set(words))
        if any(not w for w in self.words):
            raise LexiconFormatError("empty word in lexicon")
        self.spellings = [alphabet.encode(w) for w in self.words]
        parent, label, terminal = [-1], [BLANK], [-1]
        children = [{}]
        for wi, sp in enumerate(self.spellings):
            node = 0
            for k in sp:
                nxt = children[node].get(k)
                if nxt is None:
                    nxt = len(parent)
                    children[node][k] = nxt
                    children.append({})
                    parent.append(node)
                    label.append(k)
                    terminal.append(-1)
                node = nxt
            terminal[node] = wi
        # parents precede children by construction
        self.parent = np.array(parent, dtype=np.int64)
        self.label = np.array(label, dtype=np.int64)
        self.terminal = np.array(terminal, dtype=np.int64)

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        i = bisect.bisect_left(self.words, word)
        return i < len(self.words) and self.words[i] == word

    @property
    def n_nodes(self):
        return len(self.parent)

    def to_text(self):
        return "".join(w + "\n" for w in self.words)

    @classmethod
    def from_text(cls, text, alphabet):
        words = [w for w in text.split("\n") if w != ""]
        seen = set()
        for w in words:
            if w in seen:
                raise LexiconFormatError(f"duplicate word {w!r}")
            seen.add(w)
        return cls(words, alphabet)

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.to_text())

    @classmethod
    def load(cls, path, alphabet):
        with open(path, encoding="utf-8", newline="") as f:
            return cls.from_text(f.read(), alphabet)


@dataclass(frozen=True)
class DecoderConfig:
    theta: float = THETA_DEFAULT
    use_dictionary: bool = True

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")


def _argmax_path(probs):
    probs = np.asarray(probs)
    if probs.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return np.argmax(probs, axis=1)  # first maximum wins, so ties go to the lower index


def best_path(probs, alphabet):
    return alphabet.decode(collapse(_argmax_path(probs)))


def word_viterbi(segment, lex, reverse=False):
    """Most probable dictionary word for a posterior segment.

    Maximizes the single best CTC alignment over all words of `lex` by token
    passing over its prefix tree. Returns (word, score) with score the
    per-frame geometric mean of the best path probability, or (None, 0.0)
    when the segment is too short for every word. With `reverse` the frames
    are read right to left.
    """
    if len(lex) == 0:
        raise ValueError("empty lexicon")
    segment = np.asarray(segment, dtype=np.float64)
    if reverse:
        segment = segment[::-1]
    T = segment.shape[0]
    if T == 0:
        return None, 0.0
    with np.errstate(divide="ignore"):
        logp = np.log(segment)
    parent, label = lex.parent, lex.label
    plabel = label[np.maximum(parent, 0)]
    plabel[0] = -1
    distinct = plabel != label
    n = lex.n_nodes
    blank = np.full(n, -np.inf)
    emit = np.full(n, -np.inf)
    blank[0] = 0.0
    par = np.maximum(parent, 0)
    for t in range(T):
        lp = logp[t]
        new_blank = np.maximum(blank, emit) + lp[BLANK]
        enter = np.maximum(blank[par], np.where(distinct, emit[par], -np.inf))
        new_emit = np.maximum(emit, enter) + lp[label]
        new_emit[0] = -np.inf
        blank, emit = new_blank, new_emit
    final = np.maximum(blank, emit)
    term = np.nonzero(lex.terminal >= 0)[0]
    scores = final[term]
    best = scores.max()
    if not np.isfinite(best):
        return None, 0.0
    # words are sorted, so the smallest word index among ties is the lexicographic minimum
    wi = lex.terminal[term[scores == best]].min()
    return lex.words[wi], math.exp(best / T)


def _segment_labels(segment, lex, cfg, reverse):
    """Class sequence (in frame order) chosen for one segment."""
    raw = collapse(_argmax_path(segment))
    if not cfg.use_dictionary or lex is None or len(lex) == 0:
        return raw
    word, score = word_viterbi(segment, lex, reverse=reverse)
    if word is None or score < cfg.theta:
        return raw
    labels = lex.alphabet.encode(word)
    return labels[::-1] if reverse else labels


def decode_segment(segment, lex, cfg=DecoderConfig(), alphabet=None, reverse=False):
    """Dictionary word if its score reaches theta, else the best path.

    The result is in frame order; with `reverse` the dictionary is matched
    against the frames read right to left, as for Arabic words in image order.
    """
    alphabet = alphabet or lex.alphabet
    return alphabet.decode(_segment_labels(segment, lex, cfg, reverse))


def is_arabic_word(word):
    letters = [ch for ch in word if unicodedata.category(ch).startswith("L")]
    if not letters:
        return False
    return all(any(lo <= ord(ch) <= hi for lo, hi in ARABIC_RANGES) for ch in letters)


def bidi_fix(words, flags, alphabet=None):
    """Image-order words to reading order.

    Reverses the word sequence and the class sequence of every flagged
    (Arabic) word; other words keep their internal order.
    """
    out = []
    for w, arabic in zip(reversed(list(words)), reversed(list(flags))):
        if arabic:
            w = alphabet.decode(alphabet.encode(w)[::-1]) if alphabet is not None else w[::-1]
        out.append(w)
    return " ".join(out)


def visual_order(text, alphabet=None):
    """Reading-order text to image order (the inverse of `bidi_fix`)."""
    words = [w for w in text.split(SPACE) if w]
    return bidi_fix(words, [is_arabic_word(w) for w in words], alphabet)


def decode_line(probs, alphabet, lex=None, cfg=DecoderConfig()):
    """Decode a whole line posterior matrix into reading-order text.

    Frames whose argmax is the space class split the line into word
    segments. Arabic segments are looked up in the dictionary, everything
    else keeps its best path.
    """
    probs = np.asarray(probs, dtype=np.float64)
    path = _argmax_path(probs)
    if path.size == 0:
        return ""
    cuts = np.nonzero(path == alphabet.space)[0]
    bounds = np.concatenate([[-1], cuts, [len(path)]])
    words = []
    for a, b in zip(bounds[:-1] + 1, bounds[1:]):
        if b <= a:
            continue
        raw = collapse(path[a:b])
        if not raw:
            continue
        text = alphabet.decode(raw)
        if is_arabic_word(text):
            text = alphabet.decode(_segment_labels(probs[a:b], lex, cfg, reverse=True))
        words.append(text)
    return bidi_fix(words, [is_arabic_word(w) for w in words], alphabet)
