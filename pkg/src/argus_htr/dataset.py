"""Synthetic handwriting lines, corpus files, alphabets and dictionaries.

The generator renders polyline glyphs along a wobbling baseline with a random
slant and additive noise; it stands in for scanned line images. Lines are laid
out in image order, i.e. word order right to left and Arabic words right to
left, so that `decoder.bidi_fix` recovers the transcript.
"""

import io
import math
import os
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import font
from .decoder import (
    SPACE,
    THETA_DEFAULT,
    THETA_ENLARGED,
    Alphabet,
    DecoderConfig,
    Lexicon,
    UnspellableError,
    is_arabic_word,
    visual_order,
)
from .pgm import quantize, read_pgm, write_pgm

__all__ = [
    "SynthConfig",
    "Line",
    "Page",
    "Corpus",
    "CorpusError",
    "synth_line",
    "make_vocabulary",
    "synth_corpus",
    "save_corpus",
    "load_corpus",
    "derive_alphabet",
    "load_alphabet",
    "build_dictionary",
    "DictProfile",
    "DECODER_PROFILES",
    "profile_dictionary",
]


@dataclass(frozen=True)
class SynthConfig:
    glyphs: str = font.LATIN + font.DIGITS + " "
    words_per_line: tuple = (1, 4)
    word_length: tuple = (2, 6)
    x_height: float = 40.0
    wobble_amplitude: float = 8.0
    wobble_period: float = 400.0
    slant_range: float = 0.3
    thickness: float = 5.0
    noise: float = 0.03
    margin: int = 16
    seed: int = 0

    def __post_init__(self):
        missing = [c for c in self.glyphs if c not in font.GLYPHS]
        if missing:
            raise ValueError(f"glyphs not in the stroke font: {missing!r}")
        if self.words_per_line[0] < 1 or self.words_per_line[0] > self.words_per_line[1]:
            raise ValueError("words_per_line must be a non-empty range of positive counts")
        if self.word_length[0] < 1 or self.word_length[0] > self.word_length[1]:
            raise ValueError("word_length must be a non-empty range of positive lengths")
        if min(self.wobble_amplitude, self.slant_range, self.noise) < 0 or self.thickness <= 0:
            raise ValueError("amplitudes, ranges and noise must be non-negative")
        if not 120 <= self.canvas_height() <= 260:
            raise ValueError(f"line height {self.canvas_height()} outside 120..260 px")

    def canvas_height(self):
        body = 2.2 * self.x_height + 2 * self.wobble_amplitude + self.thickness
        return max(120, int(math.ceil(body + 2 * self.margin)))


def _draw_segment(img, p, q, radius):
    """Anti-aliased thick segment p-q, max-composited into img (rows = y)."""
    h, w = img.shape
    pad = radius + 1.5
    x0 = max(0, int(math.floor(min(p[0], q[0]) - pad)))
    x1 = min(w, int(math.ceil(max(p[0], q[0]) + pad)) + 1)
    y0 = max(0, int(math.floor(min(p[1], q[1]) - pad)))
    y1 = min(h, int(math.ceil(max(p[1], q[1]) + pad)) + 1)
    if x0 >= x1 or y0 >= y1:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1]
    dx, dy = q[0] - p[0], q[1] - p[1]
    ll = dx * dx + dy * dy
    if ll == 0.0:
        t = np.zeros(xs.shape)
    else:
        t = np.clip(((xs - p[0]) * dx + (ys - p[1]) * dy) / ll, 0.0, 1.0)
    dist = np.hypot(xs - (p[0] + t * dx), ys - (p[1] + t * dy))
    val = np.clip(radius + 0.5 - dist, 0.0, 1.0)
    np.maximum(img[y0:y1, x0:x1], val, out=img[y0:y1, x0:x1])


def _layout_width(text, cfg):
    return sum(font.GLYPHS[c][0] for c in text) * cfg.x_height


def synth_line(text, cfg=SynthConfig(), rng=None):
    """Render reading-order `text` as a raw line image (image order).

    Deterministic given the state of `rng` (a numpy Generator).
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    bad = sorted({c for c in text if c not in cfg.glyphs})
    if bad:
        raise UnspellableError(f"text {text!r} uses glyphs outside the configured set: {bad!r}")
    shown = visual_order(text) if text.strip() else ""
    slant = rng.uniform(-cfg.slant_range, cfg.slant_range) if cfg.slant_range else 0.0
    phase = rng.uniform(0.0, 2 * math.pi)
    h = cfg.canvas_height()
    xh = cfg.x_height
    base = cfg.margin + cfg.wobble_amplitude + 1.6 * xh + cfg.thickness / 2
    base += (h - 2 * cfg.margin - (2.2 * xh + 2 * cfg.wobble_amplitude + cfg.thickness)) / 2
    shear = math.tan(slant)
    # room for the slant of ascenders and descenders
    lean = int(math.ceil(abs(shear) * 1.6 * xh)) if shown else 0
    w = int(math.ceil(_layout_width(shown, cfg))) + 2 * cfg.margin + 2 * lean
    img = np.zeros((h, max(w, 2 * cfg.margin)))
    pen = float(cfg.margin + lean)
    radius = cfg.thickness / 2
    for ch in shown:
        adv, strokes = font.GLYPHS[ch]
        for line in strokes:
            pts = []
            for gx, gy in line:
                x = pen + gx * xh
                y0 = base + cfg.wobble_amplitude * math.sin(2 * math.pi * x / cfg.wobble_period + phase)
                pts.append((x + gy * xh * shear, y0 - gy * xh))
            for p, q in zip(pts, pts[1:]):
                _draw_segment(img, p, q, radius)
        pen += adv * xh
    if cfg.noise:
        img += rng.normal(0.0, cfg.noise, img.shape)
    return quantize(img)


def make_vocabulary(n_words, glyphs, length=(2, 6), rng=None):
    """`n_words` distinct random words over `glyphs` (space excluded)."""
    rng = np.random.default_rng(0) if rng is None else rng
    letters = [c for c in glyphs if c != SPACE]
    words = set()
    out = []
    capacity = sum(len(letters) ** n for n in range(length[0], length[1] + 1))
    if n_words > capacity:
        raise ValueError("vocabulary larger than the number of possible words")
    while len(out) < n_words:
        n = int(rng.integers(length[0], length[1] + 1))
        wd = "".join(letters[i] for i in rng.integers(0, len(letters), n))
        if wd not in words:
            words.add(wd)
            out.append(wd)
    return out


@dataclass
class Line:
    line_id: str
    text: str
    image: np.ndarray = None


@dataclass
class Page:
    page_id: str
    lines: list = field(default_factory=list)


@dataclass
class Corpus:
    pages: list = field(default_factory=list)

    def lines(self):
        for page in self.pages:
            for line in page.lines:
                yield page.page_id, line

    def transcripts(self):
        return [line.text for _, line in self.lines()]

    def __len__(self):
        return sum(len(p.lines) for p in self.pages)


class CorpusError(ValueError):
    pass


def synth_corpus(n_pages, lines_per_page, cfg=SynthConfig(), vocabulary=None, seed=None):
    """Generate pages of synthetic lines; deterministic in `seed` (default cfg.seed)."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    if vocabulary is None:
        vocabulary = make_vocabulary(min(200, 4 * n_pages * lines_per_page), cfg.glyphs, cfg.word_length, rng)
    pages = []
    for pi in range(n_pages):
        page = Page(f"p{pi:05d}")
        for li in range(lines_per_page):
            n = int(rng.integers(cfg.words_per_line[0], cfg.words_per_line[1] + 1))
            text = " ".join(vocabulary[i] for i in rng.integers(0, len(vocabulary), n))
            page.lines.append(Line(f"l{li:03d}", text, synth_line(text, cfg, rng)))
        pages.append(page)
    return Corpus(pages)


_ID = re.compile(r"^[A-Za-z0-9_.-]+$")


def save_corpus(corpus, path):
    """Write ``pages/<page>/<line>.pgm`` images plus ``transcripts.tsv``."""
    os.makedirs(os.path.join(path, "pages"), exist_ok=True)
    rows = io.StringIO()
    for page_id, line in corpus.lines():
        if not (_ID.match(page_id) and _ID.match(line.line_id)):
            raise CorpusError(f"ids must be file-name safe: {page_id!r}/{line.line_id!r}")
        if "\t" in line.text or "\n" in line.text:
            raise CorpusError(f"transcript of {page_id}/{line.line_id} contains a tab or newline")
        d = os.path.join(path, "pages", page_id)
        os.makedirs(d, exist_ok=True)
        if line.image is not None:
            write_pgm(os.path.join(d, line.line_id + ".pgm"), line.image)
        rows.write(f"{page_id}\t{line.line_id}\t{line.text}\n")
    with open(os.path.join(path, "transcripts.tsv"), "w", encoding="utf-8", newline="\n") as f:
        f.write(rows.getvalue())


def read_transcripts(path):
    """Parse a transcripts TSV into (page_id, line_id, text) rows."""
    rows = []
    seen = set()
    with open(path, encoding="utf-8", newline="") as f:
        for n, raw in enumerate(f.read().split("\n"), 1):
            if raw == "":
                continue
            parts = raw.split("\t")
            if len(parts) != 3:
                raise CorpusError(f"{path}:{n}: expected 3 tab-separated fields, got {len(parts)}")
            key = (parts[0], parts[1])
            if key in seen:
                raise CorpusError(f"{path}:{n}: duplicate line {parts[0]}/{parts[1]}")
            seen.add(key)
            rows.append(tuple(parts))
    return rows


def load_corpus(path, images=True):
    tsv = os.path.join(path, "transcripts.tsv")
    if not os.path.exists(tsv):
        if os.path.isdir(path) and not os.listdir(path):
            return Corpus()
        raise CorpusError(f"{path}: no transcripts.tsv")
    pages = {}
    order = []
    for n, (page_id, line_id, text) in enumerate(read_transcripts(tsv), 1):
        img = None
        if images:
            f = os.path.join(path, "pages", page_id, line_id + ".pgm")
            if not os.path.exists(f):
                raise CorpusError(f"transcripts.tsv row {n} ({page_id}/{line_id}): missing image {f}")
            img = read_pgm(f)
        if page_id not in pages:
            pages[page_id] = Page(page_id)
            order.append(page_id)
        pages[page_id].lines.append(Line(line_id, text, img))
    return Corpus([pages[p] for p in order])


def _classes_of(text):
    out = []
    for m in re.finditer(r"\.+|.", text, flags=re.S):
        tok = m.group()
        if tok.startswith("."):
            n = len(tok)
            out += ["..."] * (n // 3)
            out += {0: [], 1: ["."], 2: [".."]}[n % 3]
        else:
            out.append(tok)
    return out


def derive_alphabet(corpus):
    """Alphabet of all classes in the transcripts; dot runs become '..'/'...' classes."""
    texts = corpus.transcripts() if isinstance(corpus, Corpus) else list(corpus)
    if not texts:
        raise CorpusError("cannot derive an alphabet from an empty corpus")
    classes = {SPACE}
    for t in texts:
        classes.update(_classes_of(t))
    return Alphabet(sorted(classes))


def load_alphabet(path):
    return Alphabet.load(path)


def build_dictionary(transcripts, alphabet, min_occurrences=1, arabic_only=False):
    """Lexicon of space-separated tokens seen at least `min_occurrences` times."""
    if min_occurrences < 1:
        raise ValueError("min_occurrences must be >= 1")
    counts = Counter(tok for t in transcripts for tok in t.split(SPACE) if tok)
    words = [w for w, n in counts.items() if n >= min_occurrences]
    if arabic_only:
        words = [w for w in words if is_arabic_word(w)]
    return Lexicon(words, alphabet)


@dataclass(frozen=True)
class DictProfile:
    """Dictionary sources, occurrence filter and threshold of one decoder."""

    name: str
    sources: tuple
    min_occurrences: int = 1
    theta: float = THETA_DEFAULT


# sub-corpus roles: "train" (training sets), "eval1" (first evaluation set),
# "dryrun" (dry-run evaluation set); decoder #1 uses no dictionary
DECODER_PROFILES = {
    "#2": DictProfile("#2", ("train", "eval1")),
    "#3": DictProfile("#3", ("train", "eval1"), theta=THETA_ENLARGED),
    "#4": DictProfile("#4", ("train", "eval1"), min_occurrences=3),
    "#5": DictProfile("#5", ("train", "eval1", "dryrun")),
    "#6": DictProfile("#6", ("train", "eval1", "dryrun"), min_occurrences=3),
}


def profile_dictionary(profile, subcorpora, alphabet):
    """(Lexicon, DecoderConfig) for a decoder profile over named sub-corpora."""
    texts = [t for name in profile.sources for t in subcorpora[name].transcripts()]
    lex = build_dictionary(texts, alphabet, profile.min_occurrences, arabic_only=True)
    return lex, DecoderConfig(theta=profile.theta)
