"""Momentum SGD training with CTC, learning-rate schedules and evaluation.

An epoch presents one randomly chosen line of every page. Updates are online
(one step per line) unless ``batch_size`` > 1.
"""

import csv
import json
import logging
import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .ctc import CTCInfeasibleError, ctc_loss_grad, min_frames
from .decoder import DecoderConfig, decode_line, visual_order
from .metrics import error_counts, wer_cer
from .network import (
    CheckpointError,
    NetConfig,
    NetParams,
    TruncatedFileError,
    VersionMismatchError,
    backward,
    forward,
    init_params,
    params_bytes,
    read_params,
)
from .preprocess import NormConfig, preprocess_line

log = logging.getLogger(__name__)

__all__ = [
    "Schedule",
    "SCHEDULE_S",
    "SCHEDULE_L",
    "schedule_lr",
    "TrainState",
    "NonFiniteGradientError",
    "TrainingAborted",
    "sgd_step",
    "sample_epoch",
    "evaluate",
    "TrainConfig",
    "train",
    "save_state",
    "load_state",
    "METRICS_HEADER",
]

METRICS_HEADER = ["epoch", "lr", "mean_loss", "train_cer", "val_cer"]


@dataclass(frozen=True)
class Schedule:
    """Piecewise-constant learning rate: ((first_epoch, last_epoch, rate), ...)."""

    ranges: tuple
    variant: str = "custom"

    def __post_init__(self):
        expect = 1
        for first, last, rate in self.ranges:
            if first != expect or last < first:
                raise ValueError("schedule ranges must be contiguous from epoch 1")
            if not rate > 0:
                raise ValueError("learning rates must be positive")
            expect = last + 1
        if not self.ranges:
            raise ValueError("empty schedule")

    @property
    def last_epoch(self):
        return self.ranges[-1][1]

    @classmethod
    def constant(cls, rate, epochs=1):
        return cls(((1, epochs, rate),), "constant")


SCHEDULE_S = Schedule(
    ((1, 44, 1e-3), (45, 60, 5e-4), (61, 198, 2e-4), (199, 228, 1e-4), (229, 283, 5e-5)), "s"
)
SCHEDULE_L = Schedule(((1, 44, 1e-3), (45, 60, 5e-4), (61, 198, 2e-4), (199, 276, 1e-4), (277, 277, 5e-5)), "l")
SCHEDULES = {"s": SCHEDULE_S, "l": SCHEDULE_L}


def schedule_lr(schedule, epoch):
    """Learning rate for a 1-based epoch; the last rate persists afterwards."""
    if isinstance(schedule, str):
        schedule = SCHEDULES[schedule]
    if epoch < 1:
        raise ValueError(f"epochs are 1-based, got {epoch}")
    for first, last, rate in schedule.ranges:
        if first <= epoch <= last:
            return rate
    return schedule.ranges[-1][2]


class NonFiniteGradientError(FloatingPointError):
    pass


class TrainingAborted(RuntimeError):
    pass


@dataclass
class TrainState:
    params: object
    velocity: object = None
    epoch: int = 0
    rng: np.random.Generator = None

    def __post_init__(self):
        if self.velocity is None:
            self.velocity = self.params.zeros_like()
        if self.rng is None:
            self.rng = np.random.default_rng(0)


def sgd_step(state, grads, rate, momentum=0.9):
    """velocity <- momentum * velocity - rate * grads; params <- params + velocity."""
    for name, g in grads:
        if not np.all(np.isfinite(g)):
            bad = int(np.count_nonzero(~np.isfinite(g)))
            raise NonFiniteGradientError(
                f"non-finite gradient in {name} ({bad} entries) at epoch {state.epoch}"
            )
    for name, v in state.velocity:
        v *= momentum
        v -= rate * grads[name]
        state.params[name][...] += v
    return state


def sample_epoch(pages, rng):
    """One uniformly chosen line per page, in shuffled page order.

    `pages` is a sequence of line counts or of line lists; returns
    (page_index, line_index) pairs.
    """
    counts = [p if isinstance(p, (int, np.integer)) else len(p) for p in pages]
    for i, n in enumerate(counts):
        if n < 1:
            raise ValueError(f"page {i} has no lines")
    picks = [(i, int(rng.integers(n))) for i, n in enumerate(counts)]
    order = rng.permutation(len(picks))
    return [picks[i] for i in order]


# ---------------------------------------------------------------------------
# state serialization

STATE_MAGIC = b"TRST"
STATE_VERSION = 1


def state_bytes(state):
    rng_state = json.dumps(state.rng.bit_generator.state).encode("utf-8")
    out = [params_bytes(state.params), STATE_MAGIC, struct.pack("<HI", STATE_VERSION, state.epoch)]
    for name, _ in state.params.config.shapes():
        out.append(np.ascontiguousarray(state.velocity[name], dtype="<f8").tobytes())
    out.append(struct.pack("<I", len(rng_state)) + rng_state)
    return b"".join(out)


def save_state(path, state):
    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "wb") as f:
        f.write(state_bytes(state))
    os.replace(tmp, path)


def load_state(path):
    with open(path, "rb") as f:
        data = f.read()
    params, r = read_params(data)
    if r.at_end():
        raise CheckpointError("checkpoint has no training state block")
    if r.take(4, "state magic") != STATE_MAGIC:
        raise CheckpointError("bad training state block magic")
    version, epoch = r.unpack("<HI", "training state header")
    if version != STATE_VERSION:
        raise VersionMismatchError(f"training state version {version}, expected {STATE_VERSION}")
    velocity = NetParams(params.config, {n: r.tensor(s, "velocity " + n) for n, s in params.config.shapes()})
    (n,) = r.unpack("<I", "rng state")
    raw = r.take(n, "rng state")
    try:
        rng_state = json.loads(raw.decode("utf-8"))
    except ValueError:
        raise TruncatedFileError("corrupt rng state") from None
    bitgen = getattr(np.random, rng_state["bit_generator"])()
    bitgen.state = rng_state
    return TrainState(params, velocity, epoch, np.random.Generator(bitgen))


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class EvalResult:
    wer: float
    cer: float
    lines: list = field(default_factory=list)  # (line key, reference, hypothesis, word errors, char errors)


def recognize(params, writing, alphabet, lexicon=None, cfg=DecoderConfig(use_dictionary=False)):
    probs, _ = forward(writing, params)
    return decode_line(probs, alphabet, lexicon, cfg)


def evaluate(params, samples, alphabet, lexicon=None, cfg=None):
    """WER/CER over (key, writing, reference) samples.

    Without a lexicon (or with ``cfg.use_dictionary`` off) this is plain
    best-path decoding.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("empty reference set")
    if cfg is None:
        cfg = DecoderConfig(use_dictionary=lexicon is not None)
    report = []
    refs, hyps = [], []
    for key, writing, ref in samples:
        hyp = recognize(params, writing, alphabet, lexicon, cfg)
        we, _, ce, _ = error_counts([ref], [hyp])
        report.append((key, ref, hyp, we, ce))
        refs.append(ref)
        hyps.append(hyp)
    wer, cer = wer_cer(refs, hyps)
    return EvalResult(wer, cer, report)


# ---------------------------------------------------------------------------
# training loop


@dataclass(frozen=True)
class TrainConfig:
    net: NetConfig
    schedule: Schedule = SCHEDULE_S
    epochs: int = 283
    momentum: float = 0.9
    clip: float = 1.0  # per-component gradient clip; None disables
    seed: int = 0
    norm: NormConfig = NormConfig()  # None: corpus images are already writings
    batch_size: int = 1
    max_infeasible: float = 0.01
    init_scale: float = 0.1


def frames_for_width(width, cfg):
    """Number of output frames the network yields for a writing of `width`."""
    t = -(-width // cfg.input_tile[0])
    for tw, _ in cfg.subsample_tiles:
        t = -(-t // tw)
    return t


def prepare(corpus, alphabet, train_cfg):
    """Writings and image-order targets for every line, grouped by page."""
    pages = []
    for page in corpus.pages:
        lines = []
        for line in page.lines:
            img = line.image
            writing = preprocess_line(img, train_cfg.norm) if train_cfg.norm is not None else img
            target = alphabet.encode(visual_order(line.text, alphabet))
            lines.append((f"{page.page_id}/{line.line_id}", writing, line.text, target))
        pages.append(lines)
    return pages


def _check_feasible(pages, net_cfg, limit):
    bad = [
        key
        for lines in pages
        for key, w, _, target in lines
        if frames_for_width(w.shape[1], net_cfg) < min_frames(target)
    ]
    total = sum(len(p) for p in pages)
    if bad:
        log.warning("%d of %d lines have CTC targets longer than their frame count: %s", len(bad), total, bad[:5])
    if total and len(bad) > limit * total:
        raise TrainingAborted(f"{len(bad)} of {total} lines infeasible for CTC (limit {limit:.1%})")
    return set(bad)


def _write_metrics(path, rows, append):
    mode = "a" if append and os.path.exists(path) else "w"
    with open(path, mode, newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        if mode == "w":
            w.writerow(METRICS_HEADER)
        for r in rows:
            w.writerow([r["epoch"], repr(r["lr"]), repr(r["mean_loss"]), repr(r["train_cer"]),
                        "" if r["val_cer"] is None else repr(r["val_cer"])])


def _clip(grads, clip):
    hit = 0
    for _, g in grads:
        over = np.abs(g) > clip
        if over.any():
            hit += int(over.sum())
            np.clip(g, -clip, clip, out=g)
    return hit


def train_epoch(state, pages, alphabet, cfg, skip=()):
    """One epoch in place; returns the metrics row (without val_cer)."""
    state.epoch += 1
    rate = schedule_lr(cfg.schedule, state.epoch)
    picks = sample_epoch(pages, state.rng)
    losses, refs, hyps = [], [], []
    acc = None
    n_acc = 0
    clipped = 0
    for pi, li in picks:
        key, writing, text, target = pages[pi][li]
        if key in skip:
            continue
        probs, cache = forward(writing, state.params)
        try:
            loss, dlogits = ctc_loss_grad(probs, target)
        except CTCInfeasibleError:
            log.warning("epoch %d: skipping infeasible line %s", state.epoch, key)
            continue
        grads = backward(cache, dlogits)
        losses.append(loss)
        refs.append(text)
        hyps.append(decode_line(probs, alphabet, None, DecoderConfig(use_dictionary=False)))
        if cfg.batch_size > 1:
            acc = grads if acc is None else acc.add_(grads)
            n_acc += 1
            if n_acc < cfg.batch_size:
                continue
            grads, acc, n_acc = acc, None, 0
        if cfg.clip is not None:
            clipped += _clip(grads, cfg.clip)
        sgd_step(state, grads, rate, cfg.momentum)
    if acc is not None:
        if cfg.clip is not None:
            clipped += _clip(acc, cfg.clip)
        sgd_step(state, acc, rate, cfg.momentum)
    if clipped:
        log.debug("epoch %d: clipped %d gradient components", state.epoch, clipped)
    for name, v in state.params:
        if not np.all(np.isfinite(v)) or not np.all(np.isfinite(state.velocity[name])):
            raise NonFiniteGradientError(f"non-finite parameters in {name} after epoch {state.epoch}")
    train_cer = wer_cer(refs, hyps)[1] if refs else float("nan")
    return {
        "epoch": state.epoch,
        "lr": rate,
        "mean_loss": float(np.mean(losses)) if losses else float("nan"),
        "train_cer": train_cer,
        "val_cer": None,
    }


@dataclass
class TrainResult:
    state: TrainState
    metrics: list
    checkpoint: str


def train(cfg, corpus, alphabet, out_dir, validation=None, resume=False, callback=None):
    """Train a network on `corpus`; writes ``checkpoint.args`` and ``metrics.csv``.

    With `resume`, continues from the checkpoint in `out_dir`, reproducing the
    uninterrupted run exactly. `callback(state, row)` is called after every
    epoch; returning True stops training early.
    """
    if cfg.net.alphabet_size != len(alphabet):
        raise ValueError("network output size does not match the alphabet")
    os.makedirs(out_dir, exist_ok=True)
    ckpt = os.path.join(out_dir, "checkpoint.args")
    metrics_path = os.path.join(out_dir, "metrics.csv")
    pages = prepare(corpus, alphabet, cfg)
    skip = _check_feasible(pages, cfg.net, cfg.max_infeasible)
    val = None
    if validation is not None:
        val = [(k, w, t) for lines in prepare(validation, alphabet, cfg) for k, w, t, _ in lines]
    if resume:
        state = load_state(ckpt)
        if state.params.config != cfg.net:
            raise ValueError("checkpoint network config differs from the training config")
    else:
        state = TrainState(init_params(cfg.net, cfg.seed, cfg.init_scale), rng=np.random.default_rng(cfg.seed))
        _write_metrics(metrics_path, [], append=False)
    rows = []
    while state.epoch < cfg.epochs:
        row = train_epoch(state, pages, alphabet, cfg, skip)
        if val:
            row["val_cer"] = evaluate(state.params, val, alphabet).cer
        rows.append(row)
        save_state(ckpt, state)
        _write_metrics(metrics_path, [row], append=True)
        log.info("epoch %d lr %g loss %.4f train CER %.2f", row["epoch"], row["lr"], row["mean_loss"], row["train_cer"])
        if callback is not None and callback(state, row):
            break
    return TrainResult(state, rows, ckpt)


def read_metrics(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def finite(x):
    return x is not None and math.isfinite(x)
