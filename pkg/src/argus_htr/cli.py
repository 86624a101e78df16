"""Command line front end: ``argus-htr <command> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
A ``--config`` file holds ``key=value`` lines (flag names without the
leading dashes) that replace the defaults of the chosen command; flags on
the command line still win.
"""

import argparse
import logging
import os
import shutil
import sys

import numpy as np

from . import font
from .ctc import CTCInfeasibleError
from .dataset import (
    Corpus,
    CorpusError,
    Line,
    Page,
    SynthConfig,
    build_dictionary,
    derive_alphabet,
    load_alphabet,
    load_corpus,
    save_corpus,
    synth_corpus,
)
from .decoder import (
    THETA_DEFAULT,
    Alphabet,
    AlphabetFormatError,
    DecoderConfig,
    Lexicon,
    LexiconFormatError,
    UnspellableError,
)
from .gradcheck import check_cell, check_network
from .metrics import wer_cer
from .network import CheckpointError, NetConfig
from .pgm import PGMError, quantize
from .preprocess import NormConfig, preprocess_line
from .trainer import (
    SCHEDULES,
    NonFiniteGradientError,
    Schedule,
    TrainConfig,
    TrainingAborted,
    load_state,
    recognize,
    train,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
GRADCHECK_TOL = 1e-4
GLYPH_SETS = {
    "latin": font.LATIN + " ",
    "latin+digits": font.LATIN + font.DIGITS + " ",
    "arabic": font.ARABIC + " ",
}

DATA_ERRORS = (
    OSError,
    PGMError,
    CorpusError,
    CheckpointError,
    AlphabetFormatError,
    LexiconFormatError,
    UnspellableError,
    TrainingAborted,
    CTCInfeasibleError,
)

log = logging.getLogger("argus_htr")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class NumericFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _glyphs(value):
    return GLYPH_SETS.get(value, value if " " in value else value + " ")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--config", metavar="FILE", help="key=value file overriding the defaults")
    common.add_argument("--quiet", action="store_true", help="only print errors")

    p = _Parser(prog="argus-htr", description="Offline handwriting recognition with multi-directional recurrent networks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    s.add_argument("--out", required=True, metavar="DIR")
    s.add_argument("--pages", type=int, default=10)
    s.add_argument("--lines-per-page", type=int, default=1)
    s.add_argument("--glyphs", default="latin+digits",
                   help="glyph set: latin, latin+digits, arabic or literal characters (default latin+digits)")
    s.add_argument("--vocabulary", type=int, default=None, metavar="N", help="draw words from N random words")

    s = sub.add_parser("preprocess", parents=[common], help="normalize line images into writings")
    s.add_argument("--in", dest="input", required=True, metavar="DIR")
    s.add_argument("--out", required=True, metavar="DIR")
    s.add_argument("--height", type=int, default=180, help="normalized height before scaling (default 180)")
    s.add_argument("--scale", type=float, default=0.5, help="final scaling factor (default 0.5)")
    s.add_argument("--above", type=int, default=80, help="main body extent above the median curve (default 80)")
    s.add_argument("--below", type=int, default=60, help="main body extent below the median curve (default 60)")

    s = sub.add_parser("train", parents=[common], help="train a network with CTC")
    s.add_argument("--data", required=True, metavar="DIR")
    s.add_argument("--alphabet", required=True, metavar="FILE")
    s.add_argument("--out", required=True, metavar="DIR")
    s.add_argument("--variant", choices=sorted(SCHEDULES), default="s", help="learning-rate schedule (default s)")
    s.add_argument("--cell", choices=("mdleaky", "mdlstm"), default="mdleaky")
    s.add_argument("--epochs", type=int, default=None, help="default: last epoch of the schedule")
    s.add_argument("--tiny", action="store_true", help="levels 2/3/4, feedforward 3/4")
    s.add_argument("--lr", type=float, default=None, help="constant learning rate instead of the schedule")
    s.add_argument("--init-scale", type=float, default=0.1, help="weights start uniform in [-x, x] (default 0.1)")
    s.add_argument("--validation", metavar="DIR", help="corpus evaluated after every epoch")
    s.add_argument("--preprocessed", action="store_true", help="images are already writings")
    s.add_argument("--resume", action="store_true", help="continue from OUT/checkpoint.args")

    s = sub.add_parser("decode", parents=[common], help="recognize the lines of a corpus")
    s.add_argument("--model", required=True, metavar="FILE")
    s.add_argument("--in", dest="input", required=True, metavar="DIR")
    s.add_argument("--alphabet", metavar="FILE", help="default: alphabet.txt beside the model")
    s.add_argument("--lexicon", metavar="FILE", help="dictionary; without it best-path decoding is used")
    s.add_argument("--theta", type=float, default=THETA_DEFAULT, help="dictionary confidence threshold (default 1/e)")
    s.add_argument("--out", required=True, metavar="FILE")
    s.add_argument("--preprocessed", action="store_true", help="images are already writings")

    s = sub.add_parser("eval", parents=[common], help="word and character error rates")
    s.add_argument("--hyp", required=True, metavar="FILE")
    s.add_argument("--ref", required=True, metavar="FILE")

    s = sub.add_parser("dict", parents=[common], help="build a dictionary from corpus transcripts")
    s.add_argument("--data", required=True, metavar="DIR")
    s.add_argument("--min-count", type=int, default=1)
    s.add_argument("--arabic-only", action="store_true")
    s.add_argument("--alphabet", metavar="FILE", help="default: derived from the corpus")
    s.add_argument("--out", required=True, metavar="FILE")

    s = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient check")
    s.add_argument("--cell", choices=("mdleaky", "mdlstm"), default="mdleaky")
    s.add_argument("--full-net", action="store_true", help="check the tiny network under CTC instead of one cell")
    return p


def read_config(path):
    out = {}
    with open(path, encoding="utf-8") as f:
        for n, raw in enumerate(f, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value")
            k, v = (t.strip() for t in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def _config_path(argv):
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def parse_args(argv):
    parser = build_parser()
    path = _config_path(argv)
    command = argv[0] if argv else None
    subs = parser._subparsers._group_actions[0].choices
    if path is None or command not in subs:
        return parser.parse_args(argv)
    try:
        overrides = read_config(path)
    except OSError as e:
        raise DataError(f"cannot read config: {e}") from None
    sub = subs[command]
    actions = {o.lstrip("-").replace("-", "_"): a for a in sub._actions for o in a.option_strings}
    for k, v in overrides.items():
        a = actions.get(k)
        if a is None or k in ("help", "config"):
            raise UsageError(f"{path}: unknown key {k!r} for {command}")
        if a.nargs == 0:
            val = v.lower() in ("1", "true", "yes", "on")
        else:
            try:
                val = a.type(v) if a.type else v
            except ValueError:
                raise UsageError(f"{path}: bad value for {k}: {v!r}") from None
            if a.choices is not None and val not in a.choices:
                raise UsageError(f"{path}: {k} must be one of {sorted(a.choices)}")
        a.required = False
        sub.set_defaults(**{a.dest: val})
    return parser.parse_args(argv)


def _line_key(page_id, line):
    return f"{page_id}/{line.line_id}"


def read_tsv(path):
    """`line_id<TAB>text` rows as an ordered dict."""
    out = {}
    with open(path, encoding="utf-8", newline="") as f:
        for n, raw in enumerate(f.read().split("\n"), 1):
            if raw == "":
                continue
            if "\t" not in raw:
                raise DataError(f"{path}:{n}: expected line_id<TAB>text")
            k, text = raw.split("\t", 1)
            if k in out:
                raise DataError(f"{path}:{n}: duplicate line id {k!r}")
            out[k] = text
    return out


def cmd_synth(args):
    cfg = SynthConfig(glyphs=_glyphs(args.glyphs), seed=args.seed)
    vocab = None
    if args.vocabulary:
        from .dataset import make_vocabulary

        vocab = make_vocabulary(args.vocabulary, cfg.glyphs, cfg.word_length, np.random.default_rng(args.seed))
    corpus = synth_corpus(args.pages, args.lines_per_page, cfg, vocabulary=vocab)
    save_corpus(corpus, args.out)
    derive_alphabet(corpus).save(os.path.join(args.out, "alphabet.txt"))
    log.info("wrote %d lines to %s", len(corpus), args.out)


def _norm_config(args):
    return NormConfig(above=args.above, below=args.below, target_height=args.height, scale=args.scale)


def cmd_preprocess(args):
    cfg = _norm_config(args)
    src = load_corpus(args.input)
    pages = [
        Page(pg.page_id, [Line(ln.line_id, ln.text, quantize(preprocess_line(ln.image, cfg))) for ln in pg.lines])
        for pg in src.pages
    ]
    save_corpus(Corpus(pages), args.out)
    alpha = os.path.join(args.input, "alphabet.txt")
    if os.path.exists(alpha):
        shutil.copyfile(alpha, os.path.join(args.out, "alphabet.txt"))
    log.info("preprocessed %d lines into %s", len(src), args.out)


def cmd_train(args):
    alphabet = load_alphabet(args.alphabet)
    corpus = load_corpus(args.data)
    sizes = {}
    if args.tiny:
        tiny = NetConfig.tiny(len(alphabet), args.cell)
        sizes = {"level_sizes": tiny.level_sizes, "ff_sizes": tiny.ff_sizes}
    net = NetConfig(len(alphabet), args.cell, **sizes)
    schedule = SCHEDULES[args.variant]
    epochs = args.epochs if args.epochs is not None else schedule.last_epoch
    if args.lr is not None:
        schedule = Schedule.constant(args.lr, max(epochs, 1))
    cfg = TrainConfig(
        net,
        schedule,
        epochs=epochs,
        seed=args.seed,
        norm=None if args.preprocessed else NormConfig(),
        init_scale=args.init_scale,
    )
    validation = load_corpus(args.validation) if args.validation else None
    os.makedirs(args.out, exist_ok=True)
    alphabet.save(os.path.join(args.out, "alphabet.txt"))
    res = train(cfg, corpus, alphabet, args.out, validation=validation, resume=args.resume)
    last = res.metrics[-1] if res.metrics else None
    if last is not None:
        log.info("done: epoch %d, mean loss %.4f, train CER %.2f", last["epoch"], last["mean_loss"], last["train_cer"])
    log.info("checkpoint: %s", res.checkpoint)


def cmd_decode(args):
    alpha_path = args.alphabet or os.path.join(os.path.dirname(os.path.abspath(args.model)), "alphabet.txt")
    alphabet = Alphabet.load(alpha_path)
    state = load_state(args.model)
    params = state.params
    if params.config.alphabet_size != len(alphabet):
        raise DataError(f"model has {params.config.alphabet_size} classes, alphabet {len(alphabet)}")
    lexicon = Lexicon.load(args.lexicon, alphabet) if args.lexicon else None
    try:
        cfg = DecoderConfig(theta=args.theta, use_dictionary=lexicon is not None)
    except ValueError as e:
        raise UsageError(str(e)) from None
    corpus = load_corpus(args.input)
    norm = NormConfig()
    rows = []
    for page_id, line in corpus.lines():
        writing = line.image if args.preprocessed else preprocess_line(line.image, norm)
        rows.append(f"{_line_key(page_id, line)}\t{recognize(params, writing, alphabet, lexicon, cfg)}\n")
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        f.writelines(rows)
    log.info("decoded %d lines into %s", len(rows), args.out)


def cmd_eval(args):
    hyp, ref = read_tsv(args.hyp), read_tsv(args.ref)
    missing = [k for k in ref if k not in hyp]
    extra = [k for k in hyp if k not in ref]
    if missing or extra:
        raise DataError(f"line ids differ: {len(missing)} missing from hypotheses, {len(extra)} unknown")
    if not ref:
        raise DataError("empty reference set")
    wer, cer = wer_cer(list(ref.values()), [hyp[k] for k in ref])
    print(f"WER {wer:.2f} CER {cer:.2f}")


def cmd_dict(args):
    if args.min_count < 1:
        raise UsageError("--min-count must be at least 1")
    corpus = load_corpus(args.data, images=False)
    alphabet = load_alphabet(args.alphabet) if args.alphabet else derive_alphabet(corpus)
    lex = build_dictionary(corpus.transcripts(), alphabet, args.min_count, args.arabic_only)
    lex.save(args.out)
    log.info("%d words written to %s", len(lex), args.out)


def cmd_gradcheck(args):
    if args.full_net:
        err = check_network(args.cell, seed=args.seed)
    else:
        err = check_cell(args.cell, seed=args.seed)
    print(f"max relative error {err:.3e}")
    if not err < GRADCHECK_TOL:
        raise NumericFailure(f"gradient check failed: {err:.3e} >= {GRADCHECK_TOL:g}")


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "decode": cmd_decode,
    "eval": cmd_eval,
    "dict": cmd_dict,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as e:  # --help
        return EXIT_OK if not e.code else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s", force=True)
    try:
        COMMANDS[args.command](args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericFailure, NonFiniteGradientError, FloatingPointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, *DATA_ERRORS) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:  # bad parameter values caught by the config dataclasses
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
