# Train the tiny network on synthetic Arabic-script lines drawn from a 200-word
# vocabulary, then decode held-out lines with and without the dictionary.
# About one minute per five epochs on one core; pass the epoch count as argv[1].
import sys
import tempfile

import numpy as np

from argus_htr import font
from argus_htr.dataset import Corpus, SynthConfig, build_dictionary, derive_alphabet, make_vocabulary, synth_corpus
from argus_htr.decoder import THETA_DEFAULT, THETA_ENLARGED, DecoderConfig
from argus_htr.network import NetConfig
from argus_htr.trainer import Schedule, TrainConfig, evaluate, prepare, train

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 30

cfg = SynthConfig(glyphs=font.ARABIC + " ", words_per_line=(1, 3), word_length=(2, 5), seed=7)
vocab = make_vocabulary(200, cfg.glyphs, cfg.word_length, np.random.default_rng(7))
corpus = synth_corpus(600, 1, cfg, vocabulary=vocab)
train_set, held = Corpus(corpus.pages[:500]), Corpus(corpus.pages[500:])
alphabet = derive_alphabet(corpus)
lexicon = build_dictionary(vocab, alphabet)
print(len(alphabet), "classes,", len(lexicon), "dictionary words")

tc = TrainConfig(NetConfig.tiny(len(alphabet)), Schedule.constant(3e-3), epochs=epochs, init_scale=1.0)
held_out = [(k, w, t) for lines in prepare(held, alphabet, tc) for k, w, t, _ in lines]


def progress(state, row):
    if row["epoch"] % 5 == 0:
        print(f"epoch {row['epoch']:3d}  loss {row['mean_loss']:.3f}  train CER {row['train_cer']:.1f}", flush=True)


with tempfile.TemporaryDirectory() as out:
    params = train(tc, train_set, alphabet, out, callback=progress).state.params

for name, dc in [
    ("best path", DecoderConfig(use_dictionary=False)),
    ("dictionary, theta 1/e", DecoderConfig(THETA_DEFAULT)),
    ("dictionary, theta 1/sqrt(e)", DecoderConfig(THETA_ENLARGED)),
]:
    r = evaluate(params, held_out, alphabet, lexicon, dc)
    print(f"{name:28s} WER {r.wer:5.1f}  CER {r.cer:5.1f}")

for key, ref, hyp in [(k, t, evaluate(params, [(k, w, t)], alphabet, lexicon).lines[0][2]) for k, w, t in held_out[:5]]:
    print(key, "|", ref, "|", hyp)
