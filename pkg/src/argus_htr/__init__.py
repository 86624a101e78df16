"""Offline handwriting recognition with multi-directional recurrent networks,
CTC training and dictionary decoding."""

from .ctc import ctc_loss, ctc_loss_grad
from .decoder import Alphabet, DecoderConfig, Lexicon, best_path, decode_line
from .network import NetConfig, NetParams, backward, forward, init_params, load_params, save_params
from .preprocess import NormConfig, preprocess_line

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "DecoderConfig",
    "Lexicon",
    "NetConfig",
    "NetParams",
    "NormConfig",
    "backward",
    "best_path",
    "ctc_loss",
    "ctc_loss_grad",
    "decode_line",
    "forward",
    "init_params",
    "load_params",
    "preprocess_line",
    "save_params",
]
