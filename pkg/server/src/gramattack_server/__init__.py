"""Victim-model server backing the attack engine's remote oracle."""

from .encoder import TinyEncoder, VictimModel, evaluate_accuracy, train_classifier
from .probe import ProbeHead, ProbeReport, train_probe
from .service import create_app
from .synbank import build_synonym_bank
from .tokenizer import Tokenizer

__version__ = "0.1.0"
