"""Quality evaluator for text-driven AI-generated videos."""
from .encoders import EncoderConfig, FeatureBundle, FrameStack, ReferenceEncoders
from .harness import (
    DatasetManifest,
    Record,
    TrainConfig,
    evaluate,
    kfold_evaluate,
    load_manifest,
    load_model,
    rank_generators,
    score_manifest,
    train,
)
from .metrics import CorrelationReport, krcc, make_folds, plcc, poly4_fit, srcc
from .model import BranchScores, CraveModel, Evaluator, ModelConfig, TemporalAdapterConfig
from .objective import LossConfig, plcc_loss, rank_loss, total_loss
from .study import AnnotationTable, aggregate_mos, bt500_screen, process_study, zscore_normalize
from .text import GranularityBundle, PhraseSpan, PromptText, build_bundle, chunk_phrases, tokenize_words

__version__ = "0.1.0"
