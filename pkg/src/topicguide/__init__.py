"""Topic-guided video captioning: LDA topic mining, teacher-student topic
prediction and topic-conditioned LSTM caption decoders."""

from .captioner import (VARIANTS, CaptionModelParams, beam_search, greedy_decode,
                        init_caption_model, perplexity, train_captioner)
from .checkpoint import load_caption_model, save_caption_model
from .corpus import (Vocabulary, VideoRecord, build_vocabulary, generate_styled_corpus,
                     generate_synthetic_corpus, load_corpus)
from .metrics import bleu4, cider, evaluate_corpus, rouge_l
from .pipeline import PipelineConfig
from .predictor import ensemble, train_general_predictor
from .topics import TopicModel, lda_fit, lda_infer

__version__ = "0.1.0"

__all__ = [
    "VARIANTS", "CaptionModelParams", "beam_search", "greedy_decode", "init_caption_model",
    "perplexity", "train_captioner", "load_caption_model", "save_caption_model",
    "Vocabulary", "VideoRecord", "build_vocabulary", "generate_styled_corpus",
    "generate_synthetic_corpus", "load_corpus", "bleu4", "cider", "evaluate_corpus",
    "rouge_l", "PipelineConfig", "ensemble", "train_general_predictor", "TopicModel",
    "lda_fit", "lda_infer",
]
