"""Simple factorized-likelihood baselines for multimodal utterance embeddings.

The embedding of an utterance is solved in closed form as a weighted average
of its word vectors and (shifted, transformed) continuous features; the few
linear transformation parameters are learned by coordinate ascent on the
joint log-likelihood.
"""

from .errors import (AlignmentError, ConfigError, DataError, DimensionError,
                     MmbError, NumericError)
from .gradients import FactorGradients, factor_param_gradients, finite_difference_oracle
from .head import (ClassifierConfig, FineTuneConfig, MetricReport, MlpModel, TaskSpec,
                   evaluate, fine_tune_embeddings, mlp_forward, mosi_task_spec,
                   train_classifier)
from .likelihood import (gaussian_factor_distribution, gaussian_log_prob,
                         segment_log_likelihood, word_log_prob)
from .pipeline import (align_to_words, apply_positional_encoding, compute_unigram,
                       concat_factors, factor_features, load_dataset, load_word_vectors,
                       positional_encoding, save_dataset)
from .solver import (PsiWeights, closed_form_embedding, embed_segments, psi_factor,
                     psi_word, taylor_linear_coefficient)
from .training import (FitConfig, TrainState, apply_gradient_step, coordinate_ascent_fit,
                       load_checkpoint, parameter_count, save_checkpoint)
from .types import (EPS_SIGMA, FactorParams, ModelParams, MultimodalSegment,
                    TemperatureConfig, UtteranceEmbedding, WordTable)

__version__ = "0.1.0"
