"""Isolated-word recognition by least Kullback-Leibler information divergence.

Three recognizers compare an input with reference words through the KL
divergence between Gaussian models: the correlation method (autocorrelation
matrices), the spectral method (averaged periodograms) and the filter
method (AR whitening filters).  Two cepstral baselines, a dictionary
format, a synthetic AR corpus and an evaluation harness come with them.
"""
from ._backend import BACKEND
from .dictionary import (BASELINE_METHODS, DEFAULT_PARAMS, LID_METHODS, METHODS, Dictionary,
                         DictionaryError, RecognitionResult, build_dictionary, load_dictionary,
                         loads_dictionary, dumps_dictionary, method_params, recognize,
                         save_dictionary, score_entries)
from .divergence import (CorrelationTemplate, dist_cepstral, dist_euclid, kl_gaussian,
                         make_correlation_template, stat_correlation, stat_filter,
                         stat_spectral)
from .errors import (ConfigError, FormatError, KlasrError, NumericalError, SignalError,
                     SingularMatrixError)
from .evaluation import (COMPARISON_GRIDS, FIGURE_GRIDS, EvalReport, TrialConfig,
                         compare_methods, comparison_csv, run_trials, sweep_csv,
                         sweep_parameter, sweep_seeds)
from .features import (ArModel, AutocorrMatrix, CepstralVector, Psd, ar_cepstrum,
                       estimate_autocorr_matrix, estimate_psd, fit_ar_burg, msfb_cepstrum,
                       whiten)
from .linalg import LuFactorization, levinson_durbin, log_det, lu_decompose
from .signal_io import PreprocessConfig, Signal, align_length, load_signal, preprocess, save_signal
from .synth import REFERENCE_CORPUS, CorpusSpec, SynthWordSpec, add_noise, synth_utterance

__version__ = "0.1.0"
