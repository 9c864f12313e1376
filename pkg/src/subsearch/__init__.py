"""Gradient-free pseudo-token inversion: CMA-ES in a decomposed subspace."""

from .cmaes import CmaParams, CmaState, ask, default_params, init_state, optimize, tell
from .errors import ConfigError, EvaluationError, ProtocolError
from .harness import (RunConfig, RunReport, config_hash, emit_trace,
                      evals_to_reach, external_objective, load_config,
                      run_experiment, run_sweep)
from .initialization import InitConfig, conditioned_init, random_token_init
from .numerics import (RngStream, SymEigResult, cosine_similarity, eig_sym,
                       normal_sample, softmax, stream_id)
from .objectives import (NoiseKey, Objective, SurrogateObjective, SurrogateScene,
                         ToyEncoder, VocabularyTable, benchmark_objective,
                         build_vocabulary, encode_image, encode_prompt,
                         generate_scene, surrogate_loss)
from .subspace import (PriorNormSpec, Projection, build_pca_projection,
                       build_prior_norm_projection, build_random_projection,
                       compose, identity_projection, sigma_p)

__all__ = [name for name in dir() if not name.startswith("_")]
