"""Closed-loop black-box stimulus optimization toolkit.

Search a stimulus catalog against a hidden scoring process (a synthetic
neural oracle or a human rater), steer an evolutionary generator with a
Gaussian-process surrogate, benchmark against standard baselines, and serve
the loop over HTTP for rating-driven sessions.
"""

from .core import (
    Catalog,
    Item,
    RngHandle,
    as_embedding,
    boost_probabilities,
    cosine_sim,
    roulette_sample,
    roulette_sample_logits,
    softmax,
)
from .search import (
    SearchConfig,
    SessionState,
    apply_rewards,
    init_session,
    run_search,
    sample_batch,
    search_step,
)
from .bench import (
    CatalogSpec,
    ExperimentSpec,
    Report,
    compute_metrics,
    default_spec,
    make_clustered_catalog,
    run_efficiency,
    run_generation,
    run_grid,
    run_rate_sim,
    run_retrieval_experiment,
    run_scenario,
)

__version__ = "0.1.0"
