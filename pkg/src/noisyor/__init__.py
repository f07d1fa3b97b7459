"""Binary noisy-OR causal models with latent confounding.

Tools to define the models, simulate passive and interventional data from
them, and learn them back by exact identification (id), edge-wise estimation
with confounding control (ec), or maximum likelihood (em).
"""

__version__ = "0.1.0"

from .data import (
    Dataset,
    DatasetEntry,
    all_k_var_specs,
    default_battery,
    expected_counts_dataset,
    read_dataset_csv,
    write_dataset_csv,
)
from .ec import run_ec
from .em import EmConfig, run_em
from .errors import DataError, NoisyOrError, NumericalError
from .estimate import causal_power, chi_square_independence
from .evaluate import (
    StudyConfig,
    accuracy_config,
    disturbance_correlation,
    interventional_kl,
    link_correlation,
    robustness_config,
    run_study,
    scalability_config,
    structural_errors,
)
from .generate import (
    GenConfig,
    InteractiveModel,
    derive_rng,
    interactive_from,
    marginalize_latents,
    mix_confounding,
    random_model,
    sample,
    sample_dataset,
)
from .identify import find_causal_order, identify_links, recover_disturbance, run_id
from .model import (
    Distribution,
    ExperimentSpec,
    LearnedModel,
    Model,
    exact_distribution,
    multi_spec,
    passive_spec,
    single_spec,
)

__all__ = [
    "__version__",
    "Dataset",
    "DatasetEntry",
    "DataError",
    "Distribution",
    "EmConfig",
    "ExperimentSpec",
    "GenConfig",
    "InteractiveModel",
    "LearnedModel",
    "Model",
    "NoisyOrError",
    "NumericalError",
    "StudyConfig",
    "accuracy_config",
    "all_k_var_specs",
    "causal_power",
    "chi_square_independence",
    "default_battery",
    "derive_rng",
    "disturbance_correlation",
    "exact_distribution",
    "expected_counts_dataset",
    "find_causal_order",
    "identify_links",
    "interactive_from",
    "interventional_kl",
    "link_correlation",
    "marginalize_latents",
    "mix_confounding",
    "multi_spec",
    "passive_spec",
    "random_model",
    "read_dataset_csv",
    "recover_disturbance",
    "robustness_config",
    "run_ec",
    "run_em",
    "run_id",
    "run_study",
    "sample",
    "sample_dataset",
    "scalability_config",
    "single_spec",
    "structural_errors",
    "write_dataset_csv",
]
