"""Bayesian decision trees sampled by reversible-jump MCMC, with a standard
and a sweeping treatment of under-populated partitions."""

__version__ = "0.1.0"

from .averaging import CVResult, PredictionResult, cross_validate, entropy, predict
from .dataset import DataError, Dataset, FoldSplit, generate_xor3, load_csv, make_folds, write_csv
from .diagnostics import EmulatorConfig, emulate_moves, emulator_oracle, summarize_trace
from .likelihood import DirichletPrior, log_catalan, log_marginal_likelihood, log_tree_prior
from .proposals import ChipmanPrior, MoveConfig
from .sampler import ChainSample, ChainTrace, SamplerConfig, run_chain
from .tree import DecisionTree, FrozenTree, read_trees, write_trees

__all__ = [
    "CVResult", "PredictionResult", "cross_validate", "entropy", "predict",
    "DataError", "Dataset", "FoldSplit", "generate_xor3", "load_csv", "make_folds", "write_csv",
    "EmulatorConfig", "emulate_moves", "emulator_oracle", "summarize_trace",
    "DirichletPrior", "log_catalan", "log_marginal_likelihood", "log_tree_prior",
    "ChipmanPrior", "MoveConfig",
    "ChainSample", "ChainTrace", "SamplerConfig", "run_chain",
    "DecisionTree", "FrozenTree", "read_trees", "write_trees",
]
