"""Virtual-screening toolkit: molecular featurization, multi-task ensemble
models, monotone blending, evaluation, and a prediction service."""

__version__ = "0.1.0"
