from .experiment import ExperimentConfig, PIPELINES
