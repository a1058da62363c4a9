"""
Service layer for the Lévy Tree Laboratory

High-level orchestration services that combine multiple tools:
- experiment_runner: Config loading, the experiment registry and artifact output
"""

from .experiment_runner import ExperimentRunner, experiment_runner, load_config

__all__ = [
    'ExperimentRunner',
    'experiment_runner',
    'load_config'
]
