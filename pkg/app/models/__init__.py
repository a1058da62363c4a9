"""
Data Models for the Lévy Tree Laboratory

Organized by concern:
- mechanism: Branching mechanisms, gauges and exponent reports
- kernels: CSBP kernel solutions and Laplace functionals
- tree: Excursion paths and local time estimates
- samples: Sampled walks, subordinators and spines
- packing: Packing instances, estimates and density profiles
- config: Experiment configuration and process settings
- workflow: Run state, results and manifests
- errors: Exception hierarchy
"""

from .errors import (
    LabError, DomainError, ConfigError, ConvergenceError, QuadratureError, SamplerBudgetError, SolverCapError,
)
from .mechanism import (
    MechanismKind, Atom, StableTail, AtomList, NullMeasure, BranchingMechanism, MechanismDescriptor,
    ExponentReport, DoublingReport, GaugeFunction,
)
from .kernels import KappaRoute, KappaSolution, LaplaceFunctional, DensityBoundResult
from .tree import PathOrigin, ExcursionPath, LocalTimeEstimate
from .samples import WalkExcursion, SubordinatorPath, SpineSample, LiminfResult, LaplaceEstimate
from .packing import (
    PackingMethod, ToyGauge, PackingInstance, Ball, PackingEstimate, DensityProfile, PackingRatioRow,
    PackingRatioReport,
)
from .config import ExperimentName, SolverTolerances, ScalesConfig, OutputConfig, LabConfig, LabSettings
from .workflow import CheckResult, ExperimentResult, ManifestEntry, Manifest, RunState

__all__ = [
    # Errors
    'LabError',
    'DomainError',
    'ConfigError',
    'ConvergenceError',
    'QuadratureError',
    'SamplerBudgetError',
    'SolverCapError',

    # Mechanism models
    'MechanismKind',
    'Atom',
    'StableTail',
    'AtomList',
    'NullMeasure',
    'BranchingMechanism',
    'MechanismDescriptor',
    'ExponentReport',
    'DoublingReport',
    'GaugeFunction',

    # Kernel models
    'KappaRoute',
    'KappaSolution',
    'LaplaceFunctional',
    'DensityBoundResult',

    # Tree and sample models
    'PathOrigin',
    'ExcursionPath',
    'LocalTimeEstimate',
    'WalkExcursion',
    'SubordinatorPath',
    'SpineSample',
    'LiminfResult',
    'LaplaceEstimate',

    # Packing models
    'PackingMethod',
    'ToyGauge',
    'PackingInstance',
    'Ball',
    'PackingEstimate',
    'DensityProfile',
    'PackingRatioRow',
    'PackingRatioReport',

    # Configuration models
    'ExperimentName',
    'SolverTolerances',
    'ScalesConfig',
    'OutputConfig',
    'LabConfig',
    'LabSettings',

    # Workflow models
    'CheckResult',
    'ExperimentResult',
    'ManifestEntry',
    'Manifest',
    'RunState'
]
