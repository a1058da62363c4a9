"""
Configuration models - experiment configs, numerical tolerances and process settings
"""

from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .mechanism import MechanismDescriptor, MechanismKind


class ExperimentName(str, Enum):
    """Registered experiment runners"""
    MECH_REPORT = "mech-report"
    KERNELS_CHECK = "kernels-check"
    DOUBLING = "doubling"
    COUNTEREXAMPLE = "counterexample"
    SPINE_LAPLACE = "spine-laplace"
    SUBLIMINF = "subliminf"
    DENSITY = "density"
    PACKING_RATIO = "packing-ratio"
    GEOMETRY = "geometry"


STOCHASTIC_EXPERIMENTS = {
    ExperimentName.SPINE_LAPLACE.value,
    ExperimentName.SUBLIMINF.value,
    ExperimentName.DENSITY.value,
    ExperimentName.PACKING_RATIO.value,
    ExperimentName.GEOMETRY.value,
}


class SolverTolerances(BaseModel):
    """Numerical tolerances shared by the solvers and the pass/fail checks"""
    rtol: float = Field(1e-10, gt=0, description="Relative tolerance of root finders")
    atol: float = Field(1e-12, gt=0, description="Absolute tolerance of root finders")
    max_iter: int = Field(200, ge=1, description="Iteration cap of root finders")
    quad_rtol: float = Field(1e-9, gt=0, description="Relative tolerance of adaptive quadrature")
    ode_tol: float = Field(1e-10, gt=0, description="Local tolerance of the kappa integrator")
    residual_tol: float = Field(1e-7, gt=0, description="Bound on the kappa integral-form residual per unit level")
    route_rtol: float = Field(1e-6, gt=0, description="Agreement required between the two Laplace routes")
    roundtrip_psi: float = Field(1e-8, gt=0, description="psi o psi^-1 round-trip tolerance")
    roundtrip_phi: float = Field(1e-6, gt=0, description="phi o phi^-1 round-trip tolerance")
    oracle_rtol: float = Field(1e-8, gt=0, description="Closed-form oracle tolerance")
    floor_q: float = Field(1e-3, gt=0, lt=1, description="Pair floor Q of the delta estimator")
    c_step: float = Field(0.01, gt=0, description="Step of the delta estimator c-grid")
    four_point: float = Field(1e-12, ge=0, description="Slack of the four-point inequality")
    local_time_rtol: float = Field(0.10, gt=0, description="Local-time mass consistency tolerance")
    mc_sigmas: float = Field(3.0, gt=0, description="Monte Carlo acceptance in standard errors")

    class Config:
        extra = "forbid"


class ScalesConfig(BaseModel):
    """Grid sizes, sample counts and windows"""
    lambda_log_min: float = Field(-6.907755278982137, description="log of the smallest grid lambda")
    lambda_log_max: float = Field(13.815510557964274, description="log of the largest grid lambda")
    lambda_points: int = Field(60, ge=2, description="Points of the lambda log-grid")
    roundtrip_log_min: float = Field(-6.907755278982137, description="log of the smallest round-trip y")
    roundtrip_log_max: float = Field(20.72326583694641, description="log of the largest round-trip y")
    exponent_range: Optional[Tuple[float, float]] = Field(None, description="log-lambda scan range; derived when omitted")
    exponent_points: int = Field(4000, ge=50, description="Points of the exponent scan")
    doubling_log_r_max: float = Field(-13.815510557964274, description="log of the largest doubling scale")
    doubling_steps: int = Field(200, ge=1, description="Number of dyadic doubling scales")
    dense_log_r: Tuple[float, float] = Field((-70.0, -5.0), description="Dense log-r window for counterexample doubling")
    dense_points: int = Field(4000, ge=10, description="Points of the dense doubling grid")
    counterexample_n_max: int = Field(40, ge=5, description="Counterexample atom count")
    kappa_pairs: int = Field(20, ge=1, description="Random (a, lambda) pairs of the kappa fixed-point check")
    walk_scale: int = Field(1_000_000, ge=1, description="Walk scale p for tree samplers")
    walk_min_length: int = Field(1 << 20, ge=1, description="Minimum excursion length in steps")
    walk_max_factor: float = Field(8.0, ge=1.0, description="Maximum excursion length as a multiple of the minimum")
    walk_attempts: int = Field(1_000_000, ge=1, description="Excursion resampling budget")
    subordinator_depth: int = Field(30, ge=1, description="Dyadic depth of subordinator grids")
    subordinator_samples: int = Field(10_000, ge=1, description="Samples for Laplace checks")
    liminf_window: Tuple[int, int] = Field((30, 5), description="Window [2^-a, 2^-b] given as (a, b)")
    spine_scale: int = Field(1_000_000, ge=1, description="GW scale of spine decorations")
    spine_r_max: float = Field(1.0, gt=0, description="Largest spine radius")
    spine_replicates: int = Field(10_000, ge=1, description="Spine replicates for the Laplace identity")
    spine_radii: List[float] = Field(default_factory=lambda: [0.5, 1.0], description="Radii of the Laplace identity")
    spine_lambdas: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0], description="lambdas of the Laplace identity")
    spine_profiles: int = Field(20, ge=0, description="Single spine samples for domination and liminf")
    spine_budget: int = Field(50_000_000, ge=1, description="Vertex budget per spine batch")
    chunk_size: int = Field(1000, ge=1, description="Replicates per random stream chunk")
    n_trees: int = Field(20, ge=1, description="Trees per density or geometry run")
    n_centers: int = Field(200, ge=1, description="Centers for the density experiment")
    density_window: Tuple[int, int] = Field((12, 4), description="Density window [2^-a, 2^-b] given as (a, b)")
    n_quadruples: int = Field(100_000, ge=1, description="Random quadruples per geometry run")
    local_time_epsilon: float = Field(0.01, gt=0, description="Upcrossing height epsilon")
    local_time_delta: float = Field(0.01, gt=0, description="Level spacing of the mass consistency sum")
    packing_intervals: int = Field(10, ge=1, description="Disjoint subtrees in the packing-ratio run")
    packing_epsilon: float = Field(0.015625, gt=0, description="Packing scale epsilon")
    packing_depth: int = Field(4, ge=1, description="Dyadic radii per epsilon")
    packing_points: int = Field(400, ge=1, description="Sampled points per subtree")

    class Config:
        extra = "forbid"


class OutputConfig(BaseModel):
    """Artifact destination and switches"""
    directory: str = Field("results", description="Output directory")
    write_paths: bool = Field(True, description="Dump sampled excursion paths in LTEX format")
    write_report: bool = Field(True, description="Render the markdown run report")

    class Config:
        extra = "forbid"


class LabConfig(BaseModel):
    """
    Complete experiment configuration.

    This is the root model read from the YAML config file; every run echoes
    it back into its summary.
    """
    experiment: ExperimentName = Field(..., description="Registered experiment name")
    mechanism: MechanismDescriptor = Field(
        default_factory=lambda: MechanismDescriptor(kind=MechanismKind.STABLE, gamma=2.0),
        description="Branching mechanism descriptor",
    )
    seeds: List[int] = Field(default_factory=list, description="Root seeds; one stream family per seed")
    scales: ScalesConfig = Field(default_factory=ScalesConfig, description="Grid and sample sizes")
    tolerances: SolverTolerances = Field(default_factory=SolverTolerances, description="Numerical tolerances")
    output: OutputConfig = Field(default_factory=OutputConfig, description="Output preferences")
    workers: int = Field(1, ge=1, description="Worker processes for replicate scheduling")

    class Config:
        """Pydantic model configuration"""
        use_enum_values = True
        extra = "forbid"

    @model_validator(mode="after")
    def _seeds_for_stochastic(self) -> "LabConfig":
        if self.experiment in STOCHASTIC_EXPERIMENTS and not self.seeds:
            raise ValueError(f"experiment '{self.experiment}' needs a nonempty seeds list")
        if any(seed < 0 for seed in self.seeds):
            raise ValueError("seeds must be nonnegative")
        return self


class LabSettings(BaseSettings):
    """Process-level overrides read from the environment or a .env file"""
    model_config = SettingsConfigDict(env_prefix="LEVYTREE_LAB_", env_file=".env", extra="ignore")

    output_dir: Optional[str] = Field(None, description="Overrides output.directory")
    workers: Optional[int] = Field(None, ge=1, description="Overrides the worker count")
