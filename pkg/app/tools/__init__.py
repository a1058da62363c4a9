"""
Tools for the Lévy Tree Laboratory

Numerical tool modules:
- mechanism: Branching mechanism calculus, gauge and exponents
- kernels: CSBP kappa solver and Laplace functionals
- realtree: Trees coded by excursion paths
- samplers: Galton-Watson walks, subordinators and the decorated spine
- packing: Packing pre-measure solvers and density estimates
- artifact_writer: CSV/JSON/LTEX artifacts and the markdown run report
"""

from .mechanism import build_mechanism, build_counterexample, make_gauge, gauge_g, estimate_exponents
from .kernels import kappa_solve, script_L, density_bound_check
from .realtree import CodedTree, code_tree, tree_distance, ball_mass, path_to_ltex, path_from_ltex
from .samplers import OffspringLaw, sample_walk_excursion, sample_subordinator, sample_spine, liminf_ratio
from .packing import packing_value_exact, packing_value_greedy, pre_measure_estimate, density_profile
from .artifact_writer import ArtifactWriter, artifact_writer, emit_summary

__all__ = [
    # Mechanism calculus
    'build_mechanism',
    'build_counterexample',
    'make_gauge',
    'gauge_g',
    'estimate_exponents',

    # Kernels
    'kappa_solve',
    'script_L',
    'density_bound_check',

    # Real trees
    'CodedTree',
    'code_tree',
    'tree_distance',
    'ball_mass',
    'path_to_ltex',
    'path_from_ltex',

    # Samplers
    'OffspringLaw',
    'sample_walk_excursion',
    'sample_subordinator',
    'sample_spine',
    'liminf_ratio',

    # Packing
    'packing_value_exact',
    'packing_value_greedy',
    'pre_measure_estimate',
    'density_profile',

    # Artifacts
    'ArtifactWriter',
    'artifact_writer',
    'emit_summary'
]
