"""Controllability toolkit for bilinear Schrödinger equations on quantum graphs.

The package builds explicit eigenbases on compact subgraphs, assembles
control-operator matrices with extended-precision quadrature, checks spectral
and coupling hypotheses, synthesizes controls and propagates the truncated
dynamics.
"""
from ._backend import NAME as BACKEND
from .basis import (EigenMode, QuantumState, ResonantLengthsError, SpectralBasis, hs_norm,
                    star_pair_basis, tadpole_basis, uniform_chain_basis)
from .graph import BoundaryCondition, GraphError, MetricGraph, build_graph
from .operator import (ControlOperator, CouplingMatrix, CouplingTerm, HermiticityError, Profile,
                       assemble_matrix, matrix_element, star_coupling_oracle, star_operator,
                       tadpole_coupling_oracle, tadpole_operator)
from .propagator import Trajectory, duhamel_picard, evolve, fidelity
from .signals import Budget, ControlSignal, PiecewiseConstant, TrigSeries, budget_report
from .spectral import (check_assumption_I, check_assumption_II, check_gap_polynomial,
                       check_gap_uniform, find_resonances, partition_classes,
                       perturbed_spectrum, scan_nondegeneracy)
from .synthesis import (GeneratorSet, MomentProblem, RotationPlan, admissible_generators,
                        lie_closure_rank, plan_rotations, resonant_pulse, solve_moment_problem,
                        verify_moments)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Budget", "BoundaryCondition", "ControlOperator", "ControlSignal",
    "CouplingMatrix", "CouplingTerm", "EigenMode", "GeneratorSet", "GraphError",
    "HermiticityError", "MetricGraph", "MomentProblem", "PiecewiseConstant", "Profile",
    "QuantumState", "ResonantLengthsError", "RotationPlan", "SpectralBasis", "Trajectory",
    "TrigSeries", "admissible_generators", "assemble_matrix", "budget_report", "build_graph",
    "check_assumption_I", "check_assumption_II", "check_gap_polynomial", "check_gap_uniform",
    "duhamel_picard", "evolve", "fidelity", "find_resonances", "hs_norm", "lie_closure_rank",
    "matrix_element", "partition_classes", "perturbed_spectrum", "plan_rotations",
    "resonant_pulse", "scan_nondegeneracy", "solve_moment_problem", "star_coupling_oracle",
    "star_operator", "star_pair_basis", "tadpole_basis", "tadpole_coupling_oracle",
    "tadpole_operator", "uniform_chain_basis", "verify_moments",
]
