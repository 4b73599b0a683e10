"""besovkit: desk-scale numerics for Besov quasi-norms by differences,
Whitney decomposition and boundary-average extension, smooth and non-smooth
atomic decompositions, trace/extension round trips, and self-similar
multiplier diagnostics, in dimensions 1 and 2."""

from .besov import (BesovParams, CoefficientArray, besov_norm_differences,
                    homogeneity_ratio, modulus_of_smoothness,
                    seq_norm_boundary, seq_norm_domain, selfsimilar_norm,
                    SelfsimilarConfig, gn_check)
from .geometry import (DyadicCube, GraphDomain, HGauge, IntervalDomain,
                       BoxDomain, LipschitzDomain, PolygonDomain,
                       cubes_meeting, distance_to_boundary, load_domain,
                       dump_domain, omega_hj_measure, segment_in_domain,
                       hset_ratio_stats)
from .grids import SampledFunction, dump_grid, load_grid
from .bsplines import bspline_eval, difference_spline_identity
from .differences import forward_difference, lp_quasinorm
from .atoms import (Atom, AtomicDecomposition, decompose, make_atom,
                    reconstruct, reexpand, todo3_check, validate_atom)
from .whitney import (BoundaryFunction, WhitneyCover, boundary_average,
                      derivative_bound_report, partition_weights,
                      whitney_decompose, whitney_extend)
from .trace import (BoundaryDecomposition, boundary_decompose,
                    extend_boundary_atom, extend_boundary_function,
                    roundtrip_report, trace_restrict)
from .multipliers import (chi_profile, hset_condition_sum, multiplier_ratio,
                          selfsimilar_membership)
from .experiments import run_experiment, experiment_names

__version__ = "0.1.0"
