"""specdyn: gradient-descent dynamics of wide two-layer ReLU networks and
the spectra of their kernel operators, with a harness that reproduces the
associated figures and property suites at desk scale."""

__version__ = "0.1.0"

from .sphere_data import (FeatureSet, TargetFn, Dataset, sample_uniform_sphere,
                          make_polynomial_target, build_dataset, augment_with_bias)
from .relu_net import (NetState, TrainTrace, init_network, forward, predictions,
                       empirical_risk, gd_step, train, sign_pattern, flip_sets)
from .kernels import (GramSet, KernelMatrix, kernel_value, empirical_kernel_matrix,
                      gram_matrices, h_matrix, sandwich_check, perturbation_norms)
from .spectral import (Spectrum, SpectralCoeffs, sym_eig, lambda_min_sweep,
                       concentration_check, linearized_error_curve, spectral_coeffs,
                       tail_energy, eigenspace_alignment)
from .harmonics import (OperatorEigs, gegenbauer, gegenbauer_explicit, pochhammer,
                        harmonic_dimension, arccos_derivatives, h_coefficients,
                        beta_eigenvalue, alpha_by_quadrature, operator_eigs,
                        zonal_projection_matrix)
from . import theory
