"""Cycle means near Hopf bifurcations: normal-form prediction and numerical check."""

from .equilibria import BifurcationPoint, Equilibrium, alpha_for_mu, continue_equilibria, locate_bifurcation, mu_of_alpha, solve_equilibrium
from .field import VectorFieldModel, bilinear_B, eval_rhs, jacobian, model_from_file, trilinear_C, verify_analytic_tensors
from .models import REGISTRY, get_model
from .normalform import MeanPrediction, NormalFormData, compute_K, normal_form, oigm_gain_jump, predict_mean, predict_orbit
from .spectral import HopfPair, hopf_pair

__version__ = "0.1.0"
