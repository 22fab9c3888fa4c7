"""Capacity region and strong-converse exponent of state-dependent channels with
rate-limited state information at the decoder."""
from .channels import BUNDLED, ChannelSpec, SpecError, bundled, load_spec
from .exponent import (OmegaSolver, SearchSpec, ThetaParams, TiltParams, f_of, f_sup, lambda_to_theta,
                       omega_q, omega_slope_at_zero, omega_w, omega_weight, pc_upper_bound, theta_to_lambda)
from .optimize import OptConfig, OptimizationError, exhaustive_grid, maximize_joint
from .oracle import Code, g_n_exhaustive, mc_pc, pc_exact, verify_main_theorem
from .prob import Channel, Joint5, conditional, kl_cond, marginal, mutual_info
from .region import RatePoint, SupportCurve, boundary, c_mu, c_tilde, gp_capacity, membership

__version__ = "0.1.0"
