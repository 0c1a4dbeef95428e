"""Secure distributed matrix multiplication with cross subspace alignment codes."""

from .costs import CostReport, cost_dl, cost_report, cost_ul, regime_compare, tradeoff_sweep, ul_lower_bound
from .errors import *  # noqa: F401,F403
from .ffield import MERSENNE_61, FieldConfig, FieldElement, make_rng
from .harness import TimingReport, coordinate_run, run_scenario, scenario
from .matrix import FieldMatrix, PartitionSpec, mat_mul_hybrid_ws, mat_mul_naive
from .polyeval import CostModelParams, EvalPointPlan, build_eval_points, enc_gain_scsa
from .schemes import SchemeSpec, decode, encode, make_plan, recovery_threshold, run_pipeline, server_compute
from .security import collusion_audit

__version__ = "0.1.0"
