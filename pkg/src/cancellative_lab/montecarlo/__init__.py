"""Monte Carlo simulation and estimators."""
from .engine import CancellativeSim, FlipSim, RandomStream, make_sim, product_config
from .estimators import (EstimatorReport, HFunction, alpha_scan, annihilating_walk_density,
                         clustering_curve, estimate_h, estimate_p, map_replicas, martingale_test,
                         product_sampler, survival_probability)
from .hat import DEFAULT_CAP, HatYRun, HatYSample, interface_tightness_report, simulate_hatY

__all__ = [
    "CancellativeSim", "FlipSim", "RandomStream", "make_sim", "product_config",
    "EstimatorReport", "HFunction", "alpha_scan", "annihilating_walk_density",
    "clustering_curve", "estimate_h", "estimate_p", "map_replicas", "martingale_test",
    "product_sampler", "survival_probability", "DEFAULT_CAP", "HatYRun", "HatYSample",
    "interface_tightness_report", "simulate_hatY",
]
