"""Pareto set extraction, GPR frontier surface, headroom and hull."""

from trajpareto.frontier.gpr import (
    AXES, FrontierModel, KernelSearchConfig, fit_frontier, surface_points,
)
from trajpareto.frontier.headroom import HeadroomReport, headroom, headroom_report
from trajpareto.frontier.hull import HullResult, convex_hull_frontier
from trajpareto.frontier.pareto import ParetoResult, dominates, pareto_set
from trajpareto.frontier.reporting import format_summary, pareto_report

__all__ = [
    "AXES", "FrontierModel", "KernelSearchConfig", "fit_frontier", "surface_points",
    "HeadroomReport", "headroom", "headroom_report",
    "HullResult", "convex_hull_frontier",
    "ParetoResult", "dominates", "pareto_set",
    "format_summary", "pareto_report",
]
