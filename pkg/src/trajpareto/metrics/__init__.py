"""Behavioral metrics: spacing-based risk with a GPD tail, headway,
delay + string-stability gain, jerk, deceleration events."""

from trajpareto.metrics.delay import (
    DelayModel, apply_refinement, estimate_delay_xcorr, refine_delay,
)
from trajpareto.metrics.motion import (
    DecelEvent, compute_headway, detect_decel_events, jerk_flags,
    jerk_magnitude, longitudinal_accel, stability_gain,
)
from trajpareto.metrics.pipeline import (
    MetricsConfig, MetricsResult, compute_metrics,
)
from trajpareto.metrics.spacing import (
    InteractionFeatures, SpacingModel, fit_spacing_model,
    risk_from_survival, risk_score,
)
from trajpareto.metrics.store import load_models, save_models
from trajpareto.metrics.tail import TailModel, fit_gpd_tail, tail_exceedance_prob

__all__ = [
    "DelayModel", "apply_refinement", "estimate_delay_xcorr", "refine_delay",
    "DecelEvent", "compute_headway", "detect_decel_events", "jerk_flags",
    "jerk_magnitude", "longitudinal_accel", "stability_gain",
    "MetricsConfig", "MetricsResult", "compute_metrics",
    "InteractionFeatures", "SpacingModel", "fit_spacing_model",
    "risk_from_survival", "risk_score",
    "load_models", "save_models",
    "TailModel", "fit_gpd_tail", "tail_exceedance_prob",
]
