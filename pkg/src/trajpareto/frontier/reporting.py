"""Run summary: Pareto statistics, frontier hyperparameters, headroom
medians and overshoot diagnostics in one structured document."""

from __future__ import annotations

import numpy as np

from trajpareto.frontier.gpr import AXES, FrontierModel
from trajpareto.frontier.headroom import HeadroomReport
from trajpareto.frontier.pareto import ParetoResult


def _axis_means(values: np.ndarray) -> dict:
    if values.size == 0 or np.all(np.isnan(values)):
        return {axis: None for axis in AXES}
    return {axis: float(values[i]) for i, axis in enumerate(AXES)}


def pareto_report(
    result: ParetoResult,
    model: FrontierModel | None = None,
    headrooms: HeadroomReport | None = None,
    extra: dict | None = None,
) -> dict:
    """Assemble the run summary over all frontier-stage outputs."""
    n = len(result.mask)
    summary = {
        "n_observations": n,
        "n_pareto": result.count,
        "pareto_fraction": result.fraction,
        "mean_scores": {
            "pareto": _axis_means(result.mean_pareto),
            "non_pareto": _axis_means(result.mean_dominated),
        },
    }
    if model is not None:
        summary["frontier"] = {
            "dependent_axis": model.dependent_axis,
            "input_axes": list(model.input_axes),
            "length_scales": [float(v) for v in model.length_scales],
            "signal_variance": model.signal_var,
            "noise_variance": model.noise_var,
            "log_marginal_likelihood": model.log_marginal_likelihood,
            "lattice_size": model.lattice_size,
            "overshoot": dict(model.overshoot),
        }
    else:
        summary["frontier"] = None
    if headrooms is not None:
        summary["headroom_medians"] = dict(headrooms.medians)
        summary["headroom_reference"] = headrooms.reference
    if extra:
        summary.update(extra)
    return summary


def format_summary(summary: dict) -> str:
    """Human-readable block printed at the end of the pareto stage."""
    lines = [
        f"observations: {summary['n_observations']}",
        f"pareto-optimal: {summary['n_pareto']} "
        f"({100.0 * summary['pareto_fraction']:.2f}%)",
    ]
    for status in ("non_pareto", "pareto"):
        means = summary["mean_scores"][status]
        txt = ", ".join(
            f"{axis}={means[axis]:.3f}" if means[axis] is not None else f"{axis}=n/a"
            for axis in AXES
        )
        lines.append(f"mean scores ({status.replace('_', '-')}): {txt}")
    if summary.get("frontier"):
        fr = summary["frontier"]
        lines.append(
            f"frontier: {fr['dependent_axis']} ~ GPR({', '.join(fr['input_axes'])}), "
            f"lengths=({fr['length_scales'][0]:.3g}, {fr['length_scales'][1]:.3g}), "
            f"noise var={fr['noise_variance']:.3g}"
        )
        ov = fr["overshoot"]
        lines.append(
            f"overshoot (lattice {ov['lattice_size']}x{ov['lattice_size']}): "
            f"max={ov['max']:.4g} mean={ov['mean']:.4g} "
            f"fraction>1={100.0 * ov['fraction']:.1f}%"
        )
    else:
        lines.append("frontier: skipped")
    if "headroom_medians" in summary:
        med = summary["headroom_medians"]
        lines.append(
            "median headroom: "
            + ", ".join(f"{axis}={med[axis]:.3f}" for axis in AXES)
            + f" (vs {summary['headroom_reference']})"
        )
    return "\n".join(lines)
