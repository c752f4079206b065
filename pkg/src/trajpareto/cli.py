"""Staged command-line pipeline.

Subcommands: synth, ingest, metrics, objectives, pareto, report,
run-all. Every stage is a pure function of (inputs, config, seed),
writes its artifacts under the configured output directory and records
a manifest with content digests.

Exit codes: 2 schema/config/grid problems, 3 missing upstream artifact,
4 missing report dependency, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from trajpareto import frontier as frontier_mod
from trajpareto import ingest as ingest_mod
from trajpareto import objectives as objectives_mod
from trajpareto.config import RunConfig, load_config
from trajpareto.errors import (
    ConfigError, GridError, MissingUpstreamError, SchemaError, TrajParetoError,
)
from trajpareto.manifest import write_manifest
from trajpareto.metrics.pipeline import MetricsConfig, compute_metrics
from trajpareto.metrics.store import save_models
from trajpareto.synth import write_synth_dataset

logger = logging.getLogger(__name__)

FLOAT_FMT = "%.10g"

HISTOGRAM_METRICS = ["m_max", "headway_time", "gain", "jerk_mag", "decel_mag"]


def _require(path: Path, stage: str) -> Path:
    if not Path(path).exists():
        raise MissingUpstreamError(stage, str(path))
    return Path(path)


def _write_csv(df: pd.DataFrame, path: Path) -> None:
    df.to_csv(path, index=False, float_format=FLOAT_FMT)


def _write_json(doc, path: Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def stage_ingest(cfg: RunConfig) -> dict:
    src = _require(cfg.input_path(), "ingest")
    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    tracks, dropped = ingest_mod.load_trajectories(src, cfg.input.columns, cfg.dt)
    tracks = [ingest_mod.apply_transform(tr, cfg.transform) for tr in tracks]
    tracks = [
        ingest_mod.derive_kinematics(
            tr, cfg.smoothing, cfg.dt,
            smooth_target=cfg.smooth_target,
            use_source_kinematics=cfg.use_source_kinematics,
        )
        for tr in tracks
    ]
    frames = ingest_mod.tracks_to_table(tracks)
    frames_path = out / "frames.csv"
    _write_csv(frames, frames_path)
    logger.info("ingest: %d agents, %d frames, %d rows dropped",
                len(tracks), len(frames), dropped)
    write_manifest(out, "ingest", {"trajectories": src},
                   {"frames": frames_path}, cfg.digest())
    return {"frames": frames_path, "dropped": dropped}


def _metrics_config(cfg: RunConfig) -> MetricsConfig:
    return MetricsConfig(
        ego_types=tuple(cfg.ego_types),
        zones=cfg.zones,
        policy=cfg.spacing_policy,
        search=cfg.search,
        dt=cfg.dt,
        regressor=cfg.metrics.regressor,
        mlp_epochs=cfg.metrics.mlp_epochs,
        seed=cfg.seed,
        min_spacing_pairs=cfg.metrics.min_spacing_pairs,
        gpd_percentile=cfg.metrics.gpd_percentile,
        min_exceedances=cfg.metrics.min_exceedances,
        min_delay_records=cfg.metrics.min_delay_records,
        a_min=cfg.metrics.a_min,
        jerk_threshold=cfg.metrics.jerk_threshold,
        decel_threshold=cfg.metrics.decel_threshold,
        dataset_label=cfg.dataset_label,
    )


def stage_metrics(cfg: RunConfig) -> dict:
    out = cfg.output_dir()
    frames_path = _require(out / "frames.csv", "metrics")
    frames = pd.read_csv(frames_path)
    tracks = ingest_mod.table_to_tracks(frames)
    result = compute_metrics(tracks, _metrics_config(cfg), workers=cfg.workers)

    metrics_path = out / "metrics.csv"
    pairs_path = out / "pairs.csv"
    _write_csv(result.table, metrics_path)
    _write_csv(result.pairs, pairs_path)

    outputs = {"metrics": metrics_path, "pairs": pairs_path}
    if result.spacing_model is not None:
        ext = "json" if cfg.metrics.model_format == "text" else "bin"
        models_path = out / f"models.{ext}"
        save_models(models_path, result.spacing_model, result.tail_model,
                    fmt=cfg.metrics.model_format)
        outputs["models"] = models_path
    else:
        logger.warning("metrics: spacing model unavailable, no model file written")
    write_manifest(out, "metrics", {"frames": frames_path}, outputs, cfg.digest())
    return dict(outputs, diagnostics=result.diagnostics)


def stage_objectives(cfg: RunConfig) -> dict:
    out = cfg.output_dir()
    metrics_path = _require(out / "metrics.csv", "objectives")
    table = pd.read_csv(metrics_path)

    dropped = 0
    if cfg.objectives.filter_enabled:
        table, dropped = objectives_mod.percentile_filter(
            table, lower=cfg.objectives.filter_lower,
            upper=cfg.objectives.filter_upper)
    ctx = objectives_mod.build_context(table)
    vectors = objectives_mod.composite_scores(table, ctx)
    vectors = objectives_mod.knn_impute(vectors, k=cfg.objectives.knn_k)

    objectives_path = out / "objectives.csv"
    _write_csv(vectors, objectives_path)
    ctx_path = out / "norm_context.json"
    _write_json(dict(ctx.to_dict(), filtered_rows=dropped), ctx_path)
    write_manifest(out, "objectives", {"metrics": metrics_path},
                   {"objectives": objectives_path, "norm_context": ctx_path},
                   cfg.digest())
    return {"objectives": objectives_path, "norm_context": ctx_path}


def stage_pareto(cfg: RunConfig) -> dict:
    out = cfg.output_dir()
    objectives_path = _require(out / "objectives.csv", "pareto")
    vectors = pd.read_csv(objectives_path)
    usable = vectors.dropna(subset=["S", "E", "I"]).reset_index(drop=True)
    if len(usable) < len(vectors):
        logger.warning("pareto: %d rows still missing objectives after imputation",
                       len(vectors) - len(usable))
    X = usable[["S", "E", "I"]].to_numpy(dtype=float)
    result = frontier_mod.pareto_set(X)

    pareto_table = usable[["ego_id", "t", "S", "E", "I"]].copy()
    pareto_table.insert(0, "row_index", np.arange(len(usable)))
    pareto_table["is_pareto"] = result.mask
    pareto_path = out / "pareto.csv"
    _write_csv(pareto_table, pareto_path)
    outputs = {"pareto": pareto_path}

    pareto_points = X[result.mask]
    model = None
    headrooms = None
    if result.count >= frontier_mod.gpr.MIN_PARETO_POINTS:
        try:
            model = frontier_mod.fit_frontier(
                pareto_points,
                dependent_axis=cfg.frontier.dependent_axis,
                lattice_size=cfg.frontier.lattice_size,
            )
        except TrajParetoError as exc:
            logger.warning("pareto: frontier fit skipped (%s)", exc)
    else:
        logger.warning("pareto: frontier skipped, only %d Pareto points (< %d)",
                       result.count, frontier_mod.gpr.MIN_PARETO_POINTS)

    if model is not None:
        ax0, ax1 = model.grid_axes
        g0, g1 = np.meshgrid(ax0, ax1, indexing="ij")
        lattice = pd.DataFrame({
            model.input_axes[0]: g0.ravel(),
            model.input_axes[1]: g1.ravel(),
            f"{model.dependent_axis}_pred": model.grid_pred.ravel(),
            "pred_std": model.grid_std.ravel(),
        })
        lattice_path = out / "frontier_lattice.csv"
        _write_csv(lattice, lattice_path)
        outputs["frontier_lattice"] = lattice_path

        headrooms = frontier_mod.headroom_report(
            X, model=model, pareto_points=pareto_points,
            reference=cfg.frontier.headroom_reference)
        hr = pd.DataFrame(headrooms.per_point, columns=["h_S", "h_E", "h_I"])
        hr.insert(0, "t", usable["t"].to_numpy())
        hr.insert(0, "ego_id", usable["ego_id"].to_numpy())
        headroom_path = out / "headroom.csv"
        _write_csv(hr, headroom_path)
        outputs["headroom"] = headroom_path

    hull = frontier_mod.convex_hull_frontier(
        pareto_points, dependent_axis=cfg.frontier.dependent_axis)
    hull_rows = []
    upper_set = {tuple(f) for f in hull.upper_facets}
    for fid, facet in enumerate(hull.facets):
        coords = pareto_points[facet]
        hull_rows.append({
            "facet_id": fid,
            "v0": facet[0], "v1": facet[1], "v2": facet[2],
            "nx": hull.normals[fid, 0], "ny": hull.normals[fid, 1],
            "nz": hull.normals[fid, 2],
            "upper": tuple(facet) in upper_set,
            "x0": coords[0, 0], "y0": coords[0, 1], "z0": coords[0, 2],
            "x1": coords[1, 0], "y1": coords[1, 1], "z1": coords[1, 2],
            "x2": coords[2, 0], "y2": coords[2, 1], "z2": coords[2, 2],
        })
    hull_path = out / "hull_facets.csv"
    _write_csv(pd.DataFrame(
        hull_rows,
        columns=["facet_id", "v0", "v1", "v2", "nx", "ny", "nz", "upper",
                 "x0", "y0", "z0", "x1", "y1", "z1", "x2", "y2", "z2"],
    ), hull_path)
    outputs["hull_facets"] = hull_path

    summary = frontier_mod.pareto_report(
        result, model=model, headrooms=headrooms,
        extra={
            "hull_degenerate": hull.degenerate,
            "n_hull_facets": int(len(hull.facets)),
            "rows_missing_after_imputation": int(len(vectors) - len(usable)),
        },
    )
    summary_path = out / "summary.json"
    _write_json(summary, summary_path)
    outputs["summary"] = summary_path
    print(frontier_mod.format_summary(summary))

    write_manifest(out, "pareto", {"objectives": objectives_path},
                   outputs, cfg.digest())
    return dict(outputs, result=result, model=model)


def stage_report(cfg: RunConfig) -> dict:
    out = cfg.output_dir()
    metrics_path = _require(out / "metrics.csv", "report")
    summary_path = _require(out / "summary.json", "report")
    table = pd.read_csv(metrics_path)

    report_doc = {"histograms": {}, "summary": "summary.json"}
    outputs = {}
    for metric in HISTOGRAM_METRICS:
        vals = table[metric].to_numpy(dtype=float)
        vals = vals[np.isfinite(vals)]
        threshold = cfg.report.thresholds.get(metric)
        if vals.size == 0:
            logger.warning("report: no valid %s values, histogram omitted", metric)
            report_doc["histograms"][metric] = {
                "omitted": True, "n_valid": 0, "threshold": threshold,
            }
            continue
        counts, edges = np.histogram(vals, bins=cfg.report.bins)
        hist = pd.DataFrame({
            "bin_left": edges[:-1], "bin_right": edges[1:], "count": counts,
        })
        hist_path = out / f"hist_{metric}.csv"
        _write_csv(hist, hist_path)
        outputs[f"hist_{metric}"] = hist_path
        report_doc["histograms"][metric] = {
            "omitted": False,
            "file": hist_path.name,
            "n_valid": int(vals.size),
            "threshold": threshold,
        }
    lattice_path = out / "frontier_lattice.csv"
    report_doc["frontier_lattice"] = lattice_path.name if lattice_path.exists() else None

    report_path = out / "report.json"
    _write_json(report_doc, report_path)
    outputs["report"] = report_path
    write_manifest(out, "report",
                   {"metrics": metrics_path, "summary": summary_path},
                   outputs, cfg.digest())
    return outputs


STAGES = {
    "ingest": stage_ingest,
    "metrics": stage_metrics,
    "objectives": stage_objectives,
    "pareto": stage_pareto,
    "report": stage_report,
}


def run_all(cfg: RunConfig) -> None:
    for name in ("ingest", "metrics", "objectives", "pareto", "report"):
        logger.info("=== stage %s ===", name)
        STAGES[name](cfg)


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out_dir is not None:
        cfg.out_dir = str(Path(args.out_dir).resolve())
    if args.workers is not None:
        cfg.workers = args.workers
    cfg.validate()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config YAML")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out-dir", default=None)
    common.add_argument("--workers", type=int, default=None)
    parser = argparse.ArgumentParser(
        prog="trajpareto",
        description="Trajectory metrics, composite objectives and the "
                    "empirical Pareto frontier.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*STAGES, "run-all"):
        sub.add_parser(name, parents=[common])
    synth = sub.add_parser("synth", parents=[common],
                           help="write the bundled synthetic dataset")
    synth.add_argument("--duration", type=float, default=150.0)
    synth.add_argument("--dir", default="synth_data",
                       help="where to put trajectories.csv + config.yaml")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            csv_path, cfg_path = write_synth_dataset(
                args.dir, seed=args.seed or 0, duration=args.duration)
            print(f"wrote {csv_path} and {cfg_path}")
            return 0
        if not args.config:
            raise ConfigError("--config is required for pipeline commands")
        if not Path(args.config).exists():
            raise ConfigError(f"config file not found: {args.config}")
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "run-all":
            run_all(cfg)
        else:
            STAGES[args.command](cfg)
        return 0
    except (SchemaError, GridError, ConfigError) as exc:
        print(f"error ({args.command}): {exc}", file=sys.stderr)
        return 2
    except MissingUpstreamError as exc:
        print(f"error ({exc.stage}): {exc}", file=sys.stderr)
        return 4 if exc.stage == "report" else 3
    except TrajParetoError as exc:
        print(f"error ({args.command}): {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
