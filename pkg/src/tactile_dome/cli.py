"""Command-line entry point: ``tactile-dome <subcommand>``.

Exit codes: 0 success, 1 runtime error, 2 usage error.  Every output file
is written to a temp file and renamed into place.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import evaluation, krr
from .csvio import (
    MANIFEST_NAME, IngestError, atomic_write_text, dump_json, ingest_csv, read_manifest,
    write_dataset_csv, write_json,
)
from .geometry import (
    DomeSpec, GeometryError, PlacementParams, SensorConfig, build_case, make_test_locations,
    make_training_grid,
)
from .surrogate import TEST_STREAM, TRAIN_STREAM, SimulationError, SurrogateParams, generate_dataset, sweep_symmetry_line

log = logging.getLogger("tactile_dome")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    dome: DomeSpec = field(default_factory=DomeSpec)
    case: int | str = 8
    surrogate: SurrogateParams = field(default_factory=SurrogateParams)
    grid_per_axis: int = 16
    depths: tuple[float, ...] = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
    test_count: int = 100
    seed_test: int = 0
    seed_shuffle: int = 0
    seed_noise: int = 0
    mirror: bool = False
    noise: bool = True
    scale_features: bool = False
    out: str = "."

    def to_json(self) -> dict:
        return {
            "dome": self.dome.to_json(),
            "case": self.case,
            "surrogate": asdict(self.surrogate),
            "grid_per_axis": self.grid_per_axis,
            "depths_mm": list(self.depths),
            "test_count": self.test_count,
            "seeds": {"test_locations": self.seed_test, "shuffle": self.seed_shuffle,
                      "noise": self.seed_noise},
            "mirror": self.mirror,
            "noise": self.noise,
            "scale_features": self.scale_features,
        }


def parse_depths(text: str, max_depth: float = 3.0) -> tuple[float, ...]:
    """``"start:stop:step"`` in mm, stop inclusive."""
    try:
        start, stop, step = (float(p) for p in text.split(":"))
    except ValueError:
        raise UsageError(f"--depths must look like start:stop:step, got {text!r}") from None
    if not step > 0:
        raise UsageError(f"--depths step must be > 0, got {step}")
    if stop < start:
        raise UsageError(f"--depths stop {stop} is below start {start}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    values = tuple(float(v) for v in np.round(start + step * np.arange(count), 12))
    if values[0] < 0 or values[-1] > max_depth:
        raise UsageError(f"--depths must stay within [0, {max_depth}] mm")
    return values


# ---------------------------------------------------------------------------
# argument plumbing


def _dome_args(p):
    g = p.add_argument_group("dome")
    g.add_argument("--radius-mm", type=float, default=None, help="sphere radius (default 27)")
    g.add_argument("--aperture-deg", type=float, default=None, help="cap half aperture (default 45)")
    g.add_argument("--chart-halfwidth", type=float, default=None, help="chart bound (default 15)")


def _placement_args(p):
    g = p.add_argument_group("sensor placement")
    g.add_argument("--sensor-height-mm", type=float, default=PlacementParams.sensor_height)
    g.add_argument("--standoff-mm", type=float, default=PlacementParams.surface_standoff)
    g.add_argument("--central-recess-mm", type=float, default=PlacementParams.central_recess)


def _config_args(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--case", type=int, choices=range(1, 11), metavar="N", help="layout case 1..10")
    g.add_argument("--config", type=Path, metavar="PATH", help="sensor config JSON")


def _dome_from(args, fallback: DomeSpec | None = None) -> DomeSpec:
    base = fallback or DomeSpec()
    return DomeSpec(
        base.sphere_radius if args.radius_mm is None else args.radius_mm,
        base.cap_half_aperture if args.aperture_deg is None else args.aperture_deg,
        base.chart_halfwidth if args.chart_halfwidth is None else args.chart_halfwidth,
    )


def _placement_from(args) -> PlacementParams:
    return PlacementParams(args.sensor_height_mm, args.standoff_mm, args.central_recess_mm)


def _sensor_config(args, dome: DomeSpec) -> SensorConfig:
    if getattr(args, "config", None) is not None:
        with open(args.config, encoding="utf-8") as fh:
            return SensorConfig.from_json(json.load(fh))
    return build_case(args.case, dome, _placement_from(args))


def _dataset_dome(csv_path: Path, args) -> DomeSpec:
    manifest = read_manifest(csv_path.parent)
    if manifest is not None and "dome" in manifest:
        return DomeSpec.from_json(manifest["dome"])
    return _dome_from(args)


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_config(args) -> int:
    dome = _dome_from(args)
    config = build_case(args.case, dome, _placement_from(args))
    out = Path(args.out) / f"config_case{args.case}.json"
    write_json(out, config.to_json())
    log.info("wrote %s", out)
    return 0


def cmd_simulate(args) -> int:
    dome = _dome_from(args)
    config = _sensor_config(args, dome)
    params = SurrogateParams()
    run = RunConfig(
        dome=dome, case=config.case_id, surrogate=params, grid_per_axis=args.grid,
        depths=parse_depths(args.depths, params.max_depth), test_count=args.test_count,
        seed_test=args.seed_test, seed_shuffle=args.seed_shuffle, seed_noise=args.seed_noise,
        mirror=args.mirror, noise=not args.no_noise, out=args.out,
    )
    try:
        grid = make_training_grid(dome, run.grid_per_axis)
        test_locations = make_test_locations(dome, run.test_count, run.seed_test)
    except GeometryError as exc:
        raise UsageError(str(exc)) from exc
    train = generate_dataset(config, dome, grid, run.depths, params, run.seed_noise, run.mirror,
                             noise=run.noise, stream=TRAIN_STREAM)
    test = generate_dataset(config, dome, test_locations, run.depths, params, run.seed_noise,
                            False, noise=run.noise, stream=TEST_STREAM)
    out = Path(args.out)
    write_dataset_csv(out / "train.csv", train)
    write_dataset_csv(out / "test.csv", test)
    manifest = {
        "dome": dome.to_json(),
        "run_config": run.to_json(),
        "sensor_config": config.to_json(),
        "files": {
            "train.csv": {"provenance": "surrogate", "case": config.case_id, "role": "train"},
            "test.csv": {"provenance": "surrogate", "case": config.case_id, "role": "test"},
        },
    }
    write_json(out / MANIFEST_NAME, manifest)
    log.info("wrote %d training and %d test rows to %s", len(train), len(test), out)
    return 0


def cmd_train(args) -> int:
    path = Path(args.train_csv)
    dataset = ingest_csv(path)
    dome = _dataset_dome(path, args)
    manifest = read_manifest(path.parent) or {}
    report = krr.grid_search(dataset, args.k, args.seed_shuffle, dome=dome,
                             min_depth=args.min_depth_mm, scale_features=args.scale_features,
                             n_jobs=args.jobs)
    rows = dataset.training_rows(args.min_depth_mm)
    seeds = dict(manifest.get("run_config", {}).get("seeds", {}))
    seeds["shuffle"] = args.seed_shuffle
    meta = {
        "case": dataset.config_ref,
        "provenance": dataset.provenance,
        "seeds": seeds,
        "depth_filter_mm": args.min_depth_mm,
        "tared": dataset.tared,
    }
    if "sensor_config" in manifest:
        meta["sensor_config"] = manifest["sensor_config"]
    model = krr.fit(rows.readings, rows.ab, report.best, dome=dome, meta=meta,
                    scale_features=args.scale_features)
    out = Path(args.out)
    write_json(out / "search_report.json", report.to_json())
    write_json(out / "model.json", model.to_json())
    log.info("best alpha=%g gamma=%g, cv median %.3f mm", report.best.alpha, report.best.gamma,
             report.best_score)
    return 0


def cmd_evaluate(args) -> int:
    with open(args.model, encoding="utf-8") as fh:
        model = krr.FittedModel.from_json(json.load(fh))
    path = Path(args.test_csv)
    dataset_dome = _dataset_dome(path, args)
    if dataset_dome != model.dome:
        raise evaluation.EvaluationError(
            f"dome mismatch: model was trained on {model.dome.to_json()}, "
            f"test data describes {dataset_dome.to_json()}"
        )
    test = ingest_csv(path)
    result = evaluation.evaluate(model, test, model.dome, args.score_depth_mm)

    config = None
    if args.case is not None or args.config is not None:
        config = _sensor_config(args, model.dome)
    elif "sensor_config" in model.meta:
        config = SensorConfig.from_json(model.meta["sensor_config"])
    baseline = None
    if config is not None:
        baseline = evaluation.nearest_sensor_baseline(config, test, model.dome, result.score_depth)

    case = model.meta.get("case", test.config_ref)
    report = evaluation.build_report(case, test.provenance, result, baseline)
    out = Path(args.out)
    write_json(out / "report.json", report)
    evaluation.export_arrow_plot(result.records, out / "arrows.csv")
    log.info("median %.3f mm over %d locations", result.summary.median, result.summary.count)
    return 0


def cmd_compare(args) -> int:
    if len(args.reports) < 2:
        raise UsageError("compare needs at least two report files")
    entries = []
    for path in args.reports:
        with open(path, encoding="utf-8") as fh:
            rep = json.load(fh)
        entries.append((rep["case"], evaluation.SummaryStats.from_json(rep["summary"]),
                        rep.get("provenance", "surrogate")))
    rows = evaluation.compare_cases(entries)
    out = Path(args.out)
    atomic_write_text(out / "comparison.csv", evaluation.comparison_csv(rows))
    atomic_write_text(out / "comparison.json", dump_json([r.to_json() for r in rows]))
    return 0


def cmd_sweep(args) -> int:
    dome = _dome_from(args)
    config = _sensor_config(args, dome)
    table = sweep_symmetry_line(config, dome, SurrogateParams(), args.depth_mm, args.steps)
    atomic_write_text(Path(args.out) / "sweep.csv", evaluation.sweep_csv(table))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tactile-dome", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-config", help="write a sensor layout JSON for one case")
    p.add_argument("--case", type=int, choices=range(1, 11), metavar="N", required=True)
    _placement_args(p)
    _dome_args(p)
    p.add_argument("--out", default=".", metavar="DIR")
    p.set_defaults(func=cmd_gen_config)

    p = sub.add_parser("simulate", help="generate surrogate train/test datasets")
    _config_args(p)
    _placement_args(p)
    _dome_args(p)
    p.add_argument("--grid", type=int, default=16, metavar="N", help="training grid per axis")
    p.add_argument("--depths", default="0:3:0.5", metavar="A:B:STEP", help="depth schedule in mm")
    p.add_argument("--test-count", type=int, default=100, metavar="N")
    p.add_argument("--seed-test", type=int, default=0, metavar="N")
    p.add_argument("--seed-shuffle", type=int, default=0, metavar="N")
    p.add_argument("--seed-noise", type=int, default=0, metavar="N")
    p.add_argument("--mirror", action="store_true", help="simulate half the grid and mirror it")
    p.add_argument("--no-noise", action="store_true")
    p.add_argument("--out", default=".", metavar="DIR")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="grid-search and fit the regressor")
    p.add_argument("train_csv", metavar="TRAIN_CSV")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed-shuffle", type=int, default=0, metavar="N")
    p.add_argument("--scale-features", action="store_true")
    p.add_argument("--min-depth-mm", type=float, default=0.5)
    p.add_argument("--jobs", type=int, default=1, help="threads for the grid search")
    _dome_args(p)
    p.add_argument("--out", default=".", metavar="DIR")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a model on a test dataset")
    p.add_argument("test_csv", metavar="TEST_CSV")
    p.add_argument("--model", required=True, metavar="PATH")
    _config_args(p, required=False)
    _placement_args(p)
    _dome_args(p)
    p.add_argument("--score-depth-mm", type=float, default=None)
    p.add_argument("--out", default=".", metavar="DIR")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="table of several evaluation reports")
    p.add_argument("reports", nargs="+", metavar="REPORT_JSON")
    p.add_argument("--out", default=".", metavar="DIR")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="readings along the symmetry line")
    _config_args(p)
    _placement_args(p)
    _dome_args(p)
    p.add_argument("--depth-mm", type=float, default=3.0)
    p.add_argument("--steps", type=int, default=31)
    p.add_argument("--out", default=".", metavar="DIR")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (GeometryError, SimulationError, IngestError, evaluation.EvaluationError,
            krr.SolveError, ValueError, OSError, KeyError) as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
