"""Command-line front end: extract, baseline, evaluate, tune, synth.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 no pulsatile region (or every tuning point excluded).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

from . import io
from .baselines import RoiSpec, mean_ppg
from .cardiac import estimate_hr
from .config import PipelineConfig
from .errors import (DataError, InvalidConfigError, NoEstimateError, NoPulsatileRegionError)
from .evaluation import (DEFAULT_GRID, MetricsReport, bland_altman, grid_search, lag_correlation,
                         spectral_entropy)
from .fusion import extract_pulse, prepare_scene
from .synth import SceneSpec, cohort, default_cohort_specs

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NO_SIGNAL = 0, 1, 2, 3

log = logging.getLogger("pulsefusion")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(args) -> PipelineConfig:
    """Config file first, then ``--set`` overrides, then dedicated flags."""
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file {path} not found")
        cfg = PipelineConfig.from_json(path.read_text())
    overrides = {}
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects section.key=value, got {item!r}")
        overrides[key.strip()] = _parse_value(value)
    if getattr(args, "windowed", None) is not None:
        overrides["fusion.window_s"] = args.windowed
    if getattr(args, "fundamental_band_noise", False):
        overrides["spectral.fundamental_band_noise"] = True
    return cfg.replace(**overrides) if overrides else cfg


def _sidecar(fused, cfg: PipelineConfig, extra: dict | None = None) -> dict:
    out = {
        "fps": fused.fps,
        "total_weight": fused.total_weight,
        "n_regions_used": fused.n_regions_used,
        "n_samples": int(fused.samples.size),
        "config": cfg.to_dict(),
    }
    windows = fused.diagnostics.get("windows")
    if windows is not None:
        out["windows"] = windows
        out["excluded_regions"] = fused.diagnostics.get("excluded_regions")
        out["clamped_samples"] = fused.diagnostics.get("clamped_samples")
    if extra:
        out.update(extra)
    return out


def dump_priors(directory, fused) -> None:
    """Per-region prior table plus CSV and PGM maps for every window."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for wi, (priors, summaries) in enumerate(zip(fused.priors, fused.summaries)):
        suffix = "" if len(fused.priors) == 1 else f"_w{wi}"
        rows, cols = priors.shape
        with open(directory / f"priors{suffix}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["region", "row", "col", "f_star", "h", "q",
                        "w_harm", "w_nmag", "w_spat", "W"])
            for i, s in enumerate(summaries):
                r, c = divmod(i, cols)
                w.writerow([i, r, c, repr(s.f_star), repr(s.h), repr(s.q),
                            repr(float(priors.w_harm[r, c])), repr(float(priors.w_nmag[r, c])),
                            repr(float(priors.w_spat[r, c])), repr(float(priors.w_combined[r, c]))])
        for name in ("w_harm", "w_nmag", "w_spat", "w_combined"):
            grid = getattr(priors, name)
            io.write_grid_csv(directory / f"{name}{suffix}.csv", grid)
            io.write_pgm(directory / f"{name}{suffix}.pgm", grid)


def cmd_extract(args) -> int:
    cfg = load_config(args)
    frames = io.read_frames(args.input, args.fps)
    fused = extract_pulse(frames, cfg)
    io.write_waveform(args.output, fused.samples, fused.fps,
                      _sidecar(fused, cfg, {"input": Path(args.input).name}))
    if args.dump_priors:
        dump_priors(args.dump_priors, fused)
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg = load_config(args)
    frames = io.read_frames(args.input, args.fps)
    out = mean_ppg(frames, RoiSpec.parse(args.roi), cfg.detrend, cfg.grid, mode=args.mode)
    io.write_waveform(args.output, out.samples, out.fps,
                      _sidecar(out, cfg, {"input": Path(args.input).name,
                                          "roi": out.diagnostics["roi"], "mode": args.mode}))
    return EXIT_OK


def _hr_or_none(samples, fps, cfg):
    try:
        return estimate_hr(samples, cfg.cardiac, fps=fps).bpm
    except (NoEstimateError, DataError):
        return None


def metrics_for(pred, truth, fps, cfg: PipelineConfig, hr_true=None) -> MetricsReport:
    rho, lag = lag_correlation(pred, truth, fps, cfg.evaluation.max_lag_s)
    return MetricsReport(
        spectral_entropy=spectral_entropy(pred, fps, cfg.spectral),
        normalized_entropy=spectral_entropy(pred, fps, cfg.spectral, normalized=True),
        pearson_rho=rho,
        best_lag_s=lag,
        hr_pred=_hr_or_none(pred, fps, cfg),
        hr_true=hr_true if hr_true is not None else _hr_or_none(truth, fps, cfg),
    )


def _evaluate_cohort(args, cfg) -> int:
    manifest_path = Path(args.manifest)
    if not manifest_path.exists():
        raise DataError(f"{manifest_path}: no such file")
    base = manifest_path.parent
    scenes = json.loads(manifest_path.read_text())["scenes"]
    rows, pairs = [], []
    for entry in scenes:
        truth, fps = io.read_waveform(base / entry["truth"][0])
        hr_true = float(entry["hr_bpm"][0])
        row = {"name": entry["name"], "hr_true": hr_true}
        if args.input:
            pred, pred_fps = io.read_waveform(Path(args.input) / f"{entry['name']}.csv")
            if not math.isclose(pred_fps, fps, rel_tol=1e-6):
                raise DataError(f"{entry['name']}: prediction fps {pred_fps} != truth fps {fps}")
            preds = {"fusion": pred}
        else:
            frames = io.read_fseq(base / entry["fseq"])
            preds = {"fusion": None, "mean": mean_ppg(frames, RoiSpec(), cfg.detrend, cfg.grid).samples}
            try:
                preds["fusion"] = extract_pulse(frames, cfg).samples
            except NoPulsatileRegionError:
                pass
        for method, pred in preds.items():
            if pred is None:
                row.update({f"{method}_{k}": "" for k in ("rho", "lag_s", "entropy", "hr_pred")})
                row[f"{method}_failed"] = 1
                continue
            m = metrics_for(pred, truth, fps, cfg, hr_true)
            row.update({f"{method}_rho": m.pearson_rho, f"{method}_lag_s": m.best_lag_s,
                        f"{method}_entropy": m.spectral_entropy,
                        f"{method}_hr_pred": "" if m.hr_pred is None else m.hr_pred,
                        f"{method}_failed": 0})
            if method == "fusion" and m.hr_pred is not None:
                pairs.append((hr_true, m.hr_pred))
        rows.append(row)

    fields = []
    for r in rows:
        fields.extend(k for k in r if k not in fields)
    out = Path(args.output) if args.output else None
    target = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.DictWriter(target, fieldnames=fields, lineterminator="\n", restval="")
        w.writeheader()
        w.writerows(rows)
    finally:
        if out:
            target.close()
    if out and len(pairs) >= 2:
        out.with_suffix(".json").write_text(
            json.dumps({"bland_altman": bland_altman(pairs).to_dict(), "n_scenes": len(rows)},
                       indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = load_config(args)
    if args.manifest:
        return _evaluate_cohort(args, cfg)
    if not (args.input and args.truth):
        raise UsageError("evaluate needs --input and --truth, or --manifest")
    pred, fps = io.read_waveform(args.input)
    truth, truth_fps = io.read_waveform(args.truth)
    if not math.isclose(fps, truth_fps, rel_tol=1e-6):
        raise DataError(f"prediction fps {fps} differs from truth fps {truth_fps}")
    report = metrics_for(pred, truth, fps, cfg)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    print(text)
    if args.output:
        Path(args.output).write_text(text + "\n")
    return EXIT_OK


def _load_grid(spec: str | None) -> dict:
    if spec is None:
        return DEFAULT_GRID
    path = Path(spec)
    text = path.read_text() if path.exists() else spec
    try:
        grid = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--grid is neither a JSON file nor JSON text: {exc}") from exc
    if not isinstance(grid, dict) or not grid:
        raise UsageError("grid must be a non-empty JSON object of lists")
    for key, values in grid.items():
        if not isinstance(values, list) or not values:
            raise UsageError(f"grid axis {key!r} must be a non-empty list")
    return grid


def cmd_tune(args) -> int:
    cfg = load_config(args)
    grid = _load_grid(args.grid)
    paths = list(args.input or [])
    if args.manifest:
        base = Path(args.manifest).parent
        paths += [base / e["fseq"] for e in json.loads(Path(args.manifest).read_text())["scenes"]]
    if not paths:
        raise UsageError("tune needs --input scene(s) or --manifest")
    scenes = [prepare_scene(io.read_frames(p, args.fps), cfg) for p in paths]
    try:
        result = grid_search(scenes, grid, cfg)
    except ValueError as exc:
        if isinstance(exc, (DataError, InvalidConfigError)):
            raise
        raise UsageError(str(exc)) from exc
    out = Path(args.output)
    keys = ["alpha_h", "alpha_q", "alpha_l", "radius", "objective", "n_valid", "excluded"]
    with open(out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for row in result.table:
            w.writerow({k: ("" if row[k] is None else repr(row[k]) if isinstance(row[k], float) else row[k])
                        for k in keys})
    out.with_suffix(".json").write_text(json.dumps(
        {"best_params": result.best_params, "objective": result.objective,
         "n_points": len(result.table), "config": cfg.to_dict()},
        indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.spec:
        data = json.loads(Path(args.spec).read_text())
        specs = [SceneSpec.from_dict(d) for d in (data if isinstance(data, list) else data["scenes"])]
    else:
        specs = default_cohort_specs(
            n=args.n_scenes, seed=args.seed, hr_range=(args.hr_min, args.hr_max),
            amplitude=args.amplitude, noise_sd=args.noise, drift=not args.no_drift,
            edges=not args.no_edges, duration_s=args.duration)
    manifest = cohort(specs, args.output)
    print(manifest)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pulsefusion", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, frames=True):
        p.add_argument("--config", help="pipeline config JSON")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override one config value (repeatable)")
        if frames:
            p.add_argument("--fps", type=float, help="frame rate for CSV frame directories")

    p = sub.add_parser("extract", help="fuse a pulse waveform from frames")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--dump-priors", metavar="DIR")
    p.add_argument("--windowed", type=float, metavar="SECONDS")
    p.add_argument("--literal-eq12", dest="fundamental_band_noise", action="store_true",
                   help="noise prior from 1 - fundamental band mass")
    common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("baseline", help="ROI spatial-mean waveform")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--roi", default="full-frame", help="row0,col0,rows,cols in region units")
    p.add_argument("--mode", choices=["absorbance", "intensity"], default="absorbance")
    common(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("evaluate", help="fidelity metrics against ground truth")
    p.add_argument("--input", help="predicted waveform CSV (or directory in cohort mode)")
    p.add_argument("--truth", help="ground-truth waveform CSV")
    p.add_argument("--manifest", help="cohort manifest.json")
    p.add_argument("--output")
    common(p, frames=False)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tune", help="grid search over prior parameters")
    p.add_argument("--input", nargs="+")
    p.add_argument("--manifest")
    p.add_argument("--grid", help="JSON file or text mapping alpha_h/alpha_q/alpha_l/radius to lists")
    p.add_argument("--output", required=True)
    p.add_argument("--windowed", type=float, metavar="SECONDS")
    p.add_argument("--literal-eq12", dest="fundamental_band_noise", action="store_true",
                   help="noise prior from 1 - fundamental band mass")
    common(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("--output", required=True)
    p.add_argument("--spec", help="JSON list of scene specs")
    p.add_argument("--n-scenes", type=int, default=23)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hr-min", type=float, default=48.0)
    p.add_argument("--hr-max", type=float, default=100.0)
    p.add_argument("--amplitude", type=float, default=0.01)
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--duration", type=float, default=20.0)
    p.add_argument("--no-drift", action="store_true")
    p.add_argument("--no-edges", action="store_true")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, InvalidConfigError) as exc:
        print(f"pulsefusion: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoPulsatileRegionError as exc:
        print(f"pulsefusion: no pulsatile region: {exc}", file=sys.stderr)
        return EXIT_NO_SIGNAL
    except (DataError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"pulsefusion: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
