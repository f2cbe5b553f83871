"""Command line interface.

Subcommands map onto the pipeline stages: ``extract`` (bitstream ->
features), ``predict`` (features -> score), ``calibrate`` (dataset ->
parameters), ``evaluate`` (dataset -> protocol reports), ``subjective``
(raw ratings -> MOS) and ``tc`` (pristine cloud -> reference complexity).

Exit codes: 0 success, 2 usage, 3 input error (missing/unreadable file),
4 parse error (malformed stream or document), 5 config error (bad
parameters or flags), 6 numeric failure (degenerate fit or statistic).
Reruns with identical inputs and seed produce byte-identical outputs;
files are written atomically (temp file + rename).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .bitstream import extract_features, load_profile, load_sidecar
from .calibration import CalibrationOptions, Dataset, calibrate_full
from .evaluation import (
    ablation,
    loocv,
    random_trials,
    significance_from_scores,
)
from .exceptions import (
    BitstreamError,
    CalibrationError,
    DivisionByZeroMos,
    EmptyTestSet,
    InconsistentTbpp,
    LengthMismatch,
    MismatchedStimuli,
    MissingField,
    NonPositivePointCount,
    StreamPcqError,
    TooFewObservers,
    TooFewSamples,
    ZeroVariance,
    DegenerateRange,
    EmptyStimulus,
)
from .model import ModelParams, clamp_mos, default_params, predict
from .pointcloud import compute_reference_tc, read_ply
from .subjective import RatingMatrix, compute_mos, rescale_to_range, screen_observers, zscore

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_PARSE = 4
EXIT_CONFIG = 5
EXIT_NUMERIC = 6

DEFAULT_SEED = 20240601

_PARSE_ERRORS = (BitstreamError, MissingField, InconsistentTbpp)
_NUMERIC_ERRORS = (
    CalibrationError,
    ZeroVariance,
    DivisionByZeroMos,
    TooFewObservers,
    TooFewSamples,
    LengthMismatch,
    MismatchedStimuli,
    EmptyTestSet,
    DegenerateRange,
    EmptyStimulus,
)


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        _atomic_write(Path(out), text)
    else:
        sys.stdout.write(text)


def _document(payload: dict, params_source: str | None = None) -> dict:
    doc = {"tool": "streampcq", "version": __version__}
    if params_source:
        doc["params_source"] = params_source
    doc.update(payload)
    return doc


def _load_params(path: str | None) -> tuple[ModelParams, str]:
    if path is None:
        return default_params(), "packaged defaults"
    try:
        return ModelParams.from_json(path), str(path)
    except FileNotFoundError as exc:
        # a bad --params value is a configuration problem, not payload input
        raise ValueError(f"params file not found: {exc.filename}") from exc


def _read_binary(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _resolve_point_count(args) -> int:
    if args.point_count is not None:
        return args.point_count
    if args.point_count_file:
        with open(args.point_count_file, encoding="utf-8") as fh:
            doc = json.load(fh)
        if "point_count" not in doc:
            raise MissingField(f"{args.point_count_file}: no point_count key")
        return int(doc["point_count"])
    raise NonPositivePointCount(
        "supply --point-count or --point-count-file for bitstream input"
    )


# --- subcommands ---

def cmd_extract(args) -> int:
    profile = load_profile(args.profile)
    fv = extract_features(_read_binary(args.bitstream), profile, _resolve_point_count(args))
    _emit(_document({"profile": profile.name, **fv.to_dict()}), args.out)
    return EXIT_OK


def _predict_one(source: Path, params: ModelParams, args) -> dict:
    if source.suffix == ".json":
        fv = load_sidecar(source)
    else:
        profile = load_profile(args.profile)
        fv = extract_features(_read_binary(str(source)), profile, _resolve_point_count(args))
    pred = predict(fv, params)
    row = {**fv.to_dict(), **pred.to_dict()}
    if args.clamp:
        row["mos_est"] = float(clamp_mos(row["mos_est"]))
    return row


def cmd_predict(args) -> int:
    params, source = _load_params(args.params)
    target = Path(args.input)
    if target.is_dir():
        sidecars = sorted(target.glob("*.json"))
        if not sidecars:
            raise FileNotFoundError(f"{target}: no sidecar documents found")
        rows = []
        for sidecar in sidecars:
            row = _predict_one(sidecar, params, args)
            row["input"] = sidecar.name
            rows.append(row)
        columns = ["input", "content_id", "tqp", "tbpp", "tnsl",
                   "tc_est", "mos_texture", "attenuation", "mos_est"]
        lines = [",".join(columns)]
        for row in rows:
            lines.append(",".join(str(row.get(c, "")) for c in columns))
        text = "\n".join(lines) + "\n"
        if args.out:
            _atomic_write(Path(args.out), text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    _emit(_document(_predict_one(target, params, args), source), args.out)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    dataset = Dataset.from_csv(args.dataset)
    options = CalibrationOptions(tc_source=args.tc_source, b_mode=args.b_mode)
    params, diagnostics = calibrate_full(dataset, options)
    out = Path(args.out or "params.json")
    _atomic_write(out, json.dumps(
        _document(params.to_dict(), "calibrated"), indent=2, sort_keys=True) + "\n")
    diag_path = args.diagnostics or f"{out.with_suffix('')}.diagnostics.json"
    _atomic_write(Path(diag_path), json.dumps(
        _document(diagnostics.to_dict()), indent=2, sort_keys=True, default=str) + "\n")
    print(f"wrote {out} and {diag_path}")
    return EXIT_OK


def _parse_contents(spec: str) -> list[str]:
    if spec.startswith("@"):
        return [l.strip() for l in Path(spec[1:]).read_text(encoding="utf-8").splitlines() if l.strip()]
    return [c.strip() for c in spec.split(",") if c.strip()]


def cmd_evaluate(args) -> int:
    options = CalibrationOptions(tc_source=args.tc_source, b_mode=args.b_mode)
    if args.mode == "significance":
        if not args.scores or not args.mos:
            raise ValueError("significance mode needs --scores and --mos")
        scores_by_model, mos = _load_model_scores(args.scores, args.mos)
        matrix = significance_from_scores(scores_by_model, mos, args.confidence)
        if args.out:
            matrix.to_csv(args.out)
        print(matrix.render_text())
        return EXIT_OK

    if not args.dataset:
        raise ValueError(f"mode {args.mode!r} needs a dataset CSV argument")
    dataset = Dataset.from_csv(args.dataset)
    if args.mode == "loocv":
        report = loocv(dataset, options=options)
    elif args.mode == "random":
        print(f"seed: {args.seed}")
        report = random_trials(
            dataset, n_trials=args.trials, train_fraction=args.train_fraction,
            seed=args.seed, options=options,
        )
    elif args.mode == "ablation":
        if not args.train_contents:
            raise ValueError("ablation mode needs --train-contents")
        train = _parse_contents(args.train_contents)
        test = [c for c in dataset.contents() if c not in train]
        report = ablation(dataset, train, test, options=options)
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(f"unknown mode {args.mode!r}")

    out = Path(args.out or f"report_{args.mode}.csv")
    report.to_csv(out)
    mean = report.mean()
    print(f"{args.mode}: {len(report.rows)} rows -> {out}")
    print(f"mean plcc {mean[0]:.4f}  srcc {mean[1]:.4f}  rmse {mean[2]:.4f}")
    return EXIT_OK


def _load_model_scores(scores_path: str, mos_path: str):
    mos_by_stimulus: dict[str, float] = {}
    with open(mos_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            mos_by_stimulus[row["stimulus_id"]] = float(row["mos"])
    per_model: dict[str, dict[str, float]] = {}
    with open(scores_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            per_model.setdefault(row["model_id"], {})[row["stimulus_id"]] = float(row["score"])
    stimuli = sorted(mos_by_stimulus)
    scores_by_model = {}
    for model, scores in sorted(per_model.items()):
        missing = [s for s in stimuli if s not in scores]
        if missing:
            raise MismatchedStimuli(
                f"model {model!r} lacks scores for {len(missing)} stimuli (e.g. {missing[:3]})"
            )
        scores_by_model[model] = np.array([scores[s] for s in stimuli])
    mos = np.array([mos_by_stimulus[s] for s in stimuli])
    return scores_by_model, mos


def cmd_subjective(args) -> int:
    matrix = RatingMatrix.from_csv(args.ratings)
    matrix = zscore(matrix, axis=args.axis)
    rejected: list[str] = []
    if not args.no_screen:
        matrix, rejected = screen_observers(matrix)
    matrix = rescale_to_range(matrix, args.lo, args.hi)
    table = compute_mos(matrix)
    out = Path(args.out or "mos.csv")
    table.to_csv(out)
    print(f"wrote {out} ({len(table.rows)} stimuli, rejected observers: {rejected or 'none'})")
    return EXIT_OK


def cmd_tc(args) -> int:
    positions, rgb = read_ply(args.cloud)
    tc = compute_reference_tc(rgb, positions, k=args.knn)
    _emit(_document({"tc_ref": tc, "n_points": len(positions), "k": args.knn}), args.out)
    return EXIT_OK


# --- parser wiring ---

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streampcq",
        description="Bitstream-layer quality assessment for trisoup-lifting "
                    "coded point clouds",
        epilog="exit codes: 0 ok, 2 usage, 3 input, 4 parse, 5 config, 6 numeric",
    )
    parser.add_argument("--version", action="version", version=f"streampcq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="parse a bitstream into a feature sidecar")
    p.add_argument("bitstream")
    p.add_argument("--profile", default="tmc13-v23", help="bundled profile name or JSON path")
    p.add_argument("--point-count", type=int, default=None)
    p.add_argument("--point-count-file", default=None, help="JSON document with a point_count key")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("predict", help="score a sidecar, bitstream, or directory of sidecars")
    p.add_argument("input")
    p.add_argument("--params", default=None, help="parameter JSON (default: packaged constants)")
    p.add_argument("--profile", default="tmc13-v23")
    p.add_argument("--point-count", type=int, default=None)
    p.add_argument("--point-count-file", default=None)
    p.add_argument("--clamp", action="store_true", help="clip scores into [1, 100]")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("calibrate", help="fit model constants from a dataset CSV")
    p.add_argument("dataset")
    p.add_argument("--tc-source", choices=["reference", "estimated"], default="reference")
    p.add_argument("--b-mode", choices=["intercept", "min_mos"], default="intercept")
    p.add_argument("--out", default=None)
    p.add_argument("--diagnostics", default=None)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="run an evaluation protocol over a dataset CSV")
    p.add_argument("dataset", nargs="?", default=None)
    p.add_argument("--mode", choices=["loocv", "random", "ablation", "significance"],
                   required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--train-contents", default=None,
                   help="comma-separated list or @file, one content per line")
    p.add_argument("--scores", default=None, help="per-model score CSV (significance)")
    p.add_argument("--mos", default=None, help="MOS CSV (significance)")
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--tc-source", choices=["reference", "estimated"], default="reference")
    p.add_argument("--b-mode", choices=["intercept", "min_mos"], default="intercept")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("subjective", help="raw ratings CSV -> screened, rescaled MOS CSV")
    p.add_argument("ratings")
    p.add_argument("--axis", choices=["observer", "stimulus"], default="observer")
    p.add_argument("--no-screen", action="store_true", help="skip observer screening")
    p.add_argument("--lo", type=float, default=1.0)
    p.add_argument("--hi", type=float, default=100.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_subjective)

    p = sub.add_parser("tc", help="reference texture complexity of an ASCII PLY cloud")
    p.add_argument("cloud")
    p.add_argument("--knn", type=int, default=16, help="neighborhood size")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_tc)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except _PARSE_ERRORS as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except _NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, NonPositivePointCount, KeyError, json.JSONDecodeError, StreamPcqError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
