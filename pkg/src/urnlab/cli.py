"""Command line front end.

Subcommands take a JSON config describing the urn and run the pipeline at
the requested depth:

    classify      structure class only
    predict       structure class plus the predicted limit laws
    oracle-check  exact small-n identity checks against the predictions
    simulate      ensemble run with sample artifacts, no verdicts
    verify        ensemble run plus pass/fail verdicts
    all           oracle-check followed by verify

Exit codes: 0 success, 1 a verification or oracle check failed,
2 the replacement structure is outside the supported families,
3 bad config or usage.

Config schema (JSON object; unknown keys are rejected):

    replacement_matrix    required, K x K rows
    initial_composition   required, length K
    horizon               draws per trajectory (default 100000)
    ensemble              number of trajectories (default 10000)
    seed                  RNG seed (default 12345)
    checkpoints           "geometric" or an increasing list ending at horizon
    predictions           "all" or a list of track labels
    output_dir            artifact directory (default "urnlab-out")
    max_draws             resource cap on horizon * ensemble (default 4e9)
    variance_scale        multiplies predicted variances; diagnostic only

Artifacts are deterministic: the same config writes byte-identical files
(no timestamps or runtimes).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .core import ReplacementSpec, new_spec
from .laws import LawPrediction, LimitKind, pi_n, predict
from .oracle import (
    MAX_ENUM_STEPS,
    MAX_TREE_STEPS,
    compensated_martingale_check,
    exact_conditional_variance_check,
    exact_mean_linear,
)
from .spectral import Family, StructureClass, classify
from .verify import (
    DEFAULT_MAX_DRAWS,
    U_FLOOR,
    EnsembleReport,
    ReportVerdict,
    VerdictPolicy,
    evaluate_report,
    run_ensemble,
)

_CONFIG_DEFAULTS = {
    "replacement_matrix": None,
    "initial_composition": None,
    "horizon": 100_000,
    "ensemble": 10_000,
    "seed": 12345,
    "checkpoints": "geometric",
    "predictions": "all",
    "output_dir": "urnlab-out",
    "max_draws": DEFAULT_MAX_DRAWS,
    "variance_scale": 1.0,
}

_ORACLE_TOL = 1e-9
_ORACLE_MEAN_STEPS = 8
_ORACLE_VARIANCE_STEPS = 6
_ORACLE_TREE_STEPS = 6


class ConfigError(Exception):
    """Bad config file or command line usage (exit code 3)."""


class UnsupportedStructure(Exception):
    """Replacement structure outside the covered families (exit code 2)."""


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    for key in raw:
        if key not in _CONFIG_DEFAULTS:
            raise ConfigError(f"config.{key}: unknown field")
    cfg = dict(_CONFIG_DEFAULTS)
    cfg.update(raw)
    for key in ("replacement_matrix", "initial_composition"):
        if cfg[key] is None:
            raise ConfigError(f"config.{key}: required field is missing")
    for key in ("horizon", "ensemble", "max_draws"):
        if not isinstance(cfg[key], int) or isinstance(cfg[key], bool) or cfg[key] <= 0:
            raise ConfigError(f"config.{key}: must be a positive integer")
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool) or cfg["seed"] < 0:
        raise ConfigError("config.seed: must be a nonnegative integer")
    if not isinstance(cfg["variance_scale"], (int, float)) or cfg["variance_scale"] <= 0:
        raise ConfigError("config.variance_scale: must be a positive number")
    cps = cfg["checkpoints"]
    if cps != "geometric":
        if not isinstance(cps, list) or not cps or any(
            not isinstance(v, int) or isinstance(v, bool) for v in cps
        ):
            raise ConfigError(
                'config.checkpoints: must be "geometric" or a list of integers'
            )
        if any(b <= a for a, b in zip(cps, cps[1:])) or cps[0] < 0:
            raise ConfigError("config.checkpoints: must be strictly increasing")
        if cps[-1] != cfg["horizon"]:
            raise ConfigError("config.checkpoints: last entry must equal the horizon")
    preds = cfg["predictions"]
    if preds != "all" and (
        not isinstance(preds, list) or any(not isinstance(v, str) for v in preds)
    ):
        raise ConfigError('config.predictions: must be "all" or a list of labels')
    if not isinstance(cfg["output_dir"], str):
        raise ConfigError("config.output_dir: must be a string path")
    return cfg


def _build_spec(cfg: dict) -> ReplacementSpec:
    try:
        return new_spec(cfg["replacement_matrix"], cfg["initial_composition"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _classify(spec: ReplacementSpec) -> StructureClass:
    try:
        klass = classify(spec)
    except ValueError as exc:
        raise UnsupportedStructure(str(exc)) from exc
    if not klass.supported:
        reasons = "; ".join(klass.warnings) or "no matching family"
        raise UnsupportedStructure(reasons)
    return klass


def _fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _classification_lines(klass: StructureClass) -> list[str]:
    lines = [f"family: {klass.family.value}"]
    lines.append(f"colors: {klass.spec.colors}")
    lines.append(f"permutation (canonical -> original): {klass.permutation}")
    if klass.scale is not None:
        lines.append(f"sub-block row mass s = {_fmt(klass.scale)}")
    if klass.lam is not None:
        lines.append(f"sub-block secondary eigenvalue = {_fmt(klass.lam)}")
    if klass.beta is not None:
        lines.append(f"dominant-track eigenvalue = {_fmt(klass.beta)}")
    if klass.stationary_whole is not None:
        lines.append(f"stationary (whole matrix): {np.round(klass.stationary_whole, 12).tolist()}")
    if klass.stationary_sub is not None:
        lines.append(f"stationary (sub-block): {np.round(klass.stationary_sub, 12).tolist()}")
    if klass.stationary_dom is not None:
        lines.append(f"stationary (dominant block): {np.round(klass.stationary_dom, 12).tolist()}")
    for label, vec, eig in klass.vectors:
        eig_text = f" (eigenvalue {_fmt(eig)})" if eig is not None else ""
        lines.append(f"track {label}: {np.round(vec, 12).tolist()}{eig_text}")
    for w in klass.warnings:
        lines.append(f"warning: {w}")
    return lines


def _prediction_lines(rows: tuple[LawPrediction, ...]) -> list[str]:
    lines = ["predicted limit laws:"]
    for i, row in enumerate(rows):
        parts = [f"[{i}] {row.label}: {row.limit_kind.value}",
                 f"normalization {row.normalization}"]
        if row.variance is not None:
            parts.append(f"variance {_fmt(row.variance)}")
        if row.mixture_coefficient is not None:
            parts.append(
                f"coefficient {_fmt(row.mixture_coefficient)} x {row.mixing_label}"
            )
        if row.martingale_eigenvalue is not None:
            parts.append(f"mean eigenvalue {_fmt(row.martingale_eigenvalue)}")
        if row.limit_mean is not None:
            parts.append(f"limit mean {_fmt(row.limit_mean)}")
        if row.limit_variance is not None:
            parts.append(f"limit variance {_fmt(row.limit_variance)}")
        if row.positive_limit:
            parts.append("positive limit")
        if row.co_limit_label is not None:
            parts.append(f"shares its limit with {row.co_limit_label}")
        lines.append("  " + ", ".join(parts))
        if row.notes:
            lines.append(f"      note: {row.notes}")
    return lines


def _run_oracle_checks(spec: ReplacementSpec, klass: StructureClass) -> tuple[list[str], bool]:
    """Small-n exact identity checks; returns (lines, all_passed)."""
    rows = predict(klass)
    lines = []
    ok = True
    n_mean = min(_ORACLE_MEAN_STEPS, MAX_ENUM_STEPS)
    for row in rows:
        a = row.martingale_eigenvalue
        if a is None:
            continue
        exact = exact_mean_linear(spec, row.vector, a, n_mean)
        predicted = pi_n(a, n_mean) * row.initial_value
        gap = abs(exact - predicted)
        passed = gap <= _ORACLE_TOL
        ok &= passed
        lines.append(
            f"{'PASS' if passed else 'FAIL'} mean-identity {row.label}: "
            f"|{exact:.12g} - {predicted:.12g}| = {gap:.3g} at n = {n_mean}"
        )
    n_var = min(_ORACLE_VARIANCE_STEPS, MAX_ENUM_STEPS)
    try:
        gap = exact_conditional_variance_check(spec, klass, n_var)
        passed = gap <= _ORACLE_TOL
        ok &= passed
        lines.append(
            f"{'PASS' if passed else 'FAIL'} conditional-variance: "
            f"max residual {gap:.3g} over levels 0..{n_var - 1}"
        )
    except ValueError as exc:
        lines.append(f"SKIP conditional-variance: {exc}")
    if klass.family in (Family.THREE_TWO_DOMINANT_JORDAN, Family.FOUR_BLOCK_JORDAN):
        n_tree = min(_ORACLE_TREE_STEPS, MAX_TREE_STEPS)
        gap = compensated_martingale_check(spec, klass, n_tree)
        passed = gap <= _ORACLE_TOL
        ok &= passed
        lines.append(
            f"{'PASS' if passed else 'FAIL'} compensated-martingale: "
            f"max residual {gap:.3g} over levels 0..{n_tree - 1}"
        )
    return lines, ok


def _csv_name(index: int, label: str) -> str:
    safe = "".join(c if c.isalnum() else "-" for c in label)
    return f"samples_{index}_{safe}.csv"


def _float_cell(x: float) -> str:
    return repr(float(x))


def _write_sample_csvs(report: EnsembleReport, out: Path) -> list[str]:
    written = []
    cps = report.checkpoints
    label_to_col = {lab: i for i, lab in enumerate(report.track_labels)}
    for i, outcome in enumerate(report.outcomes):
        row = outcome.prediction
        col = label_to_col[row.label]
        raw = report.track_values[:, :, col]
        with np.errstate(invalid="ignore", divide="ignore"):
            norm = row.normalization.at(cps)
            normalized = raw / norm[None, :]
        z_at_terminal = _terminal_z(report, outcome)
        u_hats = report.u_hats
        mixture = row.limit_kind is LimitKind.NORMAL_MIXTURE
        name = _csv_name(i, row.label)
        path = out / name
        with path.open("w") as fh:
            fh.write("trajectory_id,checkpoint_n,raw_value,normalized_value,z_value,U_hat\n")
            last = cps.size - 1
            for t in range(report.ensemble):
                for c in range(cps.size):
                    cells = [
                        str(t),
                        str(int(cps[c])),
                        _float_cell(raw[t, c]),
                        _float_cell(normalized[t, c]) if np.isfinite(norm[c]) else "",
                        "",
                        "",
                    ]
                    if c == last:
                        if z_at_terminal is not None and np.isfinite(z_at_terminal[t]):
                            cells[4] = _float_cell(z_at_terminal[t])
                        if mixture and u_hats is not None:
                            cells[5] = _float_cell(u_hats[t])
                    fh.write(",".join(cells) + "\n")
        written.append(name)
    return written


def _terminal_z(report: EnsembleReport, outcome) -> np.ndarray | None:
    """Per-trajectory terminal z values aligned with trajectory ids.

    Mixture rows re-expand the studentized sample over the kept mask so
    dropped trajectories show an empty cell instead of a shifted value.
    """
    row = outcome.prediction
    if outcome.z_sample is None:
        return None
    if row.limit_kind is LimitKind.NORMAL:
        return outcome.z_sample
    if row.limit_kind is LimitKind.NORMAL_MIXTURE and report.u_hats is not None:
        full = np.full(report.ensemble, np.nan)
        keep = report.u_hats >= U_FLOOR
        full[keep] = outcome.z_sample
        return full
    return None


def _outcome_lines(report: EnsembleReport) -> list[str]:
    lines = [
        f"ensemble: {report.ensemble} trajectories, horizon {report.horizon}, "
        f"seed {report.seed}",
        f"checkpoints: {report.checkpoints.tolist()}",
        f"max mass drift: {report.max_mass_drift:.3g}",
    ]
    if report.variance_scale != 1.0:
        lines.append(
            f"variance scale (diagnostic): {_fmt(report.variance_scale)}"
        )
    for outcome in report.outcomes:
        row = outcome.prediction
        lines.append(f"track {row.label}:")
        lines.append(
            f"  terminal sample mean {_fmt(outcome.sample_mean)}"
            + (
                f", expected {_fmt(outcome.expected_mean)}"
                if outcome.expected_mean is not None
                else ""
            )
        )
        lines.append(f"  terminal sample variance {_fmt(outcome.sample_variance)}")
        if outcome.ks_stat is not None:
            lines.append(
                f"  KS vs standard normal: D = {outcome.ks_stat:.5f}, "
                f"p = {outcome.ks_pvalue:.4g}"
                + (f", dropped {outcome.dropped}" if outcome.dropped else "")
            )
        if outcome.median_tail_fluctuation is not None:
            lines.append(
                f"  median tail fluctuation {_fmt(outcome.median_tail_fluctuation)}"
                f" (median |terminal| {_fmt(outcome.median_terminal_abs)})"
            )
        if outcome.all_positive is not None:
            lines.append(f"  all terminal values positive: {outcome.all_positive}")
        if outcome.constant_deviation is not None:
            lines.append(f"  max deviation from constant: {outcome.constant_deviation:.3g}")
        if outcome.colimit_gap_medians is not None:
            finite = np.isfinite(outcome.colimit_gap_medians)
            pairs = ", ".join(
                f"n={int(n)}: {g:.4g}"
                for n, g in zip(
                    report.checkpoints[finite], outcome.colimit_gap_medians[finite]
                )
            )
            lines.append(f"  median gap to shared limit: {pairs}")
    return lines


def _verdict_lines(verdict: ReportVerdict) -> list[str]:
    lines = []
    for row in verdict.rows:
        for check in row.checks:
            status = "PASS" if check.passed else "FAIL"
            lines.append(f"{status} {row.label} {check.name}: {check.detail}")
    lines.append(f"OVERALL {'PASS' if verdict.passed else 'FAIL'}")
    return lines


def _summary_payload(
    klass: StructureClass,
    rows: tuple[LawPrediction, ...],
    report: EnsembleReport | None,
    verdict: ReportVerdict | None,
    oracle_lines: list[str] | None,
    oracle_ok: bool | None,
    samples: list[str] | None,
) -> dict:
    payload: dict = {
        "family": klass.family.value,
        "colors": klass.spec.colors,
        "permutation": list(klass.permutation),
        "scale": klass.scale,
        "secondary_eigenvalue": klass.lam,
        "dominant_eigenvalue": klass.beta,
        "warnings": list(klass.warnings),
        "predictions": [
            {
                "label": row.label,
                "vector": np.round(row.vector, 12).tolist(),
                "limit_kind": row.limit_kind.value,
                "normalization": str(row.normalization),
                "variance": row.variance,
                "mixture_coefficient": row.mixture_coefficient,
                "mixing_label": row.mixing_label,
                "initial_value": row.initial_value,
                "martingale_eigenvalue": row.martingale_eigenvalue,
                "limit_mean": row.limit_mean,
                "limit_variance": row.limit_variance,
                "positive_limit": row.positive_limit,
                "co_limit_label": row.co_limit_label,
                "notes": row.notes,
            }
            for row in rows
        ],
    }
    if report is not None:
        payload["ensemble"] = {
            "horizon": report.horizon,
            "trajectories": report.ensemble,
            "seed": report.seed,
            "variance_scale": report.variance_scale,
            "checkpoints": report.checkpoints.tolist(),
            "max_mass_drift": report.max_mass_drift,
            "outcomes": [
                {
                    "label": o.prediction.label,
                    "sample_mean": o.sample_mean,
                    "sample_variance": o.sample_variance,
                    "expected_mean": o.expected_mean,
                    "mean_se": o.mean_se,
                    "ks_stat": o.ks_stat,
                    "ks_pvalue": o.ks_pvalue,
                    "dropped": o.dropped,
                    "median_tail_fluctuation": o.median_tail_fluctuation,
                    "median_terminal_abs": o.median_terminal_abs,
                    "all_positive": o.all_positive,
                    "constant_deviation": o.constant_deviation,
                }
                for o in report.outcomes
            ],
        }
    if verdict is not None:
        payload["verdicts"] = {
            "overall": verdict.passed,
            "rows": [
                {
                    "label": row.label,
                    "passed": row.passed,
                    "checks": [
                        {"name": c.name, "passed": c.passed, "detail": c.detail}
                        for c in row.checks
                    ],
                }
                for row in verdict.rows
            ],
        }
    if oracle_lines is not None:
        payload["oracle"] = {"passed": oracle_ok, "checks": oracle_lines}
    if samples is not None:
        payload["samples"] = samples
    return payload


def _select_predictions(cfg: dict, rows: tuple[LawPrediction, ...]):
    if cfg["predictions"] == "all":
        return None
    known = {r.label for r in rows}
    for label in cfg["predictions"]:
        if label not in known:
            raise ConfigError(
                f"config.predictions: unknown label {label!r}; "
                f"available: {sorted(known)}"
            )
    return list(cfg["predictions"])


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="urnlab",
        description="classify, predict, and verify multicolor urn limit laws",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("classify", "print the structure class"),
        ("predict", "print the structure class and predicted limit laws"),
        ("oracle-check", "run exact small-n identity checks"),
        ("simulate", "run an ensemble and write sample artifacts"),
        ("verify", "run an ensemble and write verdicts"),
        ("all", "oracle-check plus verify"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", help="override config.output_dir")
        p.add_argument("--seed", type=int, help="override config.seed")
        p.add_argument("--horizon", type=int, help="override config.horizon")
        p.add_argument("--ensemble", type=int, help="override config.ensemble")
        p.add_argument("--cap", type=int, help="override config.max_draws")
    return parser.parse_args(argv)


def _apply_overrides(cfg: dict, args) -> dict:
    if args.out is not None:
        cfg["output_dir"] = args.out
    for attr, key in (
        ("seed", "seed"),
        ("horizon", "horizon"),
        ("ensemble", "ensemble"),
        ("cap", "max_draws"),
    ):
        value = getattr(args, attr)
        if value is not None:
            if value <= 0 and key != "seed":
                raise ConfigError(f"--{attr} must be positive")
            if value < 0:
                raise ConfigError(f"--{attr} must be nonnegative")
            cfg[key] = value
    if cfg["checkpoints"] != "geometric" and cfg["checkpoints"][-1] != cfg["horizon"]:
        raise ConfigError("config.checkpoints: last entry must equal the horizon")
    return cfg


def _ensure_out(cfg: dict) -> Path:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_text(path: Path, lines: list[str]) -> None:
    path.write_text("\n".join(lines) + "\n")


def _json_default(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _write_summary(path: Path, payload: dict) -> None:
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"
    )


def _dispatch(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    spec = _build_spec(cfg)
    if args.command == "classify":
        try:
            klass = classify(spec)
        except ValueError as exc:
            raise UnsupportedStructure(str(exc)) from exc
        for line in _classification_lines(klass):
            print(line)
        return 2 if not klass.supported else 0
    klass = _classify(spec)
    rows = predict(klass)
    if args.command == "predict":
        for line in _classification_lines(klass) + _prediction_lines(rows):
            print(line)
        return 0
    if args.command == "oracle-check":
        lines, ok = _run_oracle_checks(spec, klass)
        for line in lines:
            print(line)
        print(f"OVERALL {'PASS' if ok else 'FAIL'}")
        return 0 if ok else 1

    oracle_lines = None
    oracle_ok = None
    if args.command == "all":
        oracle_lines, oracle_ok = _run_oracle_checks(spec, klass)

    selection = _select_predictions(cfg, rows)
    try:
        report = run_ensemble(
            spec,
            klass,
            predictions=selection,
            horizon=cfg["horizon"],
            ensemble=cfg["ensemble"],
            seed=cfg["seed"],
            checkpoints=None if cfg["checkpoints"] == "geometric" else cfg["checkpoints"],
            max_draws=cfg["max_draws"],
            variance_scale=cfg["variance_scale"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    verdict = None
    if args.command in ("verify", "all"):
        verdict = evaluate_report(report, VerdictPolicy())

    out = _ensure_out(cfg)
    report_lines = _classification_lines(klass) + [""] + _prediction_lines(rows)
    report_lines += [""] + _outcome_lines(report)
    if oracle_lines is not None:
        report_lines += ["", "exact small-n checks:"] + oracle_lines
    _write_text(out / "report.txt", report_lines)
    samples = _write_sample_csvs(report, out)
    if verdict is not None:
        verdict_lines = _verdict_lines(verdict)
        if oracle_lines is not None:
            verdict_lines = (
                [line for line in oracle_lines]
                + verdict_lines[:-1]
                + [
                    "OVERALL "
                    + ("PASS" if verdict.passed and oracle_ok else "FAIL")
                ]
            )
        _write_text(out / "verdicts.txt", verdict_lines)
        for line in verdict_lines:
            print(line)
    payload = _summary_payload(
        klass, rows, report, verdict, oracle_lines, oracle_ok, samples
    )
    _write_summary(out / "summary.json", payload)
    print(f"artifacts written to {out}")
    if args.command == "simulate":
        return 0
    passed = verdict.passed and (oracle_ok is not False)
    return 0 if passed else 1


def main(argv=None) -> int:
    try:
        args = _parse_args(argv)
    except SystemExit as exc:
        return 3 if exc.code not in (0, None) else 0
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except UnsupportedStructure as exc:
        print(f"unsupported structure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
