"""Command-line surface: simulate, denoise, evaluate, reproduce-case,
trace-plot-data.

Every tuning flag can also be supplied through an environment variable
with the ``HSDIP_`` prefix (``--lambda-over-n`` -> ``HSDIP_LAMBDA_OVER_N``);
precedence is flag > environment > config file > built-in default.

Exit codes: 0 success, 2 usage, 3 I/O or format error, 4 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import hsio, noisegen, pipeline, quality
from .hsio import FormatError, RunFile
from .ndtensor import Rng, derive_seed
from .pipeline import CASE_LAMBDA_OVER_N, NonFiniteLossError, RunConfig, StopConfig

ENV_PREFIX = "HSDIP_"

_ROW_FIELDS = ("case", "lambda_over_n", "iterations", "stop_reason",
               "psnr_noisy", "ssim_noisy", "sam_noisy",
               "psnr", "ssim", "sam",
               "psnr_best", "ssim_best", "sam_best")


def _env(name: str, cast):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None:
        return None
    try:
        return cast(raw)
    except ValueError as e:
        raise UsageError(f"bad value for {ENV_PREFIX}{name}: {e}") from e


class UsageError(ValueError):
    pass


def _pick(flag_value, env_name, cast, fallback):
    if flag_value is not None:
        return flag_value
    env_value = _env(env_name, cast)
    if env_value is not None:
        return env_value
    return fallback


def _require_out(args, attr, flag, env_name):
    value = _pick(getattr(args, attr), env_name, str, None)
    if value is None:
        raise UsageError(f"{flag} (or {ENV_PREFIX}{env_name}) is required")
    return value


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="master RNG seed")
    p.add_argument("--lambda-over-n", type=float, default=None,
                   help="regularization weight as a multiple of 1/N")
    p.add_argument("--alpha1", type=float, default=None, help="spatial TV weight")
    p.add_argument("--alpha2", type=float, default=None, help="spatial-spectral TV weight")
    p.add_argument("--lr", type=float, default=None, help="ADAM learning rate")
    p.add_argument("--kmax", type=int, default=None, help="iteration cap")
    p.add_argument("--relerr-tol", type=float, default=None, help="RelErr stopping tolerance")
    p.add_argument("--check-interval", type=int, default=None,
                   help="iterations between RelErr checks")
    p.add_argument("--trace-ref", default=None,
                   help="clean cube path; enables the per-iteration PSNR trace")
    p.add_argument("--config", default=None, help="JSON run file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hsdip",
                                     description="Mixed-noise removal for hyperspectral cubes "
                                                 "by fitting an untrained separable-3D network.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="corrupt a clean cube with a preset noise case")
    p.add_argument("--clean", required=True, help="clean input cube (.hsic)")
    p.add_argument("--out", default=None, help="noisy output cube (.hsic)")
    p.add_argument("--case", type=int, default=None, choices=range(1, 6),
                   help="noise case preset 1..5")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None, help="run file supplying a custom noise spec")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("denoise", help="fit the network to one noisy cube")
    p.add_argument("--in", dest="input", required=True, help="noisy input cube (.hsic)")
    p.add_argument("--out", default=None, help="denoised output cube (.hsic)")
    _add_run_flags(p)
    p.set_defaults(func=_cmd_denoise)

    p = sub.add_parser("evaluate", help="PSNR/SSIM/SAM of an estimate against a reference")
    p.add_argument("--ref", required=True, help="reference cube (.hsic)")
    p.add_argument("--est", required=True, help="estimate cube (.hsic or .npy)")
    p.add_argument("--csv", default=None, help="also write a one-row CSV here")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("reproduce-case",
                       help="simulate + denoise + evaluate one noise case end to end")
    p.add_argument("--clean", required=True, help="clean input cube (.hsic)")
    p.add_argument("--case", type=int, default=None, choices=range(1, 6))
    p.add_argument("--out-dir", default=None, help="directory for all artifacts")
    _add_run_flags(p)
    p.set_defaults(func=_cmd_reproduce_case)

    p = sub.add_parser("trace-plot-data",
                       help="merge run reports into one PSNR-vs-iteration CSV")
    p.add_argument("reports", nargs="+", help="run report JSON files")
    p.add_argument("--out", required=True, help="merged CSV path")
    p.set_defaults(func=_cmd_trace_plot_data)

    return parser


# ---------------------------------------------------------------------------
# shared resolution helpers


def _load_run_file(path) -> RunFile:
    if path is None:
        return RunFile(run=RunConfig())
    return hsio.read_run_file(path)


def _resolve_run_config(args, rf: RunFile) -> RunConfig:
    base = rf.run
    stop = StopConfig(
        rel_err_tol=_pick(args.relerr_tol, "RELERR_TOL", float, base.stop.rel_err_tol),
        max_iters=_pick(args.kmax, "KMAX", int, base.stop.max_iters),
        check_interval=_pick(args.check_interval, "CHECK_INTERVAL", int,
                             base.stop.check_interval),
    )
    return replace(
        base,
        lambda_over_n=_pick(args.lambda_over_n, "LAMBDA_OVER_N", float, base.lambda_over_n),
        alpha1=_pick(args.alpha1, "ALPHA1", float, base.alpha1),
        alpha2=_pick(args.alpha2, "ALPHA2", float, base.alpha2),
        stop=stop,
        lr=_pick(args.lr, "LR", float, base.lr),
        seed=_pick(args.seed, "SEED", int, base.seed),
    )


def _write_json(obj, path) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _read_cube_any(path) -> np.ndarray:
    if str(path).endswith(".npy"):
        return hsio.import_npy(path)
    return hsio.read_cube(path)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_simulate(args) -> int:
    rf = _load_run_file(args.config)
    case = _pick(args.case, "CASE", int, rf.case)
    seed = _pick(args.seed, "SEED", int, rf.run.seed)
    if case is not None:
        spec = noisegen.case_preset(case)
    elif rf.noise is not None:
        spec = rf.noise
    else:
        raise UsageError("simulate needs --case or a config file with a noise spec")

    out = _require_out(args, "out", "--out", "OUT")
    clean = hsio.read_cube(args.clean)
    noisy = noisegen.corrupt(clean, spec, Rng(seed))
    hsio.write_cube(noisy, out)
    sidecar = hsio.run_file_to_dict(RunFile(run=replace(rf.run, seed=seed), case=case,
                                            noise=spec if case is None else None,
                                            input=str(args.clean), output=str(out)))
    _write_json(sidecar, str(out) + ".json")
    print(f"wrote {out} (case={case}, seed={seed})", file=sys.stderr)
    return 0


def _run_denoise(noisy: np.ndarray, cfg: RunConfig, out_path: str, rf: RunFile) -> pipeline.RunReport:
    report = pipeline.run(noisy, cfg)
    hsio.write_cube(report.output, out_path)
    _write_json(report.to_json_dict(), out_path + ".report.json")
    pipeline.write_trace_csv(report, out_path + ".trace.csv")
    if report.best_output is not None:
        hsio.write_cube(report.best_output, out_path + ".best.hsic")
    materialized = RunFile(run=replace(cfg, trace_ref=None), case=rf.case, noise=rf.noise,
                           input=rf.input, output=rf.output or out_path,
                           trace_ref=rf.trace_ref)
    hsio.write_run_file(materialized, out_path + ".run.json")
    print(f"denoise: {report.iterations} iterations ({report.stop_reason}) "
          f"in {report.wall_time_s:.1f}s", file=sys.stderr)
    return report


def _cmd_denoise(args) -> int:
    rf = _load_run_file(args.config)
    cfg = _resolve_run_config(args, rf)
    trace_ref_path = _pick(args.trace_ref, "TRACE_REF", str, rf.trace_ref)
    if trace_ref_path is not None:
        cfg = replace(cfg, trace_ref=hsio.read_cube(trace_ref_path))
    out = _require_out(args, "out", "--out", "OUT")
    noisy = _read_cube_any(args.input)
    rf = RunFile(run=rf.run, case=rf.case, noise=rf.noise, input=str(args.input),
                 output=str(out), trace_ref=trace_ref_path)
    _run_denoise(noisy, cfg, str(out), rf)
    return 0


def _metrics_row(ref: np.ndarray, est: np.ndarray) -> quality.MetricsReport:
    return quality.MetricsReport.compute(ref, est)


def _cmd_evaluate(args) -> int:
    ref = hsio.read_cube(args.ref)
    est = _read_cube_any(args.est)
    report = _metrics_row(ref, est)
    print(json.dumps(report.to_json_dict(), sort_keys=True))
    if args.csv is not None:
        with open(args.csv, "w", newline="") as f:
            f.write("psnr,ssim,sam\n")
            f.write(f"{report.psnr!r},{report.ssim!r},{report.sam!r}\n")
    return 0


def _cmd_reproduce_case(args) -> int:
    rf = _load_run_file(args.config)
    case = _pick(args.case, "CASE", int, rf.case)
    if case is None:
        raise UsageError("reproduce-case needs --case")
    spec = noisegen.case_preset(case)
    master_seed = _pick(args.seed, "SEED", int, rf.run.seed)

    cfg = _resolve_run_config(args, rf)
    if args.lambda_over_n is None and _env("LAMBDA_OVER_N", float) is None:
        cfg = replace(cfg, lambda_over_n=CASE_LAMBDA_OVER_N[case])

    out_dir = Path(_require_out(args, "out_dir", "--out-dir", "OUT_DIR"))
    out_dir.mkdir(parents=True, exist_ok=True)
    clean = hsio.read_cube(args.clean)

    # the master seed splits into one stream for the noise, one for the run
    noise_seed = derive_seed(master_seed, 1)
    run_seed = derive_seed(master_seed, 2)
    noisy = noisegen.corrupt(clean, spec, Rng(noise_seed))
    noisy_path = out_dir / "noisy.hsic"
    hsio.write_cube(noisy, noisy_path)
    # recorded paths are out-dir-relative so reruns into different
    # directories emit byte-identical artifacts
    _write_json(hsio.run_file_to_dict(RunFile(run=replace(rf.run, seed=noise_seed), case=case,
                                              input=str(args.clean), output=noisy_path.name)),
                str(noisy_path) + ".json")

    cfg = replace(cfg, seed=run_seed, trace_ref=clean)
    est_path = out_dir / "denoised.hsic"
    rf_out = RunFile(run=replace(cfg, trace_ref=None), case=case, input=noisy_path.name,
                     output=est_path.name, trace_ref=str(args.clean))
    report = _run_denoise(noisy, cfg, str(est_path), rf_out)

    m_noisy = _metrics_row(clean, noisy)
    m_est = _metrics_row(clean, report.output)
    m_best = _metrics_row(clean, report.best_output)
    _write_json(m_noisy.to_json_dict(), out_dir / "metrics_noisy.json")
    _write_json(m_est.to_json_dict(), out_dir / "metrics_denoised.json")
    _write_json(m_best.to_json_dict(), out_dir / "metrics_best.json")

    row = {
        "case": case, "lambda_over_n": cfg.lambda_over_n,
        "iterations": report.iterations, "stop_reason": report.stop_reason,
        "psnr_noisy": m_noisy.psnr, "ssim_noisy": m_noisy.ssim, "sam_noisy": m_noisy.sam,
        "psnr": m_est.psnr, "ssim": m_est.ssim, "sam": m_est.sam,
        "psnr_best": m_best.psnr, "ssim_best": m_best.ssim, "sam_best": m_best.sam,
    }
    header = ",".join(_ROW_FIELDS)
    line = ",".join(repr(row[k]) if isinstance(row[k], float) else str(row[k])
                    for k in _ROW_FIELDS)
    with open(out_dir / "row.csv", "w", newline="") as f:
        f.write(header + "\n" + line + "\n")
    print(header)
    print(line)
    return 0


def _cmd_trace_plot_data(args) -> int:
    columns = []
    for path in args.reports:
        with open(path) as f:
            report = pipeline.RunReport.from_json_dict(json.load(f))
        name = Path(path).name.split(".")[0]
        columns.append((name, report.psnrs or []))
    n_rows = max((len(c) for _, c in columns), default=0)
    with open(args.out, "w", newline="") as f:
        f.write("iteration," + ",".join(name for name, _ in columns) + "\n")
        for i in range(n_rows):
            cells = [repr(col[i]) if i < len(col) else "" for _, col in columns]
            f.write(f"{i + 1}," + ",".join(cells) + "\n")
    return 0


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (FormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except NonFiniteLossError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
