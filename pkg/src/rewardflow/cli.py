"""Single entry point exposing the full pipeline as subcommands.

Every run echoes and digests its fully resolved configuration before doing
any work. A JSON config file can pre-set any flag (explicit flags win), and
all paths resolve relative to --workdir. Exit codes: 0 success, 2
validation, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import evalsuite, rewards, synthdata
from .evalsuite import emit_report, measure_rewards, scaling_curve, sweep_reward_weight
from .model import Dims, Mode, load_checkpoint, save_checkpoint
from .rewards import BinCalibration, DEFAULT_BINS
from .sample import DEFAULT_ODE_STEPS, DEFAULT_OMEGA, GuidanceSpec, sample_points
from .train import MetricLog, TrainConfig, convergence_speedup, train

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

_PATH_ARGS = {"out", "inp", "cal", "data", "ckpt", "log", "baseline_log",
              "candidate_log", "points_csv", "config"}


class CliError(Exception):
    """User-input problem; reported with exit code 2."""


def _target_vector(text: str, n: int = rewards.N_REWARDS) -> tuple[float, ...]:
    parts = text.split(",")
    if len(parts) != n:
        raise CliError(
            f"target must be {n} comma-separated reals in [0,1], got {text!r}"
        )
    try:
        values = tuple(float(p) for p in parts)
    except ValueError:
        raise CliError(
            f"target must be {n} comma-separated reals in [0,1], got {text!r}"
        ) from None
    if any(not 0.0 <= v <= 1.0 for v in values):
        raise CliError(f"target components must lie in [0,1], got {text!r}")
    return values


def _dims(text: str) -> Dims:
    try:
        d_sin, d, h, layers = (int(p) for p in text.split(","))
        return Dims(d_sin=d_sin, d=d, h=h, layers=layers)
    except (ValueError, TypeError) as exc:
        raise CliError(f"dims must be 'd_sin,d,h,layers', got {text!r}: {exc}") from None


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _echo_config(args: argparse.Namespace) -> None:
    doc = {k: str(v) if isinstance(v, Path) else v
           for k, v in sorted(vars(args).items()) if k != "func"}
    payload = json.dumps(doc, sort_keys=True, default=str)
    digest = hashlib.sha256(payload.encode()).hexdigest()
    print(f"config: {payload}")
    print(f"config_digest: {digest[:16]}")


def _load_scored(path) -> tuple[dict, list]:
    header, records = synthdata.load_dataset(path)
    if header["kind"] != "scored":
        raise CliError(f"{path}: expected a scored dataset, found kind={header['kind']!r}")
    return header, records


# --- subcommand implementations --------------------------------------------


def cmd_gen(args) -> int:
    records = synthdata.generate_dataset(args.n, args.c, args.seed)
    synthdata.save_dataset(records, args.out, n_conditions=args.c)
    print(f"gen: wrote {len(records)} records to {args.out} "
          f"(sha256 {_file_digest(args.out)[:16]})")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    header, records = synthdata.load_dataset(args.inp)
    cal = synthdata.build_calibration(
        records, bins=args.bins, subset=args.subset,
        n_conditions=header["n_conditions"],
    )
    cal.save(args.out)
    scores = synthdata.calibration_scores(records, args.subset, header["n_conditions"])
    assigned = rewards.assign_bins_batch(cal, scores)
    print(f"calibrate: B={cal.bins} from {cal.calibration_size} samples -> {args.out}")
    for j, name in enumerate(cal.reward_names):
        pops = np.bincount(assigned[:, j], minlength=cal.bins).tolist()
        print(f"  {name}: populations {pops}")
    return EXIT_OK


def cmd_score(args) -> int:
    header, records = synthdata.load_dataset(args.inp)
    cal = BinCalibration.load(args.cal)
    scored = synthdata.enrich_dataset(records, cal, header["n_conditions"])
    if len(scored) >= synthdata.CALIBRATION_SUBSET:
        synthdata.check_bin_coverage(scored, cal.bins)
    synthdata.save_dataset(scored, args.out, n_conditions=header["n_conditions"], cal=cal)
    counts = np.zeros((rewards.N_REWARDS, cal.bins), dtype=int)
    for rec in scored:
        for j, b in enumerate(rec.bins):
            counts[j, b] += 1
    print(f"score: wrote {len(scored)} scored records to {args.out}")
    for j, name in enumerate(cal.reward_names):
        print(f"  {name}: populations {counts[j].tolist()}")
    return EXIT_OK


def cmd_train(args) -> int:
    header, records = _load_scored(args.data)
    config = TrainConfig(
        steps=args.steps, batch_size=args.batch, lr=args.lr, seed=args.seed,
        mode=Mode.parse(args.mode), eval_every=args.eval_every,
        eval_samples=args.eval_samples, eval_ode_steps=args.eval_ode_steps,
        dims=args.dims, bins=header.get("bins") or args.bins,
        n_conditions=header["n_conditions"],
    )
    ckpt, log = train(config, records)
    digest = save_checkpoint(ckpt, args.ckpt)
    log.save(args.log)
    final = log.rows[-1]
    print(f"train: mode={config.mode} steps={config.steps} "
          f"params={ckpt.params.param_count()}")
    print(f"train: final loss {final.loss:.4f}, eval reward means "
          f"{[round(v, 4) for v in final.reward_means]}")
    print(f"train: checkpoint {args.ckpt} (digest {digest[:16]}), log {args.log}")
    return EXIT_OK


def _guidance_from_args(args) -> GuidanceSpec:
    return GuidanceSpec(
        _target_vector(args.splus), _target_vector(args.sminus), args.omega
    )


def cmd_sample(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    guidance = _guidance_from_args(args)
    conditions = np.full(args.n, args.c, dtype=np.int64)
    points = sample_points(ckpt.params, guidance, conditions,
                           steps=args.steps, seed=args.seed)
    stats = measure_rewards(points, conditions, ckpt.n_conditions)
    print(f"sample: {args.n} points, condition {args.c}, omega {args.omega}")
    for j, m in enumerate(stats.mean):
        print(f"  r{j}: mean {m:+.4f} std {stats.std[j]:.4f} "
              f"min {stats.minimum[j]:+.4f} max {stats.maximum[j]:+.4f}")
    if args.out:
        emit_report({
            "measurements": {"sample": stats},
            "config": {
                "checkpoint_digest": ckpt.digest(),
                "condition": args.c,
                "s_plus": list(guidance.s_plus),
                "s_minus": list(guidance.s_minus),
                "omega": guidance.omega,
                "steps": args.steps,
                "count": args.n,
            },
            "seeds": {"sample": args.seed},
        }, args.out)
        print(f"sample: report {args.out}")
    if args.points_csv:
        lines = ["x,y,c"] + [f"{repr(p[0])},{repr(p[1])},{args.c}" for p in points]
        Path(args.points_csv).write_text("\n".join(lines) + "\n")
        print(f"sample: points {args.points_csv}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    grid = [k / (args.grid - 1) for k in range(args.grid)]
    curve = sweep_reward_weight(
        ckpt, args.reward, grid, samples_per_point=args.samples,
        omega=args.omega, ode_steps=args.steps, seed=args.seed,
    )
    emit_report({
        "curves": {f"sweep_r{args.reward}": curve},
        "config": curve.provenance,
        "seeds": {"sweep": args.seed},
    }, args.out)
    print(f"sweep: reward {args.reward}, {args.grid} points x {args.samples} samples")
    for a, m in zip(curve.axis, curve.mean):
        print(f"  target {a:.3f}: measured r{args.reward} {m[args.reward]:+.4f}")
    print(f"sweep: report {args.out}")
    return EXIT_OK


def cmd_scale(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    ns = []
    n = 1
    while n <= args.max_n:
        ns.append(n)
        n *= 2
    if ns[-1] != args.max_n:
        raise CliError(f"--max-n must be a power of two, got {args.max_n}")
    curve = scaling_curve(
        ckpt, ns, selector=args.selector, trials=args.trials,
        guidance=_guidance_from_args(args), ode_steps=args.steps, seed=args.seed,
    )
    emit_report({
        "curves": {f"scaling_r{args.selector}": curve},
        "config": curve.provenance,
        "seeds": {"scale": args.seed},
    }, args.out)
    print(f"scale: selector r{args.selector}, trials {args.trials}")
    for a, m in zip(curve.axis, curve.mean):
        print(f"  best-of-{int(a)}: mean r{args.selector} {m[args.selector]:+.4f}")
    print(f"scale: report {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    baseline = MetricLog.load(args.baseline_log)
    candidate = MetricLog.load(args.candidate_log)
    res = convergence_speedup(baseline, candidate, args.reward)
    if res.reached:
        print(f"compare: reward r{args.reward} speedup {res.ratio:.2f}x "
              f"(baseline final {res.baseline_final:+.4f} reached at step "
              f"{res.reached_step})")
    else:
        print(f"compare: reward r{args.reward} never reaches baseline final "
              f"{res.baseline_final:+.4f} (speedup undefined, flagged not-reached)")
    if args.out:
        crit = evalsuite.Criterion.check(
            f"convergence_speedup_r{args.reward}",
            res.ratio if res.reached else float("inf"),
            args.threshold, "ge",
        )
        emit_report({
            "criteria": [crit],
            "config": {
                "reward": args.reward,
                "baseline_final": res.baseline_final,
                "reached_step": res.reached_step,
                "reached": res.reached,
            },
        }, args.out)
        print(f"compare: report {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from . import gateway  # imported lazily so the CLI stays snappy

    gateway.serve(args.ckpt, args.bind, cors_origin=args.cors_origin)
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rewardflow",
        description="Multi-reward conditioned flow matching on 2D synthetic data.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON file pre-setting any flag (explicit flags win)")
    parser.add_argument("--workdir", type=Path, default=None,
                        help="base directory for relative paths")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_,
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.set_defaults(func=fn)
        return p

    p = add("gen", cmd_gen, "generate the raw conditional dataset")
    p.add_argument("--n", type=int, default=80_000, help="record count")
    p.add_argument("--c", type=int, default=8, help="condition count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="output dataset path")

    p = add("calibrate", cmd_calibrate, "fit equal-population bin edges")
    p.add_argument("--in", dest="inp", type=Path, required=True, help="raw dataset")
    p.add_argument("--bins", type=int, default=DEFAULT_BINS, help="bin count B")
    p.add_argument("--subset", type=int, default=synthdata.CALIBRATION_SUBSET,
                   help="calibration subset size (first records)")
    p.add_argument("--out", type=Path, required=True, help="calibration JSON path")

    p = add("score", cmd_score, "score and bin a raw dataset")
    p.add_argument("--in", dest="inp", type=Path, required=True, help="raw dataset")
    p.add_argument("--cal", type=Path, required=True, help="calibration JSON")
    p.add_argument("--out", type=Path, required=True, help="scored dataset path")

    p = add("train", cmd_train, "train a velocity field")
    p.add_argument("--data", type=Path, required=True, help="scored dataset")
    p.add_argument("--mode", default="multi", help="baseline|single:<j>|multi")
    p.add_argument("--steps", type=int, default=20_000, help="optimizer steps")
    p.add_argument("--batch", type=int, default=256, help="batch size")
    p.add_argument("--lr", type=float, default=1e-3, help="learning rate")
    p.add_argument("--seed", type=int, default=0, help="training rng seed")
    p.add_argument("--eval-every", type=int, default=1000,
                   help="metric-log interval in steps")
    p.add_argument("--eval-samples", type=int, default=512,
                   help="samples per metric-log row")
    p.add_argument("--eval-ode-steps", type=int, default=DEFAULT_ODE_STEPS,
                   help="Euler steps for metric-log sampling")
    p.add_argument("--dims", type=_dims, default=Dims(),
                   help="network sizes as d_sin,d,h,layers")
    p.add_argument("--bins", type=int, default=DEFAULT_BINS, help="bin count B")
    p.add_argument("--ckpt", type=Path, required=True, help="checkpoint output path")
    p.add_argument("--log", type=Path, required=True, help="metric CSV output path")

    def add_guidance(p):
        p.add_argument("--splus", default="1,1,1,1",
                       help="positive target, 4 comma-separated reals in [0,1]")
        p.add_argument("--sminus", default="0,0,0,0",
                       help="negative target, 4 comma-separated reals in [0,1]")
        p.add_argument("--omega", type=float, default=DEFAULT_OMEGA,
                       help="guidance scale")
        p.add_argument("--steps", type=int, default=DEFAULT_ODE_STEPS,
                       help="Euler integration steps")
        p.add_argument("--seed", type=int, default=0, help="sampling rng seed")

    p = add("sample", cmd_sample, "draw guided samples and measure rewards")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--c", type=int, default=0, help="condition label")
    add_guidance(p)
    p.add_argument("--n", type=int, default=512, help="sample count")
    p.add_argument("--out", type=Path, default=None, help="report JSON path")
    p.add_argument("--points-csv", type=Path, default=None, help="points CSV path")

    p = add("sweep", cmd_sweep, "sweep one positive-target component")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--reward", type=int, required=True, help="reward index to sweep")
    p.add_argument("--grid", type=int, default=9, help="grid point count over [0,1]")
    p.add_argument("--samples", type=int, default=512, help="samples per grid point")
    p.add_argument("--omega", type=float, default=DEFAULT_OMEGA, help="guidance scale")
    p.add_argument("--steps", type=int, default=DEFAULT_ODE_STEPS,
                   help="Euler integration steps")
    p.add_argument("--seed", type=int, default=0, help="sweep rng seed")
    p.add_argument("--out", type=Path, required=True, help="report JSON path")

    p = add("scale", cmd_scale, "best-of-N test-time scaling curve")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--selector", type=int, default=0, help="selection reward index")
    p.add_argument("--max-n", type=int, default=128, help="largest N (power of two)")
    p.add_argument("--trials", type=int, default=1000, help="trials per N")
    add_guidance(p)
    p.add_argument("--out", type=Path, required=True, help="report JSON path")

    p = add("compare", cmd_compare, "convergence speedup between two metric logs")
    p.add_argument("--baseline-log", type=Path, required=True)
    p.add_argument("--candidate-log", type=Path, required=True,
                   help="reward-conditioned run's metric log")
    p.add_argument("--reward", type=int, default=0)
    p.add_argument("--threshold", type=float, default=2.0,
                   help="speedup threshold recorded in the report")
    p.add_argument("--out", type=Path, default=None, help="report JSON path")

    p = add("serve", cmd_serve, "serve the steering gateway over HTTP")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--bind", default="127.0.0.1:8734", help="host:port")
    p.add_argument("--cors-origin", default="*", help="allowed CORS origin")

    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    # pull --config out early so its values become parser defaults;
    # abbreviation must stay off or subcommand flags like --c match it
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config", type=Path, default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return argv
    try:
        doc = json.loads(Path(known.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {known.config}: {exc}") from None
    if not isinstance(doc, dict):
        raise CliError(f"config {known.config} must hold a JSON object")
    if "dims" in doc and isinstance(doc["dims"], str):
        doc["dims"] = _dims(doc["dims"])
    # subparsers re-apply their own defaults, so config values must be set on
    # every subcommand parser, not just the root
    parser.set_defaults(**doc)
    for action in parser._subparsers._group_actions:
        for sub in action.choices.values():
            sub.set_defaults(**doc)
    return argv


def _resolve_paths(args: argparse.Namespace) -> None:
    workdir = getattr(args, "workdir", None)
    if workdir is None:
        return
    for name in _PATH_ARGS:
        value = getattr(args, name, None)
        if isinstance(value, Path) and not value.is_absolute():
            setattr(args, name, Path(workdir) / value)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        _resolve_paths(args)
        _echo_config(args)
        return args.func(args)
    except SystemExit as exc:  # argparse validation / --help
        return int(exc.code or 0)
    except (CliError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - boundary of the process
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
