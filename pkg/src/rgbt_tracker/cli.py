"""Command-line interface: synth, train-attention, track, eval, sweep-lambda."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import cv2
import numpy as np

from . import checkpoint, evaluation, pipeline
from .config import RunConfig
from .data.dataset import find_sequences, load_sequence, save_gtot, detect_layout
from .data.synthetic import SyntheticSpec, synthesize_sequence
from .errors import MissingDirectoryError, TrackerError

log = logging.getLogger("rgbt_tracker")


class CommandError(Exception):
    pass


def _base_config(args) -> RunConfig:
    base = RunConfig.desk_scale() if getattr(args, "preset", "full") == "desk" else RunConfig()
    if getattr(args, "config", None):
        base = RunConfig.load(args.config, base=base)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "lam", None) is not None:
        changes["lam"] = args.lam
    if getattr(args, "no_global", False):
        changes["use_global_attention"] = False
    if getattr(args, "no_local", False):
        changes["use_local_attention"] = False
    return base.replace(**changes) if changes else base


def _sequence_dirs(path: Path) -> list[Path]:
    if not path.is_dir():
        raise MissingDirectoryError(f"{path} is not a directory")
    try:
        detect_layout(path)
        return [path]
    except MissingDirectoryError:
        pass
    dirs = find_sequences(path)
    if not dirs:
        raise MissingDirectoryError(f"{path}: no sequence directories found")
    return dirs


def cmd_synth(args) -> int:
    spec, file_seed = SyntheticSpec.load(args.spec_file)
    seed = args.seed if args.seed is not None else (file_seed if file_seed is not None else 0)
    out = Path(args.out_dir)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise CommandError(f"{out} exists and is not empty (use --force to overwrite)")
    seq = synthesize_sequence(spec, seed)
    save_gtot(seq, out)
    print(len(seq))
    return 0


def cmd_train_attention(args) -> int:
    from .global_attention import (AttentionTrainConfig, build_attention_net,
                                   build_attention_samples, train_attention_net)

    cfg = _base_config(args)
    dirs = _sequence_dirs(Path(args.data_dir))
    sequences = [load_sequence(d, cfg.gtot_gt_source) for d in dirs]
    samples = build_attention_samples(sequences, cfg.mask_polarity, args.frame_stride)
    net = build_attention_net(cfg.attention_net_config(), seed=cfg.seed)
    train_cfg = AttentionTrainConfig(cfg.attention_learning_rate, cfg.batch_size, cfg.epochs,
                                     args.iterations, cfg.seed)
    trace = train_attention_net(net, samples, train_cfg)
    checkpoint.save_attention_net(args.checkpoint_out, net)
    trace_path = Path(args.trace_out or f"{args.checkpoint_out}.trace.csv")
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss"])
        writer.writerows(enumerate(trace))
    print(f"{len(samples)} samples, {len(trace)} iterations, final loss {trace[-1]:.6f}")
    return 0


def _save_map(maps_dir: Path, idx: int, amap):
    if amap is None:
        return
    maps_dir.mkdir(parents=True, exist_ok=True)
    img = np.clip(np.rint(np.asarray(amap) * 255), 0, 255).astype(np.uint8)
    cv2.imwrite(str(maps_dir / f"{idx:05d}.png"), img)


def cmd_track(args) -> int:
    cfg = _base_config(args)
    attention_net = None
    if args.attention_checkpoint and cfg.use_global_attention:
        attention_net = checkpoint.load_attention_net(args.attention_checkpoint)
    elif cfg.use_global_attention:
        cfg = cfg.replace(use_global_attention=False)
    seq = load_sequence(args.seq_dir, cfg.gtot_gt_source)
    maps_dir = Path(args.maps_dir) if args.maps_dir else None
    n_candidates = []

    def on_frame(idx, box, diag):
        n_candidates.append(diag.n_candidates)
        if maps_dir is not None:
            _save_map(maps_dir, idx, diag.attention_map)

    boxes = pipeline.run_sequence(seq, cfg, attention_net, on_frame=on_frame)
    pipeline.write_results(args.result_out, boxes)
    mean_c = float(np.mean(n_candidates)) if n_candidates else 0.0
    print(f"{seq.name}: {len(boxes)} frames, variant={cfg.variant}, "
          f"lambda={cfg.effective_lambda:g}, mean candidates/frame={mean_c:.1f}", file=sys.stderr)
    return 0


def _write_metric_rows(path: Path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "frames", "PR", "SR", "AUC"])
        for name, m in rows:
            writer.writerow([name, m.frames, repr(m.pr), repr(m.sr), repr(m.auc)])


def _table(rows, pr_label, sr_label) -> str:
    lines = [f"{'name':<24} {'frames':>6} {pr_label:>8} {sr_label:>8} {'AUC':>8}"]
    for name, m in rows:
        lines.append(f"{name:<24} {m.frames:>6} {m.pr:>8.4f} {m.sr:>8.4f} {m.auc:>8.4f}")
    return "\n".join(lines)


def cmd_eval(args) -> int:
    cfg = _base_config(args)
    results_dir = Path(args.results_dir)
    if not results_dir.is_dir():
        raise MissingDirectoryError(f"{results_dir} is not a directory")
    out = Path(args.report_out)
    out.mkdir(parents=True, exist_ok=True)
    results, sequences, skipped = [], [], []
    for seq_dir in _sequence_dirs(Path(args.dataset_dir)):
        seq = load_sequence(seq_dir, cfg.gtot_gt_source)
        res_file = results_dir / f"{seq.name}.txt"
        try:
            boxes = evaluation.read_results(res_file)
            results.append(evaluation.TrackingResult(seq.name, boxes, seq.ground_truth))
            sequences.append(seq)
        except (OSError, ValueError, TrackerError) as exc:
            skipped.append(seq.name)
            print(f"warning: skipping {seq.name}: {exc}", file=sys.stderr)
    if not results:
        raise CommandError("no sequence could be evaluated")

    kw = dict(include_first_frame=cfg.include_first_frame)
    rows = []
    for res in results:
        c = evaluation.curves(res, **kw)
        rows.append((res.name, evaluation.Metrics(
            evaluation.precision_rate(res, cfg.precision_threshold, **kw),
            evaluation.success_rate(res, cfg.success_threshold, **kw),
            c.auc, len(res.distances(**kw)))))
        evaluation.write_curves(out / "curves", res.name, c)
    overall = evaluation.pooled_metrics(results, cfg.precision_threshold, cfg.success_threshold, **kw)
    attrs = evaluation.attribute_report(results, sequences, cfg.precision_threshold,
                                        cfg.success_threshold, **kw)
    _write_metric_rows(out / "metrics.csv", rows + [("ALL", overall)])
    _write_metric_rows(out / "attributes.csv", list(attrs.items()))

    pr_label = f"PR@{cfg.precision_threshold:g}px"
    sr_label = f"SR@{cfg.success_threshold:g}"
    parts = [_table(rows + [("ALL", overall)], pr_label, sr_label)]
    if attrs:
        parts.append("Per attribute:\n" + _table(list(attrs.items()), pr_label, sr_label))
    if skipped:
        parts.append("Skipped: " + ", ".join(skipped))
    report = "\n\n".join(parts) + "\n"
    (out / "report.txt").write_text(report)
    print(report, end="")
    if args.plots:
        named = {name: evaluation.curves(r, **kw) for name, r in
                 [(r.name, r) for r in results]}
        evaluation.plot_curves(out / "curves.png", named)
    return 0


def cmd_sweep_lambda(args) -> int:
    cfg = _base_config(args)
    lambdas = [float(v) for v in args.lambdas.split(",") if v.strip()]
    if not lambdas:
        raise CommandError("empty lambda list")
    attention_net = None
    if args.attention_checkpoint and cfg.use_global_attention:
        attention_net = checkpoint.load_attention_net(args.attention_checkpoint)
    else:
        cfg = cfg.replace(use_global_attention=False)
    sequences = [load_sequence(d, cfg.gtot_gt_source) for d in _sequence_dirs(Path(args.dataset_dir))]
    rows = evaluation.lambda_sweep(sequences, lambdas, cfg, attention_net)
    out = Path(args.report_out)
    out.mkdir(parents=True, exist_ok=True)
    table = evaluation.format_sweep_table(rows)
    (out / "lambda_sweep.txt").write_text(table)
    with open(out / "lambda_sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "PR", "SR", "AUC", "frames"])
        for r in rows:
            writer.writerow([repr(r.lam), repr(r.metrics.pr), repr(r.metrics.sr),
                             repr(r.metrics.auc), r.metrics.frames])
    for r in rows:
        lam_dir = out / f"lambda_{r.lam:g}"
        lam_dir.mkdir(exist_ok=True)
        for res in r.results:
            pipeline.write_results(lam_dir / f"{res.name}.txt", res.predictions)
    print(table, end="")
    return 0


def _add_common(p, lam=False):
    p.add_argument("--config", help="key = value config file applied over the preset")
    p.add_argument("--preset", choices=("full", "desk"), default="full",
                   help="base defaults (desk: slim network, short schedules)")
    p.add_argument("--seed", type=int)
    if lam:
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--no-global", action="store_true", help="disable global attention")
        p.add_argument("--no-local", action="store_true", help="disable the attention regularizer")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rgbt-track", description=__doc__)
    parser.add_argument("--print-defaults", action="store_true",
                        help="print the default configuration and exit")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("synth", help="write a synthetic sequence in the GTOT layout")
    p.add_argument("spec_file")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-attention", help="train the global attention network")
    p.add_argument("data_dir")
    p.add_argument("checkpoint_out")
    p.add_argument("--trace-out")
    p.add_argument("--iterations", type=int, help="fixed iteration count instead of epochs")
    p.add_argument("--frame-stride", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=cmd_train_attention)

    p = sub.add_parser("track", help="track one sequence")
    p.add_argument("seq_dir")
    p.add_argument("result_out")
    p.add_argument("--attention-checkpoint")
    p.add_argument("--maps-dir", help="write global attention maps as 8-bit PNGs")
    _add_common(p, lam=True)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="PR/SR report for a results directory")
    p.add_argument("results_dir")
    p.add_argument("dataset_dir")
    p.add_argument("report_out")
    p.add_argument("--plots", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-lambda", help="track a dataset for several lambda values")
    p.add_argument("dataset_dir")
    p.add_argument("lambdas", help="comma-separated, e.g. 1,2,3")
    p.add_argument("report_out")
    p.add_argument("--attention-checkpoint")
    _add_common(p, lam=True)
    p.set_defaults(func=cmd_sweep_lambda)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.print_defaults:
        sys.stdout.write(RunConfig().dumps())
        return 0
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except (CommandError, TrackerError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
