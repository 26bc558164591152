"""Command-line interface.

Exit status: 0 on success, 1 on a data error, 2 on a usage error.
"""
import argparse
import dataclasses
import json
import logging
import sys

from . import harness, metrics, study
from .errors import CraveError


def _common(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="override the config seed")
    parser.add_argument("--config", default=default, help="key=value config file")
    parser.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)


def build_parser():
    p = argparse.ArgumentParser(prog="crave", description="AIGC video quality evaluator")
    _common(p, suppress=False)
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    parent = argparse.ArgumentParser(add_help=False)
    _common(parent, suppress=True)

    s = sub.add_parser("process-study", parents=[parent], help="annotation table -> MOS + screening report")
    s.add_argument("table")
    s.add_argument("--order", choices=("raw-first", "z-first"), default="raw-first")
    s.add_argument("--r1", type=float, default=study.ScreeningConfig.reject_ratio)
    s.add_argument("--r2", type=float, default=study.ScreeningConfig.symmetry_ratio)
    s.add_argument("--out", help="MOS TSV (default: stdout)")
    s.add_argument("--report", help="screening report JSON")

    s = sub.add_parser("train", parents=[parent], help="train a checkpoint")
    s.add_argument("manifest")
    s.add_argument("--out", required=True, help="checkpoint path")
    s.add_argument("--split", help="use only records with this split label")

    s = sub.add_parser("score", parents=[parent], help="per-video branch scores")
    s.add_argument("checkpoint")
    s.add_argument("manifest")
    s.add_argument("--out", help="score TSV (default: stdout)")

    s = sub.add_parser("eval", parents=[parent], help="SRCC/PLCC/KRCC against MOS")
    s.add_argument("checkpoint")
    s.add_argument("manifest")
    s.add_argument("--split")
    s.add_argument("--report", help="report JSON (default: stdout)")

    s = sub.add_parser("kfold", parents=[parent], help="k-fold cross-validation")
    s.add_argument("manifest")
    s.add_argument("--k", type=int, default=10)
    s.add_argument("--report", help="report JSON (default: stdout)")

    s = sub.add_parser("rank", parents=[parent], help="rank generators by mean fused score")
    s.add_argument("checkpoint")
    s.add_argument("manifest")

    s = sub.add_parser("plot", parents=[parent], help="scatter + quartic-fit curve data")
    s.add_argument("checkpoint")
    s.add_argument("manifest")
    s.add_argument("--out", required=True)
    s.add_argument("--samples", type=int, default=100)
    return p


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _report_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _manifest(path, split=None):
    man = harness.load_manifest(path)
    return man.split(split) if split else man


def cmd_process_study(args):
    table = study.read_annotation_table(args.table)
    cfg = study.ScreeningConfig(reject_ratio=args.r1, symmetry_ratio=args.r2)
    mos, report = study.process_study(table, order=args.order, thresholds=cfg)
    if args.report:
        study.write_screening_report(report, args.report)
    print(f"rejected annotators: {', '.join(map(str, report.rejected_annotators)) or '(none)'}",
          file=sys.stderr if not args.out else sys.stdout)
    if args.out:
        study.write_mos(mos, args.out)
    else:
        sys.stdout.write("video_id\tmos\tsupport\n")
        for vid, val, n in zip(mos.video_ids, mos.mos, mos.support_counts):
            sys.stdout.write(f"{vid}\t{float(val)!r}\t{int(n)}\n")


def cmd_train(args, cfg):
    result = harness.train(_manifest(args.manifest, args.split), cfg)
    with open(args.out, "wb") as fh:
        fh.write(result.checkpoint)
    final = result.history[-1][2] if result.history else float("nan")
    print(f"wrote {args.out} (final training loss {final:.6f})")


def cmd_score(args):
    man = _manifest(args.manifest)
    scores = harness.score_manifest(args.checkpoint, man)
    if args.out:
        harness.write_scores(args.out, [r.video_id for r in man.records], scores)
    else:
        sys.stdout.write("video_id\to_vh\to_align\to_hmm\tfused\n")
        for r, s in zip(man.records, scores):
            sys.stdout.write(f"{r.video_id}\t{s.o_vh!r}\t{s.o_align!r}\t{s.o_hmm!r}\t{s.fused!r}\n")


def cmd_eval(args):
    report = harness.evaluate(args.checkpoint, _manifest(args.manifest, args.split))
    _emit(_report_json(report.to_dict()), args.report)


def cmd_kfold(args, cfg):
    result = harness.kfold_evaluate(_manifest(args.manifest), cfg, k=args.k)
    payload = {
        "k": args.k,
        "seed": cfg.seed,
        "folds": [r.to_dict() for r in result.fold_reports],
        "mean": result.mean.to_dict(),
    }
    _emit(_report_json(payload), args.report)


def cmd_rank(args):
    for i, (label, score) in enumerate(harness.rank_generators(args.checkpoint, _manifest(args.manifest)), 1):
        print(f"{i}\t{label}\t{score!r}")


def cmd_plot(args):
    man = _manifest(args.manifest)
    man.require_mos()
    fused = [s.fused for s in harness.score_manifest(args.checkpoint, man)]
    metrics.write_plot_data(args.out, fused, [r.mos for r in man.records], args.samples)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = harness.load_config(args.config, args.seed)
        cmd = args.command
        if cmd == "process-study":
            cmd_process_study(args)
        elif cmd == "train":
            cmd_train(args, cfg)
        elif cmd == "score":
            cmd_score(args)
        elif cmd == "eval":
            cmd_eval(args)
        elif cmd == "kfold":
            cmd_kfold(args, cfg)
        elif cmd == "rank":
            cmd_rank(args)
        elif cmd == "plot":
            cmd_plot(args)
    except (CraveError, OSError, ValueError, KeyError) as exc:
        print(f"crave {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
