"""Command-line entry point: ``sdft <subcommand> ...``.

Exit status is 0 on success, 1 on usage errors and 2 on runtime failures.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

import numpy as np

from sdft import io as sio
from sdft.data import RingSpec, gen_limited_target, gen_ring, load_dataset, save_dataset
from sdft.metrics import (MIN_HITS, MetricReport, alignment, angular_coverage, faithfulness,
                          mmd_rbf, mode_coverage)
from sdft.samplers import SamplerSpec, TranslationSpec, sample, sdedit_translate
from sdft.schedule import WEIGHT_KINDS, WeightingScheme, make_schedule
from sdft.train import PRESETS, run_training

log = logging.getLogger("sdft")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _load_config(path):
    return sio.load_config(path) if path else sio.RunConfig()


def _read_points(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return sio.parse_points_csv(fh.read())


def _reference_points(path):
    """Points from either a dataset file or a points CSV."""
    with open(path, encoding="ascii", errors="replace") as fh:
        head = fh.readline()
    if head.startswith("SDFT-DATA"):
        ds = load_dataset(path)
        return ds.points, ds
    return _read_points(path)[0], None


def cmd_gen_data(args) -> None:
    cfg = _load_config(args.config).data
    seed = args.seed
    if args.domain == "source":
        ds = gen_ring(cfg.n_modes, cfg.source_radius, cfg.std, args.n or cfg.source_points, seed)
    else:
        ds = gen_limited_target(RingSpec(cfg.n_modes, cfg.source_radius, cfg.std),
                                cfg.target_radius, cfg.keep_modes, args.n or cfg.target_points, seed)
    save_dataset(ds, args.out)
    if args.csv:
        sio.write_text(args.csv, sio.points_csv(ds.points, ds.mode_labels))


def cmd_train(args) -> None:
    cfg = _load_config(args.config)
    overrides = {}
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, **overrides))
    if args.preset:
        cfg = dataclasses.replace(cfg, sdft=PRESETS[args.preset])
    if args.lambda_aux is not None:
        cfg = dataclasses.replace(cfg, sdft=dataclasses.replace(cfg.sdft, lambda_aux=args.lambda_aux))
    if args.mode != "scratch" and not args.source:
        raise UsageError(f"train --mode {args.mode} requires --source CHECKPOINT")
    if args.config_out:
        sio.write_text(args.config_out, cfg.to_json())

    source = None
    s = cfg.make_schedule()
    if args.source:
        ck = sio.load_checkpoint(args.source)
        source = ck.to_model()
        if ck.schedule != s.to_dict():
            raise ValueError(f"source checkpoint schedule {ck.schedule} differs from config {s.to_dict()}")
    ds = load_dataset(args.data)
    mode = {"naive": "naive_finetune"}.get(args.mode, args.mode)

    def on_eval(model, it, rec):
        sio.save_checkpoint(args.out, sio.Checkpoint.from_model(model, s, it, cfg.train.seed, mode))

    dims = {"input_dim": cfg.model.input_dim, "hidden_dims": tuple(cfg.model.hidden_dims),
            "time_embed_dim": cfg.model.time_embed_dim}
    _, records = run_training(mode, ds, s, cfg.sdft, cfg.train, source=source,
                              model_dims=dims, on_eval=on_eval)
    if args.log:
        sio.write_text(args.log, sio.records_csv(records))


def _model_and_schedule(path):
    ck = sio.load_checkpoint(path)
    return ck.to_model(frozen=True), ck.to_schedule()


def cmd_sample(args) -> None:
    model, s = _model_and_schedule(args.ckpt)
    spec = SamplerSpec(args.sampler, args.steps, args.start_t, args.seed)
    pts = sample(model, spec, s, args.n)
    sio.write_text(args.out, sio.points_csv(pts))


def cmd_translate(args) -> None:
    model, s = _model_and_schedule(args.ckpt)
    pts, modes = _read_points(args.inp)
    spec = TranslationSpec(args.t0_frac, SamplerSpec("ddim", args.steps, None, args.seed))
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0x7E]))
    out = sdedit_translate(model, pts, spec, s, rng)
    sio.write_text(args.out, sio.points_csv(out, modes))


def cmd_eval(args) -> None:
    samples, _ = _read_points(args.samples)
    report = MetricReport(min_hits=args.min_hits)
    if args.metric == "coverage":
        if not args.reference:
            raise UsageError("eval --metric coverage requires --reference DATASET")
        ds = load_dataset(args.reference)
        if args.angular:
            cov, counts = angular_coverage(samples, ds.mode_table[:, 0], args.capture, args.min_hits)
        else:
            cov, counts = mode_coverage(samples, ds.mode_table, args.capture, args.min_hits)
        report.coverage, report.per_mode_counts = cov, counts.tolist()
    elif args.metric == "mmd":
        if not args.reference:
            raise UsageError("eval --metric mmd requires --reference CSV_OR_DATASET")
        ref, _ = _reference_points(args.reference)
        report.mmd = mmd_rbf(samples, ref, args.bandwidth)
    else:
        if not args.inputs:
            raise UsageError(f"eval --metric {args.metric} requires --inputs CSV")
        inputs, _ = _read_points(args.inputs)
        if args.metric == "faithfulness":
            a, r = faithfulness(inputs, samples)
            report.faithfulness_angle_median, report.faithfulness_radius_median = a, r
        else:
            report.alignment_median = alignment(inputs, samples)
    if args.csv_out:
        sio.write_text(args.csv_out, report.to_csv())
    text = report.to_text()
    if args.out:
        sio.write_text(args.out, text)
    else:
        sys.stdout.write(text)


def cmd_weights(args) -> None:
    s = make_schedule(args.family, args.T, args.beta_start, args.beta_end)
    text = sio.weights_csv(s, WeightingScheme(args.scheme, args.k, args.gamma))
    if args.out:
        sio.write_text(args.out, text)
    else:
        sys.stdout.write(text)


def cmd_plot(args) -> None:
    sio.emit_svg_scatter(args.inp, args.out, size=args.size, title=args.title or "")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sdft", description="Toy-scale self-distillation fine-tuning of diffusion models")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="generate a source or target ring dataset")
    g.add_argument("--domain", choices=("source", "target"), default="source")
    g.add_argument("--out", required=True)
    g.add_argument("--csv", help="also write points as x,y,mode CSV")
    g.add_argument("--n", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--config")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train from scratch or fine-tune")
    t.add_argument("--mode", choices=("scratch", "naive", "sdft"), required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True, help="checkpoint path (rewritten at each eval point)")
    t.add_argument("--source", help="source checkpoint for naive/sdft")
    t.add_argument("--config")
    t.add_argument("--config-out", help="write the effective configuration as JSON")
    t.add_argument("--log", help="write loss records as CSV")
    t.add_argument("--iterations", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--preset", choices=sorted(PRESETS))
    t.add_argument("--lambda-aux", type=float)
    t.set_defaults(func=cmd_train)

    sm = sub.add_parser("sample", help="draw samples from a checkpoint")
    sm.add_argument("--ckpt", required=True)
    sm.add_argument("--out", required=True)
    sm.add_argument("--sampler", choices=("ddim", "ancestral"), default="ddim")
    sm.add_argument("--steps", type=int, default=40)
    sm.add_argument("--start-t", type=int)
    sm.add_argument("--n", type=int, default=2000)
    sm.add_argument("--seed", type=int, default=0)
    sm.set_defaults(func=cmd_sample)

    tr = sub.add_parser("translate", help="SDEdit translation of a point CSV")
    tr.add_argument("--ckpt", required=True)
    tr.add_argument("--in", dest="inp", required=True)
    tr.add_argument("--out", required=True)
    tr.add_argument("--t0-frac", type=float, default=0.5)
    tr.add_argument("--steps", type=int, default=40)
    tr.add_argument("--seed", type=int, default=0)
    tr.set_defaults(func=cmd_translate)

    e = sub.add_parser("eval", help="compute a metric on point CSVs")
    e.add_argument("--metric", choices=("coverage", "mmd", "faithfulness", "alignment"), required=True)
    e.add_argument("--samples", required=True)
    e.add_argument("--reference", help="dataset (coverage, mmd) or points CSV (mmd)")
    e.add_argument("--inputs", help="paired input CSV (faithfulness, alignment)")
    e.add_argument("--capture", type=float, default=0.2,
                   help="capture radius, or capture angle in radians with --angular")
    e.add_argument("--angular", action="store_true")
    e.add_argument("--min-hits", type=int, default=MIN_HITS)
    e.add_argument("--bandwidth", type=float)
    e.add_argument("--out", help="text report path (stdout when omitted)")
    e.add_argument("--csv-out")
    e.set_defaults(func=cmd_eval)

    w = sub.add_parser("weights", help="CSV of a timestep weighting curve")
    w.add_argument("--scheme", choices=WEIGHT_KINDS, default="sdft")
    w.add_argument("--gamma", type=float, default=3.0)
    w.add_argument("--k", type=float, default=1.0)
    w.add_argument("--family", choices=("linear", "cosine"), default="linear")
    w.add_argument("--T", type=int, default=1000)
    w.add_argument("--beta-start", type=float, default=1e-4)
    w.add_argument("--beta-end", type=float, default=0.02)
    w.add_argument("--out")
    w.set_defaults(func=cmd_weights)

    pl = sub.add_parser("plot", help="render a point CSV as SVG")
    pl.add_argument("--in", dest="inp", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--size", type=int, default=480)
    pl.add_argument("--title")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"sdft {args.command}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, FloatingPointError) as exc:
        print(f"sdft {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
