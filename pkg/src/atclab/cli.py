"""Command-line entry point.

Subcommands: corpus prepare, synth, wer, train, grid, report. Exit
codes: 0 success, 1 user error (bad flags, missing or malformed files),
2 internal error. ATCLAB_SEED provides a default seed.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import textnorm
from .corpus.manifest import build_manifest
from .corpus.synth import CHANNELS, synth_corpus, load_streams
from .errors import AtcLabError
from .experiment import (
    aggregate,
    default_model_config,
    enumerate_grid,
    grammar_dataset,
    kfold_split,
    load_results,
    pretrain_base_model,
    results_to_jsonl,
    run_campaign,
)
from .model import (
    LoraConfig,
    Model,
    ModelConfig,
    inject_lora,
    load_checkpoint,
    save_adapters,
    save_checkpoint,
)
from .report import emit_report, fnum
from .training import TrainConfig, train
from .wer import corpus_wer, mean_utterance_wer, render_alignment


class UserError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the contract wants 1 for user errors
    def error(self, message):
        raise UserError(message)


def _default_seed() -> int:
    return int(os.environ.get("ATCLAB_SEED", "0"))


def build_parser() -> _Parser:
    p = _Parser(prog="atclab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True,
                           parser_class=_Parser)

    corpus = sub.add_parser("corpus", help="curate real transcript+audio data")
    corpus_sub = corpus.add_subparsers(dest="corpus_command", required=True,
                                       parser_class=_Parser)
    prep = corpus_sub.add_parser("prepare",
                                 help="build a training manifest")
    prep.add_argument("--transcripts", required=True, metavar="DIR")
    prep.add_argument("--audio", required=True, metavar="DIR")
    prep.add_argument("--out", required=True, metavar="FILE")
    prep.add_argument("--short-policy", choices=("pad", "drop"), default="pad")
    prep.add_argument("--digit-serial", action="store_true",
                      help="read digit runs one digit at a time")

    synth = sub.add_parser("synth",
                           help="generate a synthetic phraseology corpus")
    synth.add_argument("--seed", type=int, default=None)
    synth.add_argument("--n", type=int, required=True)
    synth.add_argument("--channel", choices=sorted(CHANNELS), default="base")
    synth.add_argument("--out", required=True, metavar="DIR")

    wer = sub.add_parser("wer",
                         help="score hypotheses against references")
    wer.add_argument("--ref", required=True, metavar="FILE")
    wer.add_argument("--hyp", required=True, metavar="FILE")
    wer.add_argument("--per-utterance", action="store_true")
    wer.add_argument("--show-alignment", action="store_true")

    tr = sub.add_parser("train",
                        help="one training run on a stream corpus")
    tr.add_argument("--manifest", required=True, metavar="PATH",
                    help="corpus directory or streams .jsonl file")
    tr.add_argument("--config", required=True, metavar="FILE")
    tr.add_argument("--out", required=True, metavar="DIR")

    grid = sub.add_parser("grid",
                          help="run a cross-validated campaign")
    grid.add_argument("--manifest", metavar="PATH")
    grid.add_argument("--campaign", choices=("base", "lora"))
    grid.add_argument("--k", type=int, default=None)
    grid.add_argument("--seed", type=int, default=None)
    grid.add_argument("--workers", type=int, default=None)
    grid.add_argument("--out", required=True, metavar="DIR")
    grid.add_argument("--scale-divisor", type=int, default=None)
    grid.add_argument("--base-checkpoint", metavar="FILE",
                      help="pretrained model; omitted: pretrain on a "
                           "clean-channel synthetic corpus")
    grid.add_argument("--config", metavar="FILE",
                      help="campaign manifest JSON; flags override its keys")

    rep = sub.add_parser("report",
                         help="tables and figures from results.jsonl")
    rep.add_argument("--results", required=True, nargs="+", metavar="FILE")
    rep.add_argument("--out", required=True, metavar="DIR")
    return p


def _read_lines(path: str) -> list[str]:
    try:
        return Path(path).read_text().splitlines()
    except OSError as exc:
        raise UserError(f"cannot read {path}: {exc}") from exc


def _normalize_lines(lines):
    out = []
    for line in lines:
        try:
            out.append(textnorm.normalize(line))
        except AtcLabError:
            out.append("")
    return out


def cmd_corpus_prepare(args) -> int:
    summary = build_manifest(args.transcripts, args.audio, args.out,
                             short_policy=args.short_policy,
                             digit_serial=args.digit_serial)
    print(f"manifest {args.out}: parsed={summary.parsed} kept={summary.kept} "
          f"dropped_unintelligible={summary.dropped_unintelligible} "
          f"dropped_length={summary.dropped_length} errors={summary.errors} "
          f"parse_errors={len(summary.parse_errors)}")
    return 0


def cmd_synth(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    info = synth_corpus(seed, args.n, CHANNELS[args.channel](), args.out)
    print(f"synth {args.out}: utterances={info['utterances']} "
          f"channel={info['channel']} seed={seed}")
    return 0


def cmd_wer(args) -> int:
    refs = _normalize_lines(_read_lines(args.ref))
    hyps = _normalize_lines(_read_lines(args.hyp))
    if len(refs) != len(hyps):
        raise UserError(f"line counts differ: {len(refs)} references vs "
                        f"{len(hyps)} hypotheses")
    if not refs:
        raise UserError("empty input files")
    pooled, reports = corpus_wer(zip(refs, hyps))
    if args.per_utterance:
        print("id,S,D,I,N,wer")
        for i, r in enumerate(reports):
            a = r.alignment
            print(f"{i},{a.s_count},{a.d_count},{a.i_count},{a.n_ref},"
                  f"{r.wer:.4f}")
    if args.show_alignment:
        for i, (r, ref, hyp) in enumerate(zip(reports, refs, hyps)):
            print(f"# utterance {i}")
            print(render_alignment(r.alignment, ref.split(), hyp.split()))
    total = [sum(getattr(r.alignment, f) for r in reports)
             for f in ("s_count", "d_count", "i_count", "n_ref")]
    print(f"S={total[0]} D={total[1]} I={total[2]} N={total[3]} "
          f"WER={pooled:.4f} mean_utterance_wer={mean_utterance_wer(reports):.4f}")
    return 0


def _load_json(path: str) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise UserError(f"cannot load JSON {path}: {exc}") from exc


def cmd_train(args) -> int:
    raw = _load_json(args.config)
    seed = raw.get("seed", _default_seed())
    records = load_streams(args.manifest)
    if not records:
        raise UserError(f"no stream records under {args.manifest}")
    dataset = grammar_dataset(records)

    if raw.get("base_checkpoint"):
        model = load_checkpoint(raw["base_checkpoint"])
    else:
        mc = raw.get("model", {})
        model = Model(default_model_config(len(dataset.vocab), seed=seed)
                      if not mc else
                      ModelConfig(vocab_in=mc.get("vocab_in", 68),
                                  vocab_out=mc.get("vocab_out",
                                                   len(dataset.vocab)),
                                  d_model=mc.get("d_model", 64),
                                  n_heads=mc.get("n_heads", 4),
                                  d_ff=mc.get("d_ff", 128),
                                  n_enc_layers=mc.get("n_enc_layers", 2),
                                  n_dec_layers=mc.get("n_dec_layers", 2),
                                  max_len=mc.get("max_len", 128),
                                  seed=seed))
    lora = raw.get("lora")
    if lora:
        inject_lora(model, LoraConfig(lora["alpha"], lora["rank"],
                                      tuple(lora.get("targets",
                                                     ("attn_q", "attn_v")))),
                    seed=seed)
    config = TrainConfig(
        batch_size=raw.get("batch_size", 6),
        learning_rate=raw.get("learning_rate", 5e-4),
        epochs=raw.get("epochs", 3),
        seed=seed,
        freeze_base=raw.get("freeze_base", bool(lora)),
        max_steps=raw.get("max_steps"),
    )
    eval_fraction = raw.get("eval_fraction", 0.1)
    n_eval = max(1, int(len(dataset) * eval_fraction))
    order = np.random.default_rng(seed).permutation(len(dataset))
    eval_ds = dataset.subset(order[:n_eval])
    train_ds = dataset.subset(order[n_eval:])

    model, metrics = train(model, train_ds, eval_ds, config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out / "checkpoint.ckpt", seed=seed)
    if model.lora:
        save_adapters(model, out / "adapters.ckpt", seed=seed)
    with open(out / "metrics.jsonl", "w") as f:
        for m in metrics:
            f.write(json.dumps({
                "task_id": "train", "fold": None,
                "batch": config.batch_size, "lr": config.learning_rate,
                "epochs_total": config.epochs, "epoch": m.epoch,
                "train_loss": m.train_loss, "eval_loss": m.eval_loss,
                "eval_wer": m.eval_wer, "wall_clock_s": m.wall_clock_s,
            }, sort_keys=True) + "\n")
    last = metrics[-1]
    print(f"train {args.out}: epochs={len(metrics)} "
          f"train_loss={fnum(last.train_loss)} "
          f"eval_loss={fnum(last.eval_loss)} eval_wer={fnum(last.eval_wer)}")
    return 0


def cmd_grid(args) -> int:
    manifest = _load_json(args.config) if args.config else {}
    campaign = args.campaign or manifest.get("campaign")
    if campaign not in ("base", "lora"):
        raise UserError("--campaign base|lora is required (flag or config)")
    dataset_dir = args.manifest or manifest.get("dataset_dir")
    if not dataset_dir:
        raise UserError("--manifest (or dataset_dir in --config) is required")
    k = args.k if args.k is not None else manifest.get("k", 5)
    seed = args.seed if args.seed is not None else \
        manifest.get("seed", _default_seed())
    workers = args.workers if args.workers is not None else \
        manifest.get("workers", 1)
    divisor = args.scale_divisor if args.scale_divisor is not None else \
        manifest.get("scale_divisor", 32)
    grids = manifest.get("grids", {})

    records = load_streams(dataset_dir)
    if not records:
        raise UserError(f"no stream records under {dataset_dir}")
    dataset = grammar_dataset(records)

    configs = enumerate_grid(
        campaign, k, seed=seed, scale_divisor=divisor,
        lrs=tuple(grids["lrs"]) if "lrs" in grids else None,
        batches=tuple(grids["batches"]) if "batches" in grids else None,
        epochs_grid=tuple(grids["epochs"]) if "epochs" in grids else None,
        alphas=tuple(grids["alphas"]) if "alphas" in grids else None,
        ranks=tuple(grids["ranks"]) if "ranks" in grids else None)

    if args.base_checkpoint or manifest.get("base_checkpoint"):
        base_model = load_checkpoint(args.base_checkpoint
                                     or manifest["base_checkpoint"])
    else:
        base_model = pretrain_base_model(max(200, len(dataset)), seed=seed)

    plan = kfold_split(len(dataset), k, seed)
    results = run_campaign(configs, dataset, workers, base_model, plan)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.jsonl").write_text(results_to_jsonl(results))
    with open(out / "metrics.jsonl", "w") as f:
        for i, r in enumerate(results):
            for m in r.epoch_metrics:
                f.write(json.dumps({
                    "task_id": f"{campaign}-{i:03d}", "fold": r.config.fold,
                    "batch": r.config.batch_size,
                    "lr": r.config.learning_rate,
                    "epochs_total": r.config.epochs, "epoch": m.epoch,
                    "train_loss": m.train_loss, "eval_loss": m.eval_loss,
                    "eval_wer": m.eval_wer, "wall_clock_s": m.wall_clock_s,
                }, sort_keys=True) + "\n")
    ok = sum(1 for r in results if r.status == "ok")
    print(f"grid {campaign}: trials={len(results)} ok={ok} "
          f"failed={len(results) - ok} k={k} seed={seed} out={args.out}")
    return 0


def cmd_report(args) -> int:
    results = []
    for path in args.results:
        if not Path(path).exists():
            raise UserError(f"results file not found: {path}")
        results.extend(load_results(path))
    bundle = aggregate(results)
    written, warnings = emit_report(bundle, args.out)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"report {args.out}: files={len(written)} "
          f"tables=4 figures={sum(1 for p in written if p.suffix == '.svg')}")
    return 0


_HANDLERS = {
    "synth": cmd_synth,
    "wer": cmd_wer,
    "train": cmd_train,
    "grid": cmd_grid,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "corpus":
            return cmd_corpus_prepare(args)
        return _HANDLERS[args.command](args)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AtcLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal invariant violation
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
