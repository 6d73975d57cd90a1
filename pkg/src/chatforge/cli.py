"""Single entry point driving the pipeline, metrics, trainer, tuner, and gateway.

Exit codes: 0 success, 1 validation/usage error (bad flags, missing files),
2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from . import pipeline as pipeline_mod
from .gateway import GatewayApp, GatewayConfigError, load_gateway_config, serve_forever
from .training import (
    LoraAdapter,
    LrSchedule,
    SearchSpace,
    TinyLM,
    TrainingConfig,
    UnfreezePlan,
    generate_responses,
    load_checkpoint,
    read_history,
    split_pairs,
    train,
    tune,
    write_manifest,
)
from .training.loop import manifest_path_for


class CliError(Exception):
    """Validation problem; exits with status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse exits 2 by default; the CLI contract reserves 2 for
        # runtime failures and uses 1 for usage problems.
        self.print_usage(sys.stderr)
        raise CliError(message)


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"file not found: {path}")
    return p


def _load_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError(f"{path} is not valid JSON: {exc}") from exc


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_pipeline(args) -> int:
    in_path = _require_file(args.infile)
    cfg_kwargs: dict = {}
    if args.config:
        raw = _load_json(_require_file(args.config))
        cfg_kwargs = {
            key: raw[key]
            for key in ("min_words", "max_seq_len", "offensive_lexicon", "lowercase", "strip_nontext")
            if key in raw
        }
        if "pii_rules" in raw:
            cfg_kwargs["pii_rules"] = [tuple(rule) for rule in raw["pii_rules"]]
    if "offensive_lexicon" not in cfg_kwargs:
        cfg_kwargs["offensive_lexicon"] = Path(
            str(resources.files("chatforge").joinpath("data", "offensive_lexicon.txt"))
        )
    try:
        cfg = pipeline_mod.PipelineConfig(**cfg_kwargs)
        stats = pipeline_mod.run_pipeline_file(in_path, args.out, cfg)
    except pipeline_mod.ConfigError as exc:
        raise CliError(str(exc)) from exc
    print(json.dumps(stats.to_dict(), indent=2))
    return 0


def _cmd_eval(args) -> int:
    pairs_path = _require_file(args.pairs)
    pairs = []
    with pairs_path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                pairs.append(metrics_mod.EvalPair(obj["candidate"], list(obj["references"])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CliError(f"{pairs_path}:{line_no}: bad pair record ({exc})") from exc
    if not pairs:
        raise CliError(f"{pairs_path} contains no pairs")
    report = metrics_mod.evaluate_corpus(pairs)
    payload = json.dumps(report.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
    print(payload)
    return 0


def _training_setup(raw: dict, seed_override=None):
    training_kwargs = dict(raw.get("training", {}))
    if seed_override is not None:
        training_kwargs["seed"] = seed_override
    cfg = TrainingConfig(**training_kwargs)
    schedule = LrSchedule(**raw["schedule"]) if "schedule" in raw else None
    plan = None
    if raw.get("unfreeze"):
        plan = UnfreezePlan(stages=[(n, frozenset(groups)) for n, groups in raw["unfreeze"]])
    model_raw = raw.get("model", {})
    return cfg, schedule, plan, model_raw


def _cmd_train(args) -> int:
    corpus_path = _require_file(args.corpus)
    raw = _load_json(_require_file(args.config)) if args.config else {}
    try:
        cfg, schedule, plan, model_raw = _training_setup(raw, args.seed)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad training config: {exc}") from exc

    pairs = list(pipeline_mod.load_pairs(corpus_path))
    if not pairs:
        raise CliError(f"{corpus_path} contains no training pairs")
    from .training.data import build_vocab

    vocab = build_vocab(pairs)
    model = TinyLM(
        vocab_size=len(vocab),
        hidden=model_raw.get("hidden", 32),
        seed=model_raw.get("seed", cfg.seed),
    )
    adapter = None
    if model_raw.get("lora"):
        lora_raw = model_raw["lora"]
        adapter = LoraAdapter.init(
            d_out=model.vocab_size,
            d_in=model.hidden,
            rank=lora_raw.get("rank", 8),
            alpha=lora_raw.get("alpha", 32.0),
            rng=np.random.default_rng(cfg.seed),
        )
        if lora_raw.get("freeze_base", False):
            if plan is not None:
                raise CliError("lora.freeze_base conflicts with an explicit unfreeze plan")
            plan = UnfreezePlan(stages=[(cfg.epochs, frozenset())])

    history_path = Path(args.history)
    checkpoint_dir = Path(args.checkpoint_dir) if args.checkpoint_dir else history_path.parent / (
        history_path.stem + "_ckpt"
    )
    history = train(
        model,
        pairs,
        cfg,
        schedule=schedule,
        plan=plan,
        adapter=adapter,
        vocab=vocab,
        checkpoint_dir=checkpoint_dir,
    )
    history.write(history_path)
    steps = history.planned_steps
    resolved_schedule = (schedule or LrSchedule(warmup_steps=min(500, steps // 10))).resolved(steps)
    write_manifest(
        manifest_path_for(history_path),
        str(corpus_path),
        cfg,
        resolved_schedule,
        model,
        vocab,
        history,
    )
    print(
        json.dumps(
            {
                "steps": history.completed_steps,
                "eval_points": len(history.eval_points),
                "final_val_perplexity": history.final_val_perplexity,
                "best_step": history.best_step,
                "best_val_perplexity": history.best_metric,
                "stopped_early": history.stopped_early,
            },
            indent=2,
        )
    )
    return 0


def _cmd_tune(args) -> int:
    corpus_path = _require_file(args.corpus)
    pairs = list(pipeline_mod.load_pairs(corpus_path))
    if not pairs:
        raise CliError(f"{corpus_path} contains no training pairs")
    base_cfg = TrainingConfig(seed=args.seed, eval_every_steps=0, dropout=0.0)
    best, trials = tune(SearchSpace(), args.trials, args.seed, pairs, base_cfg=base_cfg)
    if args.out:
        with Path(args.out).open("w", encoding="utf-8") as handle:
            for trial in trials:
                handle.write(json.dumps(trial.to_dict()) + "\n")
    print(
        json.dumps(
            {"best": best, "objectives": [t.objective for t in trials]},
            indent=2,
        )
    )
    return 0


def _cmd_serve(args) -> int:
    try:
        cfg = load_gateway_config(_require_file(args.config))
        app = GatewayApp(cfg)
    except GatewayConfigError as exc:
        raise CliError(str(exc)) from exc
    serve_forever(app)
    return 0


def _cmd_curves(args) -> int:
    history_path = _require_file(args.history)
    manifest_path = manifest_path_for(history_path)
    if not manifest_path.is_file():
        raise CliError(f"file not found: {manifest_path} (run `train` with this history first)")
    manifest = _load_json(manifest_path)
    rows = read_history(history_path)
    if not rows:
        raise CliError(f"{history_path} has no evaluation points")

    corpus_path = Path(manifest["corpus"])
    if not corpus_path.is_file():
        raise CliError(f"file not found: {corpus_path} (referenced by {manifest_path})")
    pairs = list(pipeline_mod.load_pairs(corpus_path))
    _, val_pairs = split_pairs(pairs, manifest["val_fraction"], manifest["seed"])
    if not val_pairs:
        val_pairs = pairs
    vocab = {tok: i for i, tok in enumerate(manifest["vocab"])}
    steps_per_epoch = max(int(manifest.get("steps_per_epoch", 1)), 1)
    checkpoints = sorted(manifest["checkpoints"], key=lambda c: c["step"])
    if not checkpoints:
        raise CliError("manifest lists no checkpoints; re-run train with a checkpoint dir")

    bleu_cfg = metrics_mod.BleuConfig(smoothing="add_epsilon")
    out_path = Path(args.out)
    with out_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["epoch", "bleu", "rouge_1", "coherence", "distinct_1", "distinct_2", "val_perplexity"]
        )
        for row in rows:
            step = row["step"]
            usable = [c for c in checkpoints if c["step"] <= step]
            if not usable:
                raise CliError(f"no checkpoint at or before step {step}")
            ckpt = usable[-1]
            model = load_checkpoint(ckpt["path"])
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=manifest["seed"], spawn_key=(3, step))
            )
            candidates = generate_responses(model, val_pairs, vocab, rng)
            eval_pairs = [
                metrics_mod.EvalPair(candidate=cand, references=[pair.response_tokens])
                for cand, pair in zip(candidates, val_pairs)
            ]
            report = metrics_mod.evaluate_corpus(eval_pairs, cfg=bleu_cfg)

            def fmt(value):
                return "" if value is None else format(value, ".12g")

            writer.writerow(
                [
                    step // steps_per_epoch,
                    fmt(report.bleu),
                    fmt(report.rouge_1),
                    fmt(report.coherence),
                    fmt(report.distinct_1),
                    fmt(report.distinct_2),
                    fmt(row["val_perplexity"]),
                ]
            )
    print(f"wrote {out_path}")
    return 0


# ---------------------------------------------------------------------------
# Argument wiring
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chatforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("pipeline", help="clean and anonymize a raw JSONL corpus")
    p.add_argument("--in", dest="infile", required=True, help="raw records JSONL")
    p.add_argument("--out", required=True, help="cleaned pairs JSONL")
    p.add_argument("--config", help="pipeline config JSON")
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("eval", help="score candidate/reference pairs")
    p.add_argument("--pairs", required=True, help="JSONL of {id, candidate, references}")
    p.add_argument("--out", help="write the MetricReport JSON here as well")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("train", help="run the instrumented fine-tuning loop")
    p.add_argument("--corpus", required=True, help="pipeline-output pairs JSONL")
    p.add_argument("--config", help="training config JSON")
    p.add_argument("--history", required=True, help="history JSONL to write")
    p.add_argument("--checkpoint-dir", help="defaults next to the history file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("tune", help="seeded random hyperparameter search")
    p.add_argument("--corpus", required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="trial log JSONL")
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("serve", help="run the chat gateway until interrupted")
    p.add_argument("--config", required=True, help="gateway config JSON")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("curves", help="per-epoch metric curves from a training history")
    p.add_argument("--history", required=True)
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=_cmd_curves)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            print("chatforge: a subcommand is required", file=sys.stderr)
            return 1
        return args.func(args)
    except CliError as exc:
        print(f"chatforge: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 0
    except Exception as exc:  # runtime failure
        print(f"chatforge: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
