"""Command-line surface: pretrain, train, eval, predict, score, stats.

Every run is a single non-interactive process. Settings come from an
optional flat JSON config file; explicitly-given flags win over file
values, file values win over built-in defaults. The seed in effect is
printed at the top of every report so a result can always be traced back
to its run.

Exit codes: 0 success, 2 configuration problem (bad flag, bad config key),
3 data problem (unreadable file, bad label, missing prediction), 4 the
run diverged.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from .data import (
    Example,
    class_distribution,
    load_checkpoint,
    load_dataset,
    load_labels,
    load_prediction_input,
    save_checkpoint,
    write_dataset,
)
from .encoder import EncoderConfig, PretrainSchedule, pretrain_mlm
from .errors import CheckpointFormatError, ConfigError, DataError, DivergenceError
from .metrics import score_triples
from .textpipe import EmojiMap, balance, build_vocab, normalize
from .train import (
    Checkpoint,
    EncoderInit,
    TrainConfig,
    evaluate,
    predict,
    trace_to_csv,
    train,
)


@dataclass
class RunConfig:
    """Union of everything a command can be told, flat on purpose so the
    JSON file stays a single skimmable object."""

    # encoder shape
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 2
    d_ff: int = 128
    max_len: int = 48
    dropout_p: float = 0.3
    # fine-tuning
    epochs: int = 5
    batch_size: int = 8
    base_lr: float = 2e-5
    warmup_steps: int = 0
    seed: int = 42
    pooler: str = "attention"
    task_loss_weights: tuple = (1.0, 1.0, 1.0)
    freeze: tuple = ()
    # text pipeline
    vocab_target_size: int = 200
    balance: bool = False
    # masked-token pretraining
    pretrain_steps: int = 300
    pretrain_batch_size: int = 8
    pretrain_lr: float = 1e-3
    pretrain_mask_rate: float = 0.15
    # paths
    data: str | None = None
    dev: str | None = None
    emoji_map: str | None = None
    encoder: str | None = None
    out: str | None = None


_CONFIG_KEYS = {f.name for f in dataclasses.fields(RunConfig)}


def _load_run_config(config_path, flag_values: dict) -> RunConfig:
    """Defaults, then config-file values, then explicitly-passed flags."""
    merged: dict = {}
    if config_path is not None:
        try:
            raw = Path(config_path).read_text(encoding="utf-8")
        except OSError as e:
            raise DataError(f"cannot read config file: {e}") from None
        try:
            file_values = json.loads(raw)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{config_path}: not valid JSON: {e}") from None
        if not isinstance(file_values, dict):
            raise ConfigError(f"{config_path}: config must be a JSON object")
        unknown = sorted(set(file_values) - _CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"{config_path}: unknown config keys {unknown}")
        merged.update(file_values)
    merged.update({k: v for k, v in flag_values.items()
                   if k in _CONFIG_KEYS and v is not None})
    cfg = RunConfig(**merged)
    for name in ("task_loss_weights", "freeze"):
        value = getattr(cfg, name)
        if isinstance(value, list):
            setattr(cfg, name, tuple(value))
    return cfg


def _require(cfg: RunConfig, field: str, flag: str) -> str:
    value = getattr(cfg, field)
    if value is None:
        raise ConfigError(f"missing {flag} (flag or config key {field!r})")
    return value


def _print_report(report, seed: int) -> None:
    print(f"# seed {seed}")
    print(report.to_table())
    print(report.to_json())


def _load_emoji_map(cfg: RunConfig):
    return EmojiMap.from_tsv(cfg.emoji_map) if cfg.emoji_map else None


def _train_config(cfg: RunConfig) -> TrainConfig:
    return TrainConfig(
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        dropout_p=cfg.dropout_p,
        base_lr=cfg.base_lr,
        warmup_steps=cfg.warmup_steps,
        seed=cfg.seed,
        pooler=cfg.pooler,
        task_loss_weights=tuple(cfg.task_loss_weights),
        freeze=tuple(cfg.freeze),
    )


def _encoder_config(cfg: RunConfig, vocab_size: int) -> EncoderConfig:
    return EncoderConfig(
        vocab_size=vocab_size,
        d_model=cfg.d_model,
        n_layers=cfg.n_layers,
        n_heads=cfg.n_heads,
        d_ff=cfg.d_ff,
        max_len=cfg.max_len,
        dropout_p=cfg.dropout_p,
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    cfg = _load_run_config(args.config, vars(args))
    dataset = load_dataset(_require(cfg, "data", "--data"))
    dev = load_dataset(cfg.dev) if cfg.dev else None
    emoji_map = _load_emoji_map(cfg)

    if cfg.encoder:
        warm = load_checkpoint(cfg.encoder)
        if warm.kind != "encoder":
            raise CheckpointFormatError(
                f"{cfg.encoder}: --encoder wants an encoder-only checkpoint, "
                f"got kind {warm.kind!r}"
            )
        init = EncoderInit(config=warm.config, vocab=warm.vocab,
                           params=warm.params)
    else:
        texts = [normalize(ex.text, emoji_map=emoji_map) for ex in dataset]
        vocab = build_vocab(texts, target_size=cfg.vocab_target_size)
        init = EncoderInit(config=_encoder_config(cfg, vocab.size), vocab=vocab)

    if cfg.balance:
        dataset = balance(dataset, seed=cfg.seed)

    result = train(dataset, _train_config(cfg), init, dev=dev,
                   emoji_map=emoji_map)

    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(result.checkpoint, out / "model.ckpt")
        (out / "trace.csv").write_text(trace_to_csv(result.trace),
                                       encoding="utf-8")

    if dev is not None and result.best_epoch is not None:
        report = result.dev_history[result.best_epoch]
    else:
        report = evaluate(result.checkpoint, dataset)
    _print_report(report, cfg.seed)
    return 0


def cmd_eval(args) -> int:
    cfg = _load_run_config(args.config, vars(args))
    checkpoint = load_checkpoint(args.model)
    dataset = load_dataset(_require(cfg, "data", "--data"))
    _print_report(evaluate(checkpoint, dataset), cfg.seed)
    return 0


def cmd_predict(args) -> int:
    cfg = _load_run_config(args.config, vars(args))
    checkpoint = load_checkpoint(args.model)
    pairs = load_prediction_input(args.input)
    labels = predict(checkpoint, [text for _, text in pairs])
    rows = [Example(id=row_id, text=text, labels=lab)
            for (row_id, text), lab in zip(pairs, labels)]
    write_dataset(rows, args.output)
    print(f"# seed {cfg.seed}")
    print(f"wrote {len(rows)} predictions to {args.output}")
    return 0


def cmd_score(args) -> int:
    cfg = _load_run_config(args.config, vars(args))
    gold = load_labels(args.gold)
    pred = load_labels(args.pred)
    missing = [i for i in gold if i not in pred]
    if missing:
        shown = ", ".join(repr(i) for i in missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise DataError(f"{args.pred}: missing predictions for ids {shown}{more}")
    extra = [i for i in pred if i not in gold]
    if extra:
        shown = ", ".join(repr(i) for i in extra[:10])
        more = f" (+{len(extra) - 10} more)" if len(extra) > 10 else ""
        raise DataError(f"{args.pred}: predictions for unknown ids {shown}{more}")
    ids = list(gold)
    report = score_triples([gold[i] for i in ids], [pred[i] for i in ids])
    _print_report(report, cfg.seed)
    return 0


def cmd_stats(args) -> int:
    cfg = _load_run_config(args.config, vars(args))
    table = class_distribution(load_dataset(_require(cfg, "data", "--data")))
    print(f"# seed {cfg.seed}")
    print(table.to_table())
    print(table.to_json())
    return 0


def cmd_pretrain(args) -> int:
    cfg = _load_run_config(args.config, vars(args))
    corpus_path = _require(cfg, "data", "--corpus")
    try:
        raw = Path(corpus_path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read corpus: {e}") from None
    emoji_map = _load_emoji_map(cfg)
    sentences = [normalize(line, emoji_map=emoji_map)
                 for line in raw.split("\n") if line.strip()]
    sentences = [s for s in sentences if s]
    if not sentences:
        raise DataError(f"{corpus_path}: no usable sentences")

    vocab = build_vocab(sentences, target_size=cfg.vocab_target_size)
    config = _encoder_config(cfg, vocab.size)
    schedule = PretrainSchedule(
        steps=cfg.pretrain_steps,
        batch_size=cfg.pretrain_batch_size,
        base_lr=cfg.pretrain_lr,
        warmup_steps=cfg.warmup_steps,
        mask_rate=cfg.pretrain_mask_rate,
        seed=cfg.seed,
    )
    params, losses = pretrain_mlm(sentences, vocab, config, schedule)

    out = Path(_require(cfg, "out", "--out"))
    out.mkdir(parents=True, exist_ok=True)
    meta = {"seed": cfg.seed, "steps": schedule.steps,
            "initial_loss": losses[0], "final_loss": losses[-1]}
    if emoji_map is not None:
        meta["emoji_map"] = {k: v for k, v in emoji_map.entries.items()}
    checkpoint = Checkpoint(kind="encoder", config=config, vocab=vocab,
                            pooler_kind="none", params=params, meta=meta)
    save_checkpoint(checkpoint, out / "encoder.ckpt")
    trace = "step,loss\n" + "".join(f"{i},{repr(v)}\n"
                                    for i, v in enumerate(losses))
    (out / "pretrain_trace.csv").write_text(trace, encoding="utf-8")

    print(f"# seed {cfg.seed}")
    print(f"pretrained {schedule.steps} steps on {len(sentences)} sentences")
    print(f"masked-token loss {repr(losses[0])} -> {repr(losses[-1])}")
    print(f"wrote {out / 'encoder.ckpt'}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None,
                   help="flat JSON file with any RunConfig keys")
    p.add_argument("--seed", type=int, default=None)


def _add_model_shape_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--d-model", dest="d_model", type=int, default=None)
    p.add_argument("--n-layers", dest="n_layers", type=int, default=None)
    p.add_argument("--n-heads", dest="n_heads", type=int, default=None)
    p.add_argument("--d-ff", dest="d_ff", type=int, default=None)
    p.add_argument("--max-len", dest="max_len", type=int, default=None)
    p.add_argument("--dropout", dest="dropout_p", type=float, default=None)
    p.add_argument("--vocab-target-size", dest="vocab_target_size",
                   type=int, default=None)
    p.add_argument("--emoji-map", dest="emoji_map", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trihead",
        description="Train and evaluate the three-task comment classifier.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fine-tune a classifier on a labeled TSV")
    p.add_argument("--data", default=None, help="labeled training TSV")
    p.add_argument("--dev", default=None, help="labeled dev TSV for model selection")
    p.add_argument("--out", default=None, help="directory for checkpoint + trace")
    p.add_argument("--pooler", choices=("attention", "mean"), default=None)
    p.add_argument("--encoder", default=None,
                   help="warm-start from a pretrained encoder checkpoint "
                        "(its vocabulary and shape take over)")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--base-lr", dest="base_lr", type=float, default=None)
    p.add_argument("--warmup-steps", dest="warmup_steps", type=int, default=None)
    p.add_argument("--balance", action="store_true", default=None,
                   help="oversample rarer aggression classes to parity")
    _add_model_shape_flags(p)
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint against a labeled TSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="label new texts with a checkpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True,
                   help="id/text TSV (labels, if present, are ignored)")
    p.add_argument("--output", required=True, help="labeled TSV to write")
    _add_config_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("score", help="score a prediction file against gold labels")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("stats", help="print the class distribution of a dataset")
    p.add_argument("--data", default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("pretrain", help="train an encoder on raw sentences")
    p.add_argument("--corpus", dest="data", default=None,
                   help="plain text file, one sentence per line")
    p.add_argument("--out", default=None, help="directory for the encoder checkpoint")
    p.add_argument("--steps", dest="pretrain_steps", type=int, default=None)
    p.add_argument("--batch-size", dest="pretrain_batch_size", type=int, default=None)
    p.add_argument("--lr", dest="pretrain_lr", type=float, default=None)
    p.add_argument("--mask-rate", dest="pretrain_mask_rate", type=float, default=None)
    _add_model_shape_flags(p)
    _add_config_flags(p)
    p.set_defaults(func=cmd_pretrain)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code else 0
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (DataError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except DivergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
