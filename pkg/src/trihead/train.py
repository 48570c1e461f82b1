"""Joint fine-tuning of encoder + pooler + three heads, and prediction.

One model serves all three tasks: the pooled sentence vector feeds an
aggression head, a gender-bias head, and a communal-bias head, and the
step loss is the weighted sum of their cross-entropies. The defaults
follow the published recipe: batch 8, dropout 0.3, linear LR schedule
from 2e-5. When a dev split is given, the checkpoint that scored the best
overall micro F1 is the one returned.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .autograd import Tensor, add, backward, cross_entropy, dropout, scale
from .encoder import EncoderConfig, encode_batch, init_encoder_params
from .errors import (
    CheckpointFormatError,
    ConfigError,
    DataError,
    DivergenceError,
    NonFiniteError,
)
from .metrics import TASK_LABELS, TASKS, MetricsReport, TriLabel, score_triples
from .optim import AdamW, clip_global_norm
from .optim import lr_at as lr_at  # schedule shape is tested through this module
from .pooling import (
    AttentionPoolerParams,
    TaskHead,
    attention_pool,
    fresh_heads,
    logits_for,
    mean_pool,
    named_head_params,
    predict_labels,
)
from .textpipe import EmojiMap, EncodedBatch, Vocab, batch_encode, normalize

POOLER_KINDS = ("attention", "mean")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int = 8
    dropout_p: float = 0.3
    base_lr: float = 2e-5
    warmup_steps: int = 0
    seed: int = 42
    pooler: str = "attention"
    task_loss_weights: tuple = (1.0, 1.0, 1.0)
    # parameter-name prefixes excluded from updates, e.g. ("pooler.",)
    freeze: tuple = ()

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.base_lr <= 0:
            raise ConfigError(f"base_lr must be positive, got {self.base_lr}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.warmup_steps < 0:
            raise ConfigError("warmup_steps must be nonnegative")
        if self.pooler not in POOLER_KINDS:
            raise ConfigError(f"pooler must be one of {POOLER_KINDS}, got {self.pooler!r}")
        w = tuple(float(x) for x in self.task_loss_weights)
        if len(w) != 3 or any(x < 0 for x in w) or not any(x > 0 for x in w):
            raise ConfigError(
                "task_loss_weights needs three nonnegative values, at least one positive"
            )
        object.__setattr__(self, "task_loss_weights", w)
        object.__setattr__(self, "freeze", tuple(self.freeze))


@dataclass
class EncoderInit:
    """How to start the encoder: fresh from the seed when params is None,
    otherwise from an already-trained parameter table (MLM warm start)."""

    config: EncoderConfig
    vocab: Vocab
    params: dict | None = None


@dataclass
class Checkpoint:
    """Everything prediction needs: config, vocabulary, parameters, the
    pooler kind, and run metadata. kind is 'model' for a full classifier,
    'encoder' for a pretraining-only parameter set."""

    kind: str
    config: EncoderConfig
    vocab: Vocab
    pooler_kind: str
    params: dict
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TraceRow:
    step: int
    lr: float
    loss: float
    loss_aggression: float
    loss_gender: float
    loss_communal: float


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    trace: list
    dev_history: list
    best_epoch: int | None


TRACE_FIELDS = ("step", "lr", "loss", "loss_aggression", "loss_gender", "loss_communal")


def trace_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_FIELDS)
    for r in rows:
        writer.writerow([r.step, repr(r.lr), repr(r.loss), repr(r.loss_aggression),
                         repr(r.loss_gender), repr(r.loss_communal)])
    return buf.getvalue()


def _heads_view(params: dict) -> dict:
    return {t: TaskHead(w=params[f"heads.{t}.w"], b=params[f"heads.{t}.b"]) for t in TASKS}


def forward_logits(params: dict, config: EncoderConfig, pooler_kind: str,
                   batch: EncodedBatch, mode: str = "eval", rng=None) -> dict:
    """Encoder → pooler → per-task logits, as a task-keyed dict.

    Dropout lands on the pooled vector for both pooler kinds (inside
    attention_pool for one, applied here for the other) so the two draw
    from the rng in the same order.
    """
    enc = {k[len("encoder."):]: v for k, v in params.items() if k.startswith("encoder.")}
    h = encode_batch(batch, enc, config, mode=mode, rng=rng)
    mask = batch.attention_mask
    if pooler_kind == "attention":
        pp = AttentionPoolerParams(q=params["pooler.q"], w_h=params["pooler.w_h"])
        pooled = attention_pool(h, mask, pp, mode=mode, dropout_p=config.dropout_p, rng=rng)
    elif pooler_kind == "mean":
        pooled = dropout(mean_pool(h, mask), config.dropout_p,
                         training=mode == "train", rng=rng)
    else:
        raise ConfigError(f"unknown pooler kind {pooler_kind!r}")
    heads = _heads_view(params)
    return {t: logits_for(pooled, heads[t]) for t in TASKS}


def init_model_params(config: EncoderConfig, pooler_kind: str, seed) -> dict:
    """Flat name → Tensor table for the full model ('encoder.' / 'pooler.' /
    'heads.' prefixes). Heads start at zero; the attention pooler starts as
    mean pooling."""
    flat = {f"encoder.{k}": v for k, v in init_encoder_params(config, seed).items()}
    if pooler_kind == "attention":
        flat.update(AttentionPoolerParams.fresh(config.d_model).named())
    elif pooler_kind != "mean":
        raise ConfigError(f"unknown pooler kind {pooler_kind!r}")
    flat.update(named_head_params(fresh_heads(config.d_model)))
    return flat


def _copy_params(params: dict) -> dict:
    out = {}
    for k, t in params.items():
        c = Tensor(t.data.copy(), requires_grad=t.requires_grad, dtype=t.data.dtype)
        out[k] = c
    return out


def _targets(dataset) -> dict:
    return {
        t: np.asarray([TASK_LABELS[t].index(ex.labels.get(t)) for ex in dataset],
                      dtype=np.int64)
        for t in TASKS
    }


def train(dataset, config: TrainConfig, encoder_init: EncoderInit,
          dev=None, emoji_map: EmojiMap | None = None) -> TrainResult:
    """Run the fine-tuning loop; returns the checkpoint, the per-step trace,
    and per-epoch dev reports when a dev split was given.

    Deterministic: the seed drives init, batch order, and dropout through
    independent streams, so identical (seed, config, data) means identical
    parameters.
    """
    dataset = list(dataset)
    if not dataset:
        raise DataError("train: empty dataset")
    enc_config = replace(encoder_init.config, dropout_p=config.dropout_p)
    vocab = encoder_init.vocab

    texts = [normalize(ex.text, emoji_map) for ex in dataset]
    encoded = batch_encode(texts, vocab, enc_config.max_len)
    targets = _targets(dataset)

    ss_init, ss_order, ss_drop = np.random.SeedSequence(config.seed).spawn(3)
    params = init_model_params(enc_config, config.pooler, ss_init)
    if encoder_init.params is not None:
        for name, tensor in encoder_init.params.items():
            key = name if name.startswith("encoder.") else f"encoder.{name}"
            if key not in params:
                raise ConfigError(f"pretrained encoder has unexpected parameter {name!r}")
            if params[key].shape != tensor.shape:
                raise ConfigError(
                    f"pretrained parameter {name!r} has shape {tensor.shape}, "
                    f"expected {params[key].shape}"
                )
            params[key] = Tensor(tensor.data.copy(), requires_grad=True,
                                 dtype=tensor.data.dtype)
    for name, tensor in params.items():
        if any(name.startswith(prefix) for prefix in config.freeze):
            tensor.requires_grad = False

    rng_order = np.random.default_rng(ss_order)
    rng_drop = np.random.default_rng(ss_drop)
    opt = AdamW(params)

    n = len(dataset)
    batches_per_epoch = (n + config.batch_size - 1) // config.batch_size
    total_steps = config.epochs * batches_per_epoch
    weights = config.task_loss_weights

    trace: list[TraceRow] = []
    dev_history: list[MetricsReport] = []
    best: tuple[float, dict, int] | None = None
    step = 0
    for epoch in range(config.epochs):
        order = rng_order.permutation(n)
        for start in range(0, n, config.batch_size):
            pick = order[start:start + config.batch_size]
            batch = EncodedBatch(token_ids=encoded.token_ids[pick],
                                 attention_mask=encoded.attention_mask[pick])
            try:
                logits = forward_logits(params, enc_config, config.pooler, batch,
                                        mode="train", rng=rng_drop)
                task_losses = {t: cross_entropy(logits[t], targets[t][pick])
                               for t in TASKS}
            except NonFiniteError:
                # activations blew up before the loss could; same disease
                raise DivergenceError(step) from None
            loss = add(add(scale(task_losses["aggression"], weights[0]),
                           scale(task_losses["gender"], weights[1])),
                       scale(task_losses["communal"], weights[2]))
            loss_value = loss.item()
            if not np.isfinite(loss_value):
                raise DivergenceError(step)
            lr = lr_at(step, total_steps, config)
            opt.zero_grad()
            backward(loss)
            clip_global_norm(params, 1.0)
            opt.step(lr)
            trace.append(TraceRow(step, lr, loss_value,
                                  task_losses["aggression"].item(),
                                  task_losses["gender"].item(),
                                  task_losses["communal"].item()))
            step += 1
        if dev is not None:
            report = _evaluate_params(params, enc_config, config.pooler, vocab,
                                      dev, emoji_map)
            dev_history.append(report)
            if best is None or report.overall_micro_f1 > best[0]:
                best = (report.overall_micro_f1, _copy_params(params), epoch)

    if best is not None:
        final_params, best_epoch = best[1], best[2]
    else:
        final_params, best_epoch = params, None
    meta = {
        "seed": config.seed,
        "epochs": config.epochs,
        "steps": total_steps,
        "pooler": config.pooler,
        "best_epoch": best_epoch,
        "final_dev_overall_micro_f1": best[0] if best is not None else None,
        "emoji_map": dict(emoji_map.entries) if emoji_map is not None else {},
    }
    checkpoint = Checkpoint(kind="model", config=enc_config, vocab=vocab,
                            pooler_kind=config.pooler, params=final_params, meta=meta)
    return TrainResult(checkpoint=checkpoint, trace=trace,
                       dev_history=dev_history, best_epoch=best_epoch)


def _predict_encoded(params, config, pooler_kind, encoded: EncodedBatch,
                     chunk: int = 64) -> list:
    # argmax over logits equals argmax over softmax, so the heads' scores
    # go straight to the label picker
    triples = []
    n = encoded.token_ids.shape[0]
    for start in range(0, n, chunk):
        piece = EncodedBatch(token_ids=encoded.token_ids[start:start + chunk],
                             attention_mask=encoded.attention_mask[start:start + chunk])
        logits = forward_logits(params, config, pooler_kind, piece, mode="eval")
        triples.extend(predict_labels(logits))
    return triples


def predict(checkpoint: Checkpoint, texts) -> list:
    """Labels for raw texts: normalize, encode, eval-mode forward, argmax
    per task (ties take the lower class index). Returns TriLabels."""
    if checkpoint.kind != "model":
        raise CheckpointFormatError(
            f"prediction needs a full model checkpoint, got kind {checkpoint.kind!r}"
        )
    texts = list(texts)
    if not texts:
        return []
    emoji_map = None
    if checkpoint.meta.get("emoji_map"):
        emoji_map = EmojiMap(checkpoint.meta["emoji_map"])
    cleaned = [normalize(t, emoji_map) for t in texts]
    encoded = batch_encode(cleaned, checkpoint.vocab, checkpoint.config.max_len)
    triples = _predict_encoded(checkpoint.params, checkpoint.config,
                               checkpoint.pooler_kind, encoded)
    return [TriLabel(*t) for t in triples]


def _evaluate_params(params, config, pooler_kind, vocab, dataset, emoji_map) -> MetricsReport:
    texts = [normalize(ex.text, emoji_map) for ex in dataset]
    encoded = batch_encode(texts, vocab, config.max_len)
    triples = _predict_encoded(params, config, pooler_kind, encoded)
    return score_triples([ex.labels for ex in dataset], [TriLabel(*t) for t in triples])


def evaluate(checkpoint: Checkpoint, dataset) -> MetricsReport:
    """Predict the dataset's texts and score them against its gold labels."""
    dataset = list(dataset)
    if not dataset:
        raise DataError("evaluate: empty dataset")
    gold = [ex.labels for ex in dataset]
    pred = predict(checkpoint, [ex.text for ex in dataset])
    return score_triples(gold, pred)
