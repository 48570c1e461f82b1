"""Dataset files, class-distribution tables, and the checkpoint format.

Datasets are UTF-8 TSV with the header
``id<TAB>text<TAB>aggression<TAB>gender<TAB>communal``; label columns come
from their closed sets. TSV was picked over CSV because scraped comments
are full of commas and quotes; a tab or newline inside a text field is a
load error rather than a quoting puzzle.

Checkpoints are a single binary file: magic ``TRHD``, a little-endian
u32 format version, a length-prefixed canonical-JSON header (config,
vocabulary, parameter table, metadata), then the raw float32 parameter
blobs in header order. The header is printable with one `jq`-able read;
the blobs round-trip bit for bit; nothing in the file is executed.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autograd import Tensor
from .encoder import EncoderConfig
from .errors import CheckpointFormatError, DataError
from .metrics import TriLabel
from .textpipe import Vocab
from .train import Checkpoint

DATASET_HEADER = ("id", "text", "aggression", "gender", "communal")
PREDICTION_HEADER = ("id", "text")
LABELS_HEADER = ("id", "aggression", "gender", "communal")

CHECKPOINT_MAGIC = b"TRHD"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Example:
    id: str
    text: str
    labels: TriLabel


@dataclass(frozen=True)
class DistributionTable:
    """Per-class counts in the shape of the published dataset tables."""

    nag: int
    cag: int
    oag: int
    ngen: int
    gen: int
    ncom: int
    com: int
    total: int

    def __post_init__(self):
        sums = (self.nag + self.cag + self.oag,
                self.ngen + self.gen,
                self.ncom + self.com)
        if any(s != self.total for s in sums):
            raise DataError(
                f"distribution sums {sums} disagree with total {self.total}"
            )

    def to_json(self) -> str:
        payload = {
            "NAG": self.nag, "CAG": self.cag, "OAG": self.oag,
            "NGEN": self.ngen, "GEN": self.gen,
            "NCOM": self.ncom, "COM": self.com,
            "total": self.total,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def to_table(self) -> str:
        rows = [("NAG", self.nag), ("CAG", self.cag), ("OAG", self.oag),
                ("NGEN", self.ngen), ("GEN", self.gen),
                ("NCOM", self.ncom), ("COM", self.com),
                ("total", self.total)]
        return "\n".join(f"{name:<6} {count:>7}" for name, count in rows)


def _read_rows(path, expected_header: tuple):
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DataError(f"{path}: empty file, expected header {_fmt_header(expected_header)}")
    header = tuple(lines[0].split("\t"))
    if header != expected_header:
        raise DataError(
            f"{path}:1: bad header {_fmt_header(header)}, expected {_fmt_header(expected_header)}"
        )
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != len(expected_header):
            raise DataError(
                f"{path}:{lineno}: expected {len(expected_header)} columns, got {len(fields)}"
            )
        yield lineno, fields


def _fmt_header(header) -> str:
    return "/".join(header)


def load_dataset(path, allow_empty_text: bool = False) -> list:
    """Parse a labeled TSV into Examples; every label is validated against
    its closed set, ids must be unique, and a header-only file is simply an
    empty dataset."""
    examples = []
    seen = set()
    for lineno, (row_id, text, agg, gen, com) in _read_rows(path, DATASET_HEADER):
        if row_id in seen:
            raise DataError(f"{path}:{lineno}: duplicate id {row_id!r}")
        seen.add(row_id)
        if not text and not allow_empty_text:
            raise DataError(f"{path}:{lineno}: empty text for id {row_id!r}")
        try:
            labels = TriLabel(agg, gen, com)
        except DataError as e:
            raise DataError(f"{path}:{lineno} (id {row_id!r}): {e}") from None
        examples.append(Example(id=row_id, text=text, labels=labels))
    return examples


def write_dataset(examples, path) -> None:
    lines = ["\t".join(DATASET_HEADER)]
    for ex in examples:
        for piece, what in ((ex.id, "id"), (ex.text, "text")):
            if "\t" in piece or "\n" in piece:
                raise DataError(f"{what} of {ex.id!r} contains a tab or newline")
        lines.append("\t".join((ex.id, ex.text, ex.labels.aggression,
                                ex.labels.gender, ex.labels.communal)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_prediction_input(path) -> list:
    """Rows to predict: (id, text) pairs from either a bare id/text TSV or a
    full labeled dataset file (labels ignored)."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
    if tuple(first.split("\t")) == DATASET_HEADER:
        return [(ex.id, ex.text) for ex in load_dataset(path, allow_empty_text=True)]
    pairs = []
    seen = set()
    for lineno, (row_id, text) in _read_rows(path, PREDICTION_HEADER):
        if row_id in seen:
            raise DataError(f"{path}:{lineno}: duplicate id {row_id!r}")
        seen.add(row_id)
        pairs.append((row_id, text))
    return pairs


def load_labels(path) -> dict:
    """id → TriLabel from either a full dataset file or a text-less
    id + three-label TSV (the shape a scorer receives)."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
    if tuple(first.split("\t")) == DATASET_HEADER:
        return {ex.id: ex.labels for ex in load_dataset(path, allow_empty_text=True)}
    out = {}
    for lineno, (row_id, agg, gen, com) in _read_rows(path, LABELS_HEADER):
        if row_id in out:
            raise DataError(f"{path}:{lineno}: duplicate id {row_id!r}")
        try:
            out[row_id] = TriLabel(agg, gen, com)
        except DataError as e:
            raise DataError(f"{path}:{lineno} (id {row_id!r}): {e}") from None
    return out


def class_distribution(dataset) -> DistributionTable:
    counts = {"NAG": 0, "CAG": 0, "OAG": 0, "NGEN": 0, "GEN": 0, "NCOM": 0, "COM": 0}
    for ex in dataset:
        counts[ex.labels.aggression] += 1
        counts[ex.labels.gender] += 1
        counts[ex.labels.communal] += 1
    return DistributionTable(
        nag=counts["NAG"], cag=counts["CAG"], oag=counts["OAG"],
        ngen=counts["NGEN"], gen=counts["GEN"],
        ncom=counts["NCOM"], com=counts["COM"],
        total=len(dataset),
    )


# ---------------------------------------------------------------------------
# checkpoint file format


def _config_to_dict(config: EncoderConfig) -> dict:
    return {
        "vocab_size": config.vocab_size,
        "d_model": config.d_model,
        "n_layers": config.n_layers,
        "n_heads": config.n_heads,
        "d_ff": config.d_ff,
        "max_len": config.max_len,
        "dropout_p": config.dropout_p,
    }


def save_checkpoint(checkpoint: Checkpoint, path) -> None:
    """Write the single-file format described at module top. Parameters must
    be float32 (the training dtype); the blobs are raw and bit-exact."""
    for name, t in checkpoint.params.items():
        if t.data.dtype != np.float32:
            raise DataError(f"checkpoint parameter {name!r} is {t.data.dtype}, "
                            "only float32 checkpoints are written")
        if not np.isfinite(t.data).all():
            raise DataError(f"checkpoint parameter {name!r} contains NaN or Inf")
    header = {
        "kind": checkpoint.kind,
        "encoder_config": _config_to_dict(checkpoint.config),
        "vocab": list(checkpoint.vocab.tokens),
        "pooler": checkpoint.pooler_kind,
        "params": [{"name": n, "shape": list(t.shape)}
                   for n, t in checkpoint.params.items()],
        "meta": checkpoint.meta,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for t in checkpoint.params.values():
            fh.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())


def load_checkpoint(path) -> Checkpoint:
    """Read a checkpoint file back; every structural problem gets its own
    message (magic, version, header, truncation, trailing garbage)."""
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise CheckpointFormatError(f"{path}: file too short to be a checkpoint")
    if raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(
            f"{path}: bad magic {raw[:4]!r}, expected {CHECKPOINT_MAGIC!r}"
        )
    (version,) = struct.unpack("<I", raw[4:8])
    if version != CHECKPOINT_VERSION:
        raise CheckpointFormatError(
            f"{path}: unsupported version {version}, this build reads {CHECKPOINT_VERSION}"
        )
    (header_len,) = struct.unpack("<I", raw[8:12])
    if len(raw) < 12 + header_len:
        raise CheckpointFormatError(f"{path}: truncated header")
    try:
        header = json.loads(raw[12:12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"{path}: unreadable header: {e}") from None
    required = {"kind", "encoder_config", "vocab", "pooler", "params", "meta"}
    missing = required - set(header)
    if missing:
        raise CheckpointFormatError(f"{path}: header missing keys {sorted(missing)}")
    if header["kind"] not in ("model", "encoder"):
        raise CheckpointFormatError(f"{path}: unknown checkpoint kind {header['kind']!r}")

    try:
        config = EncoderConfig(**header["encoder_config"])
        vocab = Vocab(header["vocab"])
    except (TypeError, ValueError) as e:
        raise CheckpointFormatError(f"{path}: invalid header contents: {e}") from None
    if config.vocab_size != vocab.size:
        raise CheckpointFormatError(
            f"{path}: config says vocab_size {config.vocab_size}, "
            f"vocabulary has {vocab.size} tokens"
        )

    params: dict[str, Tensor] = {}
    offset = 12 + header_len
    for entry in header["params"]:
        if set(entry) != {"name", "shape"}:
            raise CheckpointFormatError(f"{path}: malformed parameter table entry {entry}")
        shape = tuple(int(x) for x in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = 4 * count
        if offset + nbytes > len(raw):
            raise CheckpointFormatError(
                f"{path}: parameter data truncated at {entry['name']!r}"
            )
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=offset).reshape(shape)
        params[entry["name"]] = Tensor(arr.copy(), requires_grad=True)
        offset += nbytes
    if offset != len(raw):
        raise CheckpointFormatError(
            f"{path}: {len(raw) - offset} trailing bytes after parameter data"
        )
    return Checkpoint(kind=header["kind"], config=config, vocab=vocab,
                      pooler_kind=header["pooler"], params=params,
                      meta=header["meta"])
