"""From raw comment to padded id matrix, step by step.

    python3 demos/text_pipeline.py
"""

from trihead.assets import asset_path
from trihead.data import load_dataset
from trihead.textpipe import (
    EmojiMap,
    balance,
    batch_encode,
    build_vocab,
    normalize,
    tokenize,
)

# ---------------------------------------------------------------------------
# 1. Normalization scrubs what social-media text drags in: URLs, emoji,
#    punctuation, ragged whitespace. With an emoji map, known emoji become
#    words instead of disappearing.

emoji_map = EmojiMap.from_tsv(asset_path("emoji_map.tsv"))

raw_samples = [
    "Check this https://example.com/post !!!",
    "khub bhalo laglo \U0001F600\U0001F600",
    "  ki   obostha ,, bolo   to ??",
]
for raw in raw_samples:
    print(f"{raw!r:55} -> {normalize(raw, emoji_map=emoji_map)!r}")

# Normalizing twice changes nothing; the pipeline can be re-run safely.
once = normalize(raw_samples[0])
print("idempotent:", normalize(once) == once)

# ---------------------------------------------------------------------------
# 2. The vocabulary: four reserved slots, then every character seen (so no
#    word can ever be fully unknown), then whole words by frequency.

data = load_dataset(asset_path("synth_train.tsv"))
texts = [normalize(ex.text) for ex in data]
vocab = build_vocab(texts, target_size=200)
print(f"\nvocab size {vocab.size}; first 12 entries: {vocab.tokens[:12]}")

# 3. Tokenization is greedy longest-match: known words stay whole, novel
#    words shatter into character pieces with the ## continuation marker.
for word in ["bhalo", "bhaloz"]:
    print(f"tokenize({word!r}) -> {tokenize(word, vocab)}")

# 4. Encoding adds [CLS], truncates or pads to a fixed length, and returns
#    the id matrix plus the attention mask the encoder consumes.
batch = batch_encode(texts[:3], vocab, max_len=12)
print("\ntoken_ids[0]:", batch.token_ids[0].tolist())
print("mask[0]:     ", batch.attention_mask[0].tolist())

# ---------------------------------------------------------------------------
# 5. The label distribution is skewed, so training can oversample the rarer
#    aggression classes up to parity. Original examples are all kept.

unbalanced = [ex for ex in data if ex.labels.aggression != "NAG"][:6] \
    + [ex for ex in data if ex.labels.aggression == "NAG"][:10]


def agg_counts(rows):
    counts = {}
    for ex in rows:
        key = ex.labels.aggression
        counts[key] = counts.get(key, 0) + 1
    return dict(sorted(counts.items()))


print("\nbefore balance:", agg_counts(unbalanced))
print("after balance: ", agg_counts(balance(unbalanced, seed=42)))
