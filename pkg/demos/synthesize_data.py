"""Regenerate the bundled synthetic corpus under src/trihead/assets/.

The labels follow a planted-cue scheme: every aggression class owns a
small set of cue words that never appears under another class, gendered
rows always carry a gender cue, communal rows a communal cue, and the
rest of each sentence is neutral filler. A model that learns the cues
can hit exact-match 1.0; a model that cannot is broken. The vocabulary
lands near 200 entries so training stays quick.

Run from the repository root:

    python3 demos/synthesize_data.py
"""

from pathlib import Path

import numpy as np

ASSETS = Path(__file__).resolve().parent.parent / "src" / "trihead" / "assets"

SEED = 7

NAG_CUES = ["shanto", "bhalo", "dhonnobad", "shundor", "thik", "asha",
            "mishti", "shanti"]
CAG_CUES = ["khocha", "tirjok", "byango", "tana", "chimti", "phoring",
            "kotakkho", "bekar"]
OAG_CUES = ["maar", "gali", "dhor", "chagol", "badar", "lathi",
            "jano", "bhag"]
GEN_CUES = ["meye", "mohila", "bou", "didi", "nari", "kanya"]
COM_CUES = ["dhormo", "jaat", "mondir", "moshjid", "girja", "puja"]

FILLERS = """
ami tumi amra tora aj kal porshu ekhon tokhon keno
kothay kemon khub ektu onek besi kom aro abar
kotha bolo bole bolchi shune dekho dekhe jabe asbe gelo
din raat shokal bikel sondha bochor maash shoptaho belay somoy
bari ghor rasta gram shohor desh nodi pahar math akash
bhat jol cha muri machh dal shobji mangsho ruti doi
porashona boi khata kolom school college pora likha exam result
khela cricket football gan nach chobi cinema natok golpo hashi
mon prem bondhu poribar kaka mama dada bhai thakur pisi
taka poisa kaj chakri bazar dokan gari bus train rickshaw
""".split()

LABEL_CUES = {"NAG": NAG_CUES, "CAG": CAG_CUES, "OAG": OAG_CUES}
COMBOS = [(a, g, c)
          for a in ("NAG", "CAG", "OAG")
          for g in ("NGEN", "GEN")
          for c in ("NCOM", "COM")]


def make_sentence(rng, agg, gen, com):
    words = list(rng.choice(FILLERS, size=rng.integers(4, 8), replace=False))
    words += list(rng.choice(LABEL_CUES[agg], size=rng.integers(1, 3),
                             replace=False))
    if gen == "GEN":
        words.append(str(rng.choice(GEN_CUES)))
    if com == "COM":
        words.append(str(rng.choice(COM_CUES)))
    rng.shuffle(words)
    return " ".join(words)


def make_train(rng, n=64):
    rows = []
    for i in range(n):
        agg, gen, com = COMBOS[i % len(COMBOS)]
        rows.append((f"syn{i:03d}", make_sentence(rng, agg, gen, com),
                     agg, gen, com))
    return rows


def make_dev(rng, n=16, offset=1000):
    rows = []
    for i in range(n):
        agg, gen, com = COMBOS[(i * 5) % len(COMBOS)]
        rows.append((f"syn{offset + i:03d}", make_sentence(rng, agg, gen, com),
                     agg, gen, com))
    return rows


def make_corpus(rng, n=200):
    lines = []
    for _ in range(n):
        agg = str(rng.choice(["NAG", "CAG", "OAG"]))
        gen = str(rng.choice(["NGEN", "GEN"]))
        com = str(rng.choice(["NCOM", "COM"]))
        lines.append(make_sentence(rng, agg, gen, com))
    return lines


def write_tsv(path, rows):
    lines = ["id\ttext\taggression\tgender\tcommunal"]
    lines += ["\t".join(r) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def main():
    rng = np.random.default_rng(SEED)
    ASSETS.mkdir(parents=True, exist_ok=True)

    write_tsv(ASSETS / "synth_train.tsv", make_train(rng))
    write_tsv(ASSETS / "synth_dev.tsv", make_dev(rng))
    (ASSETS / "synth_corpus.txt").write_text(
        "\n".join(make_corpus(rng)) + "\n", encoding="utf-8")

    emoji_lines = [
        "# emoji -> replacement word, tab separated",
        "\U0001F600\thashi",
        "\U0001F602\thashi",
        "\U0001F60D\tprem",
        "❤️\tprem",
        "\U0001F621\traag",
        "\U0001F620\traag",
        "\U0001F44D\tbhalo",
        "\U0001F44E\tkharap",
    ]
    (ASSETS / "emoji_map.tsv").write_text(
        "\n".join(emoji_lines) + "\n", encoding="utf-8")

    n_words = (len(set(FILLERS)) + len(NAG_CUES) + len(CAG_CUES)
               + len(OAG_CUES) + len(GEN_CUES) + len(COM_CUES))
    print(f"wrote assets to {ASSETS}")
    print(f"distinct content words: {n_words}")


if __name__ == "__main__":
    main()
