"""Emit a small two-entity NER corpus plus a ready-to-run config.

Usage: python3 scripts/make_tiny_corpus.py --out runs/tiny
Then:  lmtagger train --config runs/tiny/run.cfg
"""

import argparse
from pathlib import Path

PEOPLE = ("anna", "boris", "clara", "dimitri")
PLACES = ("oslo", "lima", "kyoto", "cairo")

# templates; P/L placeholders cycle through the name pools so every surface
# form clears the frequency cutoff
PATTERNS = [
    (("the", "envoy", "P", "visited", "L", "market", "yesterday", "morning"),
     ("O", "O", "S-PER", "O", "S-LOC", "O", "O", "O")),
    (("P", "P", "spoke", "quietly", "with", "P", "in", "L"),
     ("B-PER", "E-PER", "O", "O", "O", "S-PER", "O", "S-LOC")),
    (("the", "delegation", "from", "L", "L", "L", "met", "P"),
     ("O", "O", "O", "B-LOC", "I-LOC", "E-LOC", "O", "S-PER")),
    (("P", "returned", "to", "L", "near", "the", "old", "harbor", "again"),
     ("S-PER", "O", "O", "S-LOC", "O", "O", "O", "O", "O")),
]

CONFIG = """\
train_path = {d}/train.conll
dev_path = {d}/dev.conll
checkpoint_out = {d}/model.ckpt
history_out = {d}/history.tsv
char_state = 50
word_state = 50
min_freq = 5
metric = f1
max_epochs = 200
patience = 200
seed = 0
"""


def corpus_sentences():
    sentences = []
    person = place = 0
    for _ in range(5):
        for words, labels in PATTERNS:
            row = []
            for w in words:
                if w == "P":
                    row.append(PEOPLE[person % len(PEOPLE)])
                    person += 1
                elif w == "L":
                    row.append(PLACES[place % len(PLACES)])
                    place += 1
                else:
                    row.append(w)
            sentences.append((tuple(row), labels))
    return sentences


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/tiny", help="output directory")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    body = "\n".join(
        "\n".join(f"{w} {l}" for w, l in zip(words, labels)) + "\n"
        for words, labels in corpus_sentences())
    (out / "train.conll").write_text(body, encoding="utf-8")
    (out / "dev.conll").write_text(body, encoding="utf-8")  # overfit on purpose
    (out / "run.cfg").write_text(CONFIG.format(d=out), encoding="utf-8")
    print(f"wrote {out}/train.conll, dev.conll, run.cfg")


if __name__ == "__main__":
    main()
