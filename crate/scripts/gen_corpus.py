#!/usr/bin/env python3
"""Writes the deterministic ~1 MB UTF-8 word-count test corpus."""
import random
import sys

SYLLABLES = ["ka", "lo", "mi", "ren", "sa", "tu", "vel", "dor", "an", "ei",
             "über", "façade", "naïve", "smörgås", "кот", "дом", "水", "山", "λόγος", "ñu"]
PUNCT = ["", "", "", "", ",", ".", ";", "!", "?", "'s", "-"]


def word(rng):
    n = rng.choice([1, 1, 2, 2, 2, 3, 4])
    w = "".join(rng.choice(SYLLABLES) for _ in range(n))
    if rng.random() < 0.1:
        w = w.capitalize()
    return w + rng.choice(PUNCT)


def main(path, target=1_000_000, seed=20240611):
    rng = random.Random(seed)
    vocab = [word(rng) for _ in range(5000)]
    weights = [1.0 / (i + 1) for i in range(len(vocab))]
    out = []
    size = 0
    while size < target:
        line_words = rng.choices(vocab, weights, k=rng.randint(0, 14))
        seps = [rng.choice([" ", " ", " ", "  ", "\t"]) for _ in line_words]
        line = "".join(w + s for w, s in zip(line_words, seps)).rstrip(" ")
        line += rng.choice(["\n", "\n", "\n", "\r\n", "\n\n"])
        out.append(line)
        size += len(line.encode("utf-8"))
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("".join(out))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/data/corpus.txt")
