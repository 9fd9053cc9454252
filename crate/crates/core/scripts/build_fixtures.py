#!/usr/bin/env python3
"""Regenerates the bundled data files and frozen test fixtures.

  * data/rules/emoji.tsv          emoji -> ":name:" table (from the `emoji` package)
  * data/mini_vocab.json          500-token byte-level BPE vocabulary trained on
  * data/mini_merges.txt          data/sample_corpus.txt with HF `tokenizers`
  * tests/fixtures/reference_encodings.json
                                  ids produced by the HF tokenizer for probe strings,
                                  used as an independent cross-check of our encoder
  * tests/fixtures/coverage_corpus.jsonl, coverage_expected.json
                                  a 50-word thread file and its coverage / OOV counts
                                  under the mini vocabulary, computed with HF tokenizers
  * tests/fixtures/hug_vocab.json, hug_merges.txt
                                  a hand-built vocabulary holding "Hug" and " Hug"
                                  but neither "hug" nor " hug"

Usage: build_fixtures.py [--retrain] [probe words...]
Without --retrain the existing emoji table and mini vocabulary are kept and
only the fixtures are rebuilt.

Requires: pip install emoji tokenizers
"""
import json
import os
import sys

import emoji
from tokenizers import ByteLevelBPETokenizer
from tokenizers.pre_tokenizers import ByteLevel

HERE = os.path.dirname(os.path.abspath(__file__))
ROOT = os.path.dirname(HERE)
DATA = os.path.join(ROOT, "data")
FIXTURES = os.path.join(ROOT, "tests", "fixtures")


def read_tsv(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            src, dst = line.split("\t")
            out.append((src, dst))
    return out


def build_emoji_table():
    punct = dict(read_tsv(os.path.join(DATA, "rules", "punctuation.tsv")))
    symbols = dict(read_tsv(os.path.join(DATA, "rules", "symbols.tsv")))
    rows = []
    for em, info in emoji.EMOJI_DATA.items():
        name = info["en"]
        for k, v in punct.items():
            if not k.startswith("\\"):
                name = name.replace(k, v)
        # "U.S." would otherwise expose a bare "U" to the slang table.
        name = name.replace(".", "")
        if any(s in name for s in symbols):
            continue
        if any(c.isspace() for c in name) or "\t" in em:
            continue
        if any(em.startswith(s) for s in symbols):
            continue
        rows.append((em, name))
    rows.sort(key=lambda r: (r[1], r[0]))
    path = os.path.join(DATA, "rules", "emoji.tsv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# Step 4: emoji sequence -> :name: (CLDR short names, generated by scripts/build_fixtures.py)\n")
        for em, name in rows:
            fh.write(f"{em}\t{name}\n")
    print(f"emoji.tsv: {len(rows)} entries")


def build_vocab():
    tok = ByteLevelBPETokenizer(add_prefix_space=False)
    tok.train(
        [os.path.join(DATA, "sample_corpus.txt")],
        vocab_size=500,
        min_frequency=2,
        special_tokens=[],
        show_progress=False,
    )
    tok.save_model(DATA, "mini")
    os.replace(os.path.join(DATA, "mini-vocab.json"), os.path.join(DATA, "mini_vocab.json"))
    os.replace(os.path.join(DATA, "mini-merges.txt"), os.path.join(DATA, "mini_merges.txt"))
    print(f"mini vocab: {tok.get_vocab_size()} tokens")
    return tok


PROBES = [
    "the the",
    "",
    "Don't forget to Hydrate!",
    "I have not slept at all",
    "thank you so much",
    "Hug hug HUG",
    "medium-dark 6pm pensive",
    "hasn’t 🔥🔥 idk",
    "  leading and trailing  ",
    "tabs\tand\nnewlines",
    "naïve café",
    "it's we're they'll I'd",
    "12345 3.14 $100",
]


def build_reference(tok):
    cases = [{"text": p, "ids": tok.encode(p).ids} for p in PROBES]
    with open(os.path.join(FIXTURES, "reference_encodings.json"), "w", encoding="utf-8") as fh:
        json.dump(cases, fh, ensure_ascii=False, indent=1)
        fh.write("\n")


# 10 threads, 50 words in total (30 text, 20 reply).
COVERAGE_THREADS = [
    ("1", "thank you so much", "love the team"),
    ("2", "good day", "medium-dark 6pm"),
    ("3", "I know you Hug", "hug the team"),
    ("4", "great game tonight", "thank you"),
    ("5", "6pm a week", "Hydrate! now"),
    ("6", "don't forget the game", "idk"),
    ("7", "I love you", "you know"),
    ("8", "6pm again", "so good"),
    ("9", "best day", "what"),
    ("10", "medium-dark pensive hasn’t", "I love"),
]


def coverage_counts(tok, threads, field):
    counts = {}
    for t in threads:
        for w in t[field].split():
            counts[w] = counts.get(w, 0) + 1
    covered = sum(n for w, n in counts.items() if len(tok.encode(" " + w).ids) == 1)
    total = sum(counts.values())
    oov = sorted(
        ((w, n) for w, n in counts.items() if len(tok.encode(" " + w).ids) != 1),
        key=lambda e: (-e[1], e[0]),
    )
    return {"covered": covered, "total": total, "oov": [[w, n] for w, n in oov]}


def build_coverage(tok):
    threads = [{"idx": i, "text": t, "reply": r} for i, t, r in COVERAGE_THREADS]
    words = sum(len(t["text"].split()) + len(t["reply"].split()) for t in threads)
    assert words == 50, words
    with open(os.path.join(FIXTURES, "coverage_corpus.jsonl"), "w", encoding="utf-8") as fh:
        for t in threads:
            fh.write(json.dumps(t, ensure_ascii=False) + "\n")
    expected = {f: coverage_counts(tok, threads, f) for f in ("text", "reply")}
    with open(os.path.join(FIXTURES, "coverage_expected.json"), "w", encoding="utf-8") as fh:
        json.dump(expected, fh, ensure_ascii=False, indent=1)
        fh.write("\n")
    print("coverage:", {f: (e["covered"], e["total"]) for f, e in expected.items()})


def build_hug_vocab():
    from tokenizers import Tokenizer
    from tokenizers.models import BPE

    alphabet = ByteLevel.alphabet()
    merges = [("H", "u"), ("Hu", "g"), ("Ġ", "Hug"), ("u", "g")]
    vocab = {c: i for i, c in enumerate(sorted(alphabet))}
    for a, b in merges:
        vocab[a + b] = len(vocab)
    assert "hug" not in vocab and "Ġhug" not in vocab
    vpath = os.path.join(FIXTURES, "hug_vocab.json")
    mpath = os.path.join(FIXTURES, "hug_merges.txt")
    with open(vpath, "w", encoding="utf-8") as fh:
        json.dump(vocab, fh, ensure_ascii=False)
    with open(mpath, "w", encoding="utf-8") as fh:
        fh.write("#version: 0.2\n")
        for a, b in merges:
            fh.write(f"{a} {b}\n")
    tok = Tokenizer(BPE.from_file(vpath, mpath))
    tok.pre_tokenizer = ByteLevel(add_prefix_space=False)
    print("hug vocab:", tok.encode(" Hug").tokens, tok.encode(" hug").tokens)
    assert tok.encode(" Hug").tokens == ["ĠHug"]
    assert tok.encode(" hug").tokens == ["Ġ", "h", "ug"]


def main():
    args = sys.argv[1:]
    if "--retrain" in args:
        args.remove("--retrain")
        build_emoji_table()
        tok = build_vocab()
    else:
        tok = ByteLevelBPETokenizer(
            os.path.join(DATA, "mini_vocab.json"),
            os.path.join(DATA, "mini_merges.txt"),
            add_prefix_space=False,
        )
    build_reference(tok)
    build_coverage(tok)
    build_hug_vocab()
    for w in args:
        print(w, tok.encode(" " + w).tokens)


if __name__ == "__main__":
    main()
