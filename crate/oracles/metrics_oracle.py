"""ROUGE-1/2/L and BLEU on hand-worked and randomized text pairs."""

import json
import math
import random
import re
import sys
from collections import Counter


def toks(text):
    return [t for t in re.split(r"[^0-9a-z]+", text.lower()) if t]


def grams(ts, n):
    return Counter(tuple(ts[i:i + n]) for i in range(len(ts) - n + 1))


def prf(overlap, ref_total, cand_total):
    if ref_total == 0 or cand_total == 0:
        return [0.0, 0.0, 0.0]
    r, p = overlap / ref_total, overlap / cand_total
    return [r, p, 0.0 if r + p == 0 else 2 * r * p / (r + p)]


def rouge_n(cand, ref, n):
    c, r = grams(toks(cand), n), grams(toks(ref), n)
    return prf(sum((c & r).values()), sum(r.values()), sum(c.values()))


def rouge_l(cand, ref):
    a, b = toks(cand), toks(ref)
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a)):
        for j in range(len(b)):
            table[i + 1][j + 1] = table[i][j] + 1 if a[i] == b[j] else max(table[i][j + 1], table[i + 1][j])
    return prf(table[len(a)][len(b)], len(b), len(a))


def bleu(cand, ref):
    c, r = toks(cand), toks(ref)
    if not c:
        return 0.0
    logs = 0.0
    for n in range(1, 5):
        cg, rg = grams(c, n), grams(r, n)
        total, match = sum(cg.values()), sum((cg & rg).values())
        logs += math.log(match / total if match else 1 / (total + 1))
    bp = math.exp(1 - len(r) / len(c)) if len(c) < len(r) else 1.0
    return min(1.0, max(0.0, bp * math.exp(logs / 4)))


def scores(cand, ref):
    return {"rouge1": rouge_n(cand, ref, 1), "rouge2": rouge_n(cand, ref, 2),
            "rougeL": rouge_l(cand, ref), "bleu": bleu(cand, ref)}


VOCAB = ("the patient was admitted with chest pain and fever cough started on "
         "aspirin heparin furosemide stable discharged home follow up in one week").split()


def random_pairs(seed=2031, count=20):
    rng = random.Random(seed)
    pairs = []
    for _ in range(count):
        a = " ".join(rng.choice(VOCAB) for _ in range(rng.randint(0, 14)))
        b = " ".join(rng.choice(VOCAB) for _ in range(rng.randint(1, 14)))
        pairs.append((a, b))
    return pairs


def main():
    out = {
        "cat_rouge1": rouge_n("the cat sat", "the cat slept on the mat", 1),
        "lcs_example": rouge_l("a b c d", "a c b d"),
        "cat_bleu": {"candidate": "the cat sat on the mat", "reference": "the cat sat on a mat",
                     "value": bleu("the cat sat on the mat", "the cat sat on a mat")},
        "zero_overlap_bleu": {"candidate": "x y z", "reference": "a b c d e", "value": bleu("x y z", "a b c d e")},
        "pairs": [{"candidate": a, "reference": b, **scores(a, b)} for a, b in random_pairs()],
    }
    json.dump(out, sys.stdout, indent=1)
    print()


if __name__ == "__main__":
    main()
