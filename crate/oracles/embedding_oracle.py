"""Reference-embedder vectors and cosines for a few fixture texts."""

import json
import sys

import reference as r

TEXTS = [
    "Patient admitted with community-acquired pneumonia.",
    "x",
    "--",
    "Started IV ceftriaxone and azithromycin.",
]

PAIRS = {
    # no shared unigram or bigram
    "disjoint": ("Furosemide 40 mg PO daily.", "Repeat chest X-ray in six weeks to confirm resolution."),
    # copy-forwarded progress-note sentence with one extra word
    "near_duplicate": (
        "Good response to IV diuresis with net negative fluid balance and improving leg edema.",
        "Good response to IV diuresis with net negative fluid balance and improving leg edema today.",
    ),
}


def np_score(q_phrases, a_phrases):
    qv = [r.embed(p) for p in q_phrases]
    av = [r.embed(p) for p in a_phrases]
    return sum(max(min(max(r.cosine(q, a), 0.0), 1.0) for a in av) for q in qv) / len(qv)


def main():
    out = {"vectors": {}, "cosines": {}, "hashes": {}}
    for t in TEXTS:
        v = r.embed(t)
        out["vectors"][t] = {str(i): x for i, x in enumerate(v) if x != 0.0}
    for f in ["patient", "patient admitted", "x", ""]:
        out["hashes"][f] = str(r.fhash(f))
    for name, (a, b) in PAIRS.items():
        out["cosines"][name] = {"a": a, "b": b, "cosine": r.cosine(r.embed(a), r.embed(b))}
    out["np_score"] = {
        "question": ["antibiotics"],
        "answer": ["antibiotics", "ceftriaxone dose"],
        "value": np_score(["antibiotics"], ["antibiotics", "ceftriaxone dose"]),
        "question_swapped": ["antibiotics", "ceftriaxone dose"],
        "answer_swapped": ["antibiotics"],
        "value_swapped": np_score(["antibiotics", "ceftriaxone dose"], ["antibiotics"]),
    }
    json.dump(out, sys.stdout, indent=1)
    print()


if __name__ == "__main__":
    main()
