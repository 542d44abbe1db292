"""Brute-force cosine kNN over the fixture index. Paragraph vectors are
rounded to f32 as stored on disk; queries stay f64."""

import json
import sys

import reference as r

QUERIES = [
    "Why was the patient admitted?",
    "What medications were prescribed at discharge?",
    "chest pain troponin",
    "heart failure diuresis furosemide",
    "pneumonia antibiotics",
    "What procedure was performed?",
    "follow up with cardiology",
    "kidney injury creatinine",
    "past medical history",
    "oxygen saturation room air",
]

SMALL = [
    ("s1", "fever and cough"),
    ("s2", "chest pain at rest"),
    ("s3", "cough with fever and chills"),
    ("s4", "leg swelling"),
    ("s5", "pain in the chest"),
]


def main():
    paras = r.segment(r.load_corpus())
    vectors = {p["para_id"]: r.f32(r.embed(p["text"])) for p in paras}
    out = {"k": 5, "paragraphs": len(paras), "queries": []}
    for q in QUERIES:
        hits = r.knn(q, paras, vectors, 5)
        out["queries"].append({"query": q, "hits": [{"para_id": i, "score": s} for s, i in hits]})
    hits = r.knn(QUERIES[1], paras, vectors, 4, note_types={"discharge"})
    out["discharge_filtered"] = {
        "query": QUERIES[1], "k": 4, "note_types": ["discharge"],
        "hits": [{"para_id": i, "score": s} for s, i in hits],
    }
    small = [{"para_id": i, "note_type": "other", "text": t} for i, t in SMALL]
    small_vecs = {i: r.embed(t) for i, t in SMALL}
    out["small"] = {
        "entries": [{"para_id": i, "text": t} for i, t in SMALL],
        "query": "fever with cough", "k": 3,
        "hits": [{"para_id": i, "score": s} for s, i in r.knn("fever with cough", small, small_vecs, 3)],
    }
    json.dump(out, sys.stdout, indent=1)
    print()


if __name__ == "__main__":
    main()
