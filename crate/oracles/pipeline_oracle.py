"""Mock-extractor run of the fixture question bank, stage by stage, plus the
metric report of that run's summary against the bundled reference."""

import json
import sys

import metrics_oracle as m
import reference as r


def noun_phrases(text):
    phrases, run = [], []
    for t in r.tokenize(text) + [None]:
        if t is None or t in r.STOPWORDS:
            if run and " ".join(run) not in phrases:
                phrases.append(" ".join(run))
            run = []
        else:
            run.append(t)
    return phrases


def np_score(q, a):
    qp, ap = noun_phrases(q), noun_phrases(a)
    if not qp or not ap:
        return 0.0
    av = [r.embed(p) for p in ap]
    total = sum(max(min(max(r.cosine(r.embed(p), v), 0.0), 1.0) for v in av) for p in qp)
    return min(max(total / len(qp), 0.0), 1.0)


def expand(text):
    keys = sorted(r.ACRONYMS, key=lambda k: (-len(k), k))
    out, i = [], 0
    while i < len(text):
        if i == 0 or not text[i - 1].isalnum():
            for k in keys:
                j = i + len(k)
                if text.startswith(k, i) and (j == len(text) or not text[j].isalnum()):
                    out.append(r.ACRONYMS[k])
                    i = j
                    break
            else:
                out.append(text[i])
                i += 1
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


def answer(q, params, paras, vectors):
    k = q.get("k", params["k"])
    tau = q.get("score_threshold", params["score_threshold"])
    hits = r.knn(q["text"], paras, vectors, k, set(q["note_type_filter"]) if "note_type_filter" in q else None)
    by_id = {p["para_id"]: p for p in paras}
    sents = sorted((s for _, pid in hits for s in by_id[pid]["sentences"]), key=lambda s: s["pos"])
    wanted = {t for t in r.tokenize(q["text"]) if t not in r.STOPWORDS}
    if not wanted:
        return None
    best, best_overlap = None, 0
    for s in sents:
        overlap = len(wanted & set(r.tokenize(s["text"])))
        if overlap > best_overlap:
            best, best_overlap = s, overlap
    if best is None:
        return None
    c = best_overlap / len(wanted)
    mm = np_score(q["text"], best["text"])
    w = params["fusion_weight"]
    s = min(max(w * c + (1 - w) * mm, min(c, mm)), max(c, mm))
    return {"q_id": q["q_id"], "order": q["order"], "sent": best, "c": c, "m": mm, "s": s, "tau": tau}


def main():
    root = r.ROOT / "fixtures"
    bank = json.loads((root / "question_bank.json").read_text())
    params = {"k": 4, "fusion_weight": 0.5, "score_threshold": 0.6, "dedup_cosine": 0.95}
    params.update(bank.get("defaults", {}))
    docs = r.load_corpus()
    paras = r.segment(docs)
    vectors = {p["para_id"]: r.f32(r.embed(p["text"])) for p in paras}

    results = [answer(q, params, paras, vectors) for q in bank["questions"]]
    status = {}
    passed = []
    for q, a in zip(bank["questions"], results):
        if a is None:
            status[q["q_id"]] = "no_answer"
        elif a["s"] >= a["tau"]:
            status[q["q_id"]] = "answered"
            passed.append(a)
        else:
            status[q["q_id"]] = "below_threshold"

    kept, seen = [], set()
    for a in sorted(passed, key=lambda a: (-a["s"], a["sent"]["pos"], a["order"])):
        if a["sent"]["sent_id"] in seen:
            continue
        v = r.embed(a["sent"]["text"])
        if any(r.cosine(v, kv) >= params["dedup_cosine"] for _, kv in kept):
            continue
        seen.add(a["sent"]["sent_id"])
        kept.append((a, v))
    kept = sorted((a for a, _ in kept), key=lambda a: (a["order"], a["sent"]["pos"]))
    for q_id, st in status.items():
        if st == "answered" and q_id not in {a["q_id"] for a in kept}:
            status[q_id] = "duplicate"

    items = [{
        "q_id": a["q_id"], "source_sent_id": a["sent"]["sent_id"], "source_text": a["sent"]["text"],
        "sentence_text": expand(a["sent"]["text"]), "score": a["s"],
        "extractor_confidence": a["c"], "np_score": a["m"],
    } for a in kept]

    candidate = "\n".join(" ".join(i["sentence_text"].split()) for i in items)
    reference_text = (root / "reference_summary.txt").read_text()
    source = "\n\n".join(d["text"] for d in docs)
    sc = m.scores(candidate, reference_text)
    report = {
        "rouge1": sc["rouge1"], "rouge2": sc["rouge2"], "rougeL": sc["rougeL"], "bleu": sc["bleu"],
        "compression_ratio": len(r.tokenize(candidate)) / len(r.tokenize(source)),
        "embedding_similarity": r.cosine(r.embed(candidate), r.embed(reference_text)),
        "token_counts": {"candidate": len(r.tokenize(candidate)), "reference": len(r.tokenize(reference_text)),
                         "source": len(r.tokenize(source))},
    }
    out = {
        "params": params,
        "statuses": status,
        "raw": [None if a is None else {"q_id": a["q_id"], "sent_id": a["sent"]["sent_id"], "c": a["c"], "m": a["m"], "s": a["s"]}
                for a in results],
        "items": items,
        "report": report,
    }
    json.dump(out, sys.stdout, indent=1)
    print()


if __name__ == "__main__":
    main()
