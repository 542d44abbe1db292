"""Paragraph and sentence spans for every fixture document."""

import json
import sys

import reference as r


def main():
    docs = r.load_corpus()
    out = {"documents": len(docs), "paragraphs": 0, "docs": []}
    for d in docs:
        paras = []
        for s, e in r.paragraphs(d["text"]):
            ptext = d["text"][s:e]
            paras.append({"span": [s, e], "sentences": [list(x) for x in r.sentences(ptext)]})
        out["paragraphs"] += len(paras)
        out["docs"].append({"doc_id": d["doc_id"], "paragraphs": paras})
    json.dump(out, sys.stdout, indent=1)
    print()


if __name__ == "__main__":
    main()
