"""Independent Python model of the text pipeline, used to produce the frozen
expected values under fixtures/oracle/. Written from the stated rules, not
from the Rust sources."""

import json
import math
import re
import struct
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
ASSETS = ROOT / "crates" / "core" / "assets"
M64 = (1 << 64) - 1


def _asset(name):
    out = []
    for line in (ASSETS / name).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


STOPWORDS = set(_asset("stopwords.txt"))
ABBREVIATIONS = {a.lower() for a in _asset("abbreviations.txt")}
ACRONYMS = dict(line.split("\t", 1) for line in _asset("acronyms.tsv"))
ACRONYMS = {k.strip(): v.strip() for k, v in ACRONYMS.items()}


# ---- tokens and embedding -------------------------------------------------

def tokenize(text):
    return [t for t in re.split(r"[^0-9a-z]+", text.lower()) if t]


def fhash(feature, seed=0x5EED_CAFE):
    h = 0xCBF29CE484222325 ^ seed
    for b in feature.encode():
        h = ((h ^ b) * 0x100000001B3) & M64
    h = ((h ^ (h >> 30)) * 0xBF58476D1CE4E5B9) & M64
    h = ((h ^ (h >> 27)) * 0x94D049BB133111EB) & M64
    return h ^ (h >> 31)


def embed(text, dim=256):
    text = text.strip()
    assert text, "empty text"
    toks = tokenize(text) or [text.lower()]
    feats = toks + [f"{a} {b}" for a, b in zip(toks, toks[1:])]
    v = [0.0] * dim
    for f in feats:
        h = fhash(f)
        v[h % dim] += -1.0 if h >> 63 else 1.0
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v]


def cosine(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    if na * nb == 0:
        return 0.0
    c = max(-1.0, min(1.0, dot / (na * nb)))
    return 0.0 if c == 0 else c


def f32(v):
    return [struct.unpack("<f", struct.pack("<f", x))[0] for x in v]


# ---- segmentation ---------------------------------------------------------

HEADER = re.compile(r"^[A-Z][A-Za-z /]{1,40}:$")


def paragraphs(text, cap=256):
    """[(start, end)] byte spans; fixture text is ASCII so chars == bytes."""
    lines, pos = [], 0
    for raw in text.split("\n"):
        lines.append((pos, raw))
        pos += len(raw) + 1
    blocks, cur = [], None  # cur = [start, end, header_only]

    def close():
        if cur:
            s, e = cur[0], cur[1]
            seg = text[s:e]
            lead = len(seg) - len(seg.lstrip())
            trail = len(seg) - len(seg.rstrip())
            if seg.strip():
                blocks.append((s + lead, e - trail))

    for start, raw in lines:
        line = raw.rstrip("\r")
        if not line.strip():
            if cur and not cur[2]:
                close()
                cur = None
        elif HEADER.match(line.rstrip()):
            close()
            cur = [start, start + len(line), True]
        elif cur:
            cur = [cur[0], start + len(line), False]
        else:
            cur = [start, start + len(line), False]
    close()
    for s, e in blocks:
        assert len(text[s:e].split()) <= cap, "fixture paragraphs fit the cap"
    return blocks


def sentences(text):
    spans, start, i, n = [], 0, 0, len(text)
    while i < n:
        c = text[i]
        i += 1
        if c not in ".!?;":
            continue
        at = i - 1
        end = i
        while end < n and text[end] in ".!?;)]\"'":
            end += 1
        i = end
        rest = text[end:]
        after = rest.lstrip()
        if after and not (len(after) < len(rest) and after[0].isupper()):
            continue
        if c == "." and _abbrev_before(text, at):
            continue
        _push(text, start, end, spans)
        start = end
    _push(text, start, n, spans)
    return spans


def _abbrev_before(text, at):
    tok = re.split(r"\s", text[:at])[-1]
    tok = re.sub(r"^[^0-9A-Za-z]+", "", tok)
    return tok.lower() in ABBREVIATIONS


def _push(text, s, e, out):
    seg = text[s:e]
    if seg.strip():
        lead = len(seg) - len(seg.lstrip())
        out.append((s + lead, e - (len(seg) - len(seg.rstrip()))))


def load_corpus(path=ROOT / "fixtures" / "corpus.jsonl"):
    return [json.loads(l) for l in Path(path).read_text().splitlines() if l.strip()]


def segment(docs):
    """Flat list of paragraph dicts in corpus order."""
    out = []
    for di, d in enumerate(docs):
        for pi, (s, e) in enumerate(paragraphs(d["text"])):
            ptext = d["text"][s:e]
            sents = [
                {"sent_id": f"{d['doc_id']}#{pi}:{si}", "text": ptext[a:b], "pos": (di, pi, si)}
                for si, (a, b) in enumerate(sentences(ptext))
            ]
            out.append({
                "para_id": f"{d['doc_id']}#{pi}",
                "doc_id": d["doc_id"],
                "note_type": d["note_type"],
                "span": (s, e),
                "text": ptext,
                "sentences": sents,
            })
    return out


# ---- retrieval ------------------------------------------------------------

def knn(query, paras, vectors, k, note_types=None):
    q = embed(query)
    scored = [
        (cosine(q, vectors[p["para_id"]]), p["para_id"])
        for p in paras
        if note_types is None or p["note_type"] in note_types
    ]
    scored.sort(key=lambda t: (-t[0], t[1]))
    return scored[:k]
