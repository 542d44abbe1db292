//! Patient document loading and paragraph/sentence segmentation.
//!
//! Paragraphs are the retrieval unit and sentences the answer unit. All spans
//! are byte offsets; a paragraph span is relative to its document text and a
//! sentence span is relative to its paragraph text. Every span covers exactly
//! the trimmed text it names, so `parent[start..end] == text`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text::is_abbreviation;

pub const DEFAULT_MAX_PARAGRAPH_TOKENS: usize = 256;

static SECTION_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Z][A-Za-z /]{1,40}:$").expect("valid header pattern"));

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: line {line}: duplicate doc_id {doc_id:?}")]
    DuplicateId { path: PathBuf, line: usize, doc_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoteType {
    Admission,
    Progress,
    Discharge,
    Radiology,
    Lab,
    Other,
}

impl NoteType {
    pub const ALL: [NoteType; 6] = [
        NoteType::Admission,
        NoteType::Progress,
        NoteType::Discharge,
        NoteType::Radiology,
        NoteType::Lab,
        NoteType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NoteType::Admission => "admission",
            NoteType::Progress => "progress",
            NoteType::Discharge => "discharge",
            NoteType::Radiology => "radiology",
            NoteType::Lab => "lab",
            NoteType::Other => "other",
        }
    }

    pub(crate) fn code(self) -> u8 {
        self as u8
    }

    pub(crate) fn from_code(code: u8) -> Option<NoteType> {
        NoteType::ALL.get(usize::from(code)).copied()
    }

    /// Note type implied by a text-dir filename stem.
    fn from_file_stem(stem: &str) -> NoteType {
        if stem.starts_with("admission_") {
            NoteType::Admission
        } else if stem.starts_with("progress_") {
            NoteType::Progress
        } else if stem.starts_with("discharge_") {
            NoteType::Discharge
        } else {
            NoteType::Other
        }
    }
}

impl fmt::Display for NoteType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoteType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NoteType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown note type {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub patient_id: String,
    pub note_type: NoteType,
    pub timestamp: Option<String>,
    pub text: String,
}

/// Half-open byte range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Span {
        Span { start, end }
    }

    fn shift(self, by: usize) -> Span {
        Span::new(self.start + by, self.end + by)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub para_id: String,
    pub doc_id: String,
    pub ordinal: u32,
    pub char_span: Span,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub sent_id: String,
    pub para_id: String,
    pub ordinal: u32,
    pub char_span: Span,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    Jsonl,
    TextDir,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "text-dir" => Ok(CorpusFormat::TextDir),
            other => Err(format!("unknown corpus format {other:?} (expected jsonl or text-dir)")),
        }
    }
}

#[derive(Deserialize)]
struct JsonlRecord {
    doc_id: String,
    patient_id: String,
    note_type: NoteType,
    timestamp: Option<String>,
    text: String,
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<Document>, CorpusError> {
    match format {
        CorpusFormat::Jsonl => load_jsonl(path),
        CorpusFormat::TextDir => load_text_dir(path),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load_jsonl(path: &Path) -> Result<Vec<Document>, CorpusError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let content = String::from_utf8(bytes).map_err(|e| {
        let valid = &e.as_bytes()[..e.utf8_error().valid_up_to()];
        CorpusError::Format {
            path: path.to_path_buf(),
            line: valid.iter().filter(|&&b| b == b'\n').count() + 1,
            message: "invalid UTF-8".into(),
        }
    })?;

    let mut docs = Vec::new();
    let mut first_seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonlRecord = serde_json::from_str(line).map_err(|e| CorpusError::Format {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        if record.doc_id.is_empty() {
            return Err(CorpusError::Format {
                path: path.to_path_buf(),
                line: line_no,
                message: "doc_id must be nonempty".into(),
            });
        }
        if first_seen.insert(record.doc_id.clone(), line_no).is_some() {
            return Err(CorpusError::DuplicateId {
                path: path.to_path_buf(),
                line: line_no,
                doc_id: record.doc_id,
            });
        }
        docs.push(Document {
            doc_id: record.doc_id,
            patient_id: record.patient_id,
            note_type: record.note_type,
            timestamp: record.timestamp,
            text: record.text,
        });
    }
    Ok(docs)
}

/// `.txt` files directly under `root` belong to a patient named after `root`;
/// each subdirectory holds one more patient's notes. Files are taken in
/// lexicographic order.
fn load_text_dir(root: &Path) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    let root_patient = root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();

    let mut groups = vec![(root_patient, root.to_path_buf())];
    for entry in sorted_entries(root)? {
        if entry.is_dir() {
            let name = entry
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            groups.push((name, entry));
        }
    }

    for (patient_id, dir) in groups {
        for file in sorted_entries(&dir)? {
            if !file.is_file() || file.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let stem = file
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| CorpusError::Format {
                    path: file.clone(),
                    line: 0,
                    message: "file name is not valid UTF-8".into(),
                })?
                .to_owned();
            let bytes = fs::read(&file).map_err(io_err(&file))?;
            let text = String::from_utf8(bytes).map_err(|_| CorpusError::Format {
                path: file.clone(),
                line: 0,
                message: "invalid UTF-8".into(),
            })?;
            if !seen.insert(stem.clone()) {
                return Err(CorpusError::DuplicateId {
                    path: file,
                    line: 0,
                    doc_id: stem,
                });
            }
            docs.push(Document {
                note_type: NoteType::from_file_stem(&stem),
                doc_id: stem,
                patient_id: patient_id.clone(),
                timestamp: None,
                text,
            });
        }
    }
    Ok(docs)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let mut entries = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(io_err(dir))?;
    entries.sort();
    Ok(entries)
}

/// Trimmed sub-span of `text[span]`, or `None` when it is all whitespace.
fn trim_span(text: &str, span: Span) -> Option<Span> {
    let slice = &text[span.start..span.end];
    let trimmed_start = slice.len() - slice.trim_start().len();
    let trimmed = slice.trim();
    if trimmed.is_empty() {
        None
    } else {
        let start = span.start + trimmed_start;
        Some(Span::new(start, start + trimmed.len()))
    }
}

fn whitespace_token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Splits a document into paragraphs: blank lines separate paragraphs, a
/// section-header line (e.g. `DISCHARGE MEDICATIONS:`) opens a new one, and
/// anything longer than `max_tokens` whitespace tokens is cut at sentence
/// boundaries.
pub fn segment_paragraphs(doc: &Document, max_tokens: usize) -> Vec<Paragraph> {
    let max_tokens = max_tokens.max(1);
    let text = doc.text.as_str();

    let mut blocks: Vec<Span> = Vec::new();
    // (start, end, has_body): a block holding only header lines survives blank lines.
    let mut current: Option<(usize, usize, bool)> = None;
    let flush = |current: &mut Option<(usize, usize, bool)>, blocks: &mut Vec<Span>| {
        if let Some((start, end, _)) = current.take() {
            if let Some(span) = trim_span(text, Span::new(start, end)) {
                blocks.push(span);
            }
        }
    };

    let mut offset = 0;
    for raw_line in text.split_inclusive('\n') {
        let line_start = offset;
        offset += raw_line.len();
        let line = raw_line.trim_end_matches(['\n', '\r']);
        let line_end = line_start + line.len();

        if line.trim().is_empty() {
            if matches!(current, Some((_, _, true))) {
                flush(&mut current, &mut blocks);
            }
        } else if SECTION_HEADER.is_match(line.trim_end()) {
            flush(&mut current, &mut blocks);
            current = Some((line_start, line_end, false));
        } else {
            current = match current {
                Some((start, _, _)) => Some((start, line_end, true)),
                None => Some((line_start, line_end, true)),
            };
        }
    }
    flush(&mut current, &mut blocks);

    let mut pieces = Vec::new();
    for block in blocks {
        let block_text = &text[block.start..block.end];
        if whitespace_token_count(block_text) <= max_tokens {
            pieces.push(block);
        } else {
            pieces.extend(
                split_long_block(block_text, max_tokens)
                    .into_iter()
                    .map(|s| s.shift(block.start)),
            );
        }
    }

    pieces
        .into_iter()
        .enumerate()
        .map(|(ordinal, span)| Paragraph {
            para_id: format!("{}#{}", doc.doc_id, ordinal),
            doc_id: doc.doc_id.clone(),
            ordinal: ordinal as u32,
            char_span: span,
            text: text[span.start..span.end].to_owned(),
        })
        .collect()
}

/// Greedily packs whole sentences into pieces of at most `max_tokens`
/// whitespace tokens. A single sentence over the cap is cut between tokens.
fn split_long_block(block: &str, max_tokens: usize) -> Vec<Span> {
    let mut units: Vec<(Span, usize)> = Vec::new();
    for span in sentence_spans(block) {
        let count = whitespace_token_count(&block[span.start..span.end]);
        if count <= max_tokens {
            units.push((span, count));
        } else {
            let tokens = token_spans(&block[span.start..span.end]);
            for chunk in tokens.chunks(max_tokens) {
                let first = chunk[0];
                let last = chunk[chunk.len() - 1];
                units.push((Span::new(first.start, last.end).shift(span.start), chunk.len()));
            }
        }
    }

    let mut pieces = Vec::new();
    let mut current: Option<(Span, usize)> = None;
    for (span, count) in units {
        current = match current {
            Some((acc, acc_count)) if acc_count + count <= max_tokens => {
                Some((Span::new(acc.start, span.end), acc_count + count))
            }
            Some((acc, _)) => {
                pieces.push(acc);
                Some((span, count))
            }
            None => Some((span, count)),
        };
    }
    if let Some((acc, _)) = current {
        pieces.push(acc);
    }
    pieces
}

fn token_spans(text: &str) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push(Span::new(s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push(Span::new(s, text.len()));
    }
    spans
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | ';')
}

fn is_closer(c: char) -> bool {
    matches!(c, ')' | ']' | '"' | '\'')
}

/// The whitespace-delimited token ending right before byte `end`, without
/// leading brackets or quotes.
fn token_before(text: &str, end: usize) -> &str {
    let head = &text[..end];
    let start = head
        .rfind(char::is_whitespace)
        .map_or(0, |i| i + head[i..].chars().next().map_or(1, char::len_utf8));
    head[start..].trim_start_matches(|c: char| !c.is_alphanumeric())
}

/// Trimmed sentence spans of `text`, in order.
fn sentence_spans(text: &str) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();

    while let Some((i, c)) = chars.next() {
        if !is_terminator(c) {
            continue;
        }
        let mut end = i + c.len_utf8();
        while let Some(&(j, next)) = chars.peek() {
            if is_terminator(next) || is_closer(next) {
                end = j + next.len_utf8();
                chars.next();
            } else {
                break;
            }
        }

        let rest = &text[end..];
        let after_ws = rest.trim_start();
        let boundary = if after_ws.is_empty() {
            true
        } else {
            after_ws.len() < rest.len() && after_ws.chars().next().is_some_and(char::is_uppercase)
        };
        if !boundary {
            continue;
        }
        if c == '.' && is_abbreviation(token_before(text, i)) {
            continue;
        }
        if let Some(span) = trim_span(text, Span::new(start, end)) {
            spans.push(span);
        }
        start = end;
    }
    if let Some(span) = trim_span(text, Span::new(start, text.len())) {
        spans.push(span);
    }
    spans
}

/// Rule-based sentence split of a paragraph. Spans are relative to
/// `para.text`.
pub fn split_sentences(para: &Paragraph) -> Vec<Sentence> {
    sentence_spans(&para.text)
        .into_iter()
        .enumerate()
        .map(|(ordinal, span)| Sentence {
            sent_id: format!("{}:{}", para.para_id, ordinal),
            para_id: para.para_id.clone(),
            ordinal: ordinal as u32,
            char_span: span,
            text: para.text[span.start..span.end].to_owned(),
        })
        .collect()
}

/// Document order of a sentence: corpus position of its document, then
/// paragraph ordinal, then sentence ordinal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DocPosition {
    pub doc: u32,
    pub paragraph: u32,
    pub sentence: u32,
}

#[derive(Debug, Clone)]
pub struct ParagraphRecord {
    pub paragraph: Paragraph,
    pub doc_index: u32,
    pub note_type: NoteType,
    pub patient_id: String,
    pub sentences: Vec<Sentence>,
}

/// A loaded corpus with every document segmented, addressable by id.
#[derive(Debug, Clone)]
pub struct SegmentedCorpus {
    documents: Vec<Document>,
    paragraphs: Vec<ParagraphRecord>,
    by_para_id: HashMap<String, usize>,
    fingerprint: String,
}

impl SegmentedCorpus {
    pub fn new(documents: Vec<Document>, max_paragraph_tokens: usize) -> SegmentedCorpus {
        let mut paragraphs = Vec::new();
        for (doc_index, doc) in documents.iter().enumerate() {
            for paragraph in segment_paragraphs(doc, max_paragraph_tokens) {
                let sentences = split_sentences(&paragraph);
                paragraphs.push(ParagraphRecord {
                    paragraph,
                    doc_index: doc_index as u32,
                    note_type: doc.note_type,
                    patient_id: doc.patient_id.clone(),
                    sentences,
                });
            }
        }
        let by_para_id = paragraphs
            .iter()
            .enumerate()
            .map(|(i, r)| (r.paragraph.para_id.clone(), i))
            .collect();
        let fingerprint = fingerprint(&documents);
        SegmentedCorpus {
            documents,
            paragraphs,
            by_para_id,
            fingerprint,
        }
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn paragraphs(&self) -> &[ParagraphRecord] {
        &self.paragraphs
    }

    pub fn paragraph(&self, para_id: &str) -> Option<&ParagraphRecord> {
        self.by_para_id.get(para_id).map(|&i| &self.paragraphs[i])
    }

    pub fn sentence(&self, sent_id: &str) -> Option<&Sentence> {
        let (para_id, _) = sent_id.rsplit_once(':')?;
        self.paragraph(para_id)?.sentences.iter().find(|s| s.sent_id == sent_id)
    }

    pub fn position(&self, sentence: &Sentence) -> Option<DocPosition> {
        let record = self.paragraph(&sentence.para_id)?;
        Some(DocPosition {
            doc: record.doc_index,
            paragraph: record.paragraph.ordinal,
            sentence: sentence.ordinal,
        })
    }

    /// Short content hash identifying the corpus independent of where it was
    /// loaded from.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

fn fingerprint(documents: &[Document]) -> String {
    let mut hasher = Sha256::new();
    for doc in documents {
        for field in [
            doc.doc_id.as_str(),
            doc.patient_id.as_str(),
            doc.note_type.as_str(),
            doc.timestamp.as_deref().unwrap_or(""),
            doc.text.as_str(),
        ] {
            hasher.update((field.len() as u64).to_le_bytes());
            hasher.update(field.as_bytes());
        }
    }
    hex::encode(&hasher.finalize()[..8])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> Document {
        Document {
            doc_id: "d1".into(),
            patient_id: "p1".into(),
            note_type: NoteType::Discharge,
            timestamp: None,
            text: text.into(),
        }
    }

    fn para(text: &str) -> Paragraph {
        Paragraph {
            para_id: "d1#0".into(),
            doc_id: "d1".into(),
            ordinal: 0,
            char_span: Span::new(0, text.len()),
            text: text.into(),
        }
    }

    fn texts(paras: &[Paragraph]) -> Vec<&str> {
        paras.iter().map(|p| p.text.as_str()).collect()
    }

    #[test]
    fn blank_line_split() {
        let paras = segment_paragraphs(&doc("A\n\nB"), 256);
        assert_eq!(texts(&paras), ["A", "B"]);
        assert_eq!(paras[1].para_id, "d1#1");
        assert_eq!(paras[1].char_span, Span::new(3, 4));
    }

    #[test]
    fn empty_and_whitespace_documents() {
        assert!(segment_paragraphs(&doc(""), 256).is_empty());
        assert!(segment_paragraphs(&doc(" \n\n\t\n"), 256).is_empty());
    }

    #[test]
    fn discharge_note_with_header_line() {
        let text = "Patient admitted with chest pain.\nTroponin negative.\n\nStress test was normal.\n\nMEDICATIONS:\nAspirin 81 mg daily.\nAtorvastatin 40 mg nightly.\nFollow up with PCP in one week.";
        // line starts: 0 "Patient admitted with chest pain." (33)
        //              34 "Troponin negative." (18) -> ends 52
        //              53 ""                       blank
        //              54 "Stress test was normal." (23) -> ends 77
        //              78 ""                       blank
        //              79 "MEDICATIONS:" (12) -> ends 91
        //              92 "Aspirin 81 mg daily." (20) -> ends 112
        //              113 "Atorvastatin 40 mg nightly." (27) -> ends 140
        //              141 "Follow up with PCP in one week." (31) -> ends 172
        let paras = segment_paragraphs(&doc(text), 256);
        let spans: Vec<Span> = paras.iter().map(|p| p.char_span).collect();
        assert_eq!(spans, [Span::new(0, 52), Span::new(54, 77), Span::new(79, 172)]);
        assert!(paras[2].text.starts_with("MEDICATIONS:\nAspirin"));
    }

    #[test]
    fn header_without_blank_line_starts_new_paragraph() {
        // Two blank-line breaks plus one embedded header line.
        let text = "Admitted for CHF exacerbation.\n\nDiuresed with IV furosemide.\nWeight down 3 kg.\nMEDICATIONS:\nFurosemide 40 mg PO daily.\n\nFollow up in clinic.";
        // 0   "Admitted for CHF exacerbation." (30) -> 30
        // 31  blank
        // 32  "Diuresed with IV furosemide." (28) -> 60
        // 61  "Weight down 3 kg." (17) -> 78
        // 79  "MEDICATIONS:" (12) -> 91
        // 92  "Furosemide 40 mg PO daily." (26) -> 118
        // 119 blank
        // 120 "Follow up in clinic." (20) -> 140
        let paras = segment_paragraphs(&doc(text), 256);
        let spans: Vec<Span> = paras.iter().map(|p| p.char_span).collect();
        assert_eq!(
            spans,
            [
                Span::new(0, 30),
                Span::new(32, 78),
                Span::new(79, 118),
                Span::new(120, 140)
            ]
        );
        assert_eq!(paras[2].text, "MEDICATIONS:\nFurosemide 40 mg PO daily.");
    }

    #[test]
    fn header_followed_by_blank_line_is_prepended_to_next_block() {
        let paras = segment_paragraphs(&doc("HISTORY:\n\nLong history of HTN."), 256);
        assert_eq!(texts(&paras), ["HISTORY:\n\nLong history of HTN."]);
        let paras = segment_paragraphs(&doc("Trailing text.\n\nPLAN:"), 256);
        assert_eq!(texts(&paras), ["Trailing text.", "PLAN:"]);
    }

    #[test]
    fn indented_or_long_colon_lines_are_not_headers() {
        let paras = segment_paragraphs(&doc("Intro line.\n  PLAN:\nrest"), 256);
        assert_eq!(paras.len(), 1);
        let paras = segment_paragraphs(
            &doc("Intro line.\nBlood pressure was stable overnight on the ward today:\nrest"),
            256,
        );
        assert_eq!(paras.len(), 1);
    }

    #[test]
    fn long_paragraph_is_capped_at_sentence_boundaries() {
        let sentence = "Vitals stable overnight today.";
        let text = [sentence; 10].join(" ");
        let paras = segment_paragraphs(&doc(&text), 9);
        assert!(paras.iter().all(|p| p.text.split_whitespace().count() <= 9));
        assert_eq!(paras.len(), 5);
        assert_eq!(
            paras[0].text,
            "Vitals stable overnight today. Vitals stable overnight today."
        );
    }

    #[test]
    fn overlong_sentence_is_cut_between_tokens() {
        let text = "one two three four five six seven";
        let paras = segment_paragraphs(&doc(text), 3);
        assert_eq!(texts(&paras), ["one two three", "four five six", "seven"]);
    }

    #[test]
    fn sentence_rules() {
        let split = |t: &str| -> Vec<String> { split_sentences(&para(t)).into_iter().map(|s| s.text).collect() };
        assert_eq!(split("Pt stable. Discharged home."), ["Pt stable.", "Discharged home."]);
        assert_eq!(split("Dr. Smith increased dosage."), ["Dr. Smith increased dosage."]);
        assert_eq!(split("no terminal punctuation"), ["no terminal punctuation"]);
        assert_eq!(split("Given 5 mg. Then more."), ["Given 5 mg. Then more."]);
        assert_eq!(split("Temp 98.6 today. Fine."), ["Temp 98.6 today.", "Fine."]);
        assert_eq!(
            split("Improving; Plan to discharge."),
            ["Improving;", "Plan to discharge."]
        );
        assert_eq!(
            split("Improving; plan to discharge."),
            ["Improving; plan to discharge."]
        );
        assert_eq!(
            split("Why? Unclear (see note.) Next."),
            ["Why?", "Unclear (see note.)", "Next."]
        );
        assert_eq!(split("Seen\nby team. Okay"), ["Seen\nby team.", "Okay"]);
        assert_eq!(split("i.e. Nothing"), ["i.e. Nothing"]);
    }

    #[test]
    fn sentence_ids_and_spans() {
        let p = para("  Pt stable.  Discharged home.  ");
        let sents = split_sentences(&p);
        assert_eq!(sents[0].sent_id, "d1#0:0");
        assert_eq!(sents[1].sent_id, "d1#0:1");
        for s in &sents {
            assert_eq!(&p.text[s.char_span.start..s.char_span.end], s.text);
        }
    }

    #[test]
    fn jsonl_loading_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let rec = |id: &str| {
            format!(r#"{{"doc_id":"{id}","patient_id":"p","note_type":"progress","timestamp":null,"text":"x"}}"#)
        };
        fs::write(&path, format!("{}\n{}\n{}\n", rec("a"), rec("b"), rec("c"))).unwrap();
        let docs = load_corpus(&path, CorpusFormat::Jsonl).unwrap();
        assert_eq!(
            docs.iter().map(|d| d.doc_id.as_str()).collect::<Vec<_>>(),
            ["a", "b", "c"]
        );

        fs::write(&path, "").unwrap();
        assert!(load_corpus(&path, CorpusFormat::Jsonl).unwrap().is_empty());

        fs::write(&path, format!("{}\n{}\n", rec("a"), rec("a"))).unwrap();
        match load_corpus(&path, CorpusFormat::Jsonl) {
            Err(CorpusError::DuplicateId { line, doc_id, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(doc_id, "a");
            }
            other => panic!("expected duplicate id error, got {other:?}"),
        }

        fs::write(&path, format!("{}\n{{\"doc_id\":\"b\"}}\n", rec("a"))).unwrap();
        match load_corpus(&path, CorpusFormat::Jsonl) {
            Err(CorpusError::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected format error, got {other:?}"),
        }

        let missing = dir.path().join("nope.jsonl");
        assert!(matches!(
            load_corpus(&missing, CorpusFormat::Jsonl),
            Err(CorpusError::Io { .. })
        ));
    }

    #[test]
    fn text_dir_loading() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("ward");
        fs::create_dir_all(root.join("p2")).unwrap();
        fs::write(root.join("discharge_p1.txt"), "Home.").unwrap();
        fs::write(root.join("admission_p1.txt"), "Admitted.").unwrap();
        fs::write(root.join("notes.md"), "ignored").unwrap();
        fs::write(root.join("p2").join("progress_p2_day1.txt"), "Better.").unwrap();
        let docs = load_corpus(&root, CorpusFormat::TextDir).unwrap();
        let summary: Vec<(&str, &str, NoteType)> = docs
            .iter()
            .map(|d| (d.doc_id.as_str(), d.patient_id.as_str(), d.note_type))
            .collect();
        assert_eq!(
            summary,
            [
                ("admission_p1", "ward", NoteType::Admission),
                ("discharge_p1", "ward", NoteType::Discharge),
                ("progress_p2_day1", "p2", NoteType::Progress),
            ]
        );
    }
}
