//! Line-oriented trace files of eavesdropped sessions.
//!
//! ```text
//! SASI-TRACE v1 variant=modular width=96
//! S 0 <ids> <a> <b> <c> <d>
//! S 1 <ids> <a> <b> <c> <d>
//! F <ids>
//! ```
//!
//! Every word is 24 lowercase hex digits. The `F` line carries the pseudonym
//! announced after the last recorded session, so every record can be paired
//! with its successor's IDS.

use std::io::{self, BufRead, Read, Write};

use thiserror::Error;

use crate::protocol::{Messages, RotationVariant, Transcript};
use crate::word96::{ParseWordError, Word96, WIDTH};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "SASI-TRACE";
const MAX_LINE: u64 = 4096;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceHeader {
    pub format_version: u32,
    pub variant: RotationVariant,
    pub width: u32,
    /// Free text appended to the header as `note=<text>`.
    pub seed_note: Option<String>,
}

impl TraceHeader {
    pub fn new(variant: RotationVariant) -> Self {
        TraceHeader {
            format_version: FORMAT_VERSION,
            variant,
            width: WIDTH,
            seed_note: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SessionRecord {
    pub index: u64,
    pub messages: Messages,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceItem {
    Record(SessionRecord),
    Final(Word96),
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: malformed header: {reason}")]
    Header { line: usize, reason: String },
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: bad {field} field: {source}")]
    BadHex {
        line: usize,
        field: &'static str,
        source: ParseWordError,
    },
    #[error("line {line}: expected session index {expected}, found {found}")]
    NonConsecutive {
        line: usize,
        expected: u64,
        found: String,
    },
    #[error("line {line}: missing final IDS")]
    MissingFinal { line: usize },
    #[error("line {line}: data after the final IDS line")]
    TrailingData { line: usize },
    #[error("line {line}: exceeds {MAX_LINE} bytes")]
    LineTooLong { line: usize },
}

impl TraceError {
    pub fn line(&self) -> Option<usize> {
        match self {
            TraceError::Io(_) => None,
            TraceError::Header { line, .. }
            | TraceError::Malformed { line, .. }
            | TraceError::BadHex { line, .. }
            | TraceError::NonConsecutive { line, .. }
            | TraceError::MissingFinal { line }
            | TraceError::TrailingData { line }
            | TraceError::LineTooLong { line } => Some(*line),
        }
    }
}

fn header_line(header: &TraceHeader) -> String {
    let mut line = format!(
        "{MAGIC} v{} variant={} width={}",
        header.format_version, header.variant, header.width
    );
    if let Some(note) = &header.seed_note {
        line.push_str(" note=");
        line.push_str(note);
    }
    line
}

/// Incremental trace writer; records are numbered in the order written.
pub struct TraceWriter<W: Write> {
    sink: W,
    next_index: u64,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut sink: W, header: &TraceHeader) -> io::Result<Self> {
        if let Some(note) = &header.seed_note {
            if note.contains(['\n', '\r']) {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidInput,
                    "header note must be a single line",
                ));
            }
        }
        writeln!(sink, "{}", header_line(header))?;
        Ok(TraceWriter {
            sink,
            next_index: 0,
        })
    }

    pub fn write_record(&mut self, m: &Messages) -> io::Result<()> {
        writeln!(
            self.sink,
            "S {} {} {} {} {} {}",
            self.next_index, m.ids, m.a, m.b, m.c, m.d
        )?;
        self.next_index += 1;
        Ok(())
    }

    /// Writes the final IDS line and returns the sink.
    pub fn finish(mut self, final_ids: Word96) -> io::Result<W> {
        writeln!(self.sink, "F {final_ids}")?;
        self.sink.flush()?;
        Ok(self.sink)
    }
}

/// Writes a whole trace. Record indices are renumbered from zero.
pub fn write_trace<'a, W, I>(
    header: &TraceHeader,
    records: I,
    final_ids: Word96,
    sink: W,
) -> io::Result<W>
where
    W: Write,
    I: IntoIterator<Item = &'a Messages>,
{
    let mut writer = TraceWriter::new(sink, header)?;
    for m in records {
        writer.write_record(m)?;
    }
    writer.finish(final_ids)
}

/// Streaming trace reader. Holds one line in memory at a time.
pub struct TraceReader<R> {
    source: R,
    header: TraceHeader,
    buf: String,
    line: usize,
    next_index: u64,
    final_ids: Option<Word96>,
    done: bool,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(mut source: R) -> Result<Self, TraceError> {
        let mut buf = String::new();
        if read_bounded_line(&mut source, &mut buf, 1)?.is_none() {
            return Err(TraceError::Header {
                line: 1,
                reason: "empty input".into(),
            });
        }
        let header = parse_header(buf.trim_end_matches(['\n', '\r']))?;
        Ok(TraceReader {
            source,
            header,
            buf,
            line: 1,
            next_index: 0,
            final_ids: None,
            done: false,
        })
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    /// The final IDS, available once iteration has reached the `F` line.
    pub fn final_ids(&self) -> Option<Word96> {
        self.final_ids
    }

    /// Number of records yielded so far.
    pub fn records_read(&self) -> u64 {
        self.next_index
    }

    /// Pairs every record with its successor's IDS.
    pub fn transcripts(self) -> LinkedTranscripts<Self> {
        link_items(self)
    }

    fn read_item(&mut self) -> Result<Option<TraceItem>, TraceError> {
        self.line += 1;
        let line = self.line;
        let terminated = match read_bounded_line(&mut self.source, &mut self.buf, line)? {
            None => return Err(TraceError::MissingFinal { line }),
            Some(terminated) => terminated,
        };
        let text = self.buf.trim_end_matches(['\n', '\r']);
        let mut fields = text.split(' ');
        match fields.next() {
            Some("S") if terminated => {
                let index = fields.next().unwrap_or("");
                if index != self.next_index.to_string() {
                    return Err(TraceError::NonConsecutive {
                        line,
                        expected: self.next_index,
                        found: index.to_string(),
                    });
                }
                let mut words = [Word96::ZERO; 5];
                for (slot, name) in words.iter_mut().zip(["ids", "a", "b", "c", "d"]) {
                    let field = fields.next().ok_or_else(|| TraceError::Malformed {
                        line,
                        reason: format!("missing {name} field"),
                    })?;
                    *slot = Word96::from_hex(field).map_err(|source| TraceError::BadHex {
                        line,
                        field: name,
                        source,
                    })?;
                }
                if fields.next().is_some() {
                    return Err(TraceError::Malformed {
                        line,
                        reason: "too many fields".into(),
                    });
                }
                let [ids, a, b, c, d] = words;
                let record = SessionRecord {
                    index: self.next_index,
                    messages: Messages { ids, a, b, c, d },
                };
                self.next_index += 1;
                Ok(Some(TraceItem::Record(record)))
            }
            Some("F") => {
                let parsed = match (fields.next(), fields.next()) {
                    (Some(field), None) => Word96::from_hex(field).ok(),
                    _ => None,
                };
                let Some(ids) = parsed else {
                    return Err(TraceError::MissingFinal { line });
                };
                self.ensure_eof()?;
                self.final_ids = Some(ids);
                Ok(Some(TraceItem::Final(ids)))
            }
            _ if !terminated => Err(TraceError::MissingFinal { line }),
            _ => Err(TraceError::Malformed {
                line,
                reason: format!("unexpected line {:?}", truncate(text, 40)),
            }),
        }
    }

    fn ensure_eof(&mut self) -> Result<(), TraceError> {
        let mut probe = [0u8; 1];
        loop {
            match self.source.read(&mut probe) {
                Ok(0) => return Ok(()),
                Ok(_) => return Err(TraceError::TrailingData { line: self.line + 1 }),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<TraceItem, TraceError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.read_item();
        match &item {
            Ok(Some(TraceItem::Final(_))) | Err(_) => self.done = true,
            _ => {}
        }
        item.transpose()
    }
}

/// Reads one line into `buf`, refusing lines over [`MAX_LINE`] bytes.
/// Returns `None` at end of input, otherwise whether the line ended in `\n`.
fn read_bounded_line<R: BufRead>(
    source: &mut R,
    buf: &mut String,
    line: usize,
) -> Result<Option<bool>, TraceError> {
    buf.clear();
    let n = source.by_ref().take(MAX_LINE + 1).read_line(buf)?;
    if n == 0 {
        return Ok(None);
    }
    if n as u64 > MAX_LINE {
        return Err(TraceError::LineTooLong { line });
    }
    Ok(Some(buf.ends_with('\n')))
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

fn parse_header(text: &str) -> Result<TraceHeader, TraceError> {
    let err = |reason: String| TraceError::Header { line: 1, reason };
    let (head, note) = match text.split_once(" note=") {
        Some((head, note)) => (head, Some(note.to_string())),
        None => (text, None),
    };
    let fields: Vec<&str> = head.split(' ').collect();
    let [magic, version, variant, width] = fields[..] else {
        return Err(err(format!("expected 4 fields, found {}", fields.len())));
    };
    if magic != MAGIC {
        return Err(err(format!("expected {MAGIC}, found {magic:?}")));
    }
    let format_version = match version {
        "v1" => FORMAT_VERSION,
        other => return Err(err(format!("unsupported version {other:?}"))),
    };
    let variant = variant
        .strip_prefix("variant=")
        .ok_or_else(|| err("missing variant=".into()))?
        .parse::<RotationVariant>()
        .map_err(|e| err(e.to_string()))?;
    let width = width
        .strip_prefix("width=")
        .ok_or_else(|| err("missing width=".into()))?;
    if width != "96" {
        return Err(err(format!("unsupported width {width:?}")));
    }
    Ok(TraceHeader {
        format_version,
        variant,
        width: WIDTH,
        seed_note: note,
    })
}

/// Adapter pairing each record with the next record's IDS (or the final IDS).
pub struct LinkedTranscripts<I> {
    items: I,
    pending: Option<Messages>,
    done: bool,
}

pub fn link_items<I>(items: I) -> LinkedTranscripts<I>
where
    I: Iterator<Item = Result<TraceItem, TraceError>>,
{
    LinkedTranscripts {
        items,
        pending: None,
        done: false,
    }
}

impl<I> Iterator for LinkedTranscripts<I>
where
    I: Iterator<Item = Result<TraceItem, TraceError>>,
{
    type Item = Result<Transcript, TraceError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            match self.items.next() {
                Some(Ok(TraceItem::Record(record))) => {
                    if let Some(prev) = self.pending.replace(record.messages) {
                        return Some(Ok(prev.link(record.messages.ids)));
                    }
                }
                Some(Ok(TraceItem::Final(ids))) => {
                    self.done = true;
                    return self.pending.take().map(|prev| Ok(prev.link(ids)));
                }
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e));
                }
                None => {
                    self.done = true;
                    return Some(Err(TraceError::MissingFinal { line: 0 }));
                }
            }
        }
        None
    }
}

/// In-memory linking when the final IDS is already known.
pub fn link_transcripts<I>(records: I, final_ids: Word96) -> impl Iterator<Item = Transcript>
where
    I: IntoIterator<Item = Messages>,
{
    let mut records = records.into_iter().peekable();
    std::iter::from_fn(move || {
        let current = records.next()?;
        let next_ids = records.peek().map_or(final_ids, |m| m.ids);
        Some(current.link(next_ids))
    })
}
