//! Readers and writers for every on-disk format.
//!
//! | format      | layout |
//! | ----------- | ------ |
//! | annotations | JSONL `{"image_id","width","height","instances":[{"synset","box":[x,y,w,h]}]}` |
//! | queries     | JSONL `{"query_id","image_id","text"}` |
//! | corpora     | JSONL `{"image_id","sentences":[..]}` |
//! | embeddings  | binary, see [`write_embeddings_to`] |
//! | synset graph| TSV records `S <synset>`, `H <child> <parent>`, `A <lemma> <antonym>` |
//! | colors      | CSV `name,r,g,b` |
//!
//! Readers preserve record order and stop at the first malformed record.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::{ColorTable, NamedColor};
use crate::types::{
    BoundingBox, ConceptInstance, CorpusRecord, EmbeddingMatrix, ImageAnnotation, QueryRecord,
    SynsetId, TypeError,
};
use crate::wordnet::{SynsetGraph, SynsetGraphBuilder};

pub const EMBEDDING_MAGIC: &[u8; 8] = b"XRANKEMB";
pub const EMBEDDING_VERSION: u32 = 1;
const EMBEDDING_HEADER_LEN: usize = 8 + 4 + 4 + 8;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("not an embedding file (bad magic)")]
    BadMagic,
    #[error("unsupported embedding file version {0}")]
    UnsupportedVersion(u32),
    #[error("embedding file truncated: {0}")]
    TruncatedFile(String),
    #[error("embedding file header promises {expected} rows but {found} trailing bytes remain")]
    CountMismatch { expected: u64, found: usize },
    #[error("invalid embedding matrix: {0}")]
    Invalid(#[from] TypeError),
}

fn parse_err(line: usize, reason: impl ToString) -> IngestError {
    IngestError::Parse {
        line,
        reason: reason.to_string(),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, IngestError> {
    Ok(BufReader::new(File::open(path)?))
}

fn create(path: &Path) -> Result<BufWriter<File>, IngestError> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Numbered non-blank lines.
fn lines(reader: impl BufRead) -> impl Iterator<Item = Result<(usize, String), IngestError>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)).map_err(IngestError::from))
        .filter(|r| !matches!(r, Ok((_, l)) if l.trim().is_empty()))
}

fn check_unique<'a>(seen: &mut HashSet<String>, id: &'a str, line: usize) -> Result<(), IngestError> {
    if !seen.insert(id.to_string()) {
        return Err(IngestError::DuplicateId {
            line,
            id: id.to_string(),
        });
    }
    Ok(())
}

fn write_jsonl<T: Serialize>(mut w: impl Write, items: impl Iterator<Item = T>) -> Result<(), IngestError> {
    for item in items {
        serde_json::to_writer(&mut w, &item).map_err(io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- annotations

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationLine {
    image_id: String,
    width: u32,
    height: u32,
    instances: Vec<InstanceLine>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceLine {
    synset: String,
    #[serde(rename = "box")]
    bbox: [f64; 4],
}

impl AnnotationLine {
    fn into_annotation(self) -> Result<ImageAnnotation, TypeError> {
        let instances = self
            .instances
            .into_iter()
            .map(|i| {
                let [x, y, w, h] = i.bbox;
                Ok(ConceptInstance {
                    synset: SynsetId::new(i.synset)?,
                    bbox: BoundingBox::new(x, y, w, h)?,
                })
            })
            .collect::<Result<Vec<_>, TypeError>>()?;
        ImageAnnotation::new(self.image_id, self.width, self.height, instances)
    }

    fn from_annotation(a: &ImageAnnotation) -> Self {
        Self {
            image_id: a.image_id().to_string(),
            width: a.width(),
            height: a.height(),
            instances: a
                .instances()
                .iter()
                .map(|i| InstanceLine {
                    synset: i.synset.to_string(),
                    bbox: i.bbox.to_array(),
                })
                .collect(),
        }
    }
}

pub fn read_annotations_from(reader: impl BufRead) -> Result<Vec<ImageAnnotation>, IngestError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for item in lines(reader) {
        let (n, line) = item?;
        let raw: AnnotationLine = serde_json::from_str(&line).map_err(|e| parse_err(n, e))?;
        let ann = raw.into_annotation().map_err(|e| parse_err(n, e))?;
        check_unique(&mut seen, ann.image_id(), n)?;
        out.push(ann);
    }
    Ok(out)
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<ImageAnnotation>, IngestError> {
    read_annotations_from(open(path.as_ref())?)
}

pub fn write_annotations_to(w: impl Write, annotations: &[ImageAnnotation]) -> Result<(), IngestError> {
    write_jsonl(w, annotations.iter().map(AnnotationLine::from_annotation))
}

pub fn write_annotations(path: impl AsRef<Path>, annotations: &[ImageAnnotation]) -> Result<(), IngestError> {
    write_annotations_to(create(path.as_ref())?, annotations)
}

// ---------------------------------------------------------------- queries / corpora

pub fn read_queries_from(reader: impl BufRead) -> Result<Vec<QueryRecord>, IngestError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for item in lines(reader) {
        let (n, line) = item?;
        let q: QueryRecord = serde_json::from_str(&line).map_err(|e| parse_err(n, e))?;
        if q.query_id.is_empty() || q.image_id.is_empty() {
            return Err(parse_err(n, "query_id and image_id must be non-empty"));
        }
        check_unique(&mut seen, &q.query_id, n)?;
        out.push(q);
    }
    Ok(out)
}

pub fn read_queries(path: impl AsRef<Path>) -> Result<Vec<QueryRecord>, IngestError> {
    read_queries_from(open(path.as_ref())?)
}

pub fn write_queries_to(w: impl Write, queries: &[QueryRecord]) -> Result<(), IngestError> {
    write_jsonl(w, queries.iter())
}

pub fn write_queries(path: impl AsRef<Path>, queries: &[QueryRecord]) -> Result<(), IngestError> {
    write_queries_to(create(path.as_ref())?, queries)
}

pub fn read_corpora_from(reader: impl BufRead) -> Result<Vec<CorpusRecord>, IngestError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for item in lines(reader) {
        let (n, line) = item?;
        let c: CorpusRecord = serde_json::from_str(&line).map_err(|e| parse_err(n, e))?;
        c.check().map_err(|e| parse_err(n, e))?;
        check_unique(&mut seen, &c.image_id, n)?;
        out.push(c);
    }
    Ok(out)
}

pub fn read_corpora(path: impl AsRef<Path>) -> Result<Vec<CorpusRecord>, IngestError> {
    read_corpora_from(open(path.as_ref())?)
}

pub fn write_corpora_to(w: impl Write, corpora: &[CorpusRecord]) -> Result<(), IngestError> {
    write_jsonl(w, corpora.iter())
}

pub fn write_corpora(path: impl AsRef<Path>, corpora: &[CorpusRecord]) -> Result<(), IngestError> {
    write_corpora_to(create(path.as_ref())?, corpora)
}

// ---------------------------------------------------------------- embeddings

/// Writes the binary embedding format:
///
/// ```text
/// "XRANKEMB" | u32 version=1 | u32 dim | u64 count
/// count x ( u16 id_len | id bytes (UTF-8) | dim x f32 )
/// ```
///
/// All integers and floats are little-endian. Values are narrowed to `f32`.
pub fn write_embeddings_to(mut w: impl Write, m: &EmbeddingMatrix) -> Result<(), IngestError> {
    w.write_all(EMBEDDING_MAGIC)?;
    w.write_all(&EMBEDDING_VERSION.to_le_bytes())?;
    let dim = u32::try_from(m.dim()).map_err(|_| parse_err(0, "dim does not fit in u32"))?;
    w.write_all(&dim.to_le_bytes())?;
    w.write_all(&(m.len() as u64).to_le_bytes())?;
    for (id, row) in m.ids().iter().zip(m.rows()) {
        let len = u16::try_from(id.len())
            .map_err(|_| parse_err(0, format!("id {id:?} longer than 65535 bytes")))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(id.as_bytes())?;
        for v in row {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_embeddings(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<(), IngestError> {
    write_embeddings_to(create(path.as_ref())?, m)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], IngestError> {
        if self.buf.len() - self.pos < n {
            return Err(IngestError::TruncatedFile(format!("missing {what} at byte {}", self.pos)));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
}

pub fn read_embeddings_from(mut reader: impl Read) -> Result<EmbeddingMatrix, IngestError> {
    let mut buf = Vec::new();
    reader.read_to_end(&mut buf)?;
    if buf.len() < EMBEDDING_MAGIC.len() || &buf[..8] != EMBEDDING_MAGIC {
        return Err(IngestError::BadMagic);
    }
    if buf.len() < EMBEDDING_HEADER_LEN {
        return Err(IngestError::TruncatedFile("incomplete header".into()));
    }
    let mut cur = Cursor { buf: &buf, pos: 8 };
    let version = u32::from_le_bytes(cur.take(4, "version")?.try_into().unwrap());
    if version != EMBEDDING_VERSION {
        return Err(IngestError::UnsupportedVersion(version));
    }
    let dim = u32::from_le_bytes(cur.take(4, "dim")?.try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(cur.take(8, "count")?.try_into().unwrap());

    let mut ids = Vec::new();
    let mut data = Vec::new();
    for row in 0..count {
        let len = u16::from_le_bytes(cur.take(2, "id length")?.try_into().unwrap()) as usize;
        let id = std::str::from_utf8(cur.take(len, "id")?)
            .map_err(|_| parse_err(row as usize + 1, "id is not valid UTF-8"))?;
        ids.push(id.to_string());
        let values = cur.take(dim * 4, "row values")?;
        data.extend(
            values
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap()))),
        );
    }
    if cur.pos != buf.len() {
        return Err(IngestError::CountMismatch {
            expected: count,
            found: buf.len() - cur.pos,
        });
    }
    Ok(EmbeddingMatrix::new(ids, dim, data)?)
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix, IngestError> {
    read_embeddings_from(open(path.as_ref())?)
}

// ---------------------------------------------------------------- synset graph

pub fn read_synset_graph_from(reader: impl BufRead) -> Result<SynsetGraph, IngestError> {
    let mut builder = SynsetGraphBuilder::new();
    let sid = |s: &str, n: usize| SynsetId::new(s).map_err(|e| parse_err(n, e));
    for item in lines(reader) {
        let (n, line) = item?;
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            ["S", id] => builder.add_synset(sid(id, n)?).map_err(|e| parse_err(n, e))?,
            ["H", child, parent] => builder
                .add_hypernym(&sid(child, n)?, &sid(parent, n)?)
                .map_err(|e| parse_err(n, e))?,
            ["A", a, b] if !a.is_empty() && !b.is_empty() => builder.add_antonym(a, b),
            _ => return Err(parse_err(n, format!("unrecognized record {line:?}"))),
        }
    }
    Ok(builder.build())
}

pub fn read_synset_graph(path: impl AsRef<Path>) -> Result<SynsetGraph, IngestError> {
    read_synset_graph_from(open(path.as_ref())?)
}

/// Writes every node, then every hypernym edge, then both directions of each
/// antonym pair.
pub fn write_synset_graph_to(mut w: impl Write, g: &SynsetGraph) -> Result<(), IngestError> {
    for s in g.synsets() {
        writeln!(w, "S\t{s}")?;
    }
    for (c, p) in g.hypernym_edges() {
        writeln!(w, "H\t{c}\t{p}")?;
    }
    for (a, set) in g.antonym_table() {
        for b in set {
            writeln!(w, "A\t{a}\t{b}")?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_synset_graph(g: &SynsetGraph, path: impl AsRef<Path>) -> Result<(), IngestError> {
    write_synset_graph_to(create(path.as_ref())?, g)
}

// ---------------------------------------------------------------- colors

#[derive(Serialize, Deserialize)]
struct ColorRow {
    name: String,
    r: u8,
    g: u8,
    b: u8,
}

pub fn read_colors_from(reader: impl Read) -> Result<ColorTable, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut colors = Vec::new();
    for (i, row) in rdr.deserialize::<ColorRow>().enumerate() {
        // header is line 1
        let row = row.map_err(|e| parse_err(i + 2, e))?;
        colors.push(NamedColor {
            name: row.name,
            rgb: [row.r, row.g, row.b],
        });
    }
    ColorTable::new(colors).map_err(|e| parse_err(0, e))
}

pub fn read_colors(path: impl AsRef<Path>) -> Result<ColorTable, IngestError> {
    read_colors_from(open(path.as_ref())?)
}

pub fn write_colors_to(w: impl Write, table: &ColorTable) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(w);
    for c in table.colors() {
        wtr.serialize(ColorRow {
            name: c.name.clone(),
            r: c.rgb[0],
            g: c.rgb[1],
            b: c.rgb[2],
        })
        .map_err(|e| IngestError::Io(e.into()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_colors(table: &ColorTable, path: impl AsRef<Path>) -> Result<(), IngestError> {
    write_colors_to(create(path.as_ref())?, table)
}
