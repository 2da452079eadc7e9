//! Length-prefixed binary record archive with `.lst` / `.idx` sidecars.
//!
//! A `.rec` file is a sequence of records:
//!
//! ```text
//! magic      u32 LE  0x0000D7CE (bytes CE D7 00 00)
//! length     u32 LE  payload length in bytes
//! payload    length bytes
//! padding    zero bytes up to the next 4-byte boundary
//! crc32      u32 LE  CRC-32 (IEEE) of the payload
//! ```
//!
//! The `.idx` file holds `<index>\t<offset of record magic>\n` per record and
//! the `.lst` file holds `<index>\t<source path>\n`, both in write order.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const RECORD_MAGIC: u32 = 0x0000_D7CE;

const HEADER_LEN: usize = 8;
const CRC_LEN: usize = 4;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("empty archive")]
    EmptyArchive,
    #[error("duplicate record index {0}")]
    DuplicateIndex(u64),
    #[error("record index {index}: payload of {len} bytes exceeds the u32 length field")]
    PayloadTooLarge { index: u64, len: usize },
    #[error("record index {index}: source path must not contain tabs or newlines")]
    InvalidSourcePath { index: u64 },
    #[error("bad magic at record {record} (offset {offset})")]
    BadMagic { record: usize, offset: u64 },
    #[error("checksum mismatch at record {record}")]
    ChecksumMismatch { record: usize },
    #[error("truncated record at record {record}")]
    TruncatedRecord { record: usize },
    #[error("unknown record index {0}")]
    UnknownIndex(u64),
    #[error("{}: line {line}: malformed entry", path.display())]
    MalformedSidecar { path: PathBuf, line: usize },
    #[error("sidecar files disagree: {0}")]
    Inconsistent(String),
    #[error("sample payload is malformed: {0}")]
    MalformedSample(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArchiveError + '_ {
    move |source| ArchiveError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordEntry {
    pub index: u64,
    pub source_path: String,
    pub payload: Vec<u8>,
}

/// Paths of the three archive files, sharing one stem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveTriple {
    pub lst_path: PathBuf,
    pub idx_path: PathBuf,
    pub rec_path: PathBuf,
}

impl ArchiveTriple {
    /// `<stem>.lst`, `<stem>.idx`, `<stem>.rec`.
    pub fn from_stem(stem: &Path) -> Self {
        let with = |ext: &str| {
            let mut s = stem.as_os_str().to_owned();
            s.push(".");
            s.push(ext);
            PathBuf::from(s)
        };
        Self {
            lst_path: with("lst"),
            idx_path: with("idx"),
            rec_path: with("rec"),
        }
    }
}

fn padding(len: usize) -> usize {
    (4 - len % 4) % 4
}

/// Encoded size of a record carrying `payload_len` bytes.
pub fn record_len(payload_len: usize) -> usize {
    HEADER_LEN + payload_len + padding(payload_len) + CRC_LEN
}

/// Serializes `entries` into `.rec`, `.idx` and `.lst` byte buffers.
pub fn encode_archive(entries: &[RecordEntry]) -> Result<(Vec<u8>, String, String), ArchiveError> {
    if entries.is_empty() {
        return Err(ArchiveError::EmptyArchive);
    }
    let mut seen = HashSet::with_capacity(entries.len());
    for e in entries {
        if !seen.insert(e.index) {
            return Err(ArchiveError::DuplicateIndex(e.index));
        }
        if u32::try_from(e.payload.len()).is_err() {
            return Err(ArchiveError::PayloadTooLarge {
                index: e.index,
                len: e.payload.len(),
            });
        }
        if e.source_path.contains(['\t', '\n', '\r']) {
            return Err(ArchiveError::InvalidSourcePath { index: e.index });
        }
    }

    let total: usize = entries.iter().map(|e| record_len(e.payload.len())).sum();
    let mut rec = Vec::with_capacity(total);
    let mut idx = String::new();
    let mut lst = String::new();
    for e in entries {
        idx.push_str(&format!("{}\t{}\n", e.index, rec.len()));
        lst.push_str(&format!("{}\t{}\n", e.index, e.source_path));
        rec.extend_from_slice(&RECORD_MAGIC.to_le_bytes());
        rec.extend_from_slice(&(e.payload.len() as u32).to_le_bytes());
        rec.extend_from_slice(&e.payload);
        rec.resize(rec.len() + padding(e.payload.len()), 0);
        rec.extend_from_slice(&crc32fast::hash(&e.payload).to_le_bytes());
    }
    Ok((rec, idx, lst))
}

/// Writes `<out_stem>.rec`, `.idx` and `.lst`. Parent directories are
/// created as needed.
pub fn pack(entries: &[RecordEntry], out_stem: &Path) -> Result<ArchiveTriple, ArchiveError> {
    let (rec, idx, lst) = encode_archive(entries)?;
    let triple = ArchiveTriple::from_stem(out_stem);
    if let Some(parent) = triple.rec_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(&triple.rec_path, rec).map_err(io_err(&triple.rec_path))?;
    fs::write(&triple.idx_path, idx).map_err(io_err(&triple.idx_path))?;
    fs::write(&triple.lst_path, lst).map_err(io_err(&triple.lst_path))?;
    Ok(triple)
}

/// Decodes the record starting at `data[0]`. Returns the payload and the
/// encoded record length.
fn decode_record(data: &[u8], record: usize, offset: u64) -> Result<(&[u8], usize), ArchiveError> {
    let truncated = ArchiveError::TruncatedRecord { record };
    if data.len() < HEADER_LEN {
        return Err(truncated);
    }
    let magic = u32::from_le_bytes(data[0..4].try_into().unwrap());
    if magic != RECORD_MAGIC {
        return Err(ArchiveError::BadMagic { record, offset });
    }
    let len = u32::from_le_bytes(data[4..8].try_into().unwrap()) as usize;
    let total = record_len(len);
    if data.len() < total {
        return Err(truncated);
    }
    let payload = &data[HEADER_LEN..HEADER_LEN + len];
    let crc_at = total - CRC_LEN;
    let stored = u32::from_le_bytes(data[crc_at..total].try_into().unwrap());
    if crc32fast::hash(payload) != stored {
        return Err(ArchiveError::ChecksumMismatch { record });
    }
    Ok((payload, total))
}

/// Decodes every record of an in-memory `.rec` image. An empty buffer is a
/// truncated record 0.
pub fn decode_sequential(data: &[u8]) -> Result<Vec<Vec<u8>>, ArchiveError> {
    if data.is_empty() {
        return Err(ArchiveError::TruncatedRecord { record: 0 });
    }
    let mut out = Vec::new();
    let mut pos = 0usize;
    while pos < data.len() {
        let (payload, len) = decode_record(&data[pos..], out.len(), pos as u64)?;
        out.push(payload.to_vec());
        pos += len;
    }
    Ok(out)
}

/// Reads all payloads of a `.rec` file in write order, verifying magic and
/// checksum of each record.
pub fn read_sequential(rec_path: &Path) -> Result<Vec<Vec<u8>>, ArchiveError> {
    let data = fs::read(rec_path).map_err(io_err(rec_path))?;
    decode_sequential(&data)
}

fn parse_sidecar(path: &Path) -> Result<Vec<(u64, String)>, ArchiveError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let malformed = || ArchiveError::MalformedSidecar {
                path: path.to_path_buf(),
                line: i + 1,
            };
            let (index, value) = line.split_once('\t').ok_or_else(malformed)?;
            let index = index.parse().map_err(|_| malformed())?;
            Ok((index, value.to_string()))
        })
        .collect()
}

/// `(index, offset)` pairs of the `.idx` file in record order.
pub fn read_index(idx_path: &Path) -> Result<Vec<(u64, u64)>, ArchiveError> {
    let raw = parse_sidecar(idx_path)?;
    raw.into_iter()
        .enumerate()
        .map(|(i, (index, offset))| {
            let offset = offset.parse().map_err(|_| ArchiveError::MalformedSidecar {
                path: idx_path.to_path_buf(),
                line: i + 1,
            })?;
            Ok((index, offset))
        })
        .collect()
}

/// `(index, source_path)` pairs of the `.lst` file in record order.
pub fn read_list(lst_path: &Path) -> Result<Vec<(u64, String)>, ArchiveError> {
    parse_sidecar(lst_path)
}

/// Reads the payload of the record with the given index using the `.idx`
/// offset table.
pub fn read_random(triple: &ArchiveTriple, index: u64) -> Result<Vec<u8>, ArchiveError> {
    let table = read_index(&triple.idx_path)?;
    let (ordinal, &(_, offset)) = table
        .iter()
        .enumerate()
        .find(|(_, (i, _))| *i == index)
        .ok_or(ArchiveError::UnknownIndex(index))?;

    let path = &triple.rec_path;
    let mut file = File::open(path).map_err(io_err(path))?;
    file.seek(SeekFrom::Start(offset)).map_err(io_err(path))?;
    let mut header = [0u8; HEADER_LEN];
    read_full(&mut file, &mut header, ordinal, path)?;
    let len = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    if u32::from_le_bytes(header[0..4].try_into().unwrap()) != RECORD_MAGIC {
        return Err(ArchiveError::BadMagic {
            record: ordinal,
            offset,
        });
    }
    let mut buf = vec![0u8; record_len(len)];
    buf[..HEADER_LEN].copy_from_slice(&header);
    read_full(&mut file, &mut buf[HEADER_LEN..], ordinal, path)?;
    let (payload, _) = decode_record(&buf, ordinal, offset)?;
    Ok(payload.to_vec())
}

fn read_full(file: &mut File, buf: &mut [u8], record: usize, path: &Path) -> Result<(), ArchiveError> {
    file.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            ArchiveError::TruncatedRecord { record }
        } else {
            io_err(path)(e)
        }
    })
}

/// Reads the whole archive back into entries, checking that the three files
/// agree on record count and order.
pub fn read_entries(triple: &ArchiveTriple) -> Result<Vec<RecordEntry>, ArchiveError> {
    let payloads = read_sequential(&triple.rec_path)?;
    let index = read_index(&triple.idx_path)?;
    let list = read_list(&triple.lst_path)?;
    if payloads.len() != index.len() || index.len() != list.len() {
        return Err(ArchiveError::Inconsistent(format!(
            "{} records, {} index lines, {} list lines",
            payloads.len(),
            index.len(),
            list.len()
        )));
    }
    let mut expected_offset = 0u64;
    index
        .into_iter()
        .zip(list)
        .zip(payloads)
        .map(|(((idx, offset), (lst_idx, source_path)), payload)| {
            if idx != lst_idx {
                return Err(ArchiveError::Inconsistent(format!(
                    "index {idx} listed as {lst_idx}"
                )));
            }
            if offset != expected_offset {
                return Err(ArchiveError::Inconsistent(format!(
                    "index {idx} recorded at offset {offset}, found at {expected_offset}"
                )));
            }
            expected_offset += record_len(payload.len()) as u64;
            Ok(RecordEntry {
                index: idx,
                source_path,
                payload,
            })
        })
        .collect()
}

/// Image bytes plus its annotation, as stored in one record payload.
///
/// ```text
/// image_len   u32 LE
/// image       image_len bytes
/// name_len    u32 LE
/// name        UTF-8 annotation file name
/// annotation  remaining bytes
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePayload {
    pub image: Vec<u8>,
    pub annotation_name: String,
    pub annotation: Vec<u8>,
}

impl SamplePayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(8 + self.image.len() + self.annotation_name.len() + self.annotation.len());
        out.extend_from_slice(&(self.image.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.image);
        out.extend_from_slice(&(self.annotation_name.len() as u32).to_le_bytes());
        out.extend_from_slice(self.annotation_name.as_bytes());
        out.extend_from_slice(&self.annotation);
        out
    }

    pub fn decode(data: &[u8]) -> Result<Self, ArchiveError> {
        let malformed = |m: &str| ArchiveError::MalformedSample(m.to_string());
        let take_len = |d: &[u8]| -> Result<usize, ArchiveError> {
            d.get(..4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
                .ok_or_else(|| malformed("missing length field"))
        };
        let image_len = take_len(data)?;
        let rest = &data[4..];
        let image = rest.get(..image_len).ok_or_else(|| malformed("image truncated"))?;
        let rest = &rest[image_len..];
        let name_len = take_len(rest)?;
        let rest = &rest[4..];
        let name = rest.get(..name_len).ok_or_else(|| malformed("name truncated"))?;
        let annotation_name =
            String::from_utf8(name.to_vec()).map_err(|_| malformed("name is not UTF-8"))?;
        Ok(Self {
            image: image.to_vec(),
            annotation_name,
            annotation: rest[name_len..].to_vec(),
        })
    }
}

/// Dataset layout: which annotation extension pairs with each image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Layout {
    /// `images/` + `labels/` with one `.txt` label file per image.
    #[default]
    Yolo,
    /// Images next to same-named `.xml` annotation files.
    Voc,
}

impl Layout {
    pub fn annotation_extension(self) -> &'static str {
        match self {
            Layout::Yolo => "txt",
            Layout::Voc => "xml",
        }
    }
}

const IMAGE_EXTENSIONS: &[&str] = &["jpg", "jpeg", "png", "bmp", "ppm", "pgm"];

/// Pairs every image in `images_dir` with the same-stem annotation file in
/// `annotations_dir` and builds one entry per image, indexed from 0 in
/// file-name order. `source_path` is the image file name.
pub fn collect_samples(
    images_dir: &Path,
    annotations_dir: &Path,
    layout: Layout,
) -> Result<Vec<RecordEntry>, ArchiveError> {
    let mut images = Vec::new();
    for entry in fs::read_dir(images_dir).map_err(io_err(images_dir))? {
        let path = entry.map_err(io_err(images_dir))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)));
        if path.is_file() && is_image {
            images.push(path);
        }
    }
    images.sort();

    images
        .iter()
        .enumerate()
        .map(|(i, image_path)| {
            let file_name = image_path
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| ArchiveError::MalformedSample(format!("non UTF-8 file name {}", image_path.display())))?;
            let stem = image_path.file_stem().and_then(|s| s.to_str()).unwrap_or(file_name);
            let annotation_name = format!("{stem}.{}", layout.annotation_extension());
            let annotation_path = annotations_dir.join(&annotation_name);
            let image = fs::read(image_path).map_err(io_err(image_path))?;
            let annotation = fs::read(&annotation_path).map_err(io_err(&annotation_path))?;
            Ok(RecordEntry {
                index: i as u64,
                source_path: file_name.to_string(),
                payload: SamplePayload {
                    image,
                    annotation_name,
                    annotation,
                }
                .encode(),
            })
        })
        .collect()
}

/// Writes every sample of an archive back out: images under
/// `out_dir/images/`, annotations under `out_dir/annotations/`. Returns the
/// number of samples restored.
pub fn unpack(triple: &ArchiveTriple, out_dir: &Path) -> Result<usize, ArchiveError> {
    let entries = read_entries(triple)?;
    let images = out_dir.join("images");
    let annotations = out_dir.join("annotations");
    fs::create_dir_all(&images).map_err(io_err(&images))?;
    fs::create_dir_all(&annotations).map_err(io_err(&annotations))?;
    for e in &entries {
        let sample = SamplePayload::decode(&e.payload)?;
        let safe = |name: &str| {
            let p = Path::new(name);
            if p.components().count() == 1 && p.file_name().is_some() {
                Ok(p.to_path_buf())
            } else {
                Err(ArchiveError::MalformedSample(format!("unsafe file name {name:?}")))
            }
        };
        let image_path = images.join(safe(&e.source_path)?);
        let annotation_path = annotations.join(safe(&sample.annotation_name)?);
        fs::write(&image_path, &sample.image).map_err(io_err(&image_path))?;
        fs::write(&annotation_path, &sample.annotation).map_err(io_err(&annotation_path))?;
    }
    Ok(entries.len())
}
