//! Single-file record log.
//!
//! Layout: the 4 magic bytes `TKG1`, then a sequence of frames. Each frame is
//! a little-endian `u32` payload length, the payload, and a little-endian
//! `u32` CRC32 of the payload. The first record is always a [`Header`];
//! every transaction ends with [`Record::Commit`]. Records after the last
//! commit are ignored on load.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::state::Meta;
use super::types::{CommunityNode, EntityNode, Episode, EpisodicEdge, SemanticEdge};
use super::StoreError;
use crate::ids::CommunityId;

pub const MAGIC: &[u8; 4] = b"TKG1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format_version: u32,
    pub dim: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Record {
    Header(Header),
    Episode(Episode),
    Entity(EntityNode),
    Edge(SemanticEdge),
    EpisodicEdge(EpisodicEdge),
    Community(CommunityNode),
    RemoveCommunity(CommunityId),
    Meta(Meta),
    Commit,
}

fn corrupt(msg: impl Into<String>) -> StoreError {
    StoreError::CorruptStore(msg.into())
}

pub fn encode_frame(record: &Record, out: &mut Vec<u8>) {
    let payload = bincode::serialize(record).expect("records always serialize");
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
}

/// Encodes a full file image: magic, header, `records`, commit.
pub fn encode_file(dim: usize, records: &[Record]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    encode_frame(
        &Record::Header(Header {
            format_version: FORMAT_VERSION,
            dim: dim as u32,
        }),
        &mut out,
    );
    for r in records {
        encode_frame(r, &mut out);
    }
    encode_frame(&Record::Commit, &mut out);
    out
}

/// Decodes a file image into its header and the committed records.
pub fn decode(bytes: &[u8]) -> Result<(Header, Vec<Record>), StoreError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(corrupt("missing TKG1 magic"));
    }
    let mut pos = 4;
    let mut header = None;
    let mut committed = Vec::new();
    let mut pending = Vec::new();
    while pos < bytes.len() {
        if bytes.len() - pos < 8 {
            return Err(corrupt(format!("truncated frame at offset {pos}")));
        }
        let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        let start = pos + 4;
        let end = start
            .checked_add(len)
            .filter(|e| e + 4 <= bytes.len())
            .ok_or_else(|| corrupt(format!("truncated frame at offset {pos}")))?;
        let payload = &bytes[start..end];
        let crc = u32::from_le_bytes(bytes[end..end + 4].try_into().unwrap());
        if crc32fast::hash(payload) != crc {
            return Err(corrupt(format!("checksum mismatch in frame at offset {pos}")));
        }
        let record: Record = bincode::deserialize(payload).map_err(|e| corrupt(format!("undecodable record at offset {pos}: {e}")))?;
        pos = end + 4;
        match record {
            Record::Header(h) => {
                if header.is_some() {
                    return Err(corrupt("duplicate header"));
                }
                if h.format_version != FORMAT_VERSION {
                    return Err(StoreError::VersionMismatch {
                        found: h.format_version,
                        expected: FORMAT_VERSION,
                    });
                }
                header = Some(h);
            }
            Record::Commit => committed.append(&mut pending),
            other => {
                if header.is_none() {
                    return Err(corrupt("record before header"));
                }
                pending.push(other);
            }
        }
    }
    let header = header.ok_or_else(|| corrupt("missing header"))?;
    Ok((header, committed))
}

pub fn read_file(path: &Path) -> Result<(Header, Vec<Record>), StoreError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

/// Writes a complete file image via a temporary file and rename.
pub fn write_file(path: &Path, dim: usize, records: &[Record]) -> Result<(), StoreError> {
    let tmp = tmp_path(path);
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(&encode_file(dim, records))?;
        w.flush()?;
        w.get_ref().sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Appends committed transactions to an open log file.
#[derive(Debug)]
pub struct LogWriter {
    file: File,
    path: PathBuf,
    sync: bool,
}

impl LogWriter {
    /// Opens `path` for appending. The file must already hold a valid image.
    pub fn open(path: &Path, sync: bool) -> Result<Self, StoreError> {
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(LogWriter {
            file,
            path: path.to_path_buf(),
            sync,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes `records` plus a commit marker. On failure the file is
    /// truncated back to its previous length.
    pub fn append(&mut self, records: &[Record]) -> Result<(), StoreError> {
        let before = self.file.metadata()?.len();
        let mut buf = Vec::new();
        for r in records {
            encode_frame(r, &mut buf);
        }
        encode_frame(&Record::Commit, &mut buf);
        let res = self.file.write_all(&buf).and_then(|_| {
            if self.sync {
                self.file.sync_data()
            } else {
                Ok(())
            }
        });
        if let Err(e) = res {
            let _ = self.file.set_len(before);
            return Err(e.into());
        }
        Ok(())
    }
}
