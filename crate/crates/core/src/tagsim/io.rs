//! Tag file formats.
//!
//! Binary: a 16-byte header (`CHTG`, little-endian `u16` version, ten zero
//! bytes) followed by 9-byte records of `u8` channel and little-endian `u64`
//! picoseconds. CSV: a `channel,time_ps` header, channels by name or number.

use std::io::{BufRead, Read, Write};

use super::{Channel, TimeTag};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CHTG";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;
const RECORD_LEN: usize = 9;

pub fn write_binary<W: Write>(tags: &[TimeTag], mut out: W) -> Result<()> {
    let mut header = [0u8; HEADER_LEN];
    header[..4].copy_from_slice(MAGIC);
    header[4..6].copy_from_slice(&VERSION.to_le_bytes());
    out.write_all(&header)?;
    let mut rec = [0u8; RECORD_LEN];
    for t in tags {
        rec[0] = t.channel as u8;
        rec[1..].copy_from_slice(&t.time.to_le_bytes());
        out.write_all(&rec)?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<Vec<TimeTag>> {
    let mut header = [0u8; HEADER_LEN];
    input
        .read_exact(&mut header)
        .map_err(|_| Error::Format("truncated tag file header".into()))?;
    if &header[..4] != MAGIC {
        return Err(Error::Format("not a CHTG tag file".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported tag file version {version}")));
    }
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() % RECORD_LEN != 0 {
        return Err(Error::Format(format!(
            "{} trailing bytes after the last record",
            body.len() % RECORD_LEN
        )));
    }
    body.chunks_exact(RECORD_LEN)
        .map(|r| {
            Ok(TimeTag {
                channel: Channel::from_index(r[0])?,
                time: u64::from_le_bytes(r[1..].try_into().expect("8-byte slice")),
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(tags: &[TimeTag], mut out: W) -> Result<()> {
    writeln!(out, "channel,time_ps")?;
    for t in tags {
        writeln!(out, "{},{}", t.channel, t.time)?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<TimeTag>> {
    let mut lines = input.lines();
    match lines.next().transpose()? {
        Some(h) if h.trim() == "channel,time_ps" => {}
        other => return Err(Error::Format(format!("expected header channel,time_ps, got {other:?}"))),
    }
    let mut tags = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (ch, time) = line
            .split_once(',')
            .ok_or_else(|| Error::Format(format!("line {}: expected two fields", n + 2)))?;
        let time = time
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("line {}: bad time: {e}", n + 2)))?;
        tags.push(TimeTag {
            channel: ch.parse()?,
            time,
        });
    }
    Ok(tags)
}
