//! Container file format shared by datasets and checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   "DDMC1\n"                      6 bytes
//! hlen    u32                            header length
//! header  JSON (utf-8)                   self-describing: kind, schema, dims
//! records repeated: u32 length + bytes   payload is format-specific
//! trailer "CRC0" + u32                   CRC-32 (IEEE) of everything above
//! ```
//!
//! The record count lives in the header, so truncation anywhere in the
//! record stream is detected and reported with the index of the record
//! that was cut short. The trailing checksum catches in-place corruption.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"DDMC1\n";
const TRAILER_TAG: &[u8; 4] = b"CRC0";

/// CRC-32 (IEEE 802.3, reflected, polynomial 0xEDB88320).
pub fn crc32(bytes: &[u8]) -> u32 {
    let mut table = [0u32; 256];
    for (i, slot) in table.iter_mut().enumerate() {
        let mut c = i as u32;
        for _ in 0..8 {
            c = if c & 1 != 0 { 0xEDB8_8320 ^ (c >> 1) } else { c >> 1 };
        }
        *slot = c;
    }
    let mut crc = !0u32;
    for &b in bytes {
        crc = table[((crc ^ b as u32) & 0xFF) as usize] ^ (crc >> 8);
    }
    !crc
}

/// Serialize a header plus records to `path`.
pub fn write_container<H: Serialize>(path: &Path, header: &H, records: &[Vec<u8>]) -> Result<()> {
    let bytes = encode_container(header, records)?;
    let display = path.display().to_string();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(&display, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(&display, e))?;
    Ok(())
}

/// In-memory encoding, exposed so tests can corrupt specific offsets.
pub fn encode_container<H: Serialize>(header: &H, records: &[Vec<u8>]) -> Result<Vec<u8>> {
    let header_json = serde_json::to_vec(header)
        .map_err(|e| Error::Config(format!("header serialization failed: {e}")))?;
    let mut out = Vec::with_capacity(
        MAGIC.len() + 4 + header_json.len() + records.iter().map(|r| r.len() + 4).sum::<usize>() + 8,
    );
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    for rec in records {
        out.extend_from_slice(&(rec.len() as u32).to_le_bytes());
        out.extend_from_slice(rec);
    }
    let crc = crc32(&out);
    out.extend_from_slice(TRAILER_TAG);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Parsed container: typed header plus raw record payloads.
#[derive(Debug)]
pub struct Container<H> {
    pub header: H,
    pub records: Vec<Vec<u8>>,
}

pub fn read_container<H: DeserializeOwned>(path: &Path) -> Result<Container<H>> {
    let display = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| Error::io(&display, e))?;
    decode_container(&bytes, &display)
}

/// Decode from memory; `name` is used in error messages.
pub fn decode_container<H: DeserializeOwned>(bytes: &[u8], name: &str) -> Result<Container<H>> {
    let corrupt = |detail: &str| Error::Corrupt {
        path: name.to_string(),
        detail: detail.to_string(),
    };

    if bytes.len() < MAGIC.len() + 4 {
        return Err(corrupt("file shorter than magic + header length"));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(corrupt("bad magic"));
    }

    // Verify the trailer first so corruption anywhere is reported as such.
    if bytes.len() < MAGIC.len() + 4 + 8 {
        return Err(corrupt("missing checksum trailer"));
    }
    let body_len = bytes.len() - 8;
    if &bytes[body_len..body_len + 4] != TRAILER_TAG {
        return Err(corrupt("missing checksum trailer"));
    }
    let stored = u32::from_le_bytes(bytes[body_len + 4..].try_into().unwrap());
    let computed = crc32(&bytes[..body_len]);
    if stored != computed {
        return Err(Error::Checksum {
            path: name.to_string(),
            stored,
            computed,
        });
    }

    let mut pos = MAGIC.len();
    let hlen = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
    pos += 4;
    if pos + hlen > body_len {
        return Err(corrupt("header extends past end of file"));
    }
    let header: H = serde_json::from_slice(&bytes[pos..pos + hlen])
        .map_err(|e| corrupt(&format!("header JSON: {e}")))?;
    pos += hlen;

    let mut records = Vec::new();
    let mut index = 0usize;
    while pos < body_len {
        if pos + 4 > body_len {
            return Err(Error::Truncated {
                path: name.to_string(),
                index,
            });
        }
        let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        pos += 4;
        if pos + len > body_len {
            return Err(Error::Truncated {
                path: name.to_string(),
                index,
            });
        }
        records.push(bytes[pos..pos + len].to_vec());
        pos += len;
        index += 1;
    }
    Ok(Container { header, records })
}

pub fn f64s_to_bytes(values: &[f64], out: &mut Vec<u8>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn f32s_to_bytes(values: &[f32], out: &mut Vec<u8>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Cursor over a record payload.
pub struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return None;
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Some(s)
    }

    pub fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|s| f64::from_le_bytes(s.try_into().unwrap()))
    }

    pub fn f64s(&mut self, n: usize) -> Option<Vec<f64>> {
        let s = self.take(8 * n)?;
        Some(s.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn f32s(&mut self, n: usize) -> Option<Vec<f32>> {
        let s = self.take(4 * n)?;
        Some(s.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|s| s[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    struct TestHeader {
        kind: String,
        n: u32,
    }

    fn sample() -> (TestHeader, Vec<Vec<u8>>) {
        (
            TestHeader {
                kind: "test".into(),
                n: 2,
            },
            vec![vec![1, 2, 3], vec![4, 5]],
        )
    }

    #[test]
    fn round_trip() {
        let (h, recs) = sample();
        let bytes = encode_container(&h, &recs).unwrap();
        let c: Container<TestHeader> = decode_container(&bytes, "mem").unwrap();
        assert_eq!(c.header, h);
        assert_eq!(c.records, recs);
    }

    #[test]
    fn crc32_known_vector() {
        // Standard check value for "123456789".
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn detects_truncation_with_record_index() {
        let (h, recs) = sample();
        let bytes = encode_container(&h, &recs).unwrap();
        // Cut inside the second record, then re-append a valid trailer so
        // the failure is attributed to truncation rather than checksum.
        let cut = bytes.len() - 8 - 1;
        let mut body = bytes[..cut].to_vec();
        let crc = crc32(&body);
        body.extend_from_slice(TRAILER_TAG);
        body.extend_from_slice(&crc.to_le_bytes());
        match decode_container::<TestHeader>(&body, "mem") {
            Err(Error::Truncated { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn detects_checksum_mismatch() {
        let (h, recs) = sample();
        let mut bytes = encode_container(&h, &recs).unwrap();
        let flip = MAGIC.len() + 4 + 2;
        bytes[flip] ^= 0xFF;
        assert!(matches!(
            decode_container::<TestHeader>(&bytes, "mem"),
            Err(Error::Checksum { .. })
        ));
    }

    #[test]
    fn missing_trailer_reported() {
        let (h, recs) = sample();
        let bytes = encode_container(&h, &recs).unwrap();
        let clipped = &bytes[..bytes.len() - 8];
        assert!(matches!(
            decode_container::<TestHeader>(clipped, "mem"),
            Err(Error::Corrupt { .. })
        ));
    }

    #[test]
    fn byte_reader_walks_payload() {
        let mut buf = Vec::new();
        f64s_to_bytes(&[1.5, -2.0], &mut buf);
        f32s_to_bytes(&[0.25], &mut buf);
        buf.push(1);
        let mut r = ByteReader::new(&buf);
        assert_eq!(r.f64s(2).unwrap(), vec![1.5, -2.0]);
        assert_eq!(r.f32s(1).unwrap(), vec![0.25]);
        assert_eq!(r.u8().unwrap(), 1);
        assert_eq!(r.remaining(), 0);
        assert!(r.f64().is_none());
    }
}
