//! Binary tag file codec.
//!
//! Layout (all little-endian):
//!
//! ```text
//! header  : magic "CTAG" | version u16 = 1 | reserved u16 | record_count u64
//! record  : time u64 (ps) | channel u16 | flags u16 | reserved u32
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{first_unsorted, TagError, TimeTag};

pub const MAGIC: [u8; 4] = *b"CTAG";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;
pub const RECORD_LEN: usize = 16;

/// What `write_tags` does with an unsorted stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum WriteMode {
    /// Reject unsorted input.
    #[default]
    Strict,
    /// Sort a copy before writing.
    SortOnWrite,
}

/// Streaming reader over a tag file.
pub struct TagReader<R> {
    inner: R,
    expected: u64,
    read: u64,
}

impl TagReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, TagError> {
        TagReader::new(BufReader::new(File::open(path)?))
    }
}

impl<R: Read> TagReader<R> {
    pub fn new(mut inner: R) -> Result<Self, TagError> {
        let mut header = [0u8; HEADER_LEN];
        let got = read_full(&mut inner, &mut header)?;
        if got < HEADER_LEN {
            return Err(TagError::Format(format!("header is {got} bytes, need {HEADER_LEN}")));
        }
        if header[0..4] != MAGIC {
            return Err(TagError::Format(format!("bad magic {:?}", &header[0..4])));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != VERSION {
            return Err(TagError::Format(format!("unsupported version {version}")));
        }
        let expected = u64::from_le_bytes(header[8..16].try_into().unwrap());
        Ok(TagReader { inner, expected, read: 0 })
    }

    /// Record count announced by the header.
    pub fn record_count(&self) -> u64 {
        self.expected
    }

    fn next_record(&mut self) -> Result<TimeTag, TagError> {
        let mut buf = [0u8; RECORD_LEN];
        let got = read_full(&mut self.inner, &mut buf)?;
        if got < RECORD_LEN {
            return Err(TagError::Truncated {
                offset: HEADER_LEN as u64 + self.read * RECORD_LEN as u64 + got as u64,
                expected: self.expected,
                found: self.read,
            });
        }
        self.read += 1;
        Ok(TimeTag {
            time: u64::from_le_bytes(buf[0..8].try_into().unwrap()),
            channel: u16::from_le_bytes([buf[8], buf[9]]),
            flags: u16::from_le_bytes([buf[10], buf[11]]),
        })
    }
}

impl<R: Read> Iterator for TagReader<R> {
    type Item = Result<TimeTag, TagError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.read >= self.expected {
            return None;
        }
        let rec = self.next_record();
        if rec.is_err() {
            // stop after the first error
            self.expected = self.read;
        }
        Some(rec)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.expected - self.read) as usize;
        (0, Some(left))
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Reads a whole tag file into memory.
pub fn read_tags(path: impl AsRef<Path>) -> Result<Vec<TimeTag>, TagError> {
    let reader = TagReader::open(path)?;
    let mut out = Vec::with_capacity(reader.record_count().min(1 << 26) as usize);
    for tag in reader {
        out.push(tag?);
    }
    Ok(out)
}

/// Encodes tags into any writer. Returns the record count.
pub fn encode_tags<W: Write>(tags: &[TimeTag], mode: WriteMode, mut w: W) -> Result<u64, TagError> {
    let sorted;
    let tags = match (first_unsorted(tags), mode) {
        (None, _) => tags,
        (Some(index), WriteMode::Strict) => return Err(TagError::Unsorted { index }),
        (Some(_), WriteMode::SortOnWrite) => {
            let mut v = tags.to_vec();
            v.sort_unstable();
            sorted = v;
            &sorted[..]
        }
    };
    let mut header = [0u8; HEADER_LEN];
    header[0..4].copy_from_slice(&MAGIC);
    header[4..6].copy_from_slice(&VERSION.to_le_bytes());
    header[8..16].copy_from_slice(&(tags.len() as u64).to_le_bytes());
    w.write_all(&header)?;
    let mut rec = [0u8; RECORD_LEN];
    for t in tags {
        rec[0..8].copy_from_slice(&t.time.to_le_bytes());
        rec[8..10].copy_from_slice(&t.channel.to_le_bytes());
        rec[10..12].copy_from_slice(&t.flags.to_le_bytes());
        w.write_all(&rec)?;
    }
    w.flush()?;
    Ok(tags.len() as u64)
}

/// Writes tags to `path`, returning the record count.
pub fn write_tags(tags: &[TimeTag], path: impl AsRef<Path>, mode: WriteMode) -> Result<u64, TagError> {
    let file = File::create(path)?;
    encode_tags(tags, mode, BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn encode(tags: &[TimeTag]) -> Vec<u8> {
        let mut buf = Vec::new();
        encode_tags(tags, WriteMode::Strict, &mut buf).unwrap();
        buf
    }

    fn decode(bytes: &[u8]) -> Result<Vec<TimeTag>, TagError> {
        TagReader::new(bytes)?.collect()
    }

    #[test]
    fn empty_payload() {
        let bytes = encode(&[]);
        assert_eq!(bytes.len(), HEADER_LEN);
        assert!(decode(&bytes).unwrap().is_empty());
    }

    #[test]
    fn single_record_layout() {
        let bytes = encode(&[TimeTag::new(2, 12_500)]);
        assert_eq!(bytes.len(), HEADER_LEN + RECORD_LEN);
        assert_eq!(&bytes[0..4], b"CTAG");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 12_500);
        assert_eq!(u16::from_le_bytes([bytes[24], bytes[25]]), 2);
        assert_eq!(&bytes[26..32], &[0u8; 6]);
    }

    #[test]
    fn three_records_in_order() {
        let tags = vec![TimeTag::new(0, 100), TimeTag::new(1, 250), TimeTag::new(0, 400)];
        assert_eq!(decode(&encode(&tags)).unwrap(), tags);
    }

    #[test]
    fn bad_magic_is_format_error() {
        let mut bytes = encode(&[TimeTag::new(0, 1)]);
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(TagError::Format(_))));
        assert!(matches!(decode(&bytes[..7]), Err(TagError::Format(_))));
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode(&[TimeTag::new(0, 1), TimeTag::new(0, 2)]);
        let cut = &bytes[..HEADER_LEN + RECORD_LEN + 5];
        match decode(cut) {
            Err(TagError::Truncated { offset, expected, found }) => {
                assert_eq!(offset, (HEADER_LEN + RECORD_LEN + 5) as u64);
                assert_eq!(expected, 2);
                assert_eq!(found, 1);
            }
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    #[test]
    fn strict_rejects_unsorted() {
        let tags = [TimeTag::new(0, 5), TimeTag::new(0, 3)];
        let err = encode_tags(&tags, WriteMode::Strict, Vec::new()).unwrap_err();
        assert!(matches!(err, TagError::Unsorted { index: 1 }));
        let mut buf = Vec::new();
        encode_tags(&tags, WriteMode::SortOnWrite, &mut buf).unwrap();
        let back = decode(&buf).unwrap();
        assert_eq!(back[0].time, 3);
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(mut raw in proptest::collection::vec((0u64..u64::MAX / 2, 0u16..8, any::<u16>()), 0..500)) {
            raw.sort();
            let tags: Vec<TimeTag> = raw.iter().map(|&(t, c, f)| TimeTag { time: t, channel: c, flags: f }).collect();
            let bytes = encode(&tags);
            let back = decode(&bytes).unwrap();
            prop_assert_eq!(&back, &tags);
            prop_assert_eq!(encode(&back), bytes);
        }
    }
}
