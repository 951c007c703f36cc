//! Blob framing of the PBF container: a 4-byte big-endian length, the
//! blob-header message, then the blob message whose payload is raw or
//! zlib-compressed.

use std::io::Read;

use flate2::read::ZlibDecoder;

use crate::error::DecodeError;
use crate::pbf::wire::{WireReader, WIRE_LEN, WIRE_VARINT};

/// BlobHeader messages larger than this are rejected as malformed.
pub const MAX_HEADER_SIZE: usize = 64 * 1024;
/// Blob messages larger than this are rejected as malformed.
pub const MAX_BLOB_SIZE: usize = 32 * 1024 * 1024;

pub const OSM_HEADER: &str = "OSMHeader";
pub const OSM_DATA: &str = "OSMData";

/// One decoded blob frame: header type plus fully decompressed payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlobFrame {
    pub header_type: String,
    pub payload: Vec<u8>,
    pub declared_raw_size: Option<usize>,
    /// Byte offset of the frame's 4-byte length prefix within the stream.
    pub offset: u64,
}

impl BlobFrame {
    pub fn is_header(&self) -> bool {
        self.header_type == OSM_HEADER
    }

    pub fn is_data(&self) -> bool {
        self.header_type == OSM_DATA
    }
}

/// Streaming frame reader. Framing is sequential; the decoded frames are
/// immutable values, so per-blob block decoding may proceed on other threads
/// with results re-emitted in file order.
pub struct FrameReader<R: Read> {
    input: R,
    offset: u64,
    done: bool,
}

impl<R: Read> FrameReader<R> {
    pub fn new(input: R) -> Self {
        FrameReader {
            input,
            offset: 0,
            done: false,
        }
    }

    /// Current byte offset into the stream.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    fn read_exact_at(&mut self, buf: &mut [u8], context: &'static str) -> Result<(), DecodeError> {
        match self.input.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(DecodeError::Truncated {
                offset: self.offset,
                expected: buf.len(),
                context,
            }),
            Err(e) => Err(DecodeError::Io {
                offset: self.offset,
                source: e,
            }),
        }
    }

    fn next_frame(&mut self) -> Result<Option<BlobFrame>, DecodeError> {
        let frame_offset = self.offset;
        let mut len_buf = [0u8; 4];
        // EOF exactly at a frame boundary ends the stream
        match self.input.read(&mut len_buf[..1]) {
            Ok(0) => return Ok(None),
            Ok(1) => self.offset += 1,
            Ok(_) => unreachable!(),
            Err(e) => {
                return Err(DecodeError::Io {
                    offset: self.offset,
                    source: e,
                })
            }
        }
        self.read_exact_at(&mut len_buf[1..], "frame length")?;
        let header_size = u32::from_be_bytes(len_buf) as usize;
        if header_size > MAX_HEADER_SIZE {
            return Err(DecodeError::HeaderTooLarge {
                offset: frame_offset,
                size: header_size,
                limit: MAX_HEADER_SIZE,
            });
        }

        let mut header_buf = vec![0u8; header_size];
        self.read_exact_at(&mut header_buf, "blob header")?;
        let header = decode_blob_header(&header_buf)?;
        if header.datasize > MAX_BLOB_SIZE {
            return Err(DecodeError::BlobTooLarge {
                offset: frame_offset,
                size: header.datasize,
                limit: MAX_BLOB_SIZE,
            });
        }

        let mut blob_buf = vec![0u8; header.datasize];
        self.read_exact_at(&mut blob_buf, "blob body")?;
        let (payload, declared_raw_size) = decode_blob(&blob_buf)?;

        Ok(Some(BlobFrame {
            header_type: header.header_type,
            payload,
            declared_raw_size,
            offset: frame_offset,
        }))
    }
}

impl<R: Read> Iterator for FrameReader<R> {
    type Item = Result<BlobFrame, DecodeError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_frame() {
            Ok(Some(frame)) => Some(Ok(frame)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Yields frames in file order, each payload fully decompressed.
pub fn read_blob_frames<R: Read>(input: R) -> FrameReader<R> {
    FrameReader::new(input)
}

struct BlobHeaderMsg {
    header_type: String,
    datasize: usize,
}

fn decode_blob_header(buf: &[u8]) -> Result<BlobHeaderMsg, DecodeError> {
    let mut reader = WireReader::new(buf);
    let mut header_type: Option<String> = None;
    let mut datasize: Option<usize> = None;
    while let Some(h) = reader.read_field_header()? {
        match (h.tag, h.wire_type) {
            (1, WIRE_LEN) => {
                let bytes = reader.read_len_delimited(h.tag)?;
                let s = std::str::from_utf8(bytes)
                    .map_err(|_| DecodeError::InvalidUtf8 { index: 0 })?;
                header_type = Some(s.to_string());
            }
            (3, WIRE_VARINT) => {
                datasize = Some(reader.read_varint()? as usize);
            }
            _ => reader.skip(h)?,
        }
    }
    Ok(BlobHeaderMsg {
        header_type: header_type.ok_or(DecodeError::MissingField {
            message: "BlobHeader",
            field: "type",
        })?,
        datasize: datasize.ok_or(DecodeError::MissingField {
            message: "BlobHeader",
            field: "datasize",
        })?,
    })
}

/// Decodes a blob message: raw payloads pass through, zlib payloads are
/// inflated, any other compression discriminator is rejected by name.
fn decode_blob(buf: &[u8]) -> Result<(Vec<u8>, Option<usize>), DecodeError> {
    let mut reader = WireReader::new(buf);
    let mut raw: Option<Vec<u8>> = None;
    let mut zlib: Option<Vec<u8>> = None;
    let mut raw_size: Option<usize> = None;
    while let Some(h) = reader.read_field_header()? {
        match (h.tag, h.wire_type) {
            (1, WIRE_LEN) => raw = Some(reader.read_len_delimited(h.tag)?.to_vec()),
            (2, WIRE_VARINT) => raw_size = Some(reader.read_varint()? as usize),
            (3, WIRE_LEN) => zlib = Some(reader.read_len_delimited(h.tag)?.to_vec()),
            (4, _) => {
                return Err(DecodeError::UnsupportedCompression {
                    variant: "lzma".into(),
                })
            }
            (5, _) => {
                return Err(DecodeError::UnsupportedCompression {
                    variant: "bzip2".into(),
                })
            }
            (6, _) => {
                return Err(DecodeError::UnsupportedCompression {
                    variant: "lz4".into(),
                })
            }
            (7, _) => {
                return Err(DecodeError::UnsupportedCompression {
                    variant: "zstd".into(),
                })
            }
            _ => reader.skip(h)?,
        }
    }

    let payload = if let Some(raw) = raw {
        if let Some(declared) = raw_size {
            if declared != raw.len() {
                return Err(DecodeError::RawSizeMismatch {
                    declared,
                    actual: raw.len(),
                });
            }
        }
        raw
    } else if let Some(zlib) = zlib {
        let declared = raw_size;
        let cap = declared.unwrap_or(0).min(MAX_BLOB_SIZE);
        let mut inflated = Vec::with_capacity(cap);
        let mut decoder = ZlibDecoder::new(zlib.as_slice());
        // hard cap so a corrupt declared size cannot balloon memory
        decoder
            .take((MAX_BLOB_SIZE + 1) as u64)
            .read_to_end(&mut inflated)
            .map_err(|e| DecodeError::Inflate { source: e })?;
        if inflated.len() > MAX_BLOB_SIZE {
            return Err(DecodeError::BlobTooLarge {
                offset: 0,
                size: inflated.len(),
                limit: MAX_BLOB_SIZE,
            });
        }
        if let Some(declared) = declared {
            if declared != inflated.len() {
                return Err(DecodeError::RawSizeMismatch {
                    declared,
                    actual: inflated.len(),
                });
            }
        }
        inflated
    } else {
        return Err(DecodeError::EmptyBlob);
    };

    Ok((payload, raw_size))
}
