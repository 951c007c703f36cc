//! Decoder for the PBF container format: blob framing, block decoding, and a
//! streaming element reader. A test-oriented fixture encoder lives in
//! [`fixture`].

pub mod blob;
pub mod block;
pub mod fixture;
pub mod wire;

use std::collections::VecDeque;
use std::io::Read;

pub use blob::{read_blob_frames, BlobFrame, FrameReader, OSM_DATA, OSM_HEADER};
pub use block::{
    decode_dense_nodes, decode_primitive_block, decode_relations, decode_ways, delta_decode,
    to_degrees, DenseGroup, GroupView, PrimitiveBlockView,
};

use crate::element::RawElement;
use crate::error::DecodeError;

/// Streaming reader yielding decoded elements in file order. Frames with an
/// unknown header type are skipped and counted, not treated as errors.
pub struct ElementReader<R: Read> {
    frames: FrameReader<R>,
    pending: VecDeque<RawElement>,
    unknown_frames: u64,
    header_frames: u64,
    failed: bool,
}

impl<R: Read> ElementReader<R> {
    pub fn new(input: R) -> Self {
        ElementReader {
            frames: read_blob_frames(input),
            pending: VecDeque::new(),
            unknown_frames: 0,
            header_frames: 0,
            failed: false,
        }
    }

    /// Frames skipped because their header type was not recognized.
    pub fn unknown_frames(&self) -> u64 {
        self.unknown_frames
    }

    pub fn header_frames(&self) -> u64 {
        self.header_frames
    }
}

impl<R: Read> Iterator for ElementReader<R> {
    type Item = Result<RawElement, DecodeError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(e) = self.pending.pop_front() {
                return Some(Ok(e));
            }
            if self.failed {
                return None;
            }
            match self.frames.next()? {
                Ok(frame) if frame.is_data() => {
                    match decode_primitive_block(&frame.payload).and_then(|b| b.elements()) {
                        Ok(elements) => self.pending.extend(elements),
                        Err(e) => {
                            self.failed = true;
                            return Some(Err(e));
                        }
                    }
                }
                Ok(frame) if frame.is_header() => self.header_frames += 1,
                Ok(_) => self.unknown_frames += 1,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

/// Convenience wrapper over [`ElementReader`].
pub fn read_elements<R: Read>(input: R) -> ElementReader<R> {
    ElementReader::new(input)
}

#[cfg(test)]
mod tests {
    use super::fixture::{encode_blob_frame, encode_blob_frame_with_raw_size, Compression};
    use super::*;

    #[test]
    fn header_then_data_frame_order() {
        let elements = vec![RawElement::node(
            1,
            1.0,
            2.0,
            crate::element::tags(&[("amenity", "school")]),
        )];
        let bytes = fixture::encode_file(&elements, &fixture::EncodeOptions::default());
        let frames: Vec<_> = read_blob_frames(bytes.as_slice())
            .collect::<Result<_, _>>()
            .unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].header_type, OSM_HEADER);
        assert_eq!(frames[1].header_type, OSM_DATA);
    }

    #[test]
    fn raw_frame_payload_passes_through() {
        let payload = b"arbitrary bytes".to_vec();
        let frame_bytes = encode_blob_frame("Custom", &payload, Compression::Raw);
        let frames: Vec<_> = read_blob_frames(frame_bytes.as_slice())
            .collect::<Result<_, _>>()
            .unwrap();
        assert_eq!(frames[0].payload, payload);
        assert_eq!(frames[0].declared_raw_size, Some(payload.len()));
    }

    #[test]
    fn raw_size_mismatch_is_integrity_error() {
        let payload = vec![7u8; 99];
        let frame_bytes =
            encode_blob_frame_with_raw_size(OSM_DATA, &payload, Compression::Zlib, 100);
        let err = read_blob_frames(frame_bytes.as_slice())
            .next()
            .unwrap()
            .unwrap_err();
        assert!(matches!(
            err,
            DecodeError::RawSizeMismatch {
                declared: 100,
                actual: 99
            }
        ));
    }

    #[test]
    fn truncated_stream_reports_offset() {
        let elements = vec![RawElement::node(1, 0.0, 0.0, Default::default())];
        let mut bytes = fixture::encode_file(&elements, &fixture::EncodeOptions::default());
        bytes.truncate(bytes.len() - 3);
        let result: Result<Vec<_>, _> = read_blob_frames(bytes.as_slice()).collect();
        match result {
            Err(DecodeError::Truncated { offset, .. }) => assert!(offset > 0),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn unsupported_compression_is_named() {
        // blob with an lzma_data field (tag 4)
        let mut blob = Vec::new();
        crate::pbf::wire::emit::bytes_field(&mut blob, 4, b"xx");
        let mut header = Vec::new();
        crate::pbf::wire::emit::bytes_field(&mut header, 1, OSM_DATA.as_bytes());
        crate::pbf::wire::emit::varint_field(&mut header, 3, blob.len() as u64);
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(header.len() as u32).to_be_bytes());
        bytes.extend_from_slice(&header);
        bytes.extend_from_slice(&blob);

        let err = read_blob_frames(bytes.as_slice())
            .next()
            .unwrap()
            .unwrap_err();
        match err {
            DecodeError::UnsupportedCompression { variant } => assert_eq!(variant, "lzma"),
            other => panic!("expected unsupported compression, got {other:?}"),
        }
    }

    #[test]
    fn unknown_frame_types_are_counted_not_fatal() {
        let elements = vec![RawElement::node(
            1,
            1.0,
            2.0,
            crate::element::tags(&[("a", "b")]),
        )];
        let opts = fixture::EncodeOptions::default();
        let mut bytes = fixture::encode_header_frame(&opts);
        bytes.extend_from_slice(&encode_blob_frame("FutureType", b"??", Compression::Raw));
        bytes.extend_from_slice(&encode_blob_frame(
            OSM_DATA,
            &fixture::encode_primitive_block(&elements, &opts),
            Compression::Zlib,
        ));

        let mut reader = read_elements(bytes.as_slice());
        let decoded: Vec<_> = (&mut reader).collect::<Result<_, _>>().unwrap();
        assert_eq!(decoded, elements);
        assert_eq!(reader.unknown_frames(), 1);
        assert_eq!(reader.header_frames(), 1);
    }
}
