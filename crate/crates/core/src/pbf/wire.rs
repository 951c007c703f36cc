//! Protobuf wire-format primitives: varints, field headers, length-delimited
//! payloads. Offsets in errors are byte positions within the buffer handed to
//! the reader.

use crate::error::DecodeError;

pub const WIRE_VARINT: u8 = 0;
pub const WIRE_FIXED64: u8 = 1;
pub const WIRE_LEN: u8 = 2;
pub const WIRE_FIXED32: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldHeader {
    pub tag: u32,
    pub wire_type: u8,
}

pub struct WireReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> WireReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        WireReader { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn is_at_end(&self) -> bool {
        self.pos >= self.buf.len()
    }

    pub fn read_varint(&mut self) -> Result<u64, DecodeError> {
        let start = self.pos;
        let mut value: u64 = 0;
        let mut shift = 0u32;
        loop {
            let byte = *self
                .buf
                .get(self.pos)
                .ok_or(DecodeError::MalformedVarint { offset: start })?;
            self.pos += 1;
            if shift == 63 && byte > 1 {
                // more than 64 significant bits
                return Err(DecodeError::MalformedVarint { offset: start });
            }
            value |= u64::from(byte & 0x7f) << shift;
            if byte & 0x80 == 0 {
                return Ok(value);
            }
            shift += 7;
            if shift > 63 {
                return Err(DecodeError::MalformedVarint { offset: start });
            }
        }
    }

    /// Zigzag-decoded signed varint (protobuf sint64).
    pub fn read_sint64(&mut self) -> Result<i64, DecodeError> {
        let raw = self.read_varint()?;
        Ok(decode_zigzag(raw))
    }

    pub fn read_field_header(&mut self) -> Result<Option<FieldHeader>, DecodeError> {
        if self.is_at_end() {
            return Ok(None);
        }
        let offset = self.pos;
        let key = self.read_varint()?;
        let tag = (key >> 3) as u32;
        let wire_type = (key & 0x7) as u8;
        if tag == 0 {
            return Err(DecodeError::FieldFraming {
                field_tag: 0,
                offset,
                detail: "field tag zero",
            });
        }
        match wire_type {
            WIRE_VARINT | WIRE_FIXED64 | WIRE_LEN | WIRE_FIXED32 => {
                Ok(Some(FieldHeader { tag, wire_type }))
            }
            other => Err(DecodeError::UnknownWireType {
                wire_type: other,
                field_tag: tag,
                offset,
            }),
        }
    }

    /// Reads a length-delimited payload, returning the sub-slice.
    pub fn read_len_delimited(&mut self, field_tag: u32) -> Result<&'a [u8], DecodeError> {
        let offset = self.pos;
        let len = self.read_varint()? as usize;
        if len > self.buf.len() - self.pos {
            return Err(DecodeError::FieldFraming {
                field_tag,
                offset,
                detail: "declared length exceeds remaining bytes",
            });
        }
        let slice = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }

    pub fn skip(&mut self, header: FieldHeader) -> Result<(), DecodeError> {
        let offset = self.pos;
        match header.wire_type {
            WIRE_VARINT => {
                self.read_varint()?;
            }
            WIRE_FIXED64 => self.advance(8, header.tag, offset)?,
            WIRE_LEN => {
                self.read_len_delimited(header.tag)?;
            }
            WIRE_FIXED32 => self.advance(4, header.tag, offset)?,
            _ => unreachable!("filtered by read_field_header"),
        }
        Ok(())
    }

    fn advance(&mut self, n: usize, field_tag: u32, offset: usize) -> Result<(), DecodeError> {
        if n > self.buf.len() - self.pos {
            return Err(DecodeError::FieldFraming {
                field_tag,
                offset,
                detail: "fixed-width field exceeds remaining bytes",
            });
        }
        self.pos += n;
        Ok(())
    }
}

pub fn decode_zigzag(raw: u64) -> i64 {
    ((raw >> 1) as i64) ^ -((raw & 1) as i64)
}

pub fn encode_zigzag(value: i64) -> u64 {
    ((value << 1) ^ (value >> 63)) as u64
}

/// Decodes a packed or singular repeated varint field into `out`.
/// Wire type 2 carries a packed run; wire type 0 a single value.
pub fn read_repeated_varint(
    reader: &mut WireReader<'_>,
    header: FieldHeader,
    out: &mut Vec<u64>,
) -> Result<(), DecodeError> {
    match header.wire_type {
        WIRE_LEN => {
            let payload = reader.read_len_delimited(header.tag)?;
            let mut inner = WireReader::new(payload);
            while !inner.is_at_end() {
                out.push(inner.read_varint()?);
            }
            Ok(())
        }
        WIRE_VARINT => {
            out.push(reader.read_varint()?);
            Ok(())
        }
        _ => Err(DecodeError::FieldFraming {
            field_tag: header.tag,
            offset: reader.position(),
            detail: "expected varint or packed run",
        }),
    }
}

pub fn read_repeated_sint64(
    reader: &mut WireReader<'_>,
    header: FieldHeader,
    out: &mut Vec<i64>,
) -> Result<(), DecodeError> {
    let mut raw = Vec::new();
    read_repeated_varint(reader, header, &mut raw)?;
    out.extend(raw.into_iter().map(decode_zigzag));
    Ok(())
}

/// Writer-side primitives for the fixture encoder.
pub mod emit {
    use super::{encode_zigzag, WIRE_LEN, WIRE_VARINT};

    pub fn varint(out: &mut Vec<u8>, mut value: u64) {
        loop {
            let mut byte = (value & 0x7f) as u8;
            value >>= 7;
            if value != 0 {
                byte |= 0x80;
            }
            out.push(byte);
            if value == 0 {
                break;
            }
        }
    }

    pub fn field_header(out: &mut Vec<u8>, tag: u32, wire_type: u8) {
        varint(out, (u64::from(tag) << 3) | u64::from(wire_type));
    }

    pub fn varint_field(out: &mut Vec<u8>, tag: u32, value: u64) {
        field_header(out, tag, WIRE_VARINT);
        varint(out, value);
    }

    pub fn sint64_field(out: &mut Vec<u8>, tag: u32, value: i64) {
        varint_field(out, tag, encode_zigzag(value));
    }

    pub fn bytes_field(out: &mut Vec<u8>, tag: u32, payload: &[u8]) {
        field_header(out, tag, WIRE_LEN);
        varint(out, payload.len() as u64);
        out.extend_from_slice(payload);
    }

    pub fn packed_varint_field(out: &mut Vec<u8>, tag: u32, values: &[u64]) {
        if values.is_empty() {
            return;
        }
        let mut payload = Vec::new();
        for &v in values {
            varint(&mut payload, v);
        }
        bytes_field(out, tag, &payload);
    }

    pub fn packed_sint64_field(out: &mut Vec<u8>, tag: u32, values: &[i64]) {
        let raw: Vec<u64> = values.iter().map(|&v| encode_zigzag(v)).collect();
        packed_varint_field(out, tag, &raw);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip_varint(value: u64) -> u64 {
        let mut buf = Vec::new();
        emit::varint(&mut buf, value);
        WireReader::new(&buf).read_varint().unwrap()
    }

    #[test]
    fn varint_roundtrip() {
        for v in [0, 1, 127, 128, 300, u32::MAX as u64, u64::MAX] {
            assert_eq!(roundtrip_varint(v), v);
        }
    }

    #[test]
    fn zigzag_roundtrip() {
        for v in [0i64, 1, -1, 2, -2, i64::MAX, i64::MIN] {
            assert_eq!(decode_zigzag(encode_zigzag(v)), v);
        }
    }

    #[test]
    fn truncated_varint_is_error() {
        let err = WireReader::new(&[0x80, 0x80]).read_varint().unwrap_err();
        assert!(matches!(err, DecodeError::MalformedVarint { offset: 0 }));
    }

    #[test]
    fn overlong_varint_is_error() {
        // 11 continuation bytes can never terminate inside 64 bits
        let buf = [0xffu8; 11];
        assert!(WireReader::new(&buf).read_varint().is_err());
    }

    #[test]
    fn len_field_beyond_buffer_is_error() {
        let mut buf = Vec::new();
        emit::field_header(&mut buf, 1, WIRE_LEN);
        emit::varint(&mut buf, 100);
        buf.push(0);
        let mut r = WireReader::new(&buf);
        let h = r.read_field_header().unwrap().unwrap();
        assert!(r.read_len_delimited(h.tag).is_err());
    }
}
