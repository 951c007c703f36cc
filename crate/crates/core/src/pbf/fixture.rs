//! Fixture encoder: writes synthetic element sets in the same container
//! format the reader consumes. Test support for round-trip, fuzz, and
//! pipeline fixtures; not a general-purpose writer.

use std::io::Write;

use flate2::write::ZlibEncoder;
use indexmap::IndexMap;

use crate::element::{ElementKind, Geometry, RawElement};
use crate::pbf::blob::{OSM_DATA, OSM_HEADER};
use crate::pbf::wire::emit;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compression {
    Raw,
    Zlib,
}

#[derive(Debug, Clone)]
pub struct EncodeOptions {
    pub compression: Compression,
    pub granularity: i32,
    pub lat_offset: i64,
    pub lon_offset: i64,
    /// Elements per OSMData frame.
    pub block_size: usize,
    /// Encode nodes as dense groups (the common on-disk form) or as plain
    /// node messages.
    pub dense_nodes: bool,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            compression: Compression::Zlib,
            granularity: 100,
            lat_offset: 0,
            lon_offset: 0,
            block_size: 8000,
            dense_nodes: true,
        }
    }
}

/// Encodes a complete file: one OSMHeader frame followed by OSMData frames
/// of at most `block_size` elements each, preserving element order.
pub fn encode_file(elements: &[RawElement], opts: &EncodeOptions) -> Vec<u8> {
    let mut out = encode_header_frame(opts);
    for chunk in elements.chunks(opts.block_size.max(1)) {
        let block = encode_primitive_block(chunk, opts);
        out.extend_from_slice(&encode_blob_frame(OSM_DATA, &block, opts.compression));
    }
    out
}

pub fn encode_header_frame(opts: &EncodeOptions) -> Vec<u8> {
    let mut block = Vec::new();
    emit::bytes_field(&mut block, 4, b"OsmSchema-V0.6");
    if opts.dense_nodes {
        emit::bytes_field(&mut block, 4, b"DenseNodes");
    }
    encode_blob_frame(OSM_HEADER, &block, opts.compression)
}

/// Wraps a block payload into a framed blob: 4-byte big-endian length,
/// blob-header message, blob message.
pub fn encode_blob_frame(header_type: &str, payload: &[u8], compression: Compression) -> Vec<u8> {
    encode_blob_frame_with_raw_size(header_type, payload, compression, payload.len())
}

/// Variant allowing a deliberately wrong declared raw size, for integrity
/// tests.
pub fn encode_blob_frame_with_raw_size(
    header_type: &str,
    payload: &[u8],
    compression: Compression,
    declared_raw_size: usize,
) -> Vec<u8> {
    let mut blob = Vec::new();
    emit::varint_field(&mut blob, 2, declared_raw_size as u64);
    match compression {
        Compression::Raw => emit::bytes_field(&mut blob, 1, payload),
        Compression::Zlib => {
            let mut encoder = ZlibEncoder::new(Vec::new(), flate2::Compression::default());
            encoder.write_all(payload).expect("in-memory zlib write");
            let compressed = encoder.finish().expect("in-memory zlib finish");
            emit::bytes_field(&mut blob, 3, &compressed);
        }
    }

    let mut header = Vec::new();
    emit::bytes_field(&mut header, 1, header_type.as_bytes());
    emit::varint_field(&mut header, 3, blob.len() as u64);

    let mut out = Vec::with_capacity(4 + header.len() + blob.len());
    out.extend_from_slice(&(header.len() as u32).to_be_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&blob);
    out
}

/// Encodes one OSMData block payload (uncompressed). Consecutive runs of the
/// same element kind become one primitive group, so element order survives
/// the group structure.
pub fn encode_primitive_block(elements: &[RawElement], opts: &EncodeOptions) -> Vec<u8> {
    let mut table = StringTableBuilder::new();
    for e in elements {
        for (k, v) in &e.tags {
            table.intern(k);
            table.intern(v);
        }
    }

    let mut out = Vec::new();
    let mut table_msg = Vec::new();
    for s in &table.entries {
        emit::bytes_field(&mut table_msg, 1, s.as_bytes());
    }
    emit::bytes_field(&mut out, 1, &table_msg);

    let mut start = 0;
    while start < elements.len() {
        let kind = elements[start].kind();
        let mut end = start + 1;
        while end < elements.len() && elements[end].kind() == kind {
            end += 1;
        }
        let group = encode_group(&elements[start..end], kind, &table, opts);
        emit::bytes_field(&mut out, 2, &group);
        start = end;
    }

    if opts.granularity != 100 {
        emit::varint_field(&mut out, 17, opts.granularity as u64);
    }
    if opts.lat_offset != 0 {
        emit::varint_field(&mut out, 19, opts.lat_offset as u64);
    }
    if opts.lon_offset != 0 {
        emit::varint_field(&mut out, 20, opts.lon_offset as u64);
    }
    out
}

struct StringTableBuilder {
    entries: Vec<String>,
    index: IndexMap<String, u64>,
}

impl StringTableBuilder {
    fn new() -> Self {
        StringTableBuilder {
            entries: vec![String::new()],
            index: IndexMap::new(),
        }
    }

    fn intern(&mut self, s: &str) -> u64 {
        if let Some(&i) = self.index.get(s) {
            return i;
        }
        let i = self.entries.len() as u64;
        self.entries.push(s.to_string());
        self.index.insert(s.to_string(), i);
        i
    }

    fn get(&self, s: &str) -> u64 {
        self.index[s]
    }
}

fn raw_coord(degrees: f64, granularity: i32, offset: i64) -> i64 {
    ((degrees * 1e9 - offset as f64) / granularity as f64).round() as i64
}

fn encode_group(
    elements: &[RawElement],
    kind: ElementKind,
    table: &StringTableBuilder,
    opts: &EncodeOptions,
) -> Vec<u8> {
    match kind {
        ElementKind::Node if opts.dense_nodes => encode_dense_group(elements, table, opts),
        ElementKind::Node => {
            let mut group = Vec::new();
            for e in elements {
                let (lat, lon) = e.coordinates().expect("node has coordinates");
                let mut node = Vec::new();
                emit::sint64_field(&mut node, 1, e.id);
                let keys: Vec<u64> = e.tags.keys().map(|k| table.get(k)).collect();
                let vals: Vec<u64> = e.tags.values().map(|v| table.get(v)).collect();
                emit::packed_varint_field(&mut node, 2, &keys);
                emit::packed_varint_field(&mut node, 3, &vals);
                emit::sint64_field(&mut node, 8, raw_coord(lat, opts.granularity, opts.lat_offset));
                emit::sint64_field(&mut node, 9, raw_coord(lon, opts.granularity, opts.lon_offset));
                emit::bytes_field(&mut group, 1, &node);
            }
            group
        }
        ElementKind::Way => {
            let mut group = Vec::new();
            for e in elements {
                let refs = e.refs().expect("way has refs");
                let mut way = Vec::new();
                emit::varint_field(&mut way, 1, e.id as u64);
                let keys: Vec<u64> = e.tags.keys().map(|k| table.get(k)).collect();
                let vals: Vec<u64> = e.tags.values().map(|v| table.get(v)).collect();
                emit::packed_varint_field(&mut way, 2, &keys);
                emit::packed_varint_field(&mut way, 3, &vals);
                emit::packed_sint64_field(&mut way, 8, &diff_encode(refs));
                emit::bytes_field(&mut group, 3, &way);
            }
            group
        }
        ElementKind::Relation => {
            let mut group = Vec::new();
            for e in elements {
                let mut rel = Vec::new();
                emit::varint_field(&mut rel, 1, e.id as u64);
                let keys: Vec<u64> = e.tags.keys().map(|k| table.get(k)).collect();
                let vals: Vec<u64> = e.tags.values().map(|v| table.get(v)).collect();
                emit::packed_varint_field(&mut rel, 2, &keys);
                emit::packed_varint_field(&mut rel, 3, &vals);
                // dummy members; the reader drops them after staying aligned
                emit::packed_varint_field(&mut rel, 8, &[0, 0]);
                emit::packed_sint64_field(&mut rel, 9, &[1, 1]);
                emit::packed_varint_field(&mut rel, 10, &[0, 1]);
                emit::bytes_field(&mut group, 4, &rel);
            }
            group
        }
    }
}

fn encode_dense_group(
    elements: &[RawElement],
    table: &StringTableBuilder,
    opts: &EncodeOptions,
) -> Vec<u8> {
    let mut ids = Vec::with_capacity(elements.len());
    let mut lats = Vec::with_capacity(elements.len());
    let mut lons = Vec::with_capacity(elements.len());
    let mut keys_vals: Vec<u64> = Vec::new();
    let any_tags = elements.iter().any(|e| !e.tags.is_empty());

    for e in elements {
        let (lat, lon) = match e.geometry {
            Geometry::Node { lat, lon } => (lat, lon),
            _ => unreachable!("dense group only holds nodes"),
        };
        ids.push(e.id);
        lats.push(raw_coord(lat, opts.granularity, opts.lat_offset));
        lons.push(raw_coord(lon, opts.granularity, opts.lon_offset));
        if any_tags {
            for (k, v) in &e.tags {
                keys_vals.push(table.get(k));
                keys_vals.push(table.get(v));
            }
            keys_vals.push(0);
        }
    }

    let mut dense = Vec::new();
    emit::packed_sint64_field(&mut dense, 1, &diff_encode(&ids));
    emit::packed_sint64_field(&mut dense, 8, &diff_encode(&lats));
    emit::packed_sint64_field(&mut dense, 9, &diff_encode(&lons));
    emit::packed_varint_field(&mut dense, 10, &keys_vals);

    let mut group = Vec::new();
    emit::bytes_field(&mut group, 2, &dense);
    group
}

/// Pairwise differencing, the inverse of delta decoding.
pub fn diff_encode(values: &[i64]) -> Vec<i64> {
    let mut out = Vec::with_capacity(values.len());
    let mut prev = 0i64;
    for &v in values {
        out.push(v.wrapping_sub(prev));
        prev = v;
    }
    out
}
