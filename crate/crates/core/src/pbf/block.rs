//! Primitive block decoding: string table, coordinate scaling, dense-node and
//! way/relation groups, and conversion into [`RawElement`] values.

use crate::element::{Geometry, RawElement, TagMap};
use crate::error::DecodeError;
use crate::pbf::wire::{
    read_repeated_sint64, read_repeated_varint, WireReader, WIRE_LEN, WIRE_VARINT,
};

pub const DEFAULT_GRANULARITY: i32 = 100;

/// Decoded view of one OSMData block before element conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveBlockView {
    pub string_table: Vec<String>,
    pub granularity: i32,
    pub lat_offset: i64,
    pub lon_offset: i64,
    pub groups: Vec<GroupView>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroupView {
    Dense(DenseGroup),
    Nodes(Vec<NodeEntry>),
    Ways(Vec<WayEntry>),
    Relations(Vec<RelationEntry>),
}

/// Delta-coded parallel arrays packing many nodes, with an interleaved
/// key/value index stream split at 0-sentinels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DenseGroup {
    pub ids: Vec<i64>,
    pub lats: Vec<i64>,
    pub lons: Vec<i64>,
    pub keys_vals: Vec<i64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeEntry {
    pub id: i64,
    pub keys: Vec<u64>,
    pub vals: Vec<u64>,
    pub lat: i64,
    pub lon: i64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WayEntry {
    pub id: i64,
    pub keys: Vec<u64>,
    pub vals: Vec<u64>,
    pub ref_deltas: Vec<i64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelationEntry {
    pub id: i64,
    pub keys: Vec<u64>,
    pub vals: Vec<u64>,
}

/// Decodes a decompressed OSMData payload. Granularity defaults to 100
/// nanodegrees and offsets to 0 when the fields are absent; groups are
/// preserved in order.
pub fn decode_primitive_block(payload: &[u8]) -> Result<PrimitiveBlockView, DecodeError> {
    let mut reader = WireReader::new(payload);
    let mut view = PrimitiveBlockView {
        string_table: Vec::new(),
        granularity: DEFAULT_GRANULARITY,
        lat_offset: 0,
        lon_offset: 0,
        groups: Vec::new(),
    };

    while let Some(h) = reader.read_field_header()? {
        match (h.tag, h.wire_type) {
            (1, WIRE_LEN) => {
                let bytes = reader.read_len_delimited(h.tag)?;
                view.string_table = decode_string_table(bytes)?;
            }
            (2, WIRE_LEN) => {
                let bytes = reader.read_len_delimited(h.tag)?;
                if let Some(group) = decode_group(bytes)? {
                    view.groups.push(group);
                }
            }
            (17, WIRE_VARINT) => view.granularity = reader.read_varint()? as i32,
            (19, WIRE_VARINT) => view.lat_offset = reader.read_varint()? as i64,
            (20, WIRE_VARINT) => view.lon_offset = reader.read_varint()? as i64,
            _ => reader.skip(h)?,
        }
    }

    if let Some(first) = view.string_table.first() {
        if !first.is_empty() {
            return Err(DecodeError::StringTableFirstNotEmpty);
        }
    }
    if view.granularity <= 0 {
        return Err(DecodeError::BadGranularity {
            granularity: view.granularity,
        });
    }
    Ok(view)
}

fn decode_string_table(buf: &[u8]) -> Result<Vec<String>, DecodeError> {
    let mut reader = WireReader::new(buf);
    let mut table = Vec::new();
    while let Some(h) = reader.read_field_header()? {
        match (h.tag, h.wire_type) {
            (1, WIRE_LEN) => {
                let bytes = reader.read_len_delimited(h.tag)?;
                let s = std::str::from_utf8(bytes)
                    .map_err(|_| DecodeError::InvalidUtf8 { index: table.len() })?;
                table.push(s.to_string());
            }
            _ => reader.skip(h)?,
        }
    }
    Ok(table)
}

fn decode_group(buf: &[u8]) -> Result<Option<GroupView>, DecodeError> {
    let mut reader = WireReader::new(buf);
    let mut dense: Option<DenseGroup> = None;
    let mut nodes = Vec::new();
    let mut ways = Vec::new();
    let mut relations = Vec::new();

    while let Some(h) = reader.read_field_header()? {
        match (h.tag, h.wire_type) {
            (1, WIRE_LEN) => {
                let bytes = reader.read_len_delimited(h.tag)?;
                nodes.push(decode_node(bytes)?);
            }
            (2, WIRE_LEN) => {
                let bytes = reader.read_len_delimited(h.tag)?;
                dense = Some(decode_dense(bytes)?);
            }
            (3, WIRE_LEN) => {
                let bytes = reader.read_len_delimited(h.tag)?;
                ways.push(decode_way(bytes)?);
            }
            (4, WIRE_LEN) => {
                let bytes = reader.read_len_delimited(h.tag)?;
                relations.push(decode_relation(bytes)?);
            }
            _ => reader.skip(h)?,
        }
    }

    if let Some(dense) = dense {
        Ok(Some(GroupView::Dense(dense)))
    } else if !nodes.is_empty() {
        Ok(Some(GroupView::Nodes(nodes)))
    } else if !ways.is_empty() {
        Ok(Some(GroupView::Ways(ways)))
    } else if !relations.is_empty() {
        Ok(Some(GroupView::Relations(relations)))
    } else {
        Ok(None)
    }
}

fn decode_dense(buf: &[u8]) -> Result<DenseGroup, DecodeError> {
    let mut reader = WireReader::new(buf);
    let mut group = DenseGroup::default();
    while let Some(h) = reader.read_field_header()? {
        match h.tag {
            1 => read_repeated_sint64(&mut reader, h, &mut group.ids)?,
            8 => read_repeated_sint64(&mut reader, h, &mut group.lats)?,
            9 => read_repeated_sint64(&mut reader, h, &mut group.lons)?,
            10 => {
                // keys_vals is int32, not zigzag
                let mut raw = Vec::new();
                read_repeated_varint(&mut reader, h, &mut raw)?;
                group.keys_vals.extend(raw.into_iter().map(|v| v as i64));
            }
            _ => reader.skip(h)?,
        }
    }
    Ok(group)
}

fn decode_node(buf: &[u8]) -> Result<NodeEntry, DecodeError> {
    let mut reader = WireReader::new(buf);
    let mut node = NodeEntry::default();
    while let Some(h) = reader.read_field_header()? {
        match h.tag {
            1 => node.id = reader.read_sint64()?,
            2 => read_repeated_varint(&mut reader, h, &mut node.keys)?,
            3 => read_repeated_varint(&mut reader, h, &mut node.vals)?,
            8 => node.lat = reader.read_sint64()?,
            9 => node.lon = reader.read_sint64()?,
            _ => reader.skip(h)?,
        }
    }
    Ok(node)
}

fn decode_way(buf: &[u8]) -> Result<WayEntry, DecodeError> {
    let mut reader = WireReader::new(buf);
    let mut way = WayEntry::default();
    while let Some(h) = reader.read_field_header()? {
        match h.tag {
            1 => way.id = reader.read_varint()? as i64,
            2 => read_repeated_varint(&mut reader, h, &mut way.keys)?,
            3 => read_repeated_varint(&mut reader, h, &mut way.vals)?,
            8 => read_repeated_sint64(&mut reader, h, &mut way.ref_deltas)?,
            _ => reader.skip(h)?,
        }
    }
    Ok(way)
}

fn decode_relation(buf: &[u8]) -> Result<RelationEntry, DecodeError> {
    let mut reader = WireReader::new(buf);
    let mut rel = RelationEntry::default();
    while let Some(h) = reader.read_field_header()? {
        match h.tag {
            1 => rel.id = reader.read_varint()? as i64,
            2 => read_repeated_varint(&mut reader, h, &mut rel.keys)?,
            3 => read_repeated_varint(&mut reader, h, &mut rel.vals)?,
            // roles_sid (8), memids (9), types (10) keep the stream aligned
            // but are dropped: relation geometry is out of scope
            _ => reader.skip(h)?,
        }
    }
    Ok(rel)
}

/// Prefix-sum over delta-coded values. Errors if the running sum leaves the
/// signed 64-bit range.
pub fn delta_decode(deltas: &[i64]) -> Result<Vec<i64>, DecodeError> {
    let mut out = Vec::with_capacity(deltas.len());
    let mut acc: i64 = 0;
    for &d in deltas {
        acc = acc.checked_add(d).ok_or(DecodeError::DeltaOverflow)?;
        out.push(acc);
    }
    Ok(out)
}

/// Scales a stored integer coordinate to decimal degrees:
/// 1e-9 * (offset + granularity * raw).
pub fn to_degrees(raw: i64, granularity: i32, offset: i64) -> f64 {
    1e-9 * ((offset as i128 + granularity as i128 * raw as i128) as f64)
}

fn lookup_string(table: &[String], index: usize) -> Result<&str, DecodeError> {
    table
        .get(index)
        .map(String::as_str)
        .ok_or(DecodeError::StringIndexOutOfRange {
            index,
            len: table.len(),
        })
}

fn build_tags(
    id: i64,
    keys: &[u64],
    vals: &[u64],
    table: &[String],
) -> Result<TagMap, DecodeError> {
    if keys.len() != vals.len() {
        return Err(DecodeError::FieldFraming {
            field_tag: 3,
            offset: 0,
            detail: "keys and vals arrays differ in length",
        });
    }
    let mut tags = TagMap::with_capacity(keys.len());
    for (&k, &v) in keys.iter().zip(vals) {
        let key = lookup_string(table, k as usize)?;
        let value = lookup_string(table, v as usize)?;
        if tags.insert(key.to_string(), value.to_string()).is_some() {
            return Err(DecodeError::DuplicateTagKey {
                id,
                key: key.to_string(),
            });
        }
    }
    Ok(tags)
}

fn check_node_range(id: i64, lat: f64, lon: f64) -> Result<(), DecodeError> {
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err(DecodeError::CoordinateRange { id, lat, lon });
    }
    Ok(())
}

/// Expands a dense-node group: ids, lats, lons delta-decoded then scaled; the
/// key/value index stream split at 0-sentinels, one segment per node.
pub fn decode_dense_nodes(
    group: &DenseGroup,
    block: &PrimitiveBlockView,
) -> Result<Vec<RawElement>, DecodeError> {
    if group.ids.len() != group.lats.len() || group.ids.len() != group.lons.len() {
        return Err(DecodeError::DenseLengthMismatch {
            ids: group.ids.len(),
            lats: group.lats.len(),
            lons: group.lons.len(),
        });
    }
    let ids = delta_decode(&group.ids)?;
    let lats = delta_decode(&group.lats)?;
    let lons = delta_decode(&group.lons)?;

    let mut elements = Vec::with_capacity(ids.len());
    let mut kv = group.keys_vals.iter().copied();
    let has_kv_stream = !group.keys_vals.is_empty();

    for i in 0..ids.len() {
        let mut tags = TagMap::new();
        if has_kv_stream {
            loop {
                let key_index = match kv.next() {
                    Some(0) => break,
                    Some(k) => k,
                    None => return Err(DecodeError::KeyValueStreamExhausted),
                };
                let val_index = kv.next().ok_or(DecodeError::KeyValueStreamExhausted)?;
                let key = lookup_string(&block.string_table, usize::try_from(key_index).map_err(
                    |_| DecodeError::StringIndexOutOfRange {
                        index: 0,
                        len: block.string_table.len(),
                    },
                )?)?;
                let value = lookup_string(&block.string_table, usize::try_from(val_index).map_err(
                    |_| DecodeError::StringIndexOutOfRange {
                        index: 0,
                        len: block.string_table.len(),
                    },
                )?)?;
                if tags.insert(key.to_string(), value.to_string()).is_some() {
                    return Err(DecodeError::DuplicateTagKey {
                        id: ids[i],
                        key: key.to_string(),
                    });
                }
            }
        }
        let lat = to_degrees(lats[i], block.granularity, block.lat_offset);
        let lon = to_degrees(lons[i], block.granularity, block.lon_offset);
        check_node_range(ids[i], lat, lon)?;
        elements.push(RawElement {
            id: ids[i],
            geometry: Geometry::Node { lat, lon },
            tags,
        });
    }
    Ok(elements)
}

pub fn decode_plain_nodes(
    nodes: &[NodeEntry],
    block: &PrimitiveBlockView,
) -> Result<Vec<RawElement>, DecodeError> {
    nodes
        .iter()
        .map(|n| {
            let lat = to_degrees(n.lat, block.granularity, block.lat_offset);
            let lon = to_degrees(n.lon, block.granularity, block.lon_offset);
            check_node_range(n.id, lat, lon)?;
            Ok(RawElement {
                id: n.id,
                geometry: Geometry::Node { lat, lon },
                tags: build_tags(n.id, &n.keys, &n.vals, &block.string_table)?,
            })
        })
        .collect()
}

/// Each way's refs are delta-decoded; tags resolved through the string table.
pub fn decode_ways(
    ways: &[WayEntry],
    block: &PrimitiveBlockView,
) -> Result<Vec<RawElement>, DecodeError> {
    ways.iter()
        .map(|w| {
            let refs = delta_decode(&w.ref_deltas)?;
            if refs.is_empty() {
                return Err(DecodeError::EmptyWayRefs { id: w.id });
            }
            Ok(RawElement {
                id: w.id,
                geometry: Geometry::Way { refs },
                tags: build_tags(w.id, &w.keys, &w.vals, &block.string_table)?,
            })
        })
        .collect()
}

pub fn decode_relations(
    relations: &[RelationEntry],
    block: &PrimitiveBlockView,
) -> Result<Vec<RawElement>, DecodeError> {
    relations
        .iter()
        .map(|r| {
            Ok(RawElement {
                id: r.id,
                geometry: Geometry::Relation,
                tags: build_tags(r.id, &r.keys, &r.vals, &block.string_table)?,
            })
        })
        .collect()
}

impl PrimitiveBlockView {
    /// Converts every group into elements, preserving group order.
    pub fn elements(&self) -> Result<Vec<RawElement>, DecodeError> {
        let mut out = Vec::new();
        for group in &self.groups {
            match group {
                GroupView::Dense(dense) => out.extend(decode_dense_nodes(dense, self)?),
                GroupView::Nodes(nodes) => out.extend(decode_plain_nodes(nodes, self)?),
                GroupView::Ways(ways) => out.extend(decode_ways(ways, self)?),
                GroupView::Relations(rels) => out.extend(decode_relations(rels, self)?),
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pbf::wire::emit;

    #[test]
    fn delta_decode_prefix_sums() {
        assert_eq!(delta_decode(&[100, 5, -3]).unwrap(), vec![100, 105, 102]);
        assert_eq!(delta_decode(&[]).unwrap(), Vec::<i64>::new());
        assert_eq!(delta_decode(&[7]).unwrap(), vec![7]);
    }

    #[test]
    fn delta_decode_overflow() {
        assert!(matches!(
            delta_decode(&[i64::MAX, 1]),
            Err(DecodeError::DeltaOverflow)
        ));
    }

    #[test]
    fn to_degrees_formula() {
        assert_eq!(to_degrees(450_000_000, 100, 0), 45.0);
        assert_eq!(to_degrees(0, 100, 0), 0.0);
        assert_eq!(to_degrees(0, 7, 0), 0.0);
        assert_eq!(to_degrees(1, 100, 50), 1e-9 * 150.0);
    }

    #[test]
    fn to_degrees_monotone_in_raw() {
        let mut prev = f64::NEG_INFINITY;
        for raw in (-1_000_000..1_000_000).step_by(100_000) {
            let deg = to_degrees(raw, 100, 17);
            assert!(deg > prev);
            prev = deg;
        }
    }

    fn block_with_table(entries: &[&str]) -> PrimitiveBlockView {
        PrimitiveBlockView {
            string_table: entries.iter().map(|s| s.to_string()).collect(),
            granularity: 100,
            lat_offset: 0,
            lon_offset: 0,
            groups: Vec::new(),
        }
    }

    #[test]
    fn dense_nodes_split_kv_stream_at_sentinels() {
        let block = block_with_table(&["", "amenity", "school"]);
        let group = DenseGroup {
            ids: vec![10, 1, 2],
            lats: vec![0, 0, 0],
            lons: vec![0, 0, 0],
            keys_vals: vec![1, 2, 0, 0, 0],
        };
        let nodes = decode_dense_nodes(&group, &block).unwrap();
        assert_eq!(
            nodes.iter().map(|n| n.id).collect::<Vec<_>>(),
            vec![10, 11, 13]
        );
        assert_eq!(nodes[0].tags.get("amenity").unwrap(), "school");
        assert!(nodes[1].tags.is_empty());
        assert!(nodes[2].tags.is_empty());
    }

    #[test]
    fn empty_dense_group() {
        let block = block_with_table(&[""]);
        assert!(decode_dense_nodes(&DenseGroup::default(), &block)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn dense_kv_index_out_of_range() {
        let block = block_with_table(&["", "a", "b"]);
        let group = DenseGroup {
            ids: vec![1],
            lats: vec![0],
            lons: vec![0],
            keys_vals: vec![99, 1, 0],
        };
        assert!(matches!(
            decode_dense_nodes(&group, &block),
            Err(DecodeError::StringIndexOutOfRange { index: 99, .. })
        ));
    }

    #[test]
    fn dense_kv_stream_exhausted() {
        let block = block_with_table(&["", "a", "b"]);
        let group = DenseGroup {
            ids: vec![1, 1],
            lats: vec![0, 0],
            lons: vec![0, 0],
            keys_vals: vec![1, 2, 0], // second node never terminated
        };
        assert!(matches!(
            decode_dense_nodes(&group, &block),
            Err(DecodeError::KeyValueStreamExhausted)
        ));
    }

    #[test]
    fn way_refs_are_prefix_summed() {
        let block = block_with_table(&[""]);
        let ways = vec![WayEntry {
            id: 1,
            keys: vec![],
            vals: vec![],
            ref_deltas: vec![5, 1, 1, -2],
        }];
        let decoded = decode_ways(&ways, &block).unwrap();
        assert_eq!(decoded[0].refs().unwrap(), &[5, 6, 7, 5]);
    }

    #[test]
    fn way_with_zero_refs_is_error() {
        let block = block_with_table(&[""]);
        let ways = vec![WayEntry::default()];
        assert!(matches!(
            decode_ways(&ways, &block),
            Err(DecodeError::EmptyWayRefs { id: 0 })
        ));
    }

    #[test]
    fn way_tags_resolve_through_table() {
        let block = block_with_table(&["", "building", "yes"]);
        let ways = vec![WayEntry {
            id: 1,
            keys: vec![1],
            vals: vec![2],
            ref_deltas: vec![1],
        }];
        let decoded = decode_ways(&ways, &block).unwrap();
        assert_eq!(decoded[0].tags.get("building").unwrap(), "yes");
    }

    #[test]
    fn granularity_defaults_when_absent() {
        // block with only a string table
        let mut table = Vec::new();
        emit::bytes_field(&mut table, 1, b"");
        let mut payload = Vec::new();
        emit::bytes_field(&mut payload, 1, &table);
        let view = decode_primitive_block(&payload).unwrap();
        assert_eq!(view.granularity, 100);
        assert_eq!(view.lat_offset, 0);
        assert_eq!(view.lon_offset, 0);
    }

    #[test]
    fn string_table_entries_in_order() {
        let mut table = Vec::new();
        emit::bytes_field(&mut table, 1, b"");
        emit::bytes_field(&mut table, 1, b"amenity");
        emit::bytes_field(&mut table, 1, b"school");
        let mut payload = Vec::new();
        emit::bytes_field(&mut payload, 1, &table);
        let view = decode_primitive_block(&payload).unwrap();
        assert_eq!(view.string_table, vec!["", "amenity", "school"]);
    }

    #[test]
    fn nonempty_first_string_entry_is_error() {
        let mut table = Vec::new();
        emit::bytes_field(&mut table, 1, b"oops");
        let mut payload = Vec::new();
        emit::bytes_field(&mut payload, 1, &table);
        assert!(matches!(
            decode_primitive_block(&payload),
            Err(DecodeError::StringTableFirstNotEmpty)
        ));
    }

    #[test]
    fn node_coordinates_out_of_range_is_error() {
        let block = block_with_table(&[""]);
        let group = DenseGroup {
            ids: vec![1],
            lats: vec![2_000_000_000], // 200 degrees at granularity 100
            lons: vec![0],
            keys_vals: vec![],
        };
        assert!(matches!(
            decode_dense_nodes(&group, &block),
            Err(DecodeError::CoordinateRange { id: 1, .. })
        ));
    }
}
