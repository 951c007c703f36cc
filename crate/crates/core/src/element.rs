//! Decoded OSM elements and the structural filter.

use std::collections::HashMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

/// Ordered tag map. Insertion order is preserved so that serialization of
/// leftover tags is deterministic and round-trips byte-for-byte.
pub type TagMap = IndexMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Node,
    Way,
    Relation,
}

impl ElementKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ElementKind::Node => "node",
            ElementKind::Way => "way",
            ElementKind::Relation => "relation",
        }
    }
}

/// Geometry payload of a decoded element.
///
/// Nodes carry a coordinate, ways an ordered node-reference list. Relations
/// are decoded structurally to keep the stream aligned but carry no geometry:
/// multipolygon assembly is out of scope.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Node { lat: f64, lon: f64 },
    Way { refs: Vec<i64> },
    Relation,
}

/// A decoded OSM node, way, or relation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawElement {
    pub id: i64,
    pub geometry: Geometry,
    pub tags: TagMap,
}

impl RawElement {
    pub fn node(id: i64, lat: f64, lon: f64, tags: TagMap) -> Self {
        RawElement {
            id,
            geometry: Geometry::Node { lat, lon },
            tags,
        }
    }

    pub fn way(id: i64, refs: Vec<i64>, tags: TagMap) -> Self {
        RawElement {
            id,
            geometry: Geometry::Way { refs },
            tags,
        }
    }

    pub fn relation(id: i64, tags: TagMap) -> Self {
        RawElement {
            id,
            geometry: Geometry::Relation,
            tags,
        }
    }

    pub fn kind(&self) -> ElementKind {
        match self.geometry {
            Geometry::Node { .. } => ElementKind::Node,
            Geometry::Way { .. } => ElementKind::Way,
            Geometry::Relation => ElementKind::Relation,
        }
    }

    pub fn coordinates(&self) -> Option<(f64, f64)> {
        match self.geometry {
            Geometry::Node { lat, lon } => Some((lat, lon)),
            _ => None,
        }
    }

    pub fn refs(&self) -> Option<&[i64]> {
        match &self.geometry {
            Geometry::Way { refs } => Some(refs),
            _ => None,
        }
    }
}

/// True iff the element is a way whose first and last references coincide
/// and which has at least 4 references. A polygon needs three distinct
/// vertices plus the closing repeat; shorter closed sequences are degenerate
/// and treated as open.
pub fn is_closed_way(element: &RawElement) -> bool {
    match element.refs() {
        Some(refs) => refs.len() >= 4 && refs.first() == refs.last(),
        None => false,
    }
}

/// Structural filter down to buildings and properties: keeps nodes with at
/// least one tag and all closed ways, drops untagged nodes (pure geometry
/// vertices), open ways, and relations. Order is preserved.
pub fn filter_structures<I>(elements: I) -> Vec<RawElement>
where
    I: IntoIterator<Item = RawElement>,
{
    elements
        .into_iter()
        .filter(|e| match e.kind() {
            ElementKind::Node => !e.tags.is_empty(),
            ElementKind::Way => is_closed_way(e),
            ElementKind::Relation => false,
        })
        .collect()
}

/// Coordinate index over decoded nodes, keyed by id. Built before the
/// structural filter runs so that closed-way centroids can consult vertices
/// that are themselves untagged.
#[derive(Debug, Default, Clone)]
pub struct NodeLocations {
    map: HashMap<i64, (f64, f64)>,
}

impl NodeLocations {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: i64, lat: f64, lon: f64) {
        self.map.insert(id, (lat, lon));
    }

    pub fn record(&mut self, element: &RawElement) {
        if let Geometry::Node { lat, lon } = element.geometry {
            self.map.insert(element.id, (lat, lon));
        }
    }

    pub fn get(&self, id: i64) -> Option<(f64, f64)> {
        self.map.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

pub fn tags(pairs: &[(&str, &str)]) -> TagMap {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_way_definition() {
        let w = |refs: Vec<i64>| RawElement::way(1, refs, TagMap::new());
        assert!(is_closed_way(&w(vec![5, 6, 7, 5])));
        // degenerate two-point ring
        assert!(!is_closed_way(&w(vec![5, 6, 5])));
        assert!(!is_closed_way(&w(vec![5, 6, 7, 8])));
        assert!(!is_closed_way(&RawElement::node(1, 0.0, 0.0, TagMap::new())));
    }

    #[test]
    fn filter_keeps_tagged_nodes_and_closed_ways() {
        let input = vec![
            RawElement::node(1, 1.0, 2.0, tags(&[("amenity", "school")])),
            RawElement::node(2, 1.0, 2.0, TagMap::new()),
            RawElement::way(3, vec![1, 2, 3], TagMap::new()),
            RawElement::way(4, vec![1, 2, 3, 1], tags(&[("building", "yes")])),
            RawElement::relation(5, tags(&[("type", "multipolygon")])),
        ];
        let kept = filter_structures(input);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].id, 1);
        assert_eq!(kept[1].id, 4);
    }

    #[test]
    fn filter_all_relations_is_empty() {
        let input = vec![
            RawElement::relation(1, TagMap::new()),
            RawElement::relation(2, tags(&[("k", "v")])),
        ];
        assert!(filter_structures(input).is_empty());
    }

    #[test]
    fn filter_empty_input() {
        assert!(filter_structures(Vec::new()).is_empty());
    }

    #[test]
    fn filter_keeps_untagged_closed_ways() {
        let input = vec![RawElement::way(9, vec![1, 2, 3, 1], TagMap::new())];
        assert_eq!(filter_structures(input).len(), 1);
    }
}
