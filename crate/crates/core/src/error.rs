use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while decoding the PBF container or its blocks.
///
/// Every malformed input maps to one of these variants; the decoder never
/// panics on arbitrary bytes. Offsets are byte positions relative to the
/// start of the stream (frame errors) or of the blob payload (block errors).
#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("i/o error at byte offset {offset}: {source}")]
    Io {
        offset: u64,
        #[source]
        source: std::io::Error,
    },

    #[error("truncated stream at byte offset {offset}: expected {expected} more bytes for {context}")]
    Truncated {
        offset: u64,
        expected: usize,
        context: &'static str,
    },

    #[error("blob header of {size} bytes at offset {offset} exceeds the {limit}-byte limit")]
    HeaderTooLarge { offset: u64, size: usize, limit: usize },

    #[error("blob of {size} bytes at offset {offset} exceeds the {limit}-byte limit")]
    BlobTooLarge { offset: u64, size: usize, limit: usize },

    #[error("unsupported compression variant `{variant}`")]
    UnsupportedCompression { variant: String },

    #[error("blob carries no payload field")]
    EmptyBlob,

    #[error("declared raw size {declared} does not match inflated length {actual}")]
    RawSizeMismatch { declared: usize, actual: usize },

    #[error("zlib inflation failed: {source}")]
    Inflate {
        #[source]
        source: std::io::Error,
    },

    #[error("malformed varint at offset {offset}")]
    MalformedVarint { offset: usize },

    #[error("unknown wire type {wire_type} for field {field_tag} at offset {offset}")]
    UnknownWireType {
        wire_type: u8,
        field_tag: u32,
        offset: usize,
    },

    #[error("field {field_tag} at offset {offset}: {detail}")]
    FieldFraming {
        field_tag: u32,
        offset: usize,
        detail: &'static str,
    },

    #[error("missing required field {field} in {message}")]
    MissingField {
        message: &'static str,
        field: &'static str,
    },

    #[error("string table entry {index} is not valid UTF-8")]
    InvalidUtf8 { index: usize },

    #[error("string table index {index} out of range for table of {len} entries")]
    StringIndexOutOfRange { index: usize, len: usize },

    #[error("string table entry 0 is non-empty")]
    StringTableFirstNotEmpty,

    #[error("block declares non-positive granularity {granularity}")]
    BadGranularity { granularity: i32 },

    #[error("dense key/value stream exhausted before all nodes were consumed")]
    KeyValueStreamExhausted,

    #[error("dense arrays disagree in length: {ids} ids, {lats} lats, {lons} lons")]
    DenseLengthMismatch { ids: usize, lats: usize, lons: usize },

    #[error("accumulated delta sum overflows the signed 64-bit range")]
    DeltaOverflow,

    #[error("element {id} carries duplicate tag key `{key}`")]
    DuplicateTagKey { id: i64, key: String },

    #[error("way {id} has no node references")]
    EmptyWayRefs { id: i64 },

    #[error("node {id} coordinates ({lat}, {lon}) outside valid range")]
    CoordinateRange { id: i64, lat: f64, lon: f64 },

    #[error("closed-ring contract violated: {detail}")]
    OpenRing { detail: &'static str },
}

/// Error parsing the brace-delimited unstructured tag text.
#[derive(Debug, Error)]
#[error("tag string parse error at character {offset}: {detail}")]
pub struct TagStringError {
    pub offset: usize,
    pub detail: &'static str,
}

/// Errors loading the key schema, lexicon, or topic-rule tables.
#[derive(Debug, Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {detail}")]
    Malformed { line: usize, detail: String },

    #[error("line {line}: duplicate entry `{entry}`")]
    Duplicate { line: usize, entry: String },
}

/// Errors from the statistics operations.
#[derive(Debug, Error)]
pub enum StatsError {
    #[error("proportions undefined for empty group `{group}`")]
    UndefinedProportions { group: String },

    #[error("population is zero for group `{group}`")]
    ZeroPopulation { group: String },

    #[error("median of an empty sequence")]
    EmptyMedian,

    #[error("no flagged areas")]
    NoFlaggedAreas,
}

/// Errors loading admin boundaries.
#[derive(Debug, Error)]
pub enum GeoJsonError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid GeoJSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("feature {feature}: {detail}")]
    BadFeature { feature: String, detail: String },
}

/// Errors reading the WHO facility list.
#[derive(Debug, Error)]
pub enum WhoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("mapped column `{column}` not present in header")]
    MissingColumn { column: String },
}

/// Top-level pipeline error. `exit_code` gives the process status the CLI
/// should report: 1 for fatal input errors, 2 for configuration errors.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("input `{path}`: {detail}")]
    Input { path: PathBuf, detail: String },

    #[error(transparent)]
    Decode(#[from] DecodeError),

    #[error(transparent)]
    Table(#[from] TableError),

    #[error(transparent)]
    GeoJson(#[from] GeoJsonError),

    #[error(transparent)]
    Who(#[from] WhoError),

    #[error(transparent)]
    Stats(#[from] StatsError),

    #[error("output `{path}`: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            _ => 1,
        }
    }
}
