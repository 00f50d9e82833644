//! Micro-scale geolocation analysis of language use.
//!
//! `geolect` compares where two sets of tokens are used within a city.
//! Geotagged text records are filtered by token presence, binned onto a
//! longitude/latitude grid, and the resulting target and reference count
//! grids are contrasted three ways:
//!
//! * the *relative distribution*: the per-bin difference of the normalized
//!   count grids, which sums to exactly zero and highlights where the
//!   target tokens are over- or under-represented;
//! * a *frequency comparison*: per-bin counts taken as scatter points,
//!   with a least-squares fit, Pearson correlation, the exact-correlation
//!   line `y = kx` (`k` = ratio of total counts), and a shot-noise band
//!   `±k√c_ref` around it;
//! * an *angle histogram*: per-bin scatter angles collected into 1° bins
//!   over 0–90°, whose standard deviation measures how far the two
//!   distributions diverge.
//!
//! The crate also ships an SVG renderer for the map and chart artifacts
//! and a seeded synthetic-corpus generator used to validate the pipeline
//! end to end.

pub mod corpus;
pub mod error;
pub mod grid;
pub mod render;
pub mod special;
pub mod stats;
pub mod synth;
pub mod token;

pub use corpus::{ingest, ingest_path, parse_record, CorpusFilter, IngestReport, Tweet};
pub use error::{Error, Result};
pub use grid::{bin_counts, bin_index, delta, BinIndex, CountGrid, DeltaGrid, Extent, FractionGrid, GridSpec};
pub use render::MapStyle;
pub use stats::{
    angle_histogram, frequency_comparison, linear_fit, noise_band, p_value, pearson,
    AngleHistogram, ComparisonStats, NoiseBand, RegressionResult, ScatterPoint,
};
pub use synth::{planted_expectation, Scenario, ScenarioKind, SpatialModel, UsageField};
pub use token::{matches, normalize_text, select, MatchConfig, MatchMode, TokenSet};
