//! Corpus ingestion: stream geotagged text records from newline-delimited
//! UTF-8 input, one JSON object per line, and filter them by extent,
//! language, and time window.
//!
//! Record keys: `id` (string), `lon` (number), `lat` (number), `text`
//! (string), `lang` (string), `created_at` (optional RFC 3339 string).
//! Unknown keys are ignored. Empty and whitespace-only lines are skipped
//! entirely and do not appear in the ingest report.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Extent;

/// One geotagged text record.
#[derive(Debug, Clone, PartialEq)]
pub struct Tweet {
    pub id: String,
    /// Degrees longitude in [−180, 180].
    pub lon: f64,
    /// Degrees latitude in [−90, 90].
    pub lat: f64,
    pub text: String,
    /// Language code as tagged in the source data, e.g. "es".
    pub lang: String,
    pub created_at: Option<DateTime<Utc>>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    lon: f64,
    lat: f64,
    text: String,
    lang: String,
    #[serde(default)]
    created_at: Option<String>,
}

#[derive(Serialize)]
struct RawRecordOut<'a> {
    id: &'a str,
    lon: f64,
    lat: f64,
    text: &'a str,
    lang: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    created_at: Option<String>,
}

impl Tweet {
    /// Serialize back to the one-line record format. Coordinates use the
    /// shortest round-trip representation, so parse(to_record_line(t)) == t.
    pub fn to_record_line(&self) -> String {
        let out = RawRecordOut {
            id: &self.id,
            lon: self.lon,
            lat: self.lat,
            text: &self.text,
            lang: &self.lang,
            created_at: self
                .created_at
                .map(|t| t.to_rfc3339_opts(SecondsFormat::AutoSi, true)),
        };
        serde_json::to_string(&out).expect("record serialization cannot fail")
    }
}

/// Parse one input line into a [`Tweet`].
///
/// Rejects malformed JSON, missing required fields, non-numeric
/// coordinates, out-of-range coordinates, empty ids, and unparseable
/// timestamps. The returned message is attached to a line number by
/// [`ingest`].
pub fn parse_record(line: &str) -> std::result::Result<Tweet, String> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if raw.id.is_empty() {
        return Err("empty id".into());
    }
    if !(-180.0..=180.0).contains(&raw.lon) {
        return Err(format!("longitude {} outside [-180, 180]", raw.lon));
    }
    if !(-90.0..=90.0).contains(&raw.lat) {
        return Err(format!("latitude {} outside [-90, 90]", raw.lat));
    }
    let created_at = match raw.created_at {
        None => None,
        Some(s) => Some(
            DateTime::parse_from_rfc3339(&s)
                .map_err(|e| format!("created_at `{s}`: {e}"))?
                .with_timezone(&Utc),
        ),
    };
    Ok(Tweet {
        id: raw.id,
        lon: raw.lon,
        lat: raw.lat,
        text: raw.text,
        lang: raw.lang,
        created_at,
    })
}

/// Acceptance predicate applied after parsing: spatial extent, optional
/// language code, optional `[start, end)` UTC window.
#[derive(Debug, Clone)]
pub struct CorpusFilter {
    pub extent: Extent,
    pub lang: Option<String>,
    pub time_range: Option<(DateTime<Utc>, DateTime<Utc>)>,
}

impl CorpusFilter {
    pub fn new(
        extent: Extent,
        lang: Option<String>,
        time_range: Option<(DateTime<Utc>, DateTime<Utc>)>,
    ) -> Result<Self> {
        if let Some((start, end)) = time_range {
            if start >= end {
                return Err(Error::invalid(
                    "filter",
                    format!("time range start {start} is not before end {end}"),
                ));
            }
        }
        Ok(CorpusFilter { extent, lang, time_range })
    }

    /// Extent-only filter.
    pub fn extent_only(extent: Extent) -> Self {
        CorpusFilter { extent, lang: None, time_range: None }
    }

    pub fn accepts(&self, tweet: &Tweet) -> bool {
        if !self.extent.contains(tweet.lon, tweet.lat) {
            return false;
        }
        if let Some(lang) = &self.lang {
            if &tweet.lang != lang {
                return false;
            }
        }
        if let Some((start, end)) = self.time_range {
            // A record without a timestamp cannot be placed in the window.
            match tweet.created_at {
                Some(t) => {
                    if t < start || t >= end {
                        return false;
                    }
                }
                None => return false,
            }
        }
        true
    }
}

/// Counters reconciling an ingest run: every non-blank input line lands in
/// exactly one bucket.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub accepted: u64,
    pub rejected_parse: u64,
    pub rejected_filter: u64,
}

impl IngestReport {
    /// Total non-blank lines read.
    pub fn total(&self) -> u64 {
        self.accepted + self.rejected_parse + self.rejected_filter
    }
}

/// Read records from `source`, keep the ones passing `filter`, in input
/// order.
///
/// In strict mode the first parse failure aborts with its line number;
/// otherwise parse failures are counted and skipped. Records rejected by
/// the filter are counted, not errors: filtering is part of the corpus
/// definition and the report makes it auditable.
pub fn ingest<R: BufRead>(
    source: R,
    filter: &CorpusFilter,
    strict: bool,
) -> Result<(Vec<Tweet>, IngestReport)> {
    let mut tweets = Vec::new();
    let mut report = IngestReport::default();
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(&line) {
            Ok(tweet) => {
                if filter.accepts(&tweet) {
                    report.accepted += 1;
                    tweets.push(tweet);
                } else {
                    report.rejected_filter += 1;
                }
            }
            Err(reason) => {
                if strict {
                    return Err(Error::Parse { line: line_no, reason });
                }
                report.rejected_parse += 1;
            }
        }
    }
    Ok((tweets, report))
}

/// [`ingest`] over a file path.
pub fn ingest_path<P: AsRef<Path>>(
    path: P,
    filter: &CorpusFilter,
    strict: bool,
) -> Result<(Vec<Tweet>, IngestReport)> {
    let file = File::open(path)?;
    ingest(BufReader::new(file), filter, strict)
}
