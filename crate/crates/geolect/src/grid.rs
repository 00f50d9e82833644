//! Spatial binning: map coordinates to grid bins, accumulate count grids,
//! normalize to fractions, and form relative (difference) distributions.
//!
//! The grid is an `n × m` lattice of equal lon/lat-size bins over a
//! bounding box. Bins are treated as equal-area; at city scale the
//! longitude-convergence distortion is negligible and no cos(lat)
//! correction is applied. Column index `i` grows eastward, row index `j`
//! grows northward.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::Tweet;
use crate::error::{Error, Result};

/// Lon/lat bounding box of the analysis region, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
}

impl Extent {
    pub fn new(lon_min: f64, lon_max: f64, lat_min: f64, lat_max: f64) -> Result<Self> {
        if !(lon_min < lon_max) || !(lat_min < lat_max) {
            return Err(Error::invalid(
                "extent",
                format!("min must be below max: lon [{lon_min}, {lon_max}], lat [{lat_min}, {lat_max}]"),
            ));
        }
        Ok(Extent { lon_min, lon_max, lat_min, lat_max })
    }

    /// Bounding box of Ciudad Autónoma de Buenos Aires, the default
    /// analysis region.
    pub const fn caba() -> Self {
        Extent {
            lon_min: -58.531725,
            lon_max: -58.355148,
            lat_min: -34.705446,
            lat_max: -34.538162,
        }
    }

    /// Closed containment test: points exactly on the max boundary belong
    /// to the extent (and bin into the last row/column).
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        lon >= self.lon_min && lon <= self.lon_max && lat >= self.lat_min && lat <= self.lat_max
    }

    pub fn lon_span(&self) -> f64 {
        self.lon_max - self.lon_min
    }

    pub fn lat_span(&self) -> f64 {
        self.lat_max - self.lat_min
    }
}

/// Bin geometry: an [`Extent`] split into `n` longitude columns and `m`
/// latitude rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub extent: Extent,
    pub n: usize,
    pub m: usize,
}

impl GridSpec {
    pub fn new(extent: Extent, n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::invalid("grid spec", format!("need n ≥ 1 and m ≥ 1, got {n}×{m}")));
        }
        Extent::new(extent.lon_min, extent.lon_max, extent.lat_min, extent.lat_max)?;
        Ok(GridSpec { extent, n, m })
    }

    /// Longitudinal bin size in degrees.
    pub fn dx(&self) -> f64 {
        self.extent.lon_span() / self.n as f64
    }

    /// Latitudinal bin size in degrees.
    pub fn dy(&self) -> f64 {
        self.extent.lat_span() / self.m as f64
    }

    pub fn bin_count(&self) -> usize {
        self.n * self.m
    }

    /// Center coordinates of bin (i, j).
    pub fn bin_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.extent.lon_min + (i as f64 + 0.5) * self.dx(),
            self.extent.lat_min + (j as f64 + 0.5) * self.dy(),
        )
    }

    fn flat(&self, i: usize, j: usize) -> usize {
        i * self.m + j
    }
}

/// Position of a bin: column `i` in `[0, n)`, row `j` in `[0, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BinIndex {
    pub i: usize,
    pub j: usize,
}

/// Map a coordinate to its bin, or `None` when it falls outside the
/// closed extent.
///
/// `i = floor((lon − lon_min)/dx)`, likewise for `j`; coordinates exactly
/// on the max boundary clamp into the last bin so no record on the edge
/// of the extent is dropped.
pub fn bin_index(spec: &GridSpec, lon: f64, lat: f64) -> Option<BinIndex> {
    if !spec.extent.contains(lon, lat) {
        return None;
    }
    let i = (((lon - spec.extent.lon_min) / spec.dx()).floor() as usize).min(spec.n - 1);
    let j = (((lat - spec.extent.lat_min) / spec.dy()).floor() as usize).min(spec.m - 1);
    Some(BinIndex { i, j })
}

/// Per-bin record counts `c_ij` plus their total.
#[derive(Debug, Clone, PartialEq)]
pub struct CountGrid {
    spec: GridSpec,
    counts: Vec<u64>,
    total: u64,
}

impl CountGrid {
    /// Build from a flat vector laid out as `counts[i * m + j]`.
    pub fn from_counts(spec: GridSpec, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != spec.bin_count() {
            return Err(Error::invalid(
                "count grid",
                format!("expected {} values for a {}×{} grid, got {}", spec.bin_count(), spec.n, spec.m, counts.len()),
            ));
        }
        let total = counts.iter().sum();
        Ok(CountGrid { spec, counts, total })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[self.spec.flat(i, j)]
    }

    /// Flat view, laid out as `counts[i * m + j]`.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Sum of all bin counts (records inside the extent).
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn max_count(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// Normalize to per-bin fractions `f_ij = c_ij / total`.
    ///
    /// Fails with [`Error::EmptyDistribution`] when the total is zero.
    pub fn normalize(&self) -> Result<FractionGrid> {
        if self.total == 0 {
            return Err(Error::EmptyDistribution);
        }
        let t = self.total as f64;
        let fractions = self.counts.iter().map(|&c| c as f64 / t).collect();
        Ok(FractionGrid { spec: self.spec, fractions })
    }
}

/// Count the records of `tweets` into the bins of `spec`.
///
/// Records outside the extent are ignored, so the grid total can be
/// smaller than the input length.
pub fn bin_counts<'a, I>(tweets: I, spec: &GridSpec) -> CountGrid
where
    I: IntoIterator<Item = &'a Tweet>,
{
    let mut counts = vec![0u64; spec.bin_count()];
    let mut total = 0u64;
    for t in tweets {
        if let Some(b) = bin_index(spec, t.lon, t.lat) {
            counts[spec.flat(b.i, b.j)] += 1;
            total += 1;
        }
    }
    CountGrid { spec: *spec, counts, total }
}

/// Per-bin fractions `f_ij`; sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionGrid {
    spec: GridSpec,
    fractions: Vec<f64>,
}

impl FractionGrid {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn fraction(&self, i: usize, j: usize) -> f64 {
        self.fractions[self.spec.flat(i, j)]
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    /// Compensated sum of all fractions; 1 up to rounding.
    pub fn sum(&self) -> f64 {
        neumaier_sum(&self.fractions)
    }
}

/// Relative distribution `Δf_ij = f^T_ij − f^R_ij`; sums to 0.
///
/// Positive bins over-represent the target records, negative bins
/// under-represent them, relative to the reference distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaGrid {
    spec: GridSpec,
    delta: Vec<f64>,
}

impl DeltaGrid {
    /// Build from a flat vector laid out as `delta[i * m + j]`.
    pub fn from_values(spec: GridSpec, delta: Vec<f64>) -> Result<Self> {
        if delta.len() != spec.bin_count() {
            return Err(Error::invalid(
                "delta grid",
                format!("expected {} values for a {}×{} grid, got {}", spec.bin_count(), spec.n, spec.m, delta.len()),
            ));
        }
        Ok(DeltaGrid { spec, delta })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.delta[self.spec.flat(i, j)]
    }

    pub fn values(&self) -> &[f64] {
        &self.delta
    }

    /// Compensated sum of all bin differences; 0 up to rounding.
    pub fn sum(&self) -> f64 {
        neumaier_sum(&self.delta)
    }

    pub fn max_abs(&self) -> f64 {
        self.delta.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

/// Relative distribution of two count grids over the same spec:
/// `normalize(target) − normalize(reference)`, elementwise.
pub fn delta(target: &CountGrid, reference: &CountGrid) -> Result<DeltaGrid> {
    check_same_spec(target.spec(), reference.spec())?;
    let ft = target.normalize()?;
    let fr = reference.normalize()?;
    let delta = ft
        .fractions
        .iter()
        .zip(&fr.fractions)
        .map(|(a, b)| a - b)
        .collect();
    Ok(DeltaGrid { spec: target.spec, delta })
}

pub(crate) fn check_same_spec(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a != b {
        return Err(Error::SpecMismatch(format!(
            "{}×{} over [{}, {}]×[{}, {}] vs {}×{} over [{}, {}]×[{}, {}]",
            a.n, a.m, a.extent.lon_min, a.extent.lon_max, a.extent.lat_min, a.extent.lat_max,
            b.n, b.m, b.extent.lon_min, b.extent.lon_max, b.extent.lat_min, b.extent.lat_max,
        )));
    }
    Ok(())
}

/// Neumaier-compensated summation; keeps the identity checks well below
/// their 1e-12 tolerance even on 200×200 grids.
pub(crate) fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

// ---------------------------------------------------------------------------
// Grid file format
// ---------------------------------------------------------------------------
//
// Plain-text, used by the CLI to cache intermediate results:
//
//   geolect grid v1
//   kind: counts            (or: delta)
//   extent: <lon_min> <lon_max> <lat_min> <lat_max>
//   size: <n> <m>
//   <m data lines, row j = 0 (south) first, each with n values i = 0..n-1>
//
// Counts are integers; delta values print in shortest round-trip form.

const GRID_MAGIC: &str = "geolect grid v1";

/// A deserialized grid file: either raw counts or a relative distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum GridFile {
    Counts(CountGrid),
    Delta(DeltaGrid),
}

pub fn write_count_grid<W: Write>(w: &mut W, grid: &CountGrid) -> Result<()> {
    write_header(w, "counts", grid.spec())?;
    for j in 0..grid.spec.m {
        let row: Vec<String> = (0..grid.spec.n).map(|i| grid.count(i, j).to_string()).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn write_delta_grid<W: Write>(w: &mut W, grid: &DeltaGrid) -> Result<()> {
    write_header(w, "delta", grid.spec())?;
    for j in 0..grid.spec.m {
        let row: Vec<String> = (0..grid.spec.n).map(|i| format!("{}", grid.value(i, j))).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

fn write_header<W: Write>(w: &mut W, kind: &str, spec: &GridSpec) -> Result<()> {
    writeln!(w, "{GRID_MAGIC}")?;
    writeln!(w, "kind: {kind}")?;
    writeln!(
        w,
        "extent: {} {} {} {}",
        spec.extent.lon_min, spec.extent.lon_max, spec.extent.lat_min, spec.extent.lat_max
    )?;
    writeln!(w, "size: {} {}", spec.n, spec.m)?;
    Ok(())
}

pub fn read_grid<R: BufRead>(r: R) -> Result<GridFile> {
    let mut lines = r.lines();
    let magic = next_line(&mut lines, "magic header")?;
    if magic.trim() != GRID_MAGIC {
        return Err(Error::GridFormat(format!("expected `{GRID_MAGIC}` header, got `{}`", magic.trim())));
    }
    let kind_line = next_line(&mut lines, "kind")?;
    let kind = kind_line
        .strip_prefix("kind: ")
        .ok_or_else(|| Error::GridFormat("missing `kind:` line".into()))?
        .trim()
        .to_string();
    let extent_line = next_line(&mut lines, "extent")?;
    let ext: Vec<f64> = parse_fields(extent_line.strip_prefix("extent: "), "extent", 4)?;
    let size_line = next_line(&mut lines, "size")?;
    let size: Vec<f64> = parse_fields(size_line.strip_prefix("size: "), "size", 2)?;
    let (n, m) = (size[0] as usize, size[1] as usize);
    let extent = Extent::new(ext[0], ext[1], ext[2], ext[3])
        .map_err(|e| Error::GridFormat(e.to_string()))?;
    let spec = GridSpec::new(extent, n, m).map_err(|e| Error::GridFormat(e.to_string()))?;

    let mut values: Vec<f64> = Vec::with_capacity(spec.bin_count());
    for j in 0..m {
        let line = next_line(&mut lines, "data row")?;
        let row: Vec<f64> = parse_fields(Some(&line), "data row", n)?;
        let _ = j;
        values.extend(row);
    }
    // Data rows arrive j-major; storage is i-major.
    let mut flat = vec![0.0f64; spec.bin_count()];
    for j in 0..m {
        for i in 0..n {
            flat[i * m + j] = values[j * n + i];
        }
    }

    match kind.as_str() {
        "counts" => {
            let counts: Vec<u64> = flat
                .iter()
                .map(|&v| {
                    if v < 0.0 || v.fract() != 0.0 {
                        Err(Error::GridFormat(format!("count value `{v}` is not a non-negative integer")))
                    } else {
                        Ok(v as u64)
                    }
                })
                .collect::<Result<_>>()?;
            Ok(GridFile::Counts(CountGrid::from_counts(spec, counts)?))
        }
        "delta" => Ok(GridFile::Delta(DeltaGrid::from_values(spec, flat)?)),
        other => Err(Error::GridFormat(format!("unknown grid kind `{other}`"))),
    }
}

fn next_line<I: Iterator<Item = std::io::Result<String>>>(lines: &mut I, what: &str) -> Result<String> {
    match lines.next() {
        Some(Ok(l)) => Ok(l),
        Some(Err(e)) => Err(e.into()),
        None => Err(Error::GridFormat(format!("unexpected end of file, expected {what}"))),
    }
}

fn parse_fields(s: Option<&str>, what: &str, expect: usize) -> Result<Vec<f64>> {
    let s = s.ok_or_else(|| Error::GridFormat(format!("missing `{what}` line")))?;
    let vals: std::result::Result<Vec<f64>, _> = s.split_whitespace().map(str::parse::<f64>).collect();
    let vals = vals.map_err(|e| Error::GridFormat(format!("bad {what}: {e}")))?;
    if vals.len() != expect {
        return Err(Error::GridFormat(format!("{what}: expected {expect} values, got {}", vals.len())));
    }
    Ok(vals)
}
