//! Divergence metrics between a target and a reference count grid.
//!
//! Per-bin counts (c_ref, c_target) form a scatter; identical
//! distribution shapes put every point on the exact-correlation line
//! `y = kx` with `k = N_T / N_R`. Divergence shows up three ways:
//! spread around the least-squares fit (Pearson r with a two-sided
//! t-test p-value), departure of the fitted slope from `k`, and the
//! width of the histogram of per-point angles `atan2(c_target, c_ref)`.
//! Pure counting noise spans the band `±k√c_ref` around the exact line.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{check_same_spec, BinIndex, CountGrid, GridSpec};
use crate::special::student_t_two_sided;

/// One frequency-comparison point: reference count on x, target on y.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScatterPoint {
    pub c_ref: u64,
    pub c_target: u64,
    pub bin: BinIndex,
}

/// Least-squares fit plus correlation over the scatter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub pearson_r: f64,
    /// Two-sided significance of `pearson_r` against t with `df` degrees
    /// of freedom.
    pub p_value: f64,
    /// Scatter points minus 2.
    pub df: u64,
}

/// Full frequency-comparison summary for a grid pair.
#[derive(Debug, Clone)]
pub struct ComparisonStats {
    pub regression: RegressionResult,
    /// Slope of the exact-correlation line: N_T / N_R.
    pub k_exact: f64,
    pub n_target: u64,
    pub n_reference: u64,
    /// One point per grid bin, in column-major (i, then j) order.
    pub points: Vec<ScatterPoint>,
}

impl ComparisonStats {
    pub fn noise_band(&self) -> NoiseBand {
        NoiseBand { k: self.k_exact }
    }
}

/// Shot-noise band around the exact-correlation line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBand {
    pub k: f64,
}

impl NoiseBand {
    /// Half-width at a given reference count, in target-count units.
    pub fn band(&self, c_ref: f64) -> f64 {
        noise_band(self.k, c_ref)
    }
}

/// Counting-noise half-width `k·√c_ref`.
pub fn noise_band(k: f64, c_ref: f64) -> f64 {
    k * c_ref.sqrt()
}

/// Histogram of scatter angles in 1° bins over [0°, 90°]; 90° lands in
/// the last bin. Mean and standard deviation are taken over the raw
/// point angles, not the binned counts.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleHistogram {
    pub bin_counts: [u64; 90],
    pub n_points: u64,
    pub mean_deg: f64,
    /// Population standard deviation of the point angles.
    pub std_deg: f64,
}

/// Product-moment correlation of a point set.
///
/// Needs at least two points and nonzero variance on both axes.
pub fn pearson(points: &[(f64, f64)]) -> Result<f64> {
    let (sxx, syy, sxy, _, _) = centered_moments(points)?;
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "zero variance in at least one coordinate".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Least-squares line through a point set; returns (slope, intercept).
pub fn linear_fit(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let (sxx, _, sxy, mean_x, mean_y) = centered_moments(points)?;
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance in x".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, mean_y - slope * mean_x))
}

/// Centered second moments by the two-pass formula:
/// (Σdx², Σdy², Σdx·dy, x̄, ȳ).
fn centered_moments(points: &[(f64, f64)]) -> Result<(f64, f64, f64, f64, f64)> {
    if points.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 2 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let (sum_x, sum_y) = points
        .iter()
        .fold((0.0, 0.0), |(ax, ay), &(x, y)| (ax + x, ay + y));
    let (mean_x, mean_y) = (sum_x / n, sum_y / n);
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in points {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    Ok((sxx, syy, sxy, mean_x, mean_y))
}

/// Two-sided p-value for a correlation `r` observed over `df` degrees of
/// freedom, from `t = r·√(df/(1−r²))`.
///
/// `|r| = 1` returns 0 as the limit; `r = 0` returns 1.
pub fn p_value(r: f64, df: u64) -> f64 {
    assert!(df >= 1, "p_value requires df >= 1");
    let r = r.clamp(-1.0, 1.0);
    if r.abs() == 1.0 {
        return 0.0;
    }
    let t = r * (df as f64 / (1.0 - r * r)).sqrt();
    student_t_two_sided(t, df)
}

/// Build the frequency-comparison scatter for a grid pair and run the
/// regression analysis over it.
///
/// Every grid bin contributes one point, including (0, 0) bins, so the
/// degrees of freedom equal `n·m − 2`.
pub fn frequency_comparison(target: &CountGrid, reference: &CountGrid) -> Result<ComparisonStats> {
    check_same_spec(target.spec(), reference.spec())?;
    if target.total() == 0 || reference.total() == 0 {
        return Err(Error::EmptyDistribution);
    }
    let spec = target.spec();
    if spec.bin_count() < 3 {
        return Err(Error::invalid(
            "comparison",
            format!("need at least 3 scatter points, grid has {}", spec.bin_count()),
        ));
    }

    let mut points = Vec::with_capacity(spec.bin_count());
    let mut xy = Vec::with_capacity(spec.bin_count());
    for i in 0..spec.n {
        for j in 0..spec.m {
            let p = ScatterPoint {
                c_ref: reference.count(i, j),
                c_target: target.count(i, j),
                bin: BinIndex { i, j },
            };
            xy.push((p.c_ref as f64, p.c_target as f64));
            points.push(p);
        }
    }

    let r = pearson(&xy)?;
    let (slope, intercept) = linear_fit(&xy)?;
    let df = (points.len() - 2) as u64;
    let regression = RegressionResult { slope, intercept, pearson_r: r, p_value: p_value(r, df), df };
    Ok(ComparisonStats {
        regression,
        k_exact: target.total() as f64 / reference.total() as f64,
        n_target: target.total(),
        n_reference: reference.total(),
        points,
    })
}

/// Angle histogram of the scatter: every bin with `c_target + c_ref > 0`
/// contributes `atan2(c_target, c_ref)` in degrees.
pub fn angle_histogram(target: &CountGrid, reference: &CountGrid) -> Result<AngleHistogram> {
    check_same_spec(target.spec(), reference.spec())?;
    let spec = target.spec();
    let mut angles = Vec::new();
    for i in 0..spec.n {
        for j in 0..spec.m {
            let (ct, cr) = (target.count(i, j), reference.count(i, j));
            if ct + cr > 0 {
                angles.push((ct as f64).atan2(cr as f64).to_degrees());
            }
        }
    }
    if angles.is_empty() {
        return Err(Error::NoData);
    }

    let mut bin_counts = [0u64; 90];
    for &a in &angles {
        let idx = (a.floor() as usize).min(89);
        bin_counts[idx] += 1;
    }
    let n = angles.len() as f64;
    let mean = angles.iter().sum::<f64>() / n;
    let var = angles.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    Ok(AngleHistogram {
        bin_counts,
        n_points: angles.len() as u64,
        mean_deg: mean,
        std_deg: var.sqrt(),
    })
}

/// Render the stats report: a stable `key: value` document followed by
/// the 90-line angle histogram. Floats print in shortest round-trip form.
pub fn format_report(
    target_name: &str,
    reference_name: &str,
    spec: &GridSpec,
    stats: &ComparisonStats,
    angles: &AngleHistogram,
) -> String {
    let mut out = String::new();
    let e = spec.extent;
    let _ = writeln!(out, "geolect comparison report v1");
    let _ = writeln!(out, "target: {target_name}");
    let _ = writeln!(out, "reference: {reference_name}");
    let _ = writeln!(out, "grid: {} {}", spec.n, spec.m);
    let _ = writeln!(out, "extent: {} {} {} {}", e.lon_min, e.lon_max, e.lat_min, e.lat_max);
    let _ = writeln!(out, "n_target: {}", stats.n_target);
    let _ = writeln!(out, "n_reference: {}", stats.n_reference);
    let _ = writeln!(out, "k_exact: {}", stats.k_exact);
    let _ = writeln!(out, "slope: {}", stats.regression.slope);
    let _ = writeln!(out, "intercept: {}", stats.regression.intercept);
    let _ = writeln!(out, "pearson_r: {}", stats.regression.pearson_r);
    let _ = writeln!(out, "p_value: {}", stats.regression.p_value);
    let _ = writeln!(out, "df: {}", stats.regression.df);
    let _ = writeln!(out, "scatter_points: {}", stats.points.len());
    let _ = writeln!(out, "angle_points: {}", angles.n_points);
    let _ = writeln!(out, "angle_mean_deg: {}", angles.mean_deg);
    let _ = writeln!(out, "angle_std_deg: {}", angles.std_deg);
    let _ = writeln!(out, "angle_histogram:");
    for (deg, count) in angles.bin_counts.iter().enumerate() {
        let _ = writeln!(out, "{deg} {count}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CountGrid, Extent, GridSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn row_spec(bins: usize) -> GridSpec {
        GridSpec::new(Extent::new(0.0, bins as f64, 0.0, 1.0).unwrap(), bins, 1).unwrap()
    }

    fn grid(counts: Vec<u64>) -> CountGrid {
        CountGrid::from_counts(row_spec(counts.len()), counts).unwrap()
    }

    #[test]
    fn pearson_hand_cases() {
        assert_eq!(pearson(&[(0.0, 0.0), (1.0, 2.0), (2.0, 4.0)]).unwrap(), 1.0);
        // Covariance works out to exactly zero.
        assert_eq!(pearson(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).unwrap(), 0.0);
        assert_eq!(pearson(&[(0.0, 2.0), (1.0, 1.0), (2.0, 0.0)]).unwrap(), -1.0);
    }

    #[test]
    fn pearson_degenerate_errors() {
        assert!(pearson(&[(1.0, 1.0)]).is_err());
        assert!(matches!(
            pearson(&[(1.0, 0.0), (1.0, 1.0), (1.0, 2.0)]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(matches!(
            pearson(&[(0.0, 3.0), (1.0, 3.0), (2.0, 3.0)]),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn linear_fit_hand_case() {
        let (slope, intercept) = linear_fit(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]).unwrap();
        assert_abs_diff_eq!(slope, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(intercept, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn p_value_limits() {
        assert_eq!(p_value(0.0, 18), 1.0);
        assert_eq!(p_value(0.0, 1), 1.0);
        assert_eq!(p_value(1.0, 18), 0.0);
        assert_eq!(p_value(-1.0, 5), 0.0);
    }

    #[test]
    fn p_value_against_integration_oracle() {
        // Frozen from high-precision numerical integration of the
        // t-density (40-digit quadrature of 2·∫_{|t|}^∞ f(u) du).
        assert_abs_diff_eq!(p_value(0.5, 18), 0.024769558804109693, epsilon = 1e-9);
        assert_abs_diff_eq!(p_value(0.2, 10), 0.53313536, epsilon = 1e-9);
        assert_abs_diff_eq!(p_value(-0.2, 10), 0.53313536, epsilon = 1e-9);
        assert_abs_diff_eq!(p_value(0.9, 5), 0.0057515151819028825, epsilon = 1e-9);
        assert_abs_diff_eq!(p_value(0.05, 38998), 5.0796444608845467e-23, epsilon = 1e-30);
    }

    #[test]
    fn noise_band_formula() {
        assert_eq!(noise_band(2.0, 4.0), 4.0);
        assert_eq!(noise_band(7.3, 0.0), 0.0);
        assert_eq!(noise_band(1.0, 100.0), 10.0);
        let band = NoiseBand { k: 2.0 };
        assert_eq!(band.band(4.0), 4.0);
    }

    #[test]
    fn comparison_identical_grids() {
        let g = grid(vec![4, 1, 0, 9, 2]);
        let s = frequency_comparison(&g, &g).unwrap();
        assert!((s.regression.pearson_r - 1.0).abs() < 1e-12);
        assert!((s.regression.slope - 1.0).abs() < 1e-12);
        assert!(s.regression.intercept.abs() < 1e-12);
        assert_eq!(s.k_exact, 1.0);
        assert_eq!(s.regression.df, 3);
        // r can sit one ulp under 1, so p is only near the 0 limit.
        assert!(s.regression.p_value < 1e-10);
    }

    #[test]
    fn comparison_proportional_grids() {
        let reference = grid(vec![4, 1, 0, 9, 2]);
        let target = grid(vec![8, 2, 0, 18, 4]);
        let s = frequency_comparison(&target, &reference).unwrap();
        assert!((s.regression.pearson_r - 1.0).abs() < 1e-12);
        assert!((s.regression.slope - 2.0).abs() < 1e-12);
        assert_eq!(s.k_exact, 2.0);
    }

    #[test]
    fn comparison_zero_correlation_case() {
        // Scatter (0,0), (1,1), (2,0) over a 3-bin grid.
        let reference = grid(vec![0, 1, 2]);
        let target = grid(vec![0, 1, 0]);
        let s = frequency_comparison(&target, &reference).unwrap();
        assert_eq!(s.regression.pearson_r, 0.0);
        assert_eq!(s.regression.p_value, 1.0);
    }

    #[test]
    fn comparison_degenerate_variance_errors() {
        let reference = grid(vec![3, 3, 3]);
        let target = grid(vec![1, 2, 3]);
        assert!(matches!(
            frequency_comparison(&target, &reference),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn comparison_empty_side_errors() {
        let reference = grid(vec![0, 0, 0]);
        let target = grid(vec![1, 2, 3]);
        assert!(matches!(frequency_comparison(&target, &reference), Err(Error::EmptyDistribution)));
    }

    #[test]
    fn angle_histogram_single_point_cases() {
        let h = angle_histogram(&grid(vec![1, 0]), &grid(vec![1, 0])).unwrap();
        assert_eq!(h.n_points, 1);
        assert_eq!(h.mean_deg, 45.0);
        assert_eq!(h.std_deg, 0.0);
        assert_eq!(h.bin_counts[45], 1);

        // Pure-axis cases: (c_ref, c_target) = (5, 0) and (0, 5).
        let h = angle_histogram(&grid(vec![0, 0]), &grid(vec![5, 0])).unwrap();
        assert_eq!(h.mean_deg, 0.0);
        assert_eq!(h.bin_counts[0], 1);
        let h = angle_histogram(&grid(vec![5, 0]), &grid(vec![0, 0])).unwrap();
        assert_eq!(h.mean_deg, 90.0);
        // 90° belongs to the last bin [89°, 90°].
        assert_eq!(h.bin_counts[89], 1);
    }

    #[test]
    fn angle_histogram_three_point_hand_case() {
        // Points (1,0), (1,1), (0,1): angles 0°, 45°, 90°.
        let reference = grid(vec![1, 1, 0]);
        let target = grid(vec![0, 1, 1]);
        let h = angle_histogram(&target, &reference).unwrap();
        assert_eq!(h.n_points, 3);
        assert_abs_diff_eq!(h.mean_deg, 45.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h.std_deg, 1350.0f64.sqrt(), epsilon = 1e-12);
        assert_eq!(h.bin_counts.iter().sum::<u64>(), 3);
    }

    #[test]
    fn angle_histogram_all_zero_errors() {
        let z = grid(vec![0, 0, 0]);
        assert!(matches!(angle_histogram(&z, &z), Err(Error::NoData)));
    }

    #[test]
    fn report_layout_is_stable() {
        let g = grid(vec![4, 1, 0, 9, 2]);
        let s = frequency_comparison(&g, &g).unwrap();
        let h = angle_histogram(&g, &g).unwrap();
        let report = format_report("a", "b", g.spec(), &s, &h);
        assert!(report.starts_with("geolect comparison report v1\n"));
        assert!(report.contains("\nk_exact: 1\n"));
        assert!(report.contains("\nangle_histogram:\n"));
        assert_eq!(report.lines().count(), 18 + 90);
        // Deterministic: same inputs, same bytes.
        assert_eq!(report, format_report("a", "b", g.spec(), &s, &h));
    }

    fn arb_points() -> impl Strategy<Value = Vec<(f64, f64)>> {
        proptest::collection::vec((0u32..500, 0u32..500), 3..40)
            .prop_map(|v| v.into_iter().map(|(x, y)| (x as f64, y as f64)).collect())
    }

    proptest! {
        // r is invariant under positive affine rescaling of x and symmetric in (x, y).
        #[test]
        fn pearson_affine_invariance_and_symmetry(points in arb_points(), a in 0.1f64..10.0, b in -50.0f64..50.0) {
            let swapped: Vec<_> = points.iter().map(|&(x, y)| (y, x)).collect();
            let scaled: Vec<_> = points.iter().map(|&(x, y)| (a * x + b, y)).collect();
            if let Ok(r) = pearson(&points) {
                if let Ok(r_scaled) = pearson(&scaled) {
                    prop_assert!((r - r_scaled).abs() < 1e-9);
                }
                let r_swapped = pearson(&swapped).unwrap();
                prop_assert!((r - r_swapped).abs() < 1e-12);
            }
        }

        // Swapping target and reference reflects every angle about 45°.
        #[test]
        fn angle_reflection(counts_t in proptest::collection::vec(0u64..30, 4..20),
                            counts_r in proptest::collection::vec(0u64..30, 4..20)) {
            let len = counts_t.len().min(counts_r.len());
            let t = grid(counts_t[..len].to_vec());
            let r = grid(counts_r[..len].to_vec());
            if let (Ok(f), Ok(g)) = (angle_histogram(&t, &r), angle_histogram(&r, &t)) {
                prop_assert_eq!(f.n_points, g.n_points);
                prop_assert!((f.mean_deg + g.mean_deg - 90.0).abs() < 1e-9);
                prop_assert!((f.std_deg - g.std_deg).abs() < 1e-9);
            }
        }

        // p is a probability and decreases as |r| grows.
        #[test]
        fn p_value_monotone_in_abs_r(df in 1u64..200) {
            let mut last = 1.0f64;
            for k in 0..=20 {
                let r = k as f64 / 20.0;
                let p = p_value(r, df);
                prop_assert!((0.0..=1.0).contains(&p));
                prop_assert!(p <= last + 1e-12);
                last = p;
            }
        }
    }
}
