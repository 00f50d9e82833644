//! Helpers shared by the acceptance and calibration suites.
#![allow(dead_code)] // each test binary uses a different subset

use std::path::PathBuf;

use geolect::grid::{bin_counts, CountGrid, GridSpec};
use geolect::synth::{generate, load_scenario, Scenario, SpatialComponent};
use geolect::token::{select, MatchConfig, TokenSet};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs/scenarios")
        .join(format!("{name}.toml"))
}

pub fn scenario(name: &str) -> Scenario {
    load_scenario(scenario_path(name)).expect("shipped scenario config must load")
}

/// Generate the scenario corpus and bin the target/reference selections.
pub fn pipeline_grids(scenario: &Scenario, spec: &GridSpec) -> (CountGrid, CountGrid) {
    let tweets = generate(scenario).expect("scenario generates");
    let cfg = MatchConfig::default();
    let target_set = TokenSet::new("target", vec![scenario.target_token.clone()]).unwrap();
    let reference_set = TokenSet::new("reference", vec![scenario.reference_token.clone()]).unwrap();
    let target = select(&tweets, &target_set, &cfg);
    let reference = select(&tweets, &reference_set, &cfg);
    (bin_counts(&target, spec), bin_counts(&reference, spec))
}

/// Expected record count per bin under the scenario's spatial model:
/// each mixture component's discrete mass is normalized over the grid, so
/// truncation and bin discretization are absorbed at once. Laid out
/// `i * m + j` like the grids.
pub fn bin_intensities(scenario: &Scenario, spec: &GridSpec) -> Vec<f64> {
    let bins = spec.bin_count();
    let mut total = vec![0.0f64; bins];
    for (weight, comp) in &scenario.spatial.components {
        match comp {
            SpatialComponent::Uniform => {
                let share = weight / bins as f64;
                for v in total.iter_mut() {
                    *v += share;
                }
            }
            SpatialComponent::Gaussian { lon, lat, sigma } => {
                let mut mass = vec![0.0f64; bins];
                let mut sum = 0.0;
                for i in 0..spec.n {
                    for j in 0..spec.m {
                        let (clon, clat) = spec.bin_center(i, j);
                        let d2 = (clon - lon) * (clon - lon) + (clat - lat) * (clat - lat);
                        let g = (-d2 / (2.0 * sigma * sigma)).exp();
                        mass[i * spec.m + j] = g;
                        sum += g;
                    }
                }
                for (v, g) in total.iter_mut().zip(&mass) {
                    *v += weight * g / sum;
                }
            }
        }
    }
    total.iter().map(|m| m * scenario.n_tweets as f64).collect()
}

/// Fraction of scatter points inside the shot-noise band
/// `|c_target − k·c_ref| ≤ k·√c_ref` with `k = N_T/N_R`.
pub fn band_fraction(target: &CountGrid, reference: &CountGrid) -> f64 {
    let k = target.total() as f64 / reference.total() as f64;
    let inside = target
        .counts()
        .iter()
        .zip(reference.counts())
        .filter(|&(&ct, &cr)| {
            let cr = cr as f64;
            (ct as f64 - k * cr).abs() <= k * cr.sqrt()
        })
        .count();
    inside as f64 / target.counts().len() as f64
}

pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
