//! Seeded synthetic corpora with planted spatial token-usage structure.
//!
//! A scenario draws locations from a weighted mixture of uniform and
//! isotropic Gaussian components (rejection-sampled into the extent) and
//! independently embeds a target and a reference token into each record's
//! text according to location-dependent usage probabilities. Null
//! scenarios use identical usage fields for both tokens; hotspot and
//! gradient scenarios plant localized or smoothly varying contrast.
//!
//! Generation is reproducible: the stream is ChaCha8 keyed by the seed,
//! uniforms take the top 53 bits of each 64-bit draw, Gaussians come from
//! one Box–Muller pair per location attempt, and each record consumes its
//! location draws followed by one uniform for the target token and one
//! for the reference token.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Deserialize;

use crate::corpus::Tweet;
use crate::error::{Error, Result};
use crate::grid::{BinIndex, Extent, GridSpec};

/// One location-mixture component.
#[derive(Debug, Clone, PartialEq)]
pub enum SpatialComponent {
    /// Uniform over the extent.
    Uniform,
    /// Isotropic Gaussian blob, sigma in degrees.
    Gaussian { lon: f64, lat: f64, sigma: f64 },
}

/// Weighted mixture of spatial components; weights sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialModel {
    pub components: Vec<(f64, SpatialComponent)>,
}

impl SpatialModel {
    pub fn uniform() -> Self {
        SpatialModel { components: vec![(1.0, SpatialComponent::Uniform)] }
    }

    fn validate(&self, extent: &Extent) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::invalid("spatial model", "no components"));
        }
        let sum: f64 = self.components.iter().map(|(w, _)| w).sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("spatial model", format!("weights sum to {sum}, expected 1")));
        }
        for (w, c) in &self.components {
            if !(*w > 0.0) {
                return Err(Error::invalid("spatial model", format!("non-positive weight {w}")));
            }
            if let SpatialComponent::Gaussian { lon, lat, sigma } = c {
                if !(*sigma > 0.0) {
                    return Err(Error::invalid("spatial model", format!("non-positive sigma {sigma}")));
                }
                if !extent.contains(*lon, *lat) {
                    return Err(Error::invalid(
                        "spatial model",
                        format!("blob center ({lon}, {lat}) outside the extent"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Mixture density at a point, up to a global normalization constant
    /// (truncation to the extent rescales all bins alike).
    fn density(&self, extent: &Extent, lon: f64, lat: f64) -> f64 {
        let area = extent.lon_span() * extent.lat_span();
        self.components
            .iter()
            .map(|(w, c)| match c {
                SpatialComponent::Uniform => w / area,
                SpatialComponent::Gaussian { lon: cl, lat: ct, sigma } => {
                    let d2 = (lon - cl) * (lon - cl) + (lat - ct) * (lat - ct);
                    w * (-d2 / (2.0 * sigma * sigma)).exp() / (2.0 * std::f64::consts::PI * sigma * sigma)
                }
            })
            .sum()
    }
}

/// A single usage hotspot: adds up to `gain` to the usage probability at
/// its center, falling off as a Gaussian with `sigma` degrees.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Hotspot {
    pub lon: f64,
    pub lat: f64,
    pub sigma: f64,
    pub gain: f64,
}

/// Location-dependent token-usage probability:
/// `p(lon, lat) = clamp(base_rate + Σ gain·exp(−d²/2σ²), 0, 1)`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct UsageField {
    pub base_rate: f64,
    #[serde(default)]
    pub hotspots: Vec<Hotspot>,
}

impl UsageField {
    pub fn flat(base_rate: f64) -> Self {
        UsageField { base_rate, hotspots: Vec::new() }
    }

    pub fn rate(&self, lon: f64, lat: f64) -> f64 {
        let mut p = self.base_rate;
        for h in &self.hotspots {
            let d2 = (lon - h.lon) * (lon - h.lon) + (lat - h.lat) * (lat - h.lat);
            p += h.gain * (-d2 / (2.0 * h.sigma * h.sigma)).exp();
        }
        p.clamp(0.0, 1.0)
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.base_rate) {
            return Err(Error::invalid("usage field", format!("base rate {} outside [0, 1]", self.base_rate)));
        }
        for h in &self.hotspots {
            if !(h.sigma > 0.0) {
                return Err(Error::invalid("usage field", format!("non-positive hotspot sigma {}", h.sigma)));
            }
        }
        Ok(())
    }
}

/// What kind of contrast a scenario plants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    /// Identical usage fields: any measured divergence is noise.
    Null,
    /// Disjoint localized usage regions.
    Hotspot,
    /// Smoothly varying contrast across the extent.
    Gradient,
}

/// A full synthetic-corpus recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub extent: Extent,
    pub spatial: SpatialModel,
    pub target_usage: UsageField,
    pub reference_usage: UsageField,
    pub target_token: String,
    pub reference_token: String,
    pub n_tweets: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.spatial.validate(&self.extent)?;
        self.target_usage.validate()?;
        self.reference_usage.validate()?;
        if self.target_token.is_empty() || self.reference_token.is_empty() {
            return Err(Error::invalid("scenario", "empty token"));
        }
        if self.kind == ScenarioKind::Null && self.target_usage != self.reference_usage {
            return Err(Error::invalid(
                "scenario",
                "null scenarios require identical target and reference usage fields",
            ));
        }
        Ok(())
    }

    /// Same scenario, different stream.
    pub fn with_seed(&self, seed: u64) -> Scenario {
        Scenario { seed, ..self.clone() }
    }
}

/// Uniform in [0, 1): top 53 bits of one 64-bit draw.
fn unit_open(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
}

/// Uniform in (0, 1]; safe under a logarithm.
fn unit_closed(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / 9007199254740992.0)
}

/// One Box–Muller pair of standard normals.
fn normal_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1 = unit_closed(rng);
    let u2 = unit_open(rng);
    let radius = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (radius * theta.cos(), radius * theta.sin())
}

fn sample_location(rng: &mut ChaCha8Rng, model: &SpatialModel, extent: &Extent) -> (f64, f64) {
    loop {
        let pick = unit_open(rng);
        let mut acc = 0.0;
        let mut chosen = &model.components[model.components.len() - 1].1;
        for (w, c) in &model.components {
            acc += w;
            if pick < acc {
                chosen = c;
                break;
            }
        }
        let (lon, lat) = match chosen {
            SpatialComponent::Uniform => (
                extent.lon_min + unit_open(rng) * extent.lon_span(),
                extent.lat_min + unit_open(rng) * extent.lat_span(),
            ),
            SpatialComponent::Gaussian { lon, lat, sigma } => {
                let (z0, z1) = normal_pair(rng);
                (lon + sigma * z0, lat + sigma * z1)
            }
        };
        if extent.contains(lon, lat) {
            return (lon, lat);
        }
    }
}

/// Generate the scenario's corpus: exactly `n_tweets` records inside the
/// extent, each containing the target token with probability
/// `p_T(location)` and the reference token with probability
/// `p_R(location)`, independently. Tokens are flanked by filler words so
/// word-boundary matching is exercised.
pub fn generate(scenario: &Scenario) -> Result<Vec<Tweet>> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut tweets = Vec::with_capacity(scenario.n_tweets);
    for idx in 0..scenario.n_tweets {
        let (lon, lat) = sample_location(&mut rng, &scenario.spatial, &scenario.extent);
        let has_target = unit_open(&mut rng) < scenario.target_usage.rate(lon, lat);
        let has_reference = unit_open(&mut rng) < scenario.reference_usage.rate(lon, lat);
        let mut text = String::from("nada");
        if has_target {
            text.push(' ');
            text.push_str(&scenario.target_token);
        }
        if has_reference {
            text.push(' ');
            text.push_str(&scenario.reference_token);
        }
        text.push_str(" aqui");
        tweets.push(Tweet {
            id: (idx + 1).to_string(),
            lon,
            lat,
            text,
            lang: "es".into(),
            created_at: None,
        });
    }
    Ok(tweets)
}

/// Which way a bin is expected to lean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinSign {
    TargetHeavy,
    ReferenceHeavy,
}

/// Analytic ground truth for a scenario on a given grid.
#[derive(Debug, Clone)]
pub struct PlantedExpectation {
    /// Expected relative distribution per bin, laid out `i * m + j`.
    pub expected_delta: Vec<f64>,
    /// Bins whose expected |Δf| reaches [`FLAG_FRACTION`] of the maximum,
    /// with the expected sign.
    pub flagged: Vec<(BinIndex, BinSign)>,
}

/// Flagging threshold as a fraction of the peak expected |Δf|.
pub const FLAG_FRACTION: f64 = 0.25;

/// Expected Δf per bin, evaluated at bin centers from the scenario's
/// spatial density and usage fields. Null scenarios flag nothing.
pub fn planted_expectation(scenario: &Scenario, grid: &GridSpec) -> PlantedExpectation {
    let bins = grid.bin_count();
    let mut q_target = vec![0.0f64; bins];
    let mut q_reference = vec![0.0f64; bins];
    for i in 0..grid.n {
        for j in 0..grid.m {
            let (lon, lat) = grid.bin_center(i, j);
            let rho = scenario.spatial.density(&scenario.extent, lon, lat);
            q_target[i * grid.m + j] = rho * scenario.target_usage.rate(lon, lat);
            q_reference[i * grid.m + j] = rho * scenario.reference_usage.rate(lon, lat);
        }
    }
    let z_target: f64 = q_target.iter().sum();
    let z_reference: f64 = q_reference.iter().sum();
    let expected_delta: Vec<f64> = q_target
        .iter()
        .zip(&q_reference)
        .map(|(t, r)| {
            let ft = if z_target > 0.0 { t / z_target } else { 0.0 };
            let fr = if z_reference > 0.0 { r / z_reference } else { 0.0 };
            ft - fr
        })
        .collect();

    let max_abs = expected_delta.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut flagged = Vec::new();
    if max_abs > 0.0 {
        for i in 0..grid.n {
            for j in 0..grid.m {
                let v = expected_delta[i * grid.m + j];
                if v.abs() >= FLAG_FRACTION * max_abs {
                    let sign = if v > 0.0 { BinSign::TargetHeavy } else { BinSign::ReferenceHeavy };
                    flagged.push((BinIndex { i, j }, sign));
                }
            }
        }
    }
    PlantedExpectation { expected_delta, flagged }
}

// ---------------------------------------------------------------------------
// Scenario config files
// ---------------------------------------------------------------------------
//
// Same structured format as the token-set configs (TOML):
//
//   [scenario]
//   kind = "null"                 # null | hotspot | gradient
//   n_tweets = 200000
//   seed = 11
//   target_token = "alfa"
//   reference_token = "beta"
//
//   [scenario.extent]             # lon_min / lon_max / lat_min / lat_max
//
//   [[scenario.spatial]]          # kind = "uniform" | "gaussian"
//   kind = "gaussian"             # gaussian takes lon, lat, sigma
//   weight = 0.75
//   lon = -58.44
//   lat = -34.62
//   sigma = 0.012
//
//   [scenario.target_usage]       # base_rate plus [[...hotspots]] with
//   [scenario.reference_usage]    # lon, lat, sigma, gain

#[derive(Deserialize)]
struct ScenarioFile {
    scenario: ScenarioSection,
}

#[derive(Deserialize)]
struct ScenarioSection {
    kind: ScenarioKind,
    n_tweets: usize,
    seed: u64,
    target_token: String,
    reference_token: String,
    extent: Extent,
    spatial: Vec<RawComponent>,
    target_usage: UsageField,
    reference_usage: UsageField,
}

#[derive(Deserialize)]
struct RawComponent {
    kind: String,
    weight: f64,
    lon: Option<f64>,
    lat: Option<f64>,
    sigma: Option<f64>,
}

pub fn parse_scenario(toml_text: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(toml_text).map_err(|e| Error::Config(e.to_string()))?;
    let s = file.scenario;
    let mut components = Vec::with_capacity(s.spatial.len());
    for raw in s.spatial {
        let comp = match raw.kind.as_str() {
            "uniform" => SpatialComponent::Uniform,
            "gaussian" => {
                let (lon, lat, sigma) = match (raw.lon, raw.lat, raw.sigma) {
                    (Some(a), Some(b), Some(c)) => (a, b, c),
                    _ => return Err(Error::Config("gaussian component needs lon, lat, sigma".into())),
                };
                SpatialComponent::Gaussian { lon, lat, sigma }
            }
            other => return Err(Error::Config(format!("unknown spatial component kind `{other}`"))),
        };
        components.push((raw.weight, comp));
    }
    let scenario = Scenario {
        kind: s.kind,
        extent: s.extent,
        spatial: SpatialModel { components },
        target_usage: s.target_usage,
        reference_usage: s.reference_usage,
        target_token: s.target_token,
        reference_token: s.reference_token,
        n_tweets: s.n_tweets,
        seed: s.seed,
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario<P: AsRef<Path>>(path: P) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
