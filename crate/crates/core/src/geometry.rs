//! Stochastic-geometry model of the ultra-dense network.
//!
//! SBSs and users are homogeneous Poisson point processes on a rectangular
//! region. A typical user hears every SBS inside its reception ball of
//! radius `R`; SBSs without an associated user stay dormant, which thins the
//! interferers to density `p_a · λ_b`.
//!
//! Powers in the configuration are in dBm and are converted to linear mW
//! before any formula is evaluated.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::fading_rule;

/// Mean of the Rayleigh power fading `|g|²`.
pub const RAYLEIGH_MEAN: f64 = 1.0;

/// Shape constant of the active-probability approximation.
const ACTIVE_SHAPE: f64 = 3.5;

/// Network geometry and radio parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// SBS density (SBSs/km²).
    pub lambda_b: f64,
    /// User density (users/km²).
    pub lambda_u: f64,
    /// Reception-ball radius `R` (km).
    pub reception_radius: f64,
    /// Content request region radius `R_c` (km).
    pub request_radius: f64,
    /// Popularity search region radius `R_s` (km).
    pub search_radius: f64,
    pub path_loss_exponent: f64,
    pub tx_power_dbm: f64,
    pub noise_dbm: f64,
    pub num_antennas: u32,
    /// Region width (km).
    pub region_width: f64,
    /// Region height (km).
    pub region_height: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let r = 10.0 / PI.sqrt();
        GeometryConfig {
            lambda_b: 0.03,
            lambda_u: 0.001,
            reception_radius: r,
            request_radius: r,
            search_radius: r,
            path_loss_exponent: 4.0,
            tx_power_dbm: 23.0,
            noise_dbm: -70.0,
            num_antennas: 1,
            region_width: 20.0,
            region_height: 20.0,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda_b.is_finite() || self.lambda_b <= 0.0 {
            return Err(Error::validation(
                "geometry.lambda_b",
                format!("SBS density must be finite and positive, got {}", self.lambda_b),
            ));
        }
        if !self.lambda_u.is_finite() || self.lambda_u < 0.0 {
            return Err(Error::validation(
                "geometry.lambda_u",
                format!("user density must be finite and non-negative, got {}", self.lambda_u),
            ));
        }
        if self.lambda_b < self.lambda_u {
            log::warn!(
                "lambda_b = {} is below lambda_u = {}; the network is not ultra-dense",
                self.lambda_b,
                self.lambda_u
            );
        }
        for (key, v) in [
            ("geometry.reception_radius", self.reception_radius),
            ("geometry.request_radius", self.request_radius),
            ("geometry.search_radius", self.search_radius),
            ("geometry.region_width", self.region_width),
            ("geometry.region_height", self.region_height),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::validation(key, format!("must be finite and positive, got {v}")));
            }
        }
        if !self.path_loss_exponent.is_finite() || self.path_loss_exponent <= 2.0 {
            return Err(Error::validation(
                "geometry.path_loss_exponent",
                format!("must exceed 2, got {}", self.path_loss_exponent),
            ));
        }
        if self.num_antennas == 0 {
            return Err(Error::validation("geometry.num_antennas", "must be at least 1"));
        }
        for (key, v) in [
            ("geometry.tx_power_dbm", self.tx_power_dbm),
            ("geometry.noise_dbm", self.noise_dbm),
        ] {
            if !v.is_finite() {
                return Err(Error::validation(key, "must be finite"));
            }
        }
        Ok(())
    }

    pub fn region(&self) -> Region {
        Region {
            width: self.region_width,
            height: self.region_height,
        }
    }

    pub fn tx_power_mw(&self) -> f64 {
        dbm_to_mw(self.tx_power_dbm)
    }

    pub fn noise_mw(&self) -> f64 {
        dbm_to_mw(self.noise_dbm)
    }

    /// Fraction of the circle covered by the main lobe, `θ_{N_a} / 2π`.
    pub fn beam_fraction(&self) -> f64 {
        1.0 / f64::from(self.num_antennas).sqrt()
    }

    /// Number of SBSs a typical user sees in its content request region,
    /// `max(1, round(π R_c² λ_b))`.
    pub fn request_region_count(&self) -> usize {
        let mean = PI * self.request_radius.powi(2) * self.lambda_b;
        (mean.round() as usize).max(1)
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Axis-aligned rectangle `[0, width] × [0, height]` (km).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub width: f64,
    pub height: f64,
}

impl Region {
    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn center(&self) -> Point {
        Point::new(self.width / 2.0, self.height / 2.0)
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A realisation of a homogeneous Poisson point process.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    pub points: Vec<Point>,
    pub intensity: f64,
    pub region: Region,
}

impl PointPattern {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn within(&self, center: Point, radius: f64) -> impl Iterator<Item = &Point> + '_ {
        self.points
            .iter()
            .filter(move |p| p.distance(center) <= radius)
    }
}

/// Draws a homogeneous PPP with the given intensity (per km²) on `region`.
pub fn sample_ppp<R: Rng + ?Sized>(intensity: f64, region: Region, rng: &mut R) -> Result<PointPattern> {
    if !intensity.is_finite() || intensity < 0.0 {
        return Err(Error::validation(
            "intensity",
            format!("PPP intensity must be finite and non-negative, got {intensity}"),
        ));
    }
    if !(region.area() > 0.0) {
        return Err(Error::validation("region", "region area must be positive"));
    }
    let mean = intensity * region.area();
    let count = if mean > 0.0 {
        let dist = Poisson::new(mean).map_err(|e| Error::Domain(e.to_string()))?;
        dist.sample(rng) as usize
    } else {
        0
    };
    let points = (0..count)
        .map(|_| {
            Point::new(
                rng.random::<f64>() * region.width,
                rng.random::<f64>() * region.height,
            )
        })
        .collect();
    Ok(PointPattern {
        points,
        intensity,
        region,
    })
}

/// Uniform point in the disc of radius `radius` around `center`.
pub fn uniform_in_disc<R: Rng + ?Sized>(center: Point, radius: f64, rng: &mut R) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    Point::new(center.x + r * phi.cos(), center.y + r * phi.sin())
}

/// Probability that an SBS has at least one associated user,
/// `1 − (1 + λ_u / (3.5 λ_b))^{−3.5}`.
pub fn active_probability(lambda_u: f64, lambda_b: f64) -> Result<f64> {
    if !(lambda_b > 0.0) || !lambda_b.is_finite() {
        return Err(Error::Domain(format!("lambda_b must be positive, got {lambda_b}")));
    }
    if !(lambda_u >= 0.0) {
        return Err(Error::Domain(format!("lambda_u must be non-negative, got {lambda_u}")));
    }
    if lambda_u.is_infinite() {
        return Ok(1.0);
    }
    let ratio = lambda_u / (ACTIVE_SHAPE * lambda_b);
    Ok(1.0 - (1.0 + ratio).powf(-ACTIVE_SHAPE))
}

/// Bounded path-loss gain `min(1, d^{−α})`.
pub fn path_loss(distance_km: f64, alpha: f64) -> f64 {
    if distance_km <= 1.0 {
        1.0
    } else {
        distance_km.powf(-alpha)
    }
}

/// Aggregate interference normalised by SBS density and antenna count (mW).
pub fn normalized_interference(cfg: &GeometryConfig) -> Result<f64> {
    let alpha = cfg.path_loss_exponent;
    if !(alpha > 2.0) {
        return Err(Error::Domain(format!(
            "normalized interference needs alpha > 2, got {alpha}"
        )));
    }
    let r = cfg.reception_radius;
    let users = (cfg.lambda_u * PI * r).powi(2);
    let antennas = f64::from(cfg.num_antennas).powf(-0.5);
    let density = cfg.lambda_b.powf(-alpha / 2.0);
    let ball = 1.0 + (1.0 - r.powf(2.0 - alpha)) / (alpha - 2.0);
    Ok(users * antennas * density * ball * cfg.tx_power_mw() * RAYLEIGH_MEAN)
}

/// One Monte-Carlo draw of the interference at `user`, including the
/// main-lobe factor `(θ_{N_a} / 2π) · N_a` applied to it in the SINR.
pub fn monte_carlo_interference<R: Rng + ?Sized>(
    pattern: &PointPattern,
    user: Point,
    cfg: &GeometryConfig,
    active_prob: f64,
    rng: &mut R,
) -> f64 {
    let power = cfg.tx_power_mw();
    let lobe = cfg.beam_fraction() * f64::from(cfg.num_antennas);
    let mut total = 0.0;
    for p in pattern.within(user, cfg.reception_radius) {
        if active_prob <= 0.0 || rng.random::<f64>() >= active_prob {
            continue;
        }
        let fading: f64 = Exp1.sample(rng);
        total += power * path_loss(p.distance(user), cfg.path_loss_exponent) * fading;
    }
    lobe * total
}

/// Deterministic inputs of the average-rate expression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateModel {
    /// Normalised interference `Î^f` (mW).
    pub interference_normalized: f64,
    /// `σ² / (N_a λ_b^{α/2})` (mW).
    pub noise_term: f64,
    /// Representative serving distance `d₀` (km).
    pub serving_distance_km: f64,
    pub fading_mean: f64,
}

impl RateModel {
    /// Analytic model with the mean nearest-SBS distance `1 / (2√λ_b)`.
    pub fn from_config(cfg: &GeometryConfig) -> Result<Self> {
        cfg.validate()?;
        let model = RateModel {
            interference_normalized: normalized_interference(cfg)?,
            noise_term: cfg.noise_mw()
                / (f64::from(cfg.num_antennas) * cfg.lambda_b.powf(cfg.path_loss_exponent / 2.0)),
            serving_distance_km: 1.0 / (2.0 * cfg.lambda_b.sqrt()),
            fading_mean: RAYLEIGH_MEAN,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("interference_normalized", self.interference_normalized),
            ("noise_term", self.noise_term),
            ("serving_distance_km", self.serving_distance_km),
            ("fading_mean", self.fading_mean),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain(format!("rate model field {name} = {v}")));
            }
        }
        Ok(())
    }

    /// Mean received SINR scale: serving power over noise plus interference.
    fn sinr_scale(&self, cfg: &GeometryConfig) -> Result<f64> {
        let na = f64::from(cfg.num_antennas);
        let signal = na
            * cfg.tx_power_mw()
            * path_loss(self.serving_distance_km, cfg.path_loss_exponent)
            * self.fading_mean;
        let denom = self.noise_term + self.interference_normalized * cfg.beam_fraction() * na;
        if !(denom > 0.0) {
            return Err(Error::Domain(
                "degenerate SINR: noise and interference are both zero".into(),
            ));
        }
        Ok(signal / denom)
    }
}

/// Average rate per unit bandwidth (nats/s/Hz), `E_g[ln(1 + SINR)]` with
/// Rayleigh fading integrated by a 32-node Gauss-Laguerre rule.
pub fn average_rate(model: &RateModel, cfg: &GeometryConfig) -> Result<f64> {
    model.validate()?;
    let scale = model.sinr_scale(cfg)?;
    Ok(fading_rule().expect(|u| (scale * u).ln_1p()))
}

/// One sampled spectral efficiency for `user`: served by the nearest SBS in
/// `pattern`, interfered by the remaining SBSs inside the reception ball,
/// each active with probability `active_prob`. Returns `None` when the
/// pattern is empty.
pub fn sampled_rate<R: Rng + ?Sized>(
    pattern: &PointPattern,
    user: Point,
    cfg: &GeometryConfig,
    active_prob: f64,
    rng: &mut R,
) -> Option<f64> {
    let (serving, d0) = pattern
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, p.distance(user)))
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    let power = cfg.tx_power_mw();
    let na = f64::from(cfg.num_antennas);
    let lobe = cfg.beam_fraction() * na;
    let mut interference = 0.0;
    for (i, p) in pattern.points.iter().enumerate() {
        let d = p.distance(user);
        if i == serving || d > cfg.reception_radius {
            continue;
        }
        if rng.random::<f64>() >= active_prob {
            continue;
        }
        let fading: f64 = Exp1.sample(rng);
        interference += power * path_loss(d, cfg.path_loss_exponent) * fading;
    }
    let fading: f64 = Exp1.sample(rng);
    let signal = na * power * path_loss(d0, cfg.path_loss_exponent) * fading;
    Some((signal / (cfg.noise_mw() + lobe * interference)).ln_1p())
}
