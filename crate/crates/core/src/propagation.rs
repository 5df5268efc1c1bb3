//! Closed-form propagation quantities: Friis reception, surface refractivity,
//! single knife-edge diffraction, Okumura-Hata loss, and the terrain, climate
//! and ground-constant catalogs used to parameterize Longley-Rice runs.
//!
//! Frequencies are in MHz throughout. Wavelength is derived as
//! `299.792458 / f_mhz` meters.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Effective Earth curvature factor for normal atmospheric conditions.
pub const EFFECTIVE_CURVATURE_K: f64 = 1.333;

/// Below this ν the knife-edge loss approximation is taken as zero.
pub const KNIFE_EDGE_CUTOFF: f64 = -0.78;

/// Nominal frequency validity of the Okumura-Hata fit, MHz.
pub const HATA_NOMINAL_BAND_MHZ: (f64, f64) = (150.0, 1500.0);

/// Upper distance limit for the Hata form, km.
pub const HATA_MAX_DISTANCE_KM: f64 = 20.0;

pub fn wavelength_m(f_mhz: f64) -> f64 {
    SPEED_OF_LIGHT / 1e6 / f_mhz
}

/// Linear power ratio to dB.
pub fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaLink {
    /// Transmit power, watts.
    pub p_tx: f64,
    pub g_tx: f64,
    pub g_rx: f64,
    pub f_mhz: f64,
    pub d_m: f64,
}

impl AntennaLink {
    fn validate(&self) -> Result<()> {
        if !(self.f_mhz > 0.0) {
            return Err(Error::Domain(format!("frequency must be positive, got {}", self.f_mhz)));
        }
        if !(self.d_m > 0.0) {
            return Err(Error::Domain(format!("distance must be positive, got {}", self.d_m)));
        }
        if !(self.p_tx > 0.0) {
            return Err(Error::Domain(format!("transmit power must be positive, got {}", self.p_tx)));
        }
        if !(self.g_tx >= 0.0 && self.g_rx >= 0.0) {
            return Err(Error::Domain("antenna gains must be non-negative".into()));
        }
        Ok(())
    }
}

/// Received power in watts from the Friis transmission equation.
pub fn friis_received_power(link: &AntennaLink) -> Result<f64> {
    link.validate()?;
    let lambda = wavelength_m(link.f_mhz);
    let spread = lambda / (4.0 * PI * link.d_m);
    Ok(link.p_tx * link.g_tx * link.g_rx * spread * spread)
}

/// Free-space path loss in dB (isotropic antennas).
pub fn free_space_loss_db(f_mhz: f64, d_m: f64) -> Result<f64> {
    let link = AntennaLink { p_tx: 1.0, g_tx: 1.0, g_rx: 1.0, f_mhz, d_m };
    Ok(-to_db(friis_received_power(&link)?))
}

/// Surface refractivity N_s in N-units for curvature factor `k`.
pub fn surface_refractivity(k: f64) -> Result<f64> {
    if !(k > 1.0) {
        return Err(Error::Domain(format!("curvature factor must exceed 1, got {k}")));
    }
    Ok(179.3 * ((1.0 - 1.0 / k) / 0.046665).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstaclePath {
    /// Height of the obstacle top above the direct ray, meters. Negative when
    /// the ray clears the obstacle.
    pub h_obs: f64,
    pub d1_m: f64,
    pub d2_m: f64,
    pub f_mhz: f64,
}

/// Dimensionless Fresnel-Kirchhoff parameter ν for a single knife edge.
pub fn knife_edge_parameter(path: &ObstaclePath) -> Result<f64> {
    if !(path.d1_m > 0.0 && path.d2_m > 0.0) {
        return Err(Error::Domain("obstacle distances must be positive".into()));
    }
    if !(path.f_mhz > 0.0) {
        return Err(Error::Domain(format!("frequency must be positive, got {}", path.f_mhz)));
    }
    let lambda = wavelength_m(path.f_mhz);
    Ok(knife_edge_parameter_with_wavelength(path.h_obs, path.d1_m, path.d2_m, lambda))
}

pub(crate) fn knife_edge_parameter_with_wavelength(h: f64, d1: f64, d2: f64, lambda: f64) -> f64 {
    h * ((2.0 / lambda) * (1.0 / d1 + 1.0 / d2)).sqrt()
}

/// Excess diffraction loss J(ν) in dB, ITU-R P.526 approximation.
pub fn knife_edge_loss(nu: f64) -> f64 {
    if nu <= KNIFE_EDGE_CUTOFF {
        return 0.0;
    }
    let t = nu - 0.1;
    // clamp the rounding dip just above the cutoff
    (6.9 + 20.0 * ((t * t + 1.0).sqrt() + t).log10()).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HataLink {
    pub f_mhz: f64,
    /// Base-station antenna height, meters.
    pub h1_m: f64,
    /// Mobile antenna height, meters.
    pub h2_m: f64,
    pub d_km: f64,
}

/// Mobile antenna correction term a(h2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MobileCorrection {
    #[default]
    SmallMediumCity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HataLoss {
    pub loss_db: f64,
    /// Set when f lies outside 150–1500 MHz. The value is still computed.
    pub outside_frequency_validity: bool,
}

pub fn hata_loss(link: &HataLink, correction: MobileCorrection) -> Result<HataLoss> {
    let HataLink { f_mhz, h1_m, h2_m, d_km } = *link;
    if !(f_mhz > 0.0 && h1_m > 0.0 && h2_m > 0.0) {
        return Err(Error::Domain("frequency and antenna heights must be positive".into()));
    }
    if !(d_km > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {d_km} km")));
    }
    if d_km > HATA_MAX_DISTANCE_KM {
        return Err(Error::Domain(format!(
            "distance {d_km} km exceeds the {HATA_MAX_DISTANCE_KM} km limit of the Hata form"
        )));
    }
    let lf = f_mhz.log10();
    let lh1 = h1_m.log10();
    let a_h2 = match correction {
        MobileCorrection::SmallMediumCity => (1.1 * lf - 0.7) * h2_m - (1.56 * lf - 0.8),
    };
    let loss_db = 69.55 + 26.16 * lf - 13.82 * lh1 - a_h2 + (44.9 - 6.55 * lh1) * d_km.log10();
    let (lo, hi) = HATA_NOMINAL_BAND_MHZ;
    Ok(HataLoss {
        loss_db,
        outside_frequency_validity: !(lo..=hi).contains(&f_mhz),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatalogKind {
    Terrain,
    Climate,
    Ground,
}

impl CatalogKind {
    fn name(self) -> &'static str {
        match self {
            CatalogKind::Terrain => "terrain",
            CatalogKind::Climate => "climate",
            CatalogKind::Ground => "ground",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TerrainClass {
    pub label: &'static str,
    /// Terrain irregularity Δh range, meters.
    pub delta_h_m: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClimateClass {
    pub label: &'static str,
    pub n_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroundClass {
    pub label: &'static str,
    pub permittivity: f64,
    /// S/m
    pub conductivity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CatalogRow {
    Terrain(TerrainClass),
    Climate(ClimateClass),
    Ground(GroundClass),
}

const TERRAIN: [TerrainClass; 5] = [
    TerrainClass { label: "Water or flat surface", delta_h_m: (0.0, 10.0) },
    TerrainClass { label: "Flat surface", delta_h_m: (10.0, 20.0) },
    TerrainClass { label: "Lightly irregular surface", delta_h_m: (40.0, 60.0) },
    TerrainClass { label: "Hills", delta_h_m: (80.0, 150.0) },
    TerrainClass { label: "Mountains", delta_h_m: (200.0, 500.0) },
];

// Labels kept as published, including "Template" for the temperate classes.
const CLIMATE: [ClimateClass; 7] = [
    ClimateClass { label: "Equatorial", n_s: 360.0 },
    ClimateClass { label: "Continental Subtropical", n_s: 320.0 },
    ClimateClass { label: "Marine Subtropical", n_s: 370.0 },
    ClimateClass { label: "Desert", n_s: 280.0 },
    ClimateClass { label: "Template", n_s: 301.0 },
    ClimateClass { label: "Marine template, upon earth", n_s: 320.0 },
    ClimateClass { label: "Marine template, upon wáter", n_s: 350.0 },
];

const GROUND: [GroundClass; 5] = [
    GroundClass { label: "Medium Earth", permittivity: 15.0, conductivity: 0.005 },
    GroundClass { label: "Poor Earth", permittivity: 4.0, conductivity: 0.001 },
    GroundClass { label: "Rich Earth", permittivity: 25.0, conductivity: 0.02 },
    GroundClass { label: "Fresh water", permittivity: 81.0, conductivity: 0.010 },
    GroundClass { label: "Sea water", permittivity: 81.0, conductivity: 5.0 },
];

/// Immutable catalog of the Longley-Rice environment parameter tables.
#[derive(Debug, Clone, Copy)]
pub struct EnvironmentCatalog {
    pub terrain_classes: &'static [TerrainClass],
    pub climate_classes: &'static [ClimateClass],
    pub ground_classes: &'static [GroundClass],
}

impl Default for EnvironmentCatalog {
    fn default() -> Self {
        Self::standard()
    }
}

fn fold_label(s: &str) -> String {
    s.trim()
        .chars()
        .map(|c| match c {
            'á' | 'Á' => 'a',
            c => c.to_ascii_lowercase(),
        })
        .collect()
}

impl EnvironmentCatalog {
    pub const fn standard() -> Self {
        Self {
            terrain_classes: &TERRAIN,
            climate_classes: &CLIMATE,
            ground_classes: &GROUND,
        }
    }

    pub fn labels(&self, kind: CatalogKind) -> Vec<&'static str> {
        match kind {
            CatalogKind::Terrain => self.terrain_classes.iter().map(|r| r.label).collect(),
            CatalogKind::Climate => self.climate_classes.iter().map(|r| r.label).collect(),
            CatalogKind::Ground => self.ground_classes.iter().map(|r| r.label).collect(),
        }
    }

    /// Lookup by label. Matching ignores case, surrounding whitespace and the
    /// accent in "wáter".
    pub fn lookup(&self, label: &str, kind: CatalogKind) -> Result<CatalogRow> {
        let key = fold_label(label);
        let found = match kind {
            CatalogKind::Terrain => self
                .terrain_classes
                .iter()
                .find(|r| fold_label(r.label) == key)
                .map(|r| CatalogRow::Terrain(*r)),
            CatalogKind::Climate => self
                .climate_classes
                .iter()
                .find(|r| fold_label(r.label) == key)
                .map(|r| CatalogRow::Climate(*r)),
            CatalogKind::Ground => self
                .ground_classes
                .iter()
                .find(|r| fold_label(r.label) == key)
                .map(|r| CatalogRow::Ground(*r)),
        };
        found.ok_or_else(|| Error::Lookup {
            kind: kind.name(),
            label: label.to_string(),
            valid: self.labels(kind).join(", "),
        })
    }
}

pub fn lookup_environment(label: &str, kind: CatalogKind) -> Result<CatalogRow> {
    EnvironmentCatalog::standard().lookup(label, kind)
}
