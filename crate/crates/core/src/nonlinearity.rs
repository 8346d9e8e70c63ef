//! Channel maps applied to transmitted gradients.
//!
//! A map `g` is *sector-bound* when it is odd, sign-preserving and satisfies
//! `κ ≤ g(u)/u ≤ 𝒦` for every `u ≠ 0` with `κ, 𝒦 > 0`. The log quantizer and
//! leaky saturation qualify; the uniform quantizer does not (it has a dead
//! zone around the origin) and is kept only as a comparison baseline.

use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum MapError {
    NotSectorBound,
    InvalidParameter(&'static str),
}

impl fmt::Display for MapError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotSectorBound => write!(f, "map has no positive lower sector bound"),
            Self::InvalidParameter(what) => write!(f, "invalid map parameter: {what}"),
        }
    }
}

impl core::error::Error for MapError {}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum SectorMap {
    Identity,
    /// `sgn(u)·exp(ρ·round(log|u| / ρ))`.
    LogQuantizer { rho: f64 },
    /// Clip at `limit`, with slope `slope_floor` beyond it.
    Saturation { limit: f64, slope_floor: f64 },
    /// `Δ·round(u / Δ)`.
    UniformQuantizer { delta: f64 },
}

/// Default slope beyond the saturation limit.
pub const DEFAULT_SLOPE_FLOOR: f64 = 0.05;

impl SectorMap {
    pub fn log_quantizer(rho: f64) -> Result<Self, MapError> {
        positive(rho, "quantization level rho must be positive")?;
        Ok(Self::LogQuantizer { rho })
    }

    pub fn saturation(limit: f64, slope_floor: f64) -> Result<Self, MapError> {
        positive(limit, "saturation limit must be positive")?;
        if !(slope_floor > 0.0 && slope_floor <= 1.0) {
            return Err(MapError::InvalidParameter("slope floor must lie in (0, 1]"));
        }
        Ok(Self::Saturation { limit, slope_floor })
    }

    pub fn uniform_quantizer(delta: f64) -> Result<Self, MapError> {
        positive(delta, "quantization step delta must be positive")?;
        Ok(Self::UniformQuantizer { delta })
    }

    /// Re-checks parameters of a value built directly (e.g. deserialized).
    pub fn validate(&self) -> Result<(), MapError> {
        match *self {
            Self::Identity => Ok(()),
            Self::LogQuantizer { rho } => Self::log_quantizer(rho).map(drop),
            Self::Saturation { limit, slope_floor } => {
                Self::saturation(limit, slope_floor).map(drop)
            }
            Self::UniformQuantizer { delta } => Self::uniform_quantizer(delta).map(drop),
        }
    }

    pub fn apply(&self, u: f64) -> f64 {
        match *self {
            Self::Identity => u,
            Self::LogQuantizer { rho } => {
                if u == 0.0 {
                    return 0.0;
                }
                let mag = libm::exp(rho * libm::round(libm::log(u.abs()) / rho));
                mag.copysign(u)
            }
            Self::Saturation { limit, slope_floor } => {
                let a = u.abs();
                let mag = a.min(limit) + slope_floor * (a - limit).max(0.0);
                mag.copysign(u)
            }
            Self::UniformQuantizer { delta } => delta * libm::round(u / delta),
        }
    }

    /// `(κ, 𝒦)` such that `κ ≤ g(u)/u ≤ 𝒦` for all `u ≠ 0`.
    pub fn sector_bounds(&self) -> Result<(f64, f64), MapError> {
        match *self {
            Self::Identity => Ok((1.0, 1.0)),
            // rounding in the log domain moves log|u| by at most ρ/2
            Self::LogQuantizer { rho } => Ok((libm::exp(-rho / 2.0), libm::exp(rho / 2.0))),
            Self::Saturation { slope_floor, .. } => Ok((slope_floor, 1.0)),
            Self::UniformQuantizer { .. } => Err(MapError::NotSectorBound),
        }
    }

    pub fn is_sector_bound(&self) -> bool {
        self.sector_bounds().is_ok()
    }
}

fn positive(v: f64, what: &'static str) -> Result<(), MapError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(MapError::InvalidParameter(what))
    }
}
