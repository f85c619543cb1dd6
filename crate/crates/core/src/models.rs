//! Shipped model and weight pairs.
//!
//! `cauchy-like` has a single singularity at the origin in the plane, with a
//! covariance decaying like a power. `bessel-like` adds a ring singularity at
//! `|lambda| = 1`, giving the damped oscillating covariance of wave models.

use crate::error::{Error, Result};
use crate::spectrum::{Envelope, SingularComponent, SpectralModel};
use crate::weights::RadialWeight;

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub model: SpectralModel,
    pub weight: RadialWeight,
}

pub const PRESET_NAMES: [&str; 4] = ["line-origin", "cauchy-like", "line-seasonal", "bessel-like"];

pub fn preset(name: &str) -> Result<Preset> {
    let (model, weight) = match name {
        "line-origin" => (
            SpectralModel::new(1, vec![SingularComponent::new(0.0, 0.5, Envelope::exponential(1.0, 5.0))])?,
            RadialWeight::donsker(1)?,
        ),
        "cauchy-like" => (
            SpectralModel::new(2, vec![SingularComponent::new(0.0, 1.0, Envelope::exponential(1.0, 20.0))])?,
            RadialWeight::donsker(2)?,
        ),
        "line-seasonal" => (
            SpectralModel::new(
                1,
                vec![
                    SingularComponent::new(0.0, 0.5, Envelope::exponential(0.2, 5.0)),
                    SingularComponent::new(1.0, 0.5, Envelope::exponential(1.0, 10.0)),
                ],
            )?,
            RadialWeight::gaussian_ring(1, 1, 1.0, 1.0, 4.0)?,
        ),
        "bessel-like" => (
            SpectralModel::new(
                2,
                vec![
                    SingularComponent::new(0.0, 1.0, Envelope::exponential(0.2, 20.0)),
                    SingularComponent::new(1.0, 0.5, Envelope::exponential(1.0, 20.0)),
                ],
            )?,
            RadialWeight::gaussian_ring(2, 1, 1.0, 1.0, 8.5)?,
        ),
        other => return Err(Error::Config(format!("unknown preset '{other}'"))),
    };
    let name = PRESET_NAMES.iter().copied().find(|p| *p == name).expect("matched above");
    Ok(Preset { name, model, weight })
}

pub fn presets() -> Vec<Preset> {
    PRESET_NAMES.iter().map(|n| preset(n).expect("shipped presets are valid")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_build_and_match() {
        for p in presets() {
            let c = &p.model.components()[p.weight.j];
            assert_eq!(c.location, p.weight.a_j, "{}", p.name);
            assert_eq!(p.model.dimension(), p.weight.n);
            assert!(p.model.total_mass().unwrap() > 0.0);
        }
        assert!(preset("nope").is_err());
    }
}
