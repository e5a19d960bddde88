//! Run configuration: JSON file ingestion with strict field validation.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{AnnularDomain2D, DampingProfile, DampingShape, TransmissionModel1D};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Single source of all randomness (test states, Morse perturbations).
    pub seed: u64,
    pub model: ModelSection,
    pub numerics: NumericsSection,
    pub sweep: SweepSection,
    pub carleman: CarlemanSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            model: ModelSection::default(),
            numerics: NumericsSection::default(),
            sweep: SweepSection::default(),
            carleman: CarlemanSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub length: f64,
    pub interface_left: f64,
    pub interface_right: f64,
    pub c1: f64,
    pub c2: f64,
    pub damping: DampingSection,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            length: 1.0,
            interface_left: 0.3,
            interface_right: 0.7,
            c1: 1.0,
            c2: 1.0,
            damping: DampingSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DampingSection {
    pub shape: DampingShape,
    pub center: f64,
    pub half_width: f64,
    pub a_max: f64,
}

impl Default for DampingSection {
    fn default() -> Self {
        DampingSection {
            shape: DampingShape::SmoothBump,
            center: 0.5,
            half_width: 0.1,
            a_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    pub n_cells: usize,
    pub dt: f64,
    pub t_final: f64,
}

impl Default for NumericsSection {
    fn default() -> Self {
        NumericsSection {
            n_cells: 200,
            dt: 0.01,
            t_final: 50.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub mu_min: f64,
    pub mu_max: f64,
    pub points: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            mu_min: 5.0,
            mu_max: 400.0,
            points: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CarlemanSection {
    pub h_sweep: Vec<f64>,
    pub h0: f64,
    /// Interface slope of the inner phase.
    pub s1: f64,
    /// Interface slope of the outer phase branches (must be below `s1`).
    pub s2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub hole_x: f64,
    pub hole_r: f64,
    pub outer_radius: f64,
    /// Grid side for the sub-ellipticity sampling.
    pub cert_grid: usize,
    /// Relax the strict sign check on the hole circle (for cut-off tests
    /// where nothing touches that boundary piece).
    pub skip_hole_sign_check: bool,
}

impl Default for CarlemanSection {
    fn default() -> Self {
        CarlemanSection {
            h_sweep: vec![0.1, 0.05, 0.025, 0.0125],
            h0: crate::carleman::H0_DEFAULT,
            s1: 1.0,
            s2: 0.5,
            alpha1: crate::carleman::ratio::ALPHA1_DEFAULT,
            alpha2: crate::carleman::ratio::ALPHA2_DEFAULT,
            hole_x: 0.3,
            hole_r: 0.2,
            outer_radius: 1.0,
            cert_grid: 120,
            skip_hole_sign_check: false,
        }
    }
}

impl RunConfig {
    /// Load from a JSON file; unknown keys are rejected.
    pub fn load(path: &str) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::MalformedInput {
            path: path.into(),
            msg: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{path}: {e}")))
    }

    pub fn build_model(&self) -> Result<TransmissionModel1D, Error> {
        let d = &self.model.damping;
        let damping = if d.shape == DampingShape::None {
            DampingProfile::none()
        } else {
            DampingProfile {
                center: d.center,
                half_width: d.half_width,
                a_max: d.a_max,
                shape: d.shape,
            }
        };
        TransmissionModel1D::new(
            self.model.length,
            self.model.interface_left,
            self.model.interface_right,
            self.model.c1,
            self.model.c2,
            damping,
        )
    }

    pub fn build_annulus(&self) -> Result<AnnularDomain2D, Error> {
        AnnularDomain2D::new(
            self.carleman.outer_radius,
            [self.carleman.hole_x, 0.0],
            self.carleman.hole_r,
        )
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.build_model()?;
        self.build_annulus()?;
        if !(self.numerics.dt > 0.0 && self.numerics.t_final > 0.0) {
            return Err(Error::InvalidConfig(
                "numerics.dt and numerics.t_final must be positive".into(),
            ));
        }
        if !(self.sweep.mu_min > 0.0 && self.sweep.mu_max > self.sweep.mu_min)
            || self.sweep.points < 1
        {
            return Err(Error::InvalidConfig(
                "sweep requires 0 < mu_min < mu_max and points >= 1".into(),
            ));
        }
        if self.carleman.h_sweep.is_empty()
            || self
                .carleman
                .h_sweep
                .iter()
                .any(|&h| !(h > 0.0 && h <= self.carleman.h0))
        {
            return Err(Error::InvalidConfig(format!(
                "carleman.h_sweep values must lie in (0, {}]",
                self.carleman.h0
            )));
        }
        if !(self.carleman.s1 > self.carleman.s2 && self.carleman.s2 > 0.0) {
            return Err(Error::InvalidConfig(
                "carleman phases require s1 > s2 > 0".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let model = cfg.build_model().unwrap();
        assert_eq!(model.c1, 1.0);
        assert!(!model.damping.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"seeed": 1}"#);
        assert!(err.is_err());
        let err = serde_json::from_str::<RunConfig>(r#"{"model": {"c3": 1.0}}"#);
        assert!(err.is_err());
    }

    #[test]
    fn partial_config_uses_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"model": {"c2": 2.0}}"#).unwrap();
        assert_eq!(cfg.model.c2, 2.0);
        assert_eq!(cfg.model.c1, 1.0);
        assert_eq!(cfg.numerics.n_cells, 200);
    }

    #[test]
    fn invalid_speeds_fail_validation() {
        let cfg: RunConfig = serde_json::from_str(r#"{"model": {"c1": -1.0}}"#).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn undamped_requested_via_shape_none() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"model": {"damping": {"shape": "none"}}}"#).unwrap();
        let model = cfg.build_model().unwrap();
        assert!(model.damping.is_none());
    }
}
