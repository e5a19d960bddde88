//! Transmission geometry and material data.
//!
//! The 1-D model splits `(0, L)` into an inner damped segment
//! `Omega_1 = (a_if, b_if)` and the two outer undamped pieces
//! `Omega_2 = (0, a_if) u (b_if, L)`. The wave speeds are `c1` on the inner
//! segment and `c2` outside; the Kelvin-Voigt damping coefficient `a(x)` is a
//! smooth bump supported strictly inside the inner segment.
//!
//! The 2-D annular domain is used only by the weight-construction machinery.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Shape of the damping coefficient profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DampingShape {
    /// `a(x) = a_max * exp(1 - 1/(1 - s^2))`, `s = (x - m)/w`, zero for `|s| >= 1`.
    SmoothBump,
    /// Flat top `a_max` on `|s| <= 1/2`, smooth C-infinity drop to zero at `|s| = 1`.
    PlateauBump,
    /// Identically zero damping (undamped runs are requested explicitly).
    None,
}

/// Localized damping coefficient `a(x) >= 0`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DampingProfile {
    /// Bump center.
    pub center: f64,
    /// Support half-width; `a = 0` outside `[center - w, center + w]`.
    pub half_width: f64,
    /// Peak amplitude.
    pub a_max: f64,
    pub shape: DampingShape,
}

impl DampingProfile {
    /// The profile that is identically zero.
    pub fn none() -> Self {
        DampingProfile {
            center: 0.0,
            half_width: 1.0,
            a_max: 0.0,
            shape: DampingShape::None,
        }
    }

    pub fn is_none(&self) -> bool {
        self.shape == DampingShape::None
    }

    /// Evaluate the profile; zero outside the support by construction.
    pub fn eval(&self, x: f64) -> f64 {
        if self.is_none() {
            return 0.0;
        }
        let s = (x - self.center) / self.half_width;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        match self.shape {
            DampingShape::SmoothBump => self.a_max * (1.0 - 1.0 / (1.0 - s * s)).exp(),
            DampingShape::PlateauBump => {
                let t = s.abs();
                if t <= 0.5 {
                    self.a_max
                } else {
                    // C-infinity transition from 1 at t=1/2 down to 0 at t=1.
                    self.a_max * smooth_transition((1.0 - t) / 0.5)
                }
            }
            DampingShape::None => 0.0,
        }
    }
}

/// The standard C-infinity step: 0 at t=0, 1 at t=1, flat at both ends.
fn smooth_transition(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let g = |u: f64| (-1.0 / u).exp();
        g(t) / (g(t) + g(1.0 - t))
    }
}

/// 1-D transmission model: geometry, wave speeds, damping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransmissionModel1D {
    pub length: f64,
    /// Left interface point; `Omega_1 = (interface_left, interface_right)`.
    pub interface_left: f64,
    pub interface_right: f64,
    /// Wave speed on `Omega_1`.
    pub c1: f64,
    /// Wave speed on `Omega_2`.
    pub c2: f64,
    pub damping: DampingProfile,
}

/// Region membership of a point of `(0, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Inner (damped) segment.
    Inner,
    /// Outer (undamped) pieces.
    Outer,
    /// Interface point `a_if` or `b_if`.
    Interface,
}

impl TransmissionModel1D {
    /// Validate every invariant and return the model.
    pub fn new(
        length: f64,
        interface_left: f64,
        interface_right: f64,
        c1: f64,
        c2: f64,
        damping: DampingProfile,
    ) -> Result<Self, Error> {
        if !(length > 0.0) {
            return Err(Error::InvalidModel("length must be > 0".into()));
        }
        if !(0.0 < interface_left && interface_left < interface_right && interface_right < length) {
            return Err(Error::InvalidModel(format!(
                "interfaces must satisfy 0 < a_if < b_if < L, got a_if={interface_left}, b_if={interface_right}, L={length}"
            )));
        }
        if !(c1 > 0.0) || !(c2 > 0.0) {
            return Err(Error::InvalidModel(format!(
                "wave speeds must be > 0, got c1={c1}, c2={c2}"
            )));
        }
        if !damping.is_none() {
            if !(damping.a_max > 0.0) {
                return Err(Error::InvalidModel(
                    "damping amplitude must be > 0; request undamped runs with shape \"none\""
                        .into(),
                ));
            }
            if !(damping.half_width > 0.0) {
                return Err(Error::InvalidModel("damping half_width must be > 0".into()));
            }
            let lo = damping.center - damping.half_width;
            let hi = damping.center + damping.half_width;
            if lo <= interface_left || hi >= interface_right {
                return Err(Error::InvalidModel(format!(
                    "damping support [{lo}, {hi}] must lie strictly inside ({interface_left}, {interface_right}) with positive margin"
                )));
            }
        }
        Ok(TransmissionModel1D {
            length,
            interface_left,
            interface_right,
            c1,
            c2,
            damping,
        })
    }

    /// Which region a point belongs to (exact interface hits map to `Interface`).
    pub fn region(&self, x: f64) -> Region {
        if x == self.interface_left || x == self.interface_right {
            Region::Interface
        } else if x > self.interface_left && x < self.interface_right {
            Region::Inner
        } else {
            Region::Outer
        }
    }

    /// Wave speed at a point; interfaces carry the harmonic mean, matching the
    /// conservative interface coupling of the discrete operator.
    pub fn speed(&self, x: f64) -> f64 {
        match self.region(x) {
            Region::Inner => self.c1,
            Region::Outer => self.c2,
            Region::Interface => 2.0 * self.c1 * self.c2 / (self.c1 + self.c2),
        }
    }

    /// Damping coefficient `a(x)`; errors outside `[0, L]`.
    pub fn eval_damping(&self, x: f64) -> Result<f64, Error> {
        if !(0.0..=self.length).contains(&x) {
            return Err(Error::Precondition(format!(
                "damping evaluation at x={x} outside [0, {}]",
                self.length
            )));
        }
        Ok(self.damping.eval(x))
    }

    /// Margin between the damping support and the nearest interface point.
    pub fn damping_margin(&self) -> f64 {
        if self.damping.is_none() {
            return f64::INFINITY;
        }
        let lo = self.damping.center - self.damping.half_width;
        let hi = self.damping.center + self.damping.half_width;
        (lo - self.interface_left).min(self.interface_right - hi)
    }

    /// Same model with the damping removed.
    pub fn undamped(&self) -> Self {
        let mut m = self.clone();
        m.damping = DampingProfile::none();
        m
    }
}

/// 2-D disc of radius `outer_radius` with a circular hole removed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AnnularDomain2D {
    pub outer_radius: f64,
    pub hole_center: [f64; 2],
    pub hole_radius: f64,
}

impl AnnularDomain2D {
    pub fn new(outer_radius: f64, hole_center: [f64; 2], hole_radius: f64) -> Result<Self, Error> {
        if !(outer_radius > 0.0) || !(hole_radius > 0.0) {
            return Err(Error::InvalidModel("radii must be > 0".into()));
        }
        let c = (hole_center[0] * hole_center[0] + hole_center[1] * hole_center[1]).sqrt();
        if c + hole_radius >= outer_radius {
            return Err(Error::InvalidModel(format!(
                "hole must lie strictly inside the outer disc: |center| + r = {} >= R = {}",
                c + hole_radius,
                outer_radius
            )));
        }
        Ok(AnnularDomain2D {
            outer_radius,
            hole_center,
            hole_radius,
        })
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let r2 = p[0] * p[0] + p[1] * p[1];
        let dx = p[0] - self.hole_center[0];
        let dy = p[1] - self.hole_center[1];
        r2 < self.outer_radius * self.outer_radius
            && dx * dx + dy * dy > self.hole_radius * self.hole_radius
    }

    /// Distance to the nearest boundary circle (negative outside the domain).
    pub fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        let dx = p[0] - self.hole_center[0];
        let dy = p[1] - self.hole_center[1];
        let dh = (dx * dx + dy * dy).sqrt();
        (self.outer_radius - r).min(dh - self.hole_radius)
    }
}
