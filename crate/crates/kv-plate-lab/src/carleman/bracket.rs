//! Conjugated symbol of the semiclassical Laplacian and the sub-ellipticity
//! certificate.
//!
//! For the weight `phi = exp(lambda psi)` the conjugated principal symbol is
//! `p_phi(x, xi) = |xi|^2 - |grad phi|^2 + 2 i <xi, grad phi>` and the
//! Poisson bracket of its real and imaginary parts evaluates in closed form:
//!
//! `{Re p_phi, Im p_phi} = 4 e^{l psi} (l^2 <xi, grad psi>^2 + l xi' psi'' xi)
//!  + 4 e^{3 l psi} (l^4 |grad psi|^4 + l^3 grad psi' psi'' grad psi)`.
//!
//! On the characteristic set (`<xi, grad phi> = 0`, `|xi| = |grad phi|`) the
//! exponentials factor out and the sign is carried by the polynomial
//! `l^4 |g|^4 + l^3 (g' H g + |g|^2 t' H t)` with `t` the unit tangent, which
//! is what the doubling search monitors (no overflow at large `lambda psi`).

use num_complex::Complex64;
use serde::Serialize;

use crate::carleman::field::{dot, norm, quad_form, Field2, Vec2};
use crate::carleman::weights::{PhaseId, WeightPair};
use crate::error::Error;
use crate::model::AnnularDomain2D;

/// Evaluation context for the conjugated symbol `p(x, xi + i grad phi)`.
pub struct ConjugatedSymbol<'a> {
    pub field: &'a dyn Field2,
    pub lambda: f64,
}

impl<'a> ConjugatedSymbol<'a> {
    pub fn new(field: &'a dyn Field2, lambda: f64) -> Self {
        ConjugatedSymbol { field, lambda }
    }

    /// Gradient of `phi = exp(lambda psi)`.
    pub fn grad_phi(&self, x: Vec2) -> Vec2 {
        let psi = self.field.eval(x);
        let g = self.field.grad(x);
        let s = self.lambda * (self.lambda * psi).exp();
        [s * g[0], s * g[1]]
    }

    /// `p_phi(x, xi) = |xi|^2 - |grad phi|^2 + 2 i <xi, grad phi>`.
    pub fn symbol(&self, x: Vec2, xi: Vec2) -> Complex64 {
        let gp = self.grad_phi(x);
        Complex64::new(dot(xi, xi) - dot(gp, gp), 2.0 * dot(xi, gp))
    }

    /// The two characteristic covectors at `x`: `|xi| = |grad phi|`,
    /// orthogonal to `grad phi`.
    pub fn characteristic_xi(&self, x: Vec2) -> (Vec2, Vec2) {
        let gp = self.grad_phi(x);
        let t = [-gp[1], gp[0]];
        (t, [-t[0], -t[1]])
    }
}

/// Closed-form Poisson bracket `{Re p_phi, Im p_phi}(x, xi)` (valid at every
/// `(x, xi)`, not only on the characteristic set).
pub fn poisson_bracket(symbol: &ConjugatedSymbol, x: Vec2, xi: Vec2) -> f64 {
    let l = symbol.lambda;
    let psi = symbol.field.eval(x);
    let g = symbol.field.grad(x);
    let h = symbol.field.hess(x);
    let e1 = (l * psi).exp();
    let e3 = (3.0 * l * psi).exp();
    let xg = dot(xi, g);
    let g2 = dot(g, g);
    4.0 * e1 * (l * l * xg * xg + l * quad_form(&h, xi, xi))
        + 4.0 * e3 * (l.powi(4) * g2 * g2 + l.powi(3) * quad_form(&h, g, g))
}

/// Scale-free characteristic-set bracket: the bracket equals
/// `4 exp(3 lambda psi)` times this polynomial, so its sign decides
/// sub-ellipticity without evaluating the exponential.
pub fn bracket_polynomial(field: &dyn Field2, lambda: f64, x: Vec2) -> f64 {
    let g = field.grad(x);
    let h = field.hess(x);
    let g2 = dot(g, g);
    let t = [-g[1], g[0]];
    lambda.powi(4) * g2 * g2 + lambda.powi(3) * (quad_form(&h, g, g) + g2 * normalized_quad(&h, t))
}

fn normalized_quad(h: &crate::carleman::field::Mat2, t: Vec2) -> f64 {
    let n2 = dot(t, t);
    if n2 == 0.0 {
        return 0.0;
    }
    quad_form(h, t, t) / n2
}

/// Certificate data of the doubling search.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub phase: PhaseId,
    pub lambda_used: f64,
    /// Minimum of the actual bracket over the samples (exponent clamped when
    /// `3 lambda psi` overflows; the sign is exact).
    pub min_bracket: f64,
    /// Minimum of the scale-free polynomial; positive iff certified.
    pub min_polynomial: f64,
    /// Number of `(x, xi)` samples checked per lambda.
    pub samples: usize,
}

/// Largest exponent passed to `exp` when reporting bracket values.
const EXP_CLAMP: f64 = 700.0;

pub const LAMBDA_CAP: f64 = 1024.0;

/// Check the Hoermander sub-ellipticity condition for one phase over the
/// domain minus `eps`-balls around that phase's critical points, doubling
/// `lambda` until the bracket is positive on every sampled characteristic
/// point or the cap is reached.
pub fn certify_subellipticity(
    pair: &WeightPair,
    phase: PhaseId,
    grid_side: usize,
) -> Result<Certificate, Error> {
    certify_with_exclusion(pair, phase, pair.epsilon, grid_side)
}

/// As [`certify_subellipticity`], with an explicit exclusion radius (zero
/// deliberately includes the critical points and must fail).
pub fn certify_with_exclusion(
    pair: &WeightPair,
    phase: PhaseId,
    exclusion: f64,
    grid_side: usize,
) -> Result<Certificate, Error> {
    let field = pair.phase(phase);
    let criticals = pair.criticals(phase);
    let domain = &pair.domain;
    let samples = sample_region(domain, criticals, exclusion, grid_side);
    if samples.is_empty() {
        return Err(Error::CertificationFailed("empty sample region".into()));
    }

    // cache geometry per sample point
    struct Cached {
        psi: f64,
        g2: f64,
        a4: f64,
        a3: f64,
    }
    let mut cache = Vec::with_capacity(samples.len());
    let mut max_g2: f64 = 0.0;
    for &x in &samples {
        let g = field.grad(x);
        let h = field.hess(x);
        let g2 = dot(g, g);
        max_g2 = max_g2.max(g2);
        let t = [-g[1], g[0]];
        cache.push(Cached {
            psi: field.eval(x),
            g2,
            a4: g2 * g2,
            a3: quad_form(&h, g, g) + g2 * normalized_quad(&h, t),
        });
    }
    // degenerate characteristic set: |grad phi| ~ 0 somewhere in the region
    let tol = 1e-10 * max_g2.max(1.0);
    if let Some(c) = cache.iter().find(|c| c.g2 < tol) {
        return Err(Error::CertificationFailed(format!(
            "characteristic set degenerates: |grad psi|^2 = {:.3e} inside the region",
            c.g2
        )));
    }

    let psi_min = cache.iter().map(|c| c.psi).fold(f64::INFINITY, f64::min);
    let mut lambda: f64 = 1.0;
    loop {
        let mut min_poly = f64::INFINITY;
        let mut min_bracket = f64::INFINITY;
        for c in &cache {
            let poly = lambda.powi(4) * c.a4 + lambda.powi(3) * c.a3;
            min_poly = min_poly.min(poly);
            // bracket = 4 e^{3 lambda psi} * poly, reported on the shifted
            // phase to keep the exponent representable
            let ex = (3.0 * lambda * (c.psi - psi_min)).min(EXP_CLAMP);
            min_bracket = min_bracket.min(4.0 * ex.exp() * poly);
        }
        if min_poly > 0.0 {
            return Ok(Certificate {
                phase,
                lambda_used: lambda,
                min_bracket,
                min_polynomial: min_poly,
                samples: cache.len(),
            });
        }
        lambda *= 2.0;
        if lambda > LAMBDA_CAP {
            return Err(Error::CertificationFailed(format!(
                "lambda cap {LAMBDA_CAP} reached with min bracket polynomial {min_poly:.3e}"
            )));
        }
    }
}

/// Grid sample of the closed domain minus the exclusion balls.
fn sample_region(
    domain: &AnnularDomain2D,
    criticals: &[crate::carleman::weights::CriticalPoint],
    exclusion: f64,
    grid_side: usize,
) -> Vec<Vec2> {
    let r = domain.outer_radius;
    let step = 2.0 * r / grid_side as f64;
    let mut out = Vec::new();
    for i in 0..=grid_side {
        for j in 0..=grid_side {
            let p = [-r + i as f64 * step, -r + j as f64 * step];
            if domain.boundary_distance(p) < 0.0 {
                continue;
            }
            if criticals
                .iter()
                .any(|c| norm([p[0] - c.pos[0], p[1] - c.pos[1]]) < exclusion)
            {
                continue;
            }
            out.push(p);
        }
    }
    out
}

/// Centered-difference oracle for the bracket, differentiating the actual
/// `Re p_phi`, `Im p_phi` in `(x, xi)`; test infrastructure for the
/// closed-form bracket.
pub fn finite_difference_bracket(symbol: &ConjugatedSymbol, x: Vec2, xi: Vec2, delta: f64) -> f64 {
    let re = |x: Vec2, xi: Vec2| symbol.symbol(x, xi).re;
    let im = |x: Vec2, xi: Vec2| symbol.symbol(x, xi).im;
    let mut acc = 0.0;
    for k in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[k] += delta;
        xm[k] -= delta;
        let mut xip = xi;
        let mut xim = xi;
        xip[k] += delta;
        xim[k] -= delta;
        let d_re_dxi = (re(x, xip) - re(x, xim)) / (2.0 * delta);
        let d_im_dx = (im(xp, xi) - im(xm, xi)) / (2.0 * delta);
        let d_re_dx = (re(xp, xi) - re(xm, xi)) / (2.0 * delta);
        let d_im_dxi = (im(x, xip) - im(x, xim)) / (2.0 * delta);
        acc += d_re_dxi * d_im_dx - d_re_dx * d_im_dxi;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carleman::field::{LinComb, RadialSquared};
    use crate::carleman::weights::build_weight_pair;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Linear {
        a: Vec2,
    }
    impl Field2 for Linear {
        fn eval(&self, p: Vec2) -> f64 {
            dot(self.a, p)
        }
        fn grad(&self, _p: Vec2) -> Vec2 {
            self.a
        }
        fn hess(&self, _p: Vec2) -> crate::carleman::field::Mat2 {
            [[0.0; 2]; 2]
        }
    }

    #[test]
    fn linear_phase_bracket_value() {
        // psi linear, |grad psi| = 1, psi(x) = 0, lambda = 2, on-characteristic:
        // bracket = 4 lambda^4 = 64
        let f = Linear { a: [1.0, 0.0] };
        let sym = ConjugatedSymbol::new(&f, 2.0);
        let x = [0.0, 0.3]; // psi = 0 on the x2-axis
        let (xi, _) = sym.characteristic_xi(x);
        let b = poisson_bracket(&sym, x, xi);
        assert!((b - 64.0).abs() <= 1e-10 * 64.0, "bracket = {b}");
    }

    #[test]
    fn radial_squared_bracket_value() {
        // psi = |x|^2, lambda = 1, x = (1,0), xi = (0,1):
        // 4 e * 2 + 4 e^3 (16 + 8) = 8 e + 96 e^3
        let f = RadialSquared;
        let sym = ConjugatedSymbol::new(&f, 1.0);
        let b = poisson_bracket(&sym, [1.0, 0.0], [0.0, 1.0]);
        let e = std::f64::consts::E;
        let expect = 8.0 * e + 96.0 * e.powi(3);
        assert!(
            (b - expect).abs() <= 1e-12 * expect,
            "bracket = {b}, expect {expect}"
        );
    }

    #[test]
    fn bracket_grows_like_lambda_fourth() {
        let f = RadialSquared;
        let x = [0.7, 0.1];
        let mut prev = 0.0;
        let mut ratios = Vec::new();
        for (i, l) in [4.0, 8.0, 16.0].into_iter().enumerate() {
            let sym = ConjugatedSymbol::new(&f, l);
            let (xi, _) = sym.characteristic_xi(x);
            // normalize away the exponential weights to isolate the
            // polynomial growth
            let b = poisson_bracket(&sym, x, xi) / (3.0 * l * f.eval(x)).exp();
            if i > 0 {
                ratios.push(b / prev);
            }
            prev = b;
        }
        for r in ratios {
            assert!(
                (12.0..=20.0).contains(&r),
                "doubling lambda should scale the bracket ~16x, got {r}"
            );
        }
    }

    #[test]
    fn closed_form_matches_finite_differences() {
        let domain = AnnularDomain2D::new(1.0, [0.3, 0.0], 0.2).unwrap();
        let pair = build_weight_pair(&domain, 42).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut checked = 0;
        while checked < 20 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            if domain.boundary_distance(x) < 0.05 {
                continue;
            }
            let lambda = rng.gen_range(0.5..3.0);
            let field = if checked % 2 == 0 {
                pair.psi1.as_ref()
            } else {
                pair.psi2.as_ref()
            };
            let sym = ConjugatedSymbol::new(field, lambda);
            let xi = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let exact = poisson_bracket(&sym, x, xi);
            let fd = finite_difference_bracket(&sym, x, xi, 2e-5);
            let scale = exact.abs().max(fd.abs()).max(1e-8);
            assert!(
                (exact - fd).abs() <= 1e-6 * scale,
                "bracket mismatch at {x:?}, xi {xi:?}, lambda {lambda}: {exact} vs {fd}"
            );
            checked += 1;
        }
    }

    #[test]
    fn linear_phase_certifies_at_lambda_one() {
        let domain = AnnularDomain2D::new(1.0, [0.3, 0.0], 0.2).unwrap();
        let pair = WeightPair {
            domain,
            psi1: std::sync::Arc::new(LinComb {
                terms: vec![(1.0, Box::new(Linear { a: [1.0, 0.5] }))],
            }),
            psi2: std::sync::Arc::new(Linear { a: [1.0, 0.5] }),
            lambda: 1.0,
            epsilon: 0.05,
            crit1: Vec::new(),
            crit2: Vec::new(),
            trivial: true,
        };
        let cert = certify_subellipticity(&pair, PhaseId::Phase1, 60).unwrap();
        assert_eq!(cert.lambda_used, 1.0);
        assert!(cert.min_bracket > 0.0);
    }

    #[test]
    fn built_pair_certifies_under_the_cap() {
        let domain = AnnularDomain2D::new(1.0, [0.3, 0.0], 0.2).unwrap();
        let pair = build_weight_pair(&domain, 42).unwrap();
        for phase in [PhaseId::Phase1, PhaseId::Phase2] {
            let cert = certify_subellipticity(&pair, phase, 80).unwrap();
            assert!(cert.lambda_used <= LAMBDA_CAP);
            assert!(cert.min_bracket > 0.0);
            assert!(cert.min_polynomial > 0.0);
        }
    }

    #[test]
    fn region_with_critical_point_fails_certification() {
        let domain = AnnularDomain2D::new(1.0, [0.3, 0.0], 0.2).unwrap();
        let pair = build_weight_pair(&domain, 42).unwrap();
        assert!(!pair.crit1.is_empty());
        let res = certify_with_exclusion(&pair, PhaseId::Phase1, 0.0, 160);
        assert!(res.is_err(), "certification must fail over critical points");
    }
}
