//! Two-phase weight construction on the annular domain.
//!
//! The first phase is a Morse-type function with the required boundary signs
//! (inward-decreasing on the hole circle, outward-increasing on the outer
//! circle) and no interior maximum; a seeded pit bump forces a saddle/minimum
//! pair. The partner phase is the composition with the time-1 flow of a
//! vector field supported on small balls around the critical points, which
//! pushes each critical point to a strictly higher level of the first phase.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::Arc;

use crate::carleman::field::{
    add, dot, mat_vec, norm, scale, sub, DistCone, Field2, FlowComposed, IsoBump, LinComb,
    RadialSquared, Tube, TubeFlow, Vec2,
};
use crate::error::Error;
use crate::model::AnnularDomain2D;

/// Classification of a nondegenerate critical point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalKind {
    Minimum,
    Saddle,
    Maximum,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CriticalPoint {
    pub pos: Vec2,
    pub value: f64,
    pub kind: CriticalKind,
}

/// Two phases with their critical data and the exclusion radius.
pub struct WeightPair {
    pub domain: AnnularDomain2D,
    pub psi1: Arc<dyn Field2>,
    pub psi2: Arc<dyn Field2>,
    pub lambda: f64,
    pub epsilon: f64,
    pub crit1: Vec<CriticalPoint>,
    pub crit2: Vec<CriticalPoint>,
    /// True when `psi_1` has no critical points and `psi_2` is the same field.
    pub trivial: bool,
}

/// Which phase a region/certificate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseId {
    Phase1,
    Phase2,
}

impl WeightPair {
    pub fn phase(&self, id: PhaseId) -> &dyn Field2 {
        match id {
            PhaseId::Phase1 => self.psi1.as_ref(),
            PhaseId::Phase2 => self.psi2.as_ref(),
        }
    }

    pub fn criticals(&self, id: PhaseId) -> &[CriticalPoint] {
        match id {
            PhaseId::Phase1 => &self.crit1,
            PhaseId::Phase2 => &self.crit2,
        }
    }
}

/// Interior margin used when scanning for critical points; a critical point
/// closer than this to a boundary circle is treated as "on the boundary".
const BOUNDARY_MARGIN: f64 = 0.04;
const GRAD_TOL_FACTOR: f64 = 1e-10;

/// Locate the critical points of a field inside the domain by a dense grid
/// scan with damped-Newton refinement.
pub fn critical_points(
    field: &dyn Field2,
    domain: &AnnularDomain2D,
    scan: usize,
) -> Result<Vec<CriticalPoint>, Error> {
    let r = domain.outer_radius;
    let step = 2.0 * r / scan as f64;
    let mut grad_scale: f64 = 0.0;
    let mut seeds: Vec<Vec2> = Vec::new();
    let gn = |p: Vec2| -> f64 { norm(field.grad(p)) };
    let mut grid_vals: Vec<(Vec2, f64)> = Vec::new();
    for i in 0..=scan {
        for j in 0..=scan {
            let p = [-r + i as f64 * step, -r + j as f64 * step];
            if domain.boundary_distance(p) < BOUNDARY_MARGIN / 2.0 {
                continue;
            }
            let g = gn(p);
            grad_scale = grad_scale.max(g);
            grid_vals.push((p, g));
        }
    }
    let field_scale = grad_scale.max(1.0);
    // local minima of |grad| as refinement seeds
    for &(p, g) in &grid_vals {
        if g > 0.2 * field_scale {
            continue;
        }
        let mut is_min = true;
        for &(q, gq) in &grid_vals {
            if (q[0] - p[0]).abs() <= 1.5 * step && (q[1] - p[1]).abs() <= 1.5 * step && gq < g {
                is_min = false;
                break;
            }
        }
        if is_min {
            seeds.push(p);
        }
    }

    let mut found: Vec<CriticalPoint> = Vec::new();
    for seed in seeds {
        let mut x = seed;
        let mut ok = false;
        for _ in 0..60 {
            let g = field.grad(x);
            if norm(g) <= GRAD_TOL_FACTOR * field_scale {
                ok = true;
                break;
            }
            let h = field.hess(x);
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            let step_vec = if det.abs() > 1e-14 {
                let inv = [
                    [h[1][1] / det, -h[0][1] / det],
                    [-h[1][0] / det, h[0][0] / det],
                ];
                scale(mat_vec(&inv, g), -1.0)
            } else {
                scale(g, -0.5)
            };
            // damped step: halve until |grad| does not increase
            let g0 = norm(g);
            let mut t = 1.0;
            let mut moved = x;
            for _ in 0..20 {
                let cand = add(x, scale(step_vec, t));
                if norm(field.grad(cand)) < g0 {
                    moved = cand;
                    break;
                }
                t *= 0.5;
            }
            if moved == x {
                break;
            }
            x = moved;
        }
        if !ok && norm(field.grad(x)) > GRAD_TOL_FACTOR * field_scale {
            continue;
        }
        if found.iter().any(|c| norm(sub(c.pos, x)) < 1e-6) {
            continue;
        }
        if domain.boundary_distance(x) < BOUNDARY_MARGIN {
            return Err(Error::WeightConstruction(format!(
                "critical point at ({:.4}, {:.4}) lies on or near the boundary",
                x[0], x[1]
            )));
        }
        let h = field.hess(x);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let tr = h[0][0] + h[1][1];
        let kind = if det < 0.0 {
            CriticalKind::Saddle
        } else if tr > 0.0 {
            CriticalKind::Minimum
        } else {
            CriticalKind::Maximum
        };
        found.push(CriticalPoint {
            pos: x,
            value: field.eval(x),
            kind,
        });
    }
    Ok(found)
}

/// Ascending unit direction at a critical point: the positive-curvature
/// eigenvector of the Hessian (any direction works at a minimum).
fn ascent_direction(field: &dyn Field2, c: &CriticalPoint, fallback: Vec2) -> Vec2 {
    let h = field.hess(c.pos);
    // eigenvector of the larger eigenvalue of the symmetric 2x2 Hessian
    let half_tr = 0.5 * (h[0][0] + h[1][1]);
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let disc = (half_tr * half_tr - det).max(0.0).sqrt();
    let lam_max = half_tr + disc;
    let v = if h[0][1].abs() > 1e-12 {
        [h[0][1], lam_max - h[0][0]]
    } else if h[0][0] >= h[1][1] {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    let n = norm(v);
    if n > 1e-12 {
        scale(v, 1.0 / n)
    } else {
        fallback
    }
}

fn default_scan() -> usize {
    160
}

/// Build the two-phase pair on the annulus. The seed fixes the Morse
/// perturbation; construction retries with derived sub-seeds when the arcs
/// cannot be placed, and fails after the retry budget.
pub fn build_weight_pair(domain: &AnnularDomain2D, seed: u64) -> Result<WeightPair, Error> {
    build_weight_pair_with_options(domain, seed, false)
}

/// As [`build_weight_pair`]; `skip_hole_sign` relaxes the strict sign check
/// on the hole circle (legitimate when the functions fed to the estimate are
/// cut off away from that boundary piece).
pub fn build_weight_pair_with_options(
    domain: &AnnularDomain2D,
    seed: u64,
    skip_hole_sign: bool,
) -> Result<WeightPair, Error> {
    let mut last_err = None;
    for attempt in 0..16u64 {
        match try_build(
            domain,
            seed.wrapping_add(attempt * 0x9E37_79B9),
            skip_hole_sign,
        ) {
            Ok(pair) => return Ok(pair),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::WeightConstruction("no attempt ran".into())))
}

fn try_build(
    domain: &AnnularDomain2D,
    seed: u64,
    skip_hole_sign: bool,
) -> Result<WeightPair, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hole = domain.hole_center;
    let hole_norm = norm(hole);

    // cone slope forcing the inward sign on the hole circle
    let k_cone = 2.0 * (hole_norm - domain.hole_radius).max(0.0) + 0.6 + rng.gen_range(0.0..0.2);

    // pit on the far side of the hole from the widest part of the annulus
    let away = if hole_norm > 1e-12 {
        scale(hole, -1.0 / hole_norm)
    } else {
        [-1.0, 0.0]
    };
    let theta: f64 = rng.gen_range(-0.35..0.35);
    let dir = [
        away[0] * theta.cos() - away[1] * theta.sin(),
        away[0] * theta.sin() + away[1] * theta.cos(),
    ];
    let rho = rng.gen_range(0.45..0.55) * domain.outer_radius;
    let pit_center = scale(dir, rho);
    let pit_radius = rng.gen_range(0.30..0.36) * domain.outer_radius;
    let pit_amp = rng.gen_range(0.40..0.50);

    // global amplitude: scaling the phase up lowers the lambda needed for
    // sub-ellipticity (the pointwise requirement is ~ |psi''| / |grad psi|^2)
    let gamma = 2.0;
    let psi1: Arc<dyn Field2> = Arc::new(LinComb {
        terms: vec![
            (gamma, Box::new(RadialSquared)),
            (
                gamma,
                Box::new(DistCone {
                    center: hole,
                    k: k_cone,
                }),
            ),
            (
                -gamma,
                Box::new(IsoBump {
                    center: pit_center,
                    radius: pit_radius,
                    amp: pit_amp,
                }),
            ),
        ],
    });

    check_boundary_signs(psi1.as_ref(), domain, skip_hole_sign)?;

    let crit1 = critical_points(psi1.as_ref(), domain, default_scan())?;
    if crit1.iter().any(|c| c.kind == CriticalKind::Maximum) {
        return Err(Error::WeightConstruction(
            "phase has an interior maximum".into(),
        ));
    }

    if crit1.is_empty() {
        // vacuously valid pair: no critical points, identical fields
        return Ok(WeightPair {
            domain: *domain,
            psi1: psi1.clone(),
            psi2: psi1,
            lambda: 1.0,
            epsilon: 0.1 * domain.outer_radius,
            crit1: Vec::new(),
            crit2: Vec::new(),
            trivial: true,
        });
    }

    // ascent arcs: one constant-direction tube field covering every critical
    // point; the arcs are its integral curves through the critical points,
    // mutually disjoint by uniqueness of trajectories. The direction is the
    // saddle's ascending eigenvector (any direction ascends from a minimum),
    // so the flow pushes each critical point strictly uphill.
    let saddle = crit1
        .iter()
        .find(|c| c.kind == CriticalKind::Saddle)
        .or(crit1.first())
        .unwrap();
    let fb_angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let e = ascent_direction(psi1.as_ref(), saddle, [fb_angle.cos(), fb_angle.sin()]);

    let mut centroid = [0.0, 0.0];
    let mut spread: f64 = 0.0;
    for c in &crit1 {
        centroid = add(centroid, c.pos);
    }
    centroid = scale(centroid, 1.0 / crit1.len() as f64);
    for c in &crit1 {
        spread = spread.max(norm(sub(c.pos, centroid)));
    }
    let clearance = crit1
        .iter()
        .map(|c| domain.boundary_distance(c.pos))
        .fold(domain.boundary_distance(centroid), f64::min);
    // tube must cover the critical points and their unit-time images while
    // vanishing near the boundary
    let radius = (clearance - BOUNDARY_MARGIN).min(0.55 * domain.outer_radius);
    let len = (0.7 * (radius - spread)).max(0.0);
    if !(len > 0.03) {
        return Err(Error::WeightConstruction(format!(
            "no room for ascent arcs: spread {spread:.3}, clearance {clearance:.3}"
        )));
    }
    let flow = TubeFlow {
        tubes: vec![Tube {
            center: centroid,
            vel: scale(e, len),
            radius,
        }],
        steps: 64,
    };
    // the flow must push every critical point strictly uphill
    for c in &crit1 {
        let moved = flow.map(c.pos);
        let gain = psi1.eval(moved) - c.value;
        if !(gain > 1e-6) {
            return Err(Error::WeightConstruction(format!(
                "unit-time flow does not ascend from ({:.3}, {:.3}): gain {gain:.2e}",
                c.pos[0], c.pos[1]
            )));
        }
    }
    let psi2: Arc<dyn Field2> = Arc::new(FlowComposed {
        base: psi1.clone(),
        flow: flow.clone(),
    });

    // critical points of the composition are the flow preimages
    let mut crit2 = Vec::with_capacity(crit1.len());
    for c in &crit1 {
        let pre = flow_preimage(&flow, c.pos)?;
        let h = psi2.hess(pre);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let tr = h[0][0] + h[1][1];
        let kind = if det < 0.0 {
            CriticalKind::Saddle
        } else if tr > 0.0 {
            CriticalKind::Minimum
        } else {
            CriticalKind::Maximum
        };
        crit2.push(CriticalPoint {
            pos: pre,
            value: psi2.eval(pre),
            kind,
        });
    }

    // exclusion radius from pairwise and boundary distances
    let mut min_pair = f64::INFINITY;
    let all: Vec<Vec2> = crit1
        .iter()
        .map(|c| c.pos)
        .chain(crit2.iter().map(|c| c.pos))
        .collect();
    for i in 0..all.len() {
        for j in (i + 1)..all.len() {
            min_pair = min_pair.min(norm(sub(all[i], all[j])));
        }
    }
    let min_bdry = all
        .iter()
        .map(|p| domain.boundary_distance(*p))
        .fold(f64::INFINITY, f64::min);
    let epsilon = 0.9 * (min_pair / 4.0).min(min_bdry / 2.0);
    if !(epsilon > 0.01) {
        return Err(Error::WeightConstruction(format!(
            "exclusion radius too small: {epsilon}"
        )));
    }

    let pair = WeightPair {
        domain: *domain,
        psi1,
        psi2,
        lambda: 1.0,
        epsilon,
        crit1,
        crit2,
        trivial: false,
    };
    validate_pair(&pair)?;
    Ok(pair)
}

/// Newton solve of `flow(x) = target` using the variational Jacobian.
fn flow_preimage(flow: &TubeFlow, target: Vec2) -> Result<Vec2, Error> {
    let mut x = target;
    for _ in 0..100 {
        let jet = flow.jet(x, 1.0);
        let r = sub(jet.x, target);
        if norm(r) <= 1e-13 {
            return Ok(x);
        }
        let det = jet.j[0][0] * jet.j[1][1] - jet.j[0][1] * jet.j[1][0];
        if det.abs() < 1e-14 {
            break;
        }
        let inv = [
            [jet.j[1][1] / det, -jet.j[0][1] / det],
            [-jet.j[1][0] / det, jet.j[0][0] / det],
        ];
        x = sub(x, mat_vec(&inv, r));
    }
    Err(Error::WeightConstruction(
        "flow preimage Newton iteration stalled".into(),
    ))
}

/// Sampled boundary-sign check: the phase must decrease inward on the hole
/// circle and increase outward on the outer circle. The hole check can be
/// skipped for cut-off scenarios where nothing touches that boundary piece.
pub fn check_boundary_signs(
    field: &dyn Field2,
    domain: &AnnularDomain2D,
    skip_hole: bool,
) -> Result<(), Error> {
    let n = 256;
    for k in 0..n {
        let ang = k as f64 * std::f64::consts::TAU / n as f64;
        let e = [ang.cos(), ang.sin()];
        // outer circle: outward normal is +e
        let p = scale(e, domain.outer_radius);
        let dn = dot(field.grad(p), e);
        if dn <= 0.0 {
            return Err(Error::WeightConstruction(format!(
                "outer boundary sign violated at angle {ang:.3}: dn psi = {dn:.3e}"
            )));
        }
        if skip_hole {
            continue;
        }
        // hole circle: the domain's outward normal points into the hole (-e)
        let q = add(domain.hole_center, scale(e, domain.hole_radius));
        let dn = -dot(field.grad(q), e);
        if dn >= 0.0 {
            return Err(Error::WeightConstruction(format!(
                "hole boundary sign violated at angle {ang:.3}: dn psi = {dn:.3e}"
            )));
        }
    }
    Ok(())
}

/// Verify every pair invariant by evaluation at the located critical points.
pub fn validate_pair(pair: &WeightPair) -> Result<(), Error> {
    let margin = 1e-8;
    for c in &pair.crit1 {
        let g2 = norm(pair.psi2.grad(c.pos));
        let v2 = pair.psi2.eval(c.pos);
        if g2 <= margin {
            return Err(Error::WeightConstruction(format!(
                "partner phase has vanishing gradient at a phase-1 critical point ({:.4}, {:.4})",
                c.pos[0], c.pos[1]
            )));
        }
        if v2 <= c.value + margin {
            return Err(Error::WeightConstruction(format!(
                "partner phase not larger at a phase-1 critical point: {v2} vs {}",
                c.value
            )));
        }
    }
    for c in &pair.crit2 {
        let g1 = norm(pair.psi1.grad(c.pos));
        let v1 = pair.psi1.eval(c.pos);
        if g1 <= margin {
            return Err(Error::WeightConstruction(
                "phase 1 has vanishing gradient at a phase-2 critical point".into(),
            ));
        }
        if v1 <= c.value + margin {
            return Err(Error::WeightConstruction(format!(
                "phase 1 not larger at a phase-2 critical point: {v1} vs {}",
                c.value
            )));
        }
    }
    // disjoint 2-eps balls across phases, inside the closed domain
    for a in &pair.crit1 {
        for b in &pair.crit2 {
            if norm(sub(a.pos, b.pos)) <= 4.0 * pair.epsilon {
                return Err(Error::WeightConstruction(
                    "2-eps exclusion balls of the two phases intersect".into(),
                ));
            }
        }
    }
    for c in pair.crit1.iter().chain(pair.crit2.iter()) {
        if pair.domain.boundary_distance(c.pos) <= 2.0 * pair.epsilon {
            return Err(Error::WeightConstruction(
                "2-eps exclusion ball leaves the domain".into(),
            ));
        }
    }
    Ok(())
}

/// One-sided boundary normal derivative by second-order differences,
/// stepping inward from the boundary point along `-normal`.
pub fn one_sided_normal_derivative(field: &dyn Field2, p: Vec2, normal: Vec2, h: f64) -> f64 {
    let f0 = field.eval(p);
    let f1 = field.eval(sub(p, scale(normal, h)));
    let f2 = field.eval(sub(p, scale(normal, 2.0 * h)));
    (3.0 * f0 - 4.0 * f1 + f2) / (2.0 * h)
}
