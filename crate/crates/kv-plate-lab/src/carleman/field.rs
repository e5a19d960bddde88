//! Scalar fields on the plane with closed-form first and second derivatives.
//!
//! Weight phases are built from these; no numerical differentiation enters
//! the bracket computations. The flow-composed field differentiates the
//! fixed-step RK4 flow map itself (variational integration with shared
//! stages), so its gradient and Hessian are the exact derivatives of the
//! discrete composition.

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm(a: Vec2) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn scale(a: Vec2, s: f64) -> Vec2 {
    [a[0] * s, a[1] * s]
}

pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn mat_vec(m: &Mat2, v: Vec2) -> Vec2 {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

pub fn quad_form(m: &Mat2, a: Vec2, b: Vec2) -> f64 {
    dot(a, mat_vec(m, b))
}

/// Scalar field with exact gradient and Hessian.
pub trait Field2: Send + Sync {
    fn eval(&self, p: Vec2) -> f64;
    fn grad(&self, p: Vec2) -> Vec2;
    fn hess(&self, p: Vec2) -> Mat2;
}

/// `|x|^2`.
pub struct RadialSquared;

impl Field2 for RadialSquared {
    fn eval(&self, p: Vec2) -> f64 {
        dot(p, p)
    }
    fn grad(&self, p: Vec2) -> Vec2 {
        scale(p, 2.0)
    }
    fn hess(&self, _p: Vec2) -> Mat2 {
        [[2.0, 0.0], [0.0, 2.0]]
    }
}

/// `|x|` (radial cone about the origin); smooth away from the origin.
pub struct Radial;

impl Field2 for Radial {
    fn eval(&self, p: Vec2) -> f64 {
        norm(p)
    }
    fn grad(&self, p: Vec2) -> Vec2 {
        let r = norm(p).max(1e-300);
        scale(p, 1.0 / r)
    }
    fn hess(&self, p: Vec2) -> Mat2 {
        let r = norm(p).max(1e-300);
        let e = scale(p, 1.0 / r);
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let id = if i == j { 1.0 } else { 0.0 };
                m[i][j] = (id - e[i] * e[j]) / r;
            }
        }
        m
    }
}

/// `k |x - c|`: distance cone about `c` (kept away from `c` by the callers).
pub struct DistCone {
    pub center: Vec2,
    pub k: f64,
}

impl Field2 for DistCone {
    fn eval(&self, p: Vec2) -> f64 {
        self.k * norm(sub(p, self.center))
    }
    fn grad(&self, p: Vec2) -> Vec2 {
        let d = sub(p, self.center);
        let r = norm(d).max(1e-300);
        scale(d, self.k / r)
    }
    fn hess(&self, p: Vec2) -> Mat2 {
        let d = sub(p, self.center);
        let r = norm(d).max(1e-300);
        let e = scale(d, 1.0 / r);
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let id = if i == j { 1.0 } else { 0.0 };
                m[i][j] = self.k * (id - e[i] * e[j]) / r;
            }
        }
        m
    }
}

/// Compactly supported bump `amp * eta(|x-c|^2 / R^2)` with
/// `eta(s) = exp(1 - 1/(1-s))` for `s < 1`, zero otherwise.
pub struct IsoBump {
    pub center: Vec2,
    pub radius: f64,
    pub amp: f64,
}

/// `eta`, `eta'`, `eta''` as functions of `s = (r/R)^2`.
fn eta(s: f64) -> (f64, f64, f64) {
    if s >= 1.0 || s < 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let t = 1.0 - s;
    let v = (1.0 - 1.0 / t).exp();
    let d1 = -v / (t * t);
    let d2 = v / (t * t * t * t) - 2.0 * v / (t * t * t);
    (v, d1, d2)
}

impl Field2 for IsoBump {
    fn eval(&self, p: Vec2) -> f64 {
        let d = sub(p, self.center);
        let s = dot(d, d) / (self.radius * self.radius);
        self.amp * eta(s).0
    }
    fn grad(&self, p: Vec2) -> Vec2 {
        let d = sub(p, self.center);
        let r2 = self.radius * self.radius;
        let s = dot(d, d) / r2;
        let (_, d1, _) = eta(s);
        scale(d, self.amp * d1 * 2.0 / r2)
    }
    fn hess(&self, p: Vec2) -> Mat2 {
        let d = sub(p, self.center);
        let r2 = self.radius * self.radius;
        let s = dot(d, d) / r2;
        let (_, d1, d2) = eta(s);
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let id = if i == j { 1.0 } else { 0.0 };
                m[i][j] = self.amp * (d2 * 4.0 * d[i] * d[j] / (r2 * r2) + d1 * 2.0 * id / r2);
            }
        }
        m
    }
}

/// Weighted sum of fields.
pub struct LinComb {
    pub terms: Vec<(f64, Box<dyn Field2>)>,
}

impl Field2 for LinComb {
    fn eval(&self, p: Vec2) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.eval(p)).sum()
    }
    fn grad(&self, p: Vec2) -> Vec2 {
        let mut g = [0.0; 2];
        for (c, f) in &self.terms {
            let fg = f.grad(p);
            g[0] += c * fg[0];
            g[1] += c * fg[1];
        }
        g
    }
    fn hess(&self, p: Vec2) -> Mat2 {
        let mut m = [[0.0; 2]; 2];
        for (c, f) in &self.terms {
            let fh = f.hess(p);
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] += c * fh[i][j];
                }
            }
        }
        m
    }
}

/// One ball-supported constant-direction component of the arc vector field.
#[derive(Debug, Clone, Copy)]
pub struct Tube {
    pub center: Vec2,
    /// Velocity carried on the tube core.
    pub vel: Vec2,
    pub radius: f64,
}

impl Tube {
    fn field(&self, p: Vec2) -> Vec2 {
        let d = sub(p, self.center);
        let r2 = self.radius * self.radius;
        let s = dot(d, d) / r2;
        scale(self.vel, eta(s).0)
    }

    /// `dX_i/dx_j`.
    fn jac(&self, p: Vec2) -> Mat2 {
        let d = sub(p, self.center);
        let r2 = self.radius * self.radius;
        let s = dot(d, d) / r2;
        let (_, d1, _) = eta(s);
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = self.vel[i] * d1 * 2.0 * d[j] / r2;
            }
        }
        m
    }

    /// `d2X_i/dx_j dx_k` contracted with vectors `a`, `b`.
    fn second(&self, p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
        let d = sub(p, self.center);
        let r2 = self.radius * self.radius;
        let s = dot(d, d) / r2;
        let (_, d1, d2) = eta(s);
        let da = dot(d, a);
        let db = dot(d, b);
        let ab = dot(a, b);
        let coeff = d2 * 4.0 * da * db / (r2 * r2) + d1 * 2.0 * ab / r2;
        scale(self.vel, coeff)
    }
}

/// Fixed-step RK4 time-1 flow of a sum of tubes, with the first and second
/// variational systems integrated on the same stages.
#[derive(Debug, Clone)]
pub struct TubeFlow {
    pub tubes: Vec<Tube>,
    pub steps: usize,
}

/// Flow state: position, Jacobian, and the three independent Hessian columns
/// `d2x/dx0_a dx0_b` for `(a,b) in {(0,0),(0,1),(1,1)}`.
#[derive(Debug, Clone, Copy)]
pub struct FlowJet {
    pub x: Vec2,
    pub j: Mat2,
    pub h: [Vec2; 3],
}

impl TubeFlow {
    pub fn is_empty(&self) -> bool {
        self.tubes.is_empty()
    }

    fn velocity(&self, p: Vec2) -> Vec2 {
        let mut v = [0.0; 2];
        for t in &self.tubes {
            let tv = t.field(p);
            v[0] += tv[0];
            v[1] += tv[1];
        }
        v
    }

    fn rhs(&self, s: &FlowJet) -> FlowJet {
        let mut dx = [0.0; 2];
        let mut dj = [[0.0; 2]; 2];
        let mut dh = [[0.0; 2]; 3];
        let cols = [[s.j[0][0], s.j[1][0]], [s.j[0][1], s.j[1][1]]];
        for t in &self.tubes {
            let tv = t.field(s.x);
            dx[0] += tv[0];
            dx[1] += tv[1];
            let tj = t.jac(s.x);
            for i in 0..2 {
                for j in 0..2 {
                    dj[i][j] += tj[i][0] * s.j[0][j] + tj[i][1] * s.j[1][j];
                }
            }
            // H'_{ab} = D2X[J e_a, J e_b] + DX H_{ab}
            let pairs = [(0usize, 0usize), (0, 1), (1, 1)];
            for (idx, &(a, b)) in pairs.iter().enumerate() {
                let sec = t.second(s.x, cols[a], cols[b]);
                let lin = mat_vec(&tj, s.h[idx]);
                dh[idx][0] += sec[0] + lin[0];
                dh[idx][1] += sec[1] + lin[1];
            }
        }
        FlowJet {
            x: dx,
            j: dj,
            h: [dh[0], dh[1], dh[2]],
        }
    }

    fn axpy(s: &FlowJet, k: &FlowJet, c: f64) -> FlowJet {
        let mut out = *s;
        out.x = add(out.x, scale(k.x, c));
        for i in 0..2 {
            for j in 0..2 {
                out.j[i][j] += c * k.j[i][j];
            }
        }
        for m in 0..3 {
            out.h[m] = add(out.h[m], scale(k.h[m], c));
        }
        out
    }

    /// Integrate the jet from `x0` over time `t_total` (use 1.0 or -1.0).
    pub fn jet(&self, x0: Vec2, t_total: f64) -> FlowJet {
        let mut s = FlowJet {
            x: x0,
            j: [[1.0, 0.0], [0.0, 1.0]],
            h: [[0.0; 2]; 3],
        };
        if self.tubes.is_empty() {
            return s;
        }
        let dt = t_total / self.steps as f64;
        for _ in 0..self.steps {
            let k1 = self.rhs(&s);
            let k2 = self.rhs(&Self::axpy(&s, &k1, dt / 2.0));
            let k3 = self.rhs(&Self::axpy(&s, &k2, dt / 2.0));
            let k4 = self.rhs(&Self::axpy(&s, &k3, dt));
            let mut acc = Self::axpy(&s, &k1, dt / 6.0);
            acc = Self::axpy(&acc, &k2, dt / 3.0);
            acc = Self::axpy(&acc, &k3, dt / 3.0);
            s = Self::axpy(&acc, &k4, dt / 6.0);
        }
        s
    }

    /// Time-1 image of `x0` (no variational data).
    pub fn map(&self, x0: Vec2) -> Vec2 {
        if self.tubes.is_empty() {
            return x0;
        }
        let dt = 1.0 / self.steps as f64;
        let mut x = x0;
        for _ in 0..self.steps {
            let k1 = self.velocity(x);
            let k2 = self.velocity(add(x, scale(k1, dt / 2.0)));
            let k3 = self.velocity(add(x, scale(k2, dt / 2.0)));
            let k4 = self.velocity(add(x, scale(k3, dt)));
            x = add(
                x,
                scale(
                    add(add(k1, scale(k2, 2.0)), add(scale(k3, 2.0), k4)),
                    dt / 6.0,
                ),
            );
        }
        x
    }
}

/// `psi_2 = psi_1 (flow(x))`: composition with the discrete time-1 flow map.
pub struct FlowComposed {
    pub base: std::sync::Arc<dyn Field2>,
    pub flow: TubeFlow,
}

impl Field2 for FlowComposed {
    fn eval(&self, p: Vec2) -> f64 {
        self.base.eval(self.flow.map(p))
    }
    fn grad(&self, p: Vec2) -> Vec2 {
        let jet = self.flow.jet(p, 1.0);
        let g = self.base.grad(jet.x);
        // J^T g
        [
            jet.j[0][0] * g[0] + jet.j[1][0] * g[1],
            jet.j[0][1] * g[0] + jet.j[1][1] * g[1],
        ]
    }
    fn hess(&self, p: Vec2) -> Mat2 {
        let jet = self.flow.jet(p, 1.0);
        let g = self.base.grad(jet.x);
        let hb = self.base.hess(jet.x);
        // J^T H J + sum_m g_m H^{(m)}
        let mut m = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let col_a = [jet.j[0][a], jet.j[1][a]];
                let col_b = [jet.j[0][b], jet.j[1][b]];
                m[a][b] = quad_form(&hb, col_a, col_b);
            }
        }
        let h00 = jet.h[0];
        let h01 = jet.h[1];
        let h11 = jet.h[2];
        m[0][0] += g[0] * h00[0] + g[1] * h00[1];
        m[0][1] += g[0] * h01[0] + g[1] * h01[1];
        m[1][0] += g[0] * h01[0] + g[1] * h01[1];
        m[1][1] += g[0] * h11[0] + g[1] * h11[1];
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad(f: &dyn Field2, p: Vec2) -> Vec2 {
        let d = 1e-6;
        let mut g = [0.0; 2];
        for i in 0..2 {
            let mut pp = p;
            let mut pm = p;
            pp[i] += d;
            pm[i] -= d;
            g[i] = (f.eval(pp) - f.eval(pm)) / (2.0 * d);
        }
        g
    }

    fn fd_hess(f: &dyn Field2, p: Vec2) -> Mat2 {
        let d = 1e-5;
        let mut m = [[0.0; 2]; 2];
        for j in 0..2 {
            let mut pp = p;
            let mut pm = p;
            pp[j] += d;
            pm[j] -= d;
            let gp = f.grad(pp);
            let gm = f.grad(pm);
            for i in 0..2 {
                m[i][j] = (gp[i] - gm[i]) / (2.0 * d);
            }
        }
        m
    }

    fn check_derivs(f: &dyn Field2, p: Vec2, tol: f64) {
        let g = f.grad(p);
        let gf = fd_grad(f, p);
        for i in 0..2 {
            assert!(
                (g[i] - gf[i]).abs() <= tol * (1.0 + gf[i].abs()),
                "grad[{i}] {} vs {}",
                g[i],
                gf[i]
            );
        }
        let h = f.hess(p);
        let hf = fd_hess(f, p);
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (h[i][j] - hf[i][j]).abs() <= tol * (1.0 + hf[i][j].abs()),
                    "hess[{i}][{j}] {} vs {}",
                    h[i][j],
                    hf[i][j]
                );
            }
        }
    }

    #[test]
    fn analytic_fields_match_finite_differences() {
        let pts = [[0.4, 0.1], [-0.3, 0.55], [0.05, -0.62]];
        for p in pts {
            check_derivs(&RadialSquared, p, 1e-7);
            check_derivs(&Radial, p, 1e-6);
            check_derivs(
                &DistCone {
                    center: [0.3, 0.0],
                    k: 1.0,
                },
                p,
                1e-6,
            );
            check_derivs(
                &IsoBump {
                    center: [-0.4, 0.0],
                    radius: 0.5,
                    amp: 0.7,
                },
                p,
                1e-5,
            );
        }
    }

    #[test]
    fn flow_composition_matches_finite_differences() {
        let flow = TubeFlow {
            tubes: vec![Tube {
                center: [-0.4, 0.05],
                vel: [0.12, 0.07],
                radius: 0.3,
            }],
            steps: 32,
        };
        let base: std::sync::Arc<dyn Field2> = std::sync::Arc::new(LinComb {
            terms: vec![
                (1.0, Box::new(RadialSquared)),
                (
                    0.8,
                    Box::new(IsoBump {
                        center: [-0.45, 0.0],
                        radius: 0.4,
                        amp: 1.0,
                    }),
                ),
            ],
        });
        let f = FlowComposed { base, flow };
        for p in [[-0.42, 0.02], [-0.3, 0.2], [-0.55, -0.1]] {
            check_derivs(&f, p, 1e-4);
        }
    }

    #[test]
    fn flow_is_identity_outside_tubes() {
        let flow = TubeFlow {
            tubes: vec![Tube {
                center: [0.0, 0.0],
                vel: [1.0, 0.0],
                radius: 0.2,
            }],
            steps: 16,
        };
        let p = [0.5, 0.5];
        let jet = flow.jet(p, 1.0);
        assert_eq!(jet.x, p);
        assert_eq!(jet.j, [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn flow_moves_core_along_velocity() {
        let flow = TubeFlow {
            tubes: vec![Tube {
                center: [0.0, 0.0],
                vel: [0.3, 0.0],
                radius: 0.5,
            }],
            steps: 64,
        };
        let y = flow.map([0.0, 0.0]);
        assert!(y[0] > 0.15 && y[0] <= 0.3 + 1e-12, "moved to {y:?}");
        assert!(y[1].abs() < 1e-12);
    }
}
