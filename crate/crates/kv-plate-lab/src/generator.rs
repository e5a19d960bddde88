//! Block generator of the damped plate evolution and its energy geometry.
//!
//! On the interior unknowns the generator acts as
//! `A (u, v) = (v, -B u - D v)` with `B = G_h^2` (hinged fourth-order block)
//! and `D = M_c^{-1} L^T S_a L` the Kelvin-Voigt block, where `L` is the
//! plain second-difference operator and `S_a = diag(a_i h / c1)`. Reusing the
//! same difference stencils in `B` and `D` makes the dissipation identity
//!
//! `Re <A U, U>_E = -(1/c1) sum_i a_i h |(L v)_i|^2`
//!
//! an algebraic fact, not a discretization target; assembly verifies it on
//! random states and aborts on failure.
//!
//! The similarity `F = blockdiag(M^{-1/2} K, M^{1/2})` maps the energy inner
//! product to the Euclidean one and the generator to
//! `S = [[0, G~], [-G~, -D~]]` with symmetric `G~`, `D~`; time stepping and
//! spectral work happen in these coordinates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::disc::{apply_k, assemble_g, solve_k, Grid1D, TransmissionLaplacian};
use crate::error::Error;
use crate::model::TransmissionModel1D;

/// Discrete state `(u, v)` over the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub u: DVector<f64>,
    pub v: DVector<f64>,
}

impl StateVector {
    pub fn zero(n: usize) -> Self {
        StateVector {
            u: DVector::zeros(n),
            v: DVector::zeros(n),
        }
    }

    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        StateVector {
            u: DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
            v: DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteGenerator {
    pub model: TransmissionModel1D,
    pub lap: TransmissionLaplacian,
    /// Damping coefficient sampled at the interior nodes.
    pub damping: DVector<f64>,
    /// Fourth-order block `B = G_h^2`.
    pub bilap: DMatrix<f64>,
    /// Damping block `D`.
    pub damp_block: DMatrix<f64>,
    /// Symmetrized second-order operator `G~ = M^{-1/2} K M^{-1/2}`.
    pub g_sym: DMatrix<f64>,
    /// Symmetrized damping block `D~ = M^{-1/2} (K S_a K / h^2) M^{-1/2}`.
    pub d_sym: DMatrix<f64>,
}

impl DiscreteGenerator {
    pub fn n(&self) -> usize {
        self.lap.grid.n_interior()
    }

    pub fn grid(&self) -> &Grid1D {
        &self.lap.grid
    }

    pub fn is_damped(&self) -> bool {
        !self.model.damping.is_none()
    }

    fn check_layout(&self, state: &StateVector) -> Result<(), Error> {
        let n = self.n();
        if state.u.len() != n || state.v.len() != n {
            return Err(Error::Precondition(format!(
                "state layout mismatch: expected {n} interior nodes, got u: {}, v: {}",
                state.u.len(),
                state.v.len()
            )));
        }
        Ok(())
    }

    /// The energy `E(U) = (|G u|_M^2 + |v|_M^2) / 2`.
    pub fn energy(&self, state: &StateVector) -> Result<f64, Error> {
        self.check_layout(state)?;
        Ok(0.5 * self.energy_inner(state, state))
    }

    /// Energy inner product `<U, W>_E` (no 1/2 factor).
    pub fn energy_inner(&self, a: &StateVector, b: &StateVector) -> f64 {
        let gu = &self.lap.g * &a.u;
        let gw = &self.lap.g * &b.u;
        let mut acc = 0.0;
        for i in 0..self.n() {
            acc += self.lap.mass[i] * (gu[i] * gw[i] + a.v[i] * b.v[i]);
        }
        acc
    }

    /// Apply the generator: `A (u, v) = (v, -B u - D v)`.
    pub fn apply(&self, state: &StateVector) -> Result<StateVector, Error> {
        self.check_layout(state)?;
        let neg = -(&self.bilap * &state.u) - &self.damp_block * &state.v;
        Ok(StateVector {
            u: state.v.clone(),
            v: neg,
        })
    }

    /// Quadrature of the dissipation functional `(1/c1) |sqrt(a) L v|^2`.
    pub fn dissipation_rate(&self, v: &DVector<f64>) -> f64 {
        let h = self.lap.grid.spacing;
        let kv = apply_k(h, v);
        let mut acc = 0.0;
        for i in 0..self.n() {
            if self.damping[i] > 0.0 {
                let lv = -kv[i] / h;
                acc += self.damping[i] * h * lv * lv;
            }
        }
        acc / self.model.c1
    }

    /// Dense `2n x 2n` generator in energy coordinates:
    /// `S = [[0, G~], [-G~, -D~]]`.
    pub fn s_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut s = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let g = self.g_sym[(i, j)];
                if g != 0.0 {
                    s[(i, n + j)] = g;
                    s[(n + i, j)] = -g;
                }
                let d = self.d_sym[(i, j)];
                if d != 0.0 {
                    s[(n + i, n + j)] = -d;
                }
            }
        }
        s
    }

    /// Map `(u, v)` to energy coordinates `y = (M^{-1/2} K u, M^{1/2} v)`.
    pub fn to_energy_coords(&self, state: &StateVector) -> DVector<f64> {
        let n = self.n();
        let ku = apply_k(self.lap.grid.spacing, &state.u);
        let mut y = DVector::zeros(2 * n);
        for i in 0..n {
            y[i] = ku[i] / self.lap.mass[i].sqrt();
            y[n + i] = state.v[i] * self.lap.mass[i].sqrt();
        }
        y
    }

    /// Inverse of [`Self::to_energy_coords`].
    pub fn from_energy_coords(&self, y: &DVector<f64>) -> StateVector {
        let n = self.n();
        let mut rhs = DVector::zeros(n);
        let mut v = DVector::zeros(n);
        for i in 0..n {
            rhs[i] = y[i] * self.lap.mass[i].sqrt();
            v[i] = y[n + i] / self.lap.mass[i].sqrt();
        }
        let u = solve_k(self.lap.grid.spacing, &rhs);
        StateVector { u, v }
    }

    /// Original-coordinate dense block matrix `[[0, I], [-B, -D]]`.
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            a[(i, n + i)] = 1.0;
            for j in 0..n {
                a[(n + i, j)] = -self.bilap[(i, j)];
                let d = self.damp_block[(i, j)];
                if d != 0.0 {
                    a[(n + i, n + j)] = -d;
                }
            }
        }
        a
    }
}

/// Assemble the generator and verify the dissipation identity on ten random
/// states (and skew-adjointness when undamped); aborts on violation.
pub fn assemble_generator(
    model: &TransmissionModel1D,
    grid: &Grid1D,
) -> Result<DiscreteGenerator, Error> {
    let lap = assemble_g(model, grid);
    let n = grid.n_interior();
    let h = grid.spacing;

    let damping: DVector<f64> = DVector::from_fn(n, |i, _| model.damping.eval(grid.x(i)));
    if !model.damping.is_none() {
        // support must clear the interfaces by at least one cell so that the
        // damping stencil never touches an interface row
        let il = grid.idx_left();
        let ir = grid.idx_right();
        for i in 0..n {
            if damping[i] > 0.0 && (i <= il + 1 || i + 1 >= ir) {
                return Err(Error::InvalidGrid(
                    "damping support touches an interface row on this grid".into(),
                ));
            }
        }
    }

    let bilap = &lap.g * &lap.g;

    // D = M^{-1} K S_a K / h^2, S_a = diag(a h / c1)
    let mut ksk: DMatrix<f64> = DMatrix::zeros(n, n);
    for j in 0..n {
        if damping[j] == 0.0 {
            continue;
        }
        let w = damping[j] * h / model.c1;
        // K column structure: K e_j has entries (-1, 2, -1)/h at j-1, j, j+1
        let mut col = vec![(j, 2.0 / h)];
        if j > 0 {
            col.push((j - 1, -1.0 / h));
        }
        if j + 1 < n {
            col.push((j + 1, -1.0 / h));
        }
        for &(r, kr) in &col {
            for &(c, kc) in &col {
                ksk[(r, c)] += kr * w * kc / (h * h);
            }
        }
    }
    let mut damp_block = DMatrix::zeros(n, n);
    let mut d_sym = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = ksk[(i, j)];
            if v != 0.0 {
                damp_block[(i, j)] = v / lap.mass[i];
                d_sym[(i, j)] = v / (lap.mass[i].sqrt() * lap.mass[j].sqrt());
            }
        }
    }

    let g_sym = lap.symmetrized();

    let gen = DiscreteGenerator {
        model: model.clone(),
        lap,
        damping,
        bilap,
        damp_block,
        g_sym,
        d_sym,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0xD15C0);
    for _ in 0..10 {
        let state = StateVector::random(n, &mut rng);
        let au = gen.apply(&state)?;
        let re = gen.energy_inner(&au, &state);
        let norm2 = gen.energy_inner(&state, &state);
        let residual = (re + gen.dissipation_rate(&state.v)).abs();
        if residual > 1e-12 * norm2 {
            return Err(Error::InvariantViolation {
                context: "generator dissipation identity".into(),
                residual: residual / norm2,
            });
        }
        if model.damping.is_none() {
            let other = StateVector::random(n, &mut rng);
            let aw = gen.apply(&other)?;
            let skew = gen.energy_inner(&au, &other) + gen.energy_inner(&state, &aw);
            if skew.abs() > 1e-12 * norm2.sqrt() * gen.energy_inner(&other, &other).sqrt() {
                return Err(Error::InvariantViolation {
                    context: "generator skew-adjointness (undamped)".into(),
                    residual: skew.abs(),
                });
            }
        }
    }
    Ok(gen)
}

/// M-orthonormal eigenbasis of `G_h` sorted by eigenvalue; the columns are
/// the undamped mode shapes and the eigenvalues their squared frequencies'
/// square roots (`omega_k = lambda_k` for the plate block `B = G^2`).
pub fn undamped_modes(gen: &DiscreteGenerator) -> (Vec<f64>, DMatrix<f64>) {
    let se = gen.g_sym.clone().symmetric_eigen();
    let n = gen.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let mut vals = Vec::with_capacity(n);
    let mut vecs = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vals.push(se.eigenvalues[k]);
        for i in 0..n {
            // map back: phi = M^{-1/2} phi_sym is M-orthonormal
            vecs[(i, col)] = se.eigenvectors[(i, k)] / gen.lap.mass[i].sqrt();
        }
    }
    (vals, vecs)
}
