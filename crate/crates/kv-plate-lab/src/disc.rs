//! Grid and discrete operators for the transmission problem.
//!
//! The weighted mass matrix `M_c = diag(h / c)` carries the `1/c` weights of
//! the energy space; at the two interface nodes the cell-averaged weight
//! `h (1/c1 + 1/c2) / 2` appears, which is the harmonic-mean flux coupling in
//! disguise. With the plain stiffness matrix `K = (1/h) tridiag(-1, 2, -1)`
//! the transmission Laplacian is `G_h = M_c^{-1} K`, so `M_c G_h = K` is
//! symmetric by construction and `G_h` is self-adjoint and positive definite
//! in the `M_c` inner product. Its interface row is consistent with the
//! coupling conditions (continuity of `u`, `u'` and of `c u''`, `(c u'')'`).
//!
//! The fourth-order block is the composition `G_h^2`, the discrete
//! simply-supported (hinged) bilaplacian.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::model::TransmissionModel1D;

/// Hard floor on the cell count.
pub const MIN_CELLS: usize = 10;
/// Largest multiple of the requested cell count probed when snapping
/// interfaces onto grid nodes.
const ADJUST_FACTOR: usize = 16;

/// Uniform grid on `[0, L]` with both interfaces on nodes.
///
/// Unknowns live on the interior nodes `1..n_cells`; the two boundary values
/// are eliminated (Dirichlet).
#[derive(Debug, Clone)]
pub struct Grid1D {
    pub n_cells: usize,
    /// What the caller asked for before commensurability adjustment.
    pub requested_cells: usize,
    pub spacing: f64,
    pub length: f64,
    /// Full-grid node index of the left interface.
    pub node_left: usize,
    /// Full-grid node index of the right interface.
    pub node_right: usize,
}

/// Region of an interior unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRegion {
    Inner,
    OuterLeft,
    OuterRight,
    InterfaceLeft,
    InterfaceRight,
}

impl Grid1D {
    pub fn n_interior(&self) -> usize {
        self.n_cells - 1
    }

    /// Position of interior unknown `i` (zero-based; full node `i + 1`).
    pub fn x(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.spacing
    }

    /// Interior index of the left interface node.
    pub fn idx_left(&self) -> usize {
        self.node_left - 1
    }

    /// Interior index of the right interface node.
    pub fn idx_right(&self) -> usize {
        self.node_right - 1
    }

    pub fn region(&self, i: usize) -> NodeRegion {
        let node = i + 1;
        if node == self.node_left {
            NodeRegion::InterfaceLeft
        } else if node == self.node_right {
            NodeRegion::InterfaceRight
        } else if node < self.node_left {
            NodeRegion::OuterLeft
        } else if node > self.node_right {
            NodeRegion::OuterRight
        } else {
            NodeRegion::Inner
        }
    }
}

/// Build a grid whose nodes contain both interfaces, adjusting `n_cells`
/// upward to the first commensurate count when necessary.
pub fn build_grid(model: &TransmissionModel1D, n_cells: usize) -> Result<Grid1D, Error> {
    if n_cells < MIN_CELLS {
        return Err(Error::InvalidGrid(format!(
            "n_cells = {n_cells} is below the minimum {MIN_CELLS}"
        )));
    }
    for n in n_cells..=n_cells * ADJUST_FACTOR {
        let h = model.length / n as f64;
        let la = model.interface_left / h;
        let lb = model.interface_right / h;
        let snap = |t: f64| (t - t.round()).abs() < 1e-9 * n as f64;
        if snap(la) && snap(lb) {
            let node_left = la.round() as usize;
            let node_right = lb.round() as usize;
            if node_left == 0 || node_right >= n || node_left >= node_right {
                continue;
            }
            return Ok(Grid1D {
                n_cells: n,
                requested_cells: n_cells,
                spacing: h,
                length: model.length,
                node_left,
                node_right,
            });
        }
    }
    Err(Error::InvalidGrid(format!(
        "no commensurate cell count in [{n_cells}, {}] puts both interfaces on nodes",
        n_cells * ADJUST_FACTOR
    )))
}

/// The assembled second-order operator and its weighted mass matrix.
#[derive(Debug, Clone)]
pub struct TransmissionLaplacian {
    pub grid: Grid1D,
    /// Diagonal of `M_c` (length `n_interior`).
    pub mass: DVector<f64>,
    /// Dense `G_h = M_c^{-1} K`.
    pub g: DMatrix<f64>,
}

/// Apply the stiffness matrix `K = (1/h) tridiag(-1, 2, -1)` (Dirichlet rows
/// eliminated).
pub fn apply_k(h: f64, u: &DVector<f64>) -> DVector<f64> {
    let n = u.len();
    let mut out = DVector::zeros(n);
    for i in 0..n {
        let left = if i > 0 { u[i - 1] } else { 0.0 };
        let right = if i + 1 < n { u[i + 1] } else { 0.0 };
        out[i] = (2.0 * u[i] - left - right) / h;
    }
    out
}

/// Solve `K x = b` by the Thomas algorithm (constant-coefficient tridiagonal).
pub fn solve_k(h: f64, b: &DVector<f64>) -> DVector<f64> {
    let n = b.len();
    let a = -1.0 / h;
    let d = 2.0 / h;
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = a / d;
    dp[0] = b[0] / d;
    for i in 1..n {
        let m = d - a * cp[i - 1];
        cp[i] = a / m;
        dp[i] = (b[i] - a * dp[i - 1]) / m;
    }
    let mut x = DVector::zeros(n);
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Assemble `G_h` and `M_c` for the given model and grid.
pub fn assemble_g(model: &TransmissionModel1D, grid: &Grid1D) -> TransmissionLaplacian {
    let n = grid.n_interior();
    let h = grid.spacing;
    let mut mass = DVector::zeros(n);
    for i in 0..n {
        let inv_c = match grid.region(i) {
            NodeRegion::Inner => 1.0 / model.c1,
            NodeRegion::OuterLeft | NodeRegion::OuterRight => 1.0 / model.c2,
            NodeRegion::InterfaceLeft | NodeRegion::InterfaceRight => {
                0.5 * (1.0 / model.c1 + 1.0 / model.c2)
            }
        };
        mass[i] = h * inv_c;
    }
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        // row of M^{-1} K: (1 / (m_i h)) * (-1, 2, -1)
        let w = 1.0 / (mass[i] * h);
        g[(i, i)] = 2.0 * w;
        if i > 0 {
            g[(i, i - 1)] = -w;
        }
        if i + 1 < n {
            g[(i, i + 1)] = -w;
        }
    }
    TransmissionLaplacian {
        grid: grid.clone(),
        mass,
        g,
    }
}

impl TransmissionLaplacian {
    /// Max-norm defect of `M_c G_h` from symmetry (zero up to round-off).
    pub fn self_adjointness_defect(&self) -> f64 {
        let n = self.grid.n_interior();
        let mut defect: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mg = self.mass[i] * self.g[(i, j)];
                let gm = self.mass[j] * self.g[(j, i)];
                defect = defect.max((mg - gm).abs());
                scale = scale.max(mg.abs());
            }
        }
        if scale > 0.0 {
            defect / scale
        } else {
            defect
        }
    }

    /// The symmetrized operator `M^{1/2} G_h M^{-1/2} = M^{-1/2} K M^{-1/2}`.
    pub fn symmetrized(&self) -> DMatrix<f64> {
        let n = self.grid.n_interior();
        let mut s = DMatrix::zeros(n, n);
        let h = self.grid.spacing;
        for i in 0..n {
            let si = 1.0 / self.mass[i].sqrt();
            s[(i, i)] = si * (2.0 / h) * si;
            if i + 1 < n {
                let sj = 1.0 / self.mass[i + 1].sqrt();
                let v = si * (-1.0 / h) * sj;
                s[(i, i + 1)] = v;
                s[(i + 1, i)] = v;
            }
        }
        s
    }

    /// Smallest eigenvalue of `G_h` in the `M_c` inner product.
    pub fn lambda_min(&self) -> f64 {
        let se = self.symmetrized().symmetric_eigen();
        se.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Fourth-order (hinged) block: the composition `G_h * G_h`.
pub fn assemble_bilaplacian(lap: &TransmissionLaplacian) -> DMatrix<f64> {
    &lap.g * &lap.g
}

/// Write a matrix in `row col value` coordinate text form, skipping zeros.
pub fn export_coo<W: std::io::Write>(m: &DMatrix<f64>, out: &mut W) -> std::io::Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v != 0.0 {
                writeln!(out, "{} {} {:?}", i, j, v)?;
            }
        }
    }
    Ok(())
}

/// Closed-form eigenvalues of the uniform (c = 1) discrete Dirichlet
/// Laplacian: `(4/h^2) sin^2(k pi h / 2)`, `k = 1..n_cells-1`.
pub fn uniform_laplacian_eigenvalue(h: f64, length: f64, k: usize) -> f64 {
    let arg = k as f64 * std::f64::consts::PI * h / (2.0 * length);
    4.0 / (h * h) * arg.sin().powi(2)
}
