//! Assembly of the full discrete operator
//!
//! ```text
//!     A ≈ L_λ = -Δ + (-Δ)^s + λ q·∇ ,     λ ∈ [0, 1],
//! ```
//!
//! exposing both the dense matrix and matrix-free application. λ = 1 is the
//! full operator, λ = 0 the drift-free (self-adjoint) one; the homotopy
//! parameter lives on the operator so a continuation sweep re-scales only
//! the drift block.
//!
//! Matrices are dense at every size: the fractional block couples all node
//! pairs within the tail radius, which covers the whole domain, so a sparse
//! format would store the same entries with extra indices.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::frac::{apply_frac, build_weights, FracParams, WeightTable};
use crate::grid::{Dim, Grid};
use crate::sum;

/// Discretization of the first-order term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftScheme {
    /// Second-order central differences (default; accurate).
    Central,
    /// First-order one-sided differences, direction per sign of each drift
    /// component, so every off-diagonal drift entry is <= 0. This is the
    /// sign structure the discrete maximum principle needs.
    Upwind,
}

enum DriftKind {
    Zero,
    Constant([f64; 2]),
    Function(Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>),
    /// One vector per interior node, in grid order.
    Sampled(Vec<[f64; 2]>),
}

/// Bounded drift (advection) field q sampled at grid nodes.
pub struct DriftField {
    kind: DriftKind,
    /// Free-text record of the intended smoothness class of q. The discrete
    /// machinery accepts any bounded samples; this only documents intent.
    pub holder_note: String,
}

impl DriftField {
    pub fn zero() -> Self {
        Self {
            kind: DriftKind::Zero,
            holder_note: "identically zero".into(),
        }
    }

    /// Constant field; in 1D only the first component is used.
    pub fn constant(c: [f64; 2]) -> Self {
        Self {
            kind: DriftKind::Constant(c),
            holder_note: "constant (smooth)".into(),
        }
    }

    pub fn constant_1d(c: f64) -> Self {
        Self::constant([c, 0.0])
    }

    pub fn from_fn<F>(f: F, holder_note: &str) -> Self
    where
        F: Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static,
    {
        Self {
            kind: DriftKind::Function(Arc::new(f)),
            holder_note: holder_note.into(),
        }
    }

    /// Per-node samples aligned with the grid's flat index order.
    pub fn sampled(values: Vec<[f64; 2]>, holder_note: &str) -> Self {
        Self {
            kind: DriftKind::Sampled(values),
            holder_note: holder_note.into(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, DriftKind::Zero)
    }

    /// Drift vector at a node.
    pub fn eval(&self, node_index: usize, x: [f64; 2]) -> Result<[f64; 2]> {
        let q = match &self.kind {
            DriftKind::Zero => [0.0, 0.0],
            DriftKind::Constant(c) => *c,
            DriftKind::Function(f) => f(x),
            DriftKind::Sampled(v) => *v.get(node_index).ok_or(Error::IndexOutOfRange {
                index: node_index,
                len: v.len(),
            })?,
        };
        if !q[0].is_finite() || !q[1].is_finite() {
            return Err(Error::InvalidParam(format!(
                "drift not finite at node {node_index} ({x:?}): {q:?}"
            )));
        }
        Ok(q)
    }

    /// Drift vector at an arbitrary point, for callers not tied to a grid
    /// (path simulation). Sampled tables are grid-bound and rejected.
    pub fn eval_at(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        if matches!(self.kind, DriftKind::Sampled(_)) {
            return Err(Error::InvalidParam(
                "sampled drift tables are grid-bound and cannot be evaluated \
                 at arbitrary points"
                    .into(),
            ));
        }
        self.eval(0, x)
    }

    /// Sup norm of the sampled field over the grid (max over nodes and
    /// components).
    pub fn sup_norm(&self, grid: &Grid) -> Result<f64> {
        let mut sup: f64 = 0.0;
        for (i, &x) in grid.nodes().iter().enumerate() {
            let q = self.eval(i, x)?;
            sup = sup.max(q[0].abs()).max(q[1].abs());
        }
        Ok(sup)
    }
}

impl Clone for DriftField {
    fn clone(&self) -> Self {
        let kind = match &self.kind {
            DriftKind::Zero => DriftKind::Zero,
            DriftKind::Constant(c) => DriftKind::Constant(*c),
            DriftKind::Function(f) => DriftKind::Function(f.clone()),
            DriftKind::Sampled(v) => DriftKind::Sampled(v.clone()),
        };
        Self {
            kind,
            holder_note: self.holder_note.clone(),
        }
    }
}

impl std::fmt::Debug for DriftField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.kind {
            DriftKind::Zero => "zero".to_string(),
            DriftKind::Constant(c) => format!("constant {c:?}"),
            DriftKind::Function(_) => "function".to_string(),
            DriftKind::Sampled(v) => format!("sampled ({} nodes)", v.len()),
        };
        write!(f, "DriftField[{kind}; {}]", self.holder_note)
    }
}

/// Standard second-order central discretization of -Δ with zero exterior
/// extension: dimension-wise `-(u_{i-1} - 2 u_i + u_{i+1}) / h^2`.
pub fn apply_local(u: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    let n_int = grid.interior_count();
    if u.len() != n_int {
        return Err(Error::LengthMismatch {
            expected: n_int,
            got: u.len(),
        });
    }
    let h2 = grid.h * grid.h;
    let mut out = vec![0.0; n_int];
    let axes: &[(i64, i64)] = match grid.dim() {
        Dim::One => &[(1, 0)],
        Dim::Two => &[(1, 0), (0, 1)],
    };
    for i in 0..n_int {
        let mut acc = 0.0;
        for &(ax, ay) in axes {
            let up = grid.neighbor(i, ax, ay).map_or(0.0, |j| u[j]);
            let dn = grid.neighbor(i, -ax, -ay).map_or(0.0, |j| u[j]);
            acc += (2.0 * u[i] - up - dn) / h2;
        }
        out[i] = acc;
    }
    Ok(out)
}

/// First-order term `q·∇u` with the chosen scheme.
pub fn apply_drift(u: &[f64], grid: &Grid, q: &DriftField, scheme: DriftScheme) -> Result<Vec<f64>> {
    let n_int = grid.interior_count();
    if u.len() != n_int {
        return Err(Error::LengthMismatch {
            expected: n_int,
            got: u.len(),
        });
    }
    let h = grid.h;
    let mut out = vec![0.0; n_int];
    let axes: &[(i64, i64)] = match grid.dim() {
        Dim::One => &[(1, 0)],
        Dim::Two => &[(1, 0), (0, 1)],
    };
    for i in 0..n_int {
        let qv = q.eval(i, grid.node(i))?;
        let mut acc = 0.0;
        for (c, &(ax, ay)) in axes.iter().enumerate() {
            let qc = qv[c];
            if qc == 0.0 {
                continue;
            }
            let up = grid.neighbor(i, ax, ay).map_or(0.0, |j| u[j]);
            let dn = grid.neighbor(i, -ax, -ay).map_or(0.0, |j| u[j]);
            acc += match scheme {
                DriftScheme::Central => qc * (up - dn) / (2.0 * h),
                DriftScheme::Upwind => {
                    if qc > 0.0 {
                        qc * (u[i] - dn) / h
                    } else {
                        qc * (up - u[i]) / h
                    }
                }
            };
        }
        out[i] = acc;
    }
    Ok(out)
}

/// Matrix-free application of the assembled family member
/// `apply_local + apply_frac + λ apply_drift`.
pub fn apply_operator(
    u: &[f64],
    grid: &Grid,
    table: Option<&WeightTable>,
    q: &DriftField,
    lambda: f64,
    scheme: DriftScheme,
) -> Result<Vec<f64>> {
    let mut out = apply_local(u, grid)?;
    if let Some(table) = table {
        for (o, f) in out.iter_mut().zip(apply_frac(u, grid, table)?) {
            *o += f;
        }
    }
    if lambda != 0.0 && !q.is_zero() {
        for (o, d) in out.iter_mut().zip(apply_drift(u, grid, q, scheme)?) {
            *o += lambda * d;
        }
    }
    Ok(out)
}

/// Assembled operator for one homotopy parameter. Immutable and shareable
/// across threads; `with_lambda` derives siblings without re-integrating the
/// kernel.
pub struct DiscreteOperator {
    pub grid: Arc<Grid>,
    /// `s` of the fractional block, `None` when the block is disabled.
    pub s: Option<f64>,
    pub lambda_homotopy: f64,
    pub drift_scheme: DriftScheme,
    /// Sup norm of q over the grid.
    pub q_sup: f64,
    /// `base + λ drift`.
    matrix: DMatrix<f64>,
    /// Local + fractional blocks (λ-independent).
    base: DMatrix<f64>,
    /// Unscaled drift block.
    drift: DMatrix<f64>,
}

impl DiscreteOperator {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn drift_matrix(&self) -> &DMatrix<f64> {
        &self.drift
    }

    /// Sibling operator at another homotopy parameter; only the drift
    /// scaling changes.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidParam(format!(
                "homotopy parameter must lie in [0,1], got {lambda}"
            )));
        }
        Ok(Self {
            grid: self.grid.clone(),
            s: self.s,
            lambda_homotopy: lambda,
            drift_scheme: self.drift_scheme,
            q_sup: self.q_sup,
            matrix: &self.base + &self.drift * lambda,
            base: self.base.clone(),
            drift: self.drift.clone(),
        })
    }

    /// Discretization of the formal adjoint: the transposed matrix. Shares
    /// the spectrum of `self`; the eigenvectors generally differ.
    pub fn transposed(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            s: self.s,
            lambda_homotopy: self.lambda_homotopy,
            drift_scheme: self.drift_scheme,
            q_sup: self.q_sup,
            matrix: self.matrix.transpose(),
            base: self.base.transpose(),
            drift: self.drift.transpose(),
        }
    }

    /// Compensated matrix-vector product (rounding floor well below the
    /// 1e-10 residual targets).
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if u.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: u.len(),
            });
        }
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = sum::Accumulator::new();
            for (j, &uj) in u.iter().enumerate() {
                acc.add(self.matrix[(i, j)] * uj);
            }
            *o = acc.value();
        }
        Ok(out)
    }

    /// Cell-Péclet number `h q_sup / 2`; central differences lose the
    /// M-matrix sign structure when this reaches 1.
    pub fn cell_peclet(&self) -> f64 {
        self.grid.h * self.q_sup / 2.0
    }

    /// Largest entrywise asymmetry `|A - Aᵀ|`.
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)]).abs());
            }
        }
        worst
    }

    /// Hypothesis bookkeeping for reports: conditions under which the
    /// continuum existence theory behind the checks is not guaranteed.
    pub fn hypothesis_flags(&self) -> Vec<String> {
        let mut flags = Vec::new();
        if let Some(s) = self.s {
            if s > 0.5 {
                flags.push(format!(
                    "s outside (0,1/2]: s={s}; principal-eigenpair existence guarantees do not apply"
                ));
            }
        }
        if self.grid.dim() == Dim::Two {
            flags.push(
                "hypothesis-violating domain: box corners are not C^{2,alpha}".to_string(),
            );
        }
        flags
    }

    /// Wraps an arbitrary matrix as an operator (solver tests need exactly
    /// singular inputs that no legitimate assembly produces).
    #[cfg(test)]
    pub(crate) fn from_matrix_for_tests(grid: Arc<Grid>, matrix: DMatrix<f64>) -> Self {
        let n = matrix.nrows();
        Self {
            grid,
            s: None,
            lambda_homotopy: 0.0,
            drift_scheme: DriftScheme::Central,
            q_sup: 0.0,
            base: matrix.clone(),
            drift: DMatrix::zeros(n, n),
            matrix,
        }
    }

    /// Coordinate-format dump `row col value`, one entry per line, zeros
    /// skipped (debug aid behind the CLI flag).
    pub fn write_coordinate_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "row,col,value")?;
        for i in 0..self.n() {
            for j in 0..self.n() {
                let v = self.matrix[(i, j)];
                if v != 0.0 {
                    writeln!(w, "{i},{j},{v}")?;
                }
            }
        }
        Ok(())
    }
}

/// Assembles `L_λ` on `grid`. `frac = None` disables the fractional block
/// (local benchmarks); the weight table is built here once.
pub fn assemble(
    grid: &Arc<Grid>,
    frac: Option<&FracParams>,
    q: &DriftField,
    lambda: f64,
    scheme: DriftScheme,
) -> Result<DiscreteOperator> {
    let table = frac.map(|p| build_weights(grid, p)).transpose()?;
    assemble_with_table(grid, table.as_ref(), q, lambda, scheme)
}

/// As [`assemble`], reusing a prebuilt weight table.
pub fn assemble_with_table(
    grid: &Arc<Grid>,
    table: Option<&WeightTable>,
    q: &DriftField,
    lambda: f64,
    scheme: DriftScheme,
) -> Result<DiscreteOperator> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParam(format!(
            "homotopy parameter must lie in [0,1], got {lambda}"
        )));
    }
    if let Some(t) = table {
        if t.h != grid.h || t.dim() != grid.dim() {
            return Err(Error::InvalidParam(
                "weight table was built for a different grid".into(),
            ));
        }
    }
    let n_int = grid.interior_count();
    let h = grid.h;
    let h2 = h * h;
    let axes: &[(i64, i64)] = match grid.dim() {
        Dim::One => &[(1, 0)],
        Dim::Two => &[(1, 0), (0, 1)],
    };

    let mut base = DMatrix::<f64>::zeros(n_int, n_int);
    // local block
    for i in 0..n_int {
        base[(i, i)] = 2.0 * axes.len() as f64 / h2;
        for &(ax, ay) in axes {
            if let Some(j) = grid.neighbor(i, ax, ay) {
                base[(i, j)] -= 1.0 / h2;
            }
            if let Some(j) = grid.neighbor(i, -ax, -ay) {
                base[(i, j)] -= 1.0 / h2;
            }
        }
    }
    // fractional block
    if let Some(t) = table {
        let n = grid.n() as i64;
        for i in 0..n_int {
            let (ix, iy) = grid.axis_indices(i);
            base[(i, i)] += t.diagonal();
            for j in 0..n_int {
                if i == j {
                    continue;
                }
                let (jx, jy) = match grid.dim() {
                    Dim::One => (j as i64, 0),
                    Dim::Two => (j as i64 % n, j as i64 / n),
                };
                let w = t.weight(jx - ix, jy - iy);
                if w != 0.0 {
                    base[(i, j)] -= w;
                }
            }
        }
    }
    // drift block (unscaled)
    let mut drift = DMatrix::<f64>::zeros(n_int, n_int);
    let mut q_sup: f64 = 0.0;
    if !q.is_zero() {
        for i in 0..n_int {
            let qv = q.eval(i, grid.node(i))?;
            q_sup = q_sup.max(qv[0].abs()).max(qv[1].abs());
            for (c, &(ax, ay)) in axes.iter().enumerate() {
                let qc = qv[c];
                if qc == 0.0 {
                    continue;
                }
                match scheme {
                    DriftScheme::Central => {
                        if let Some(j) = grid.neighbor(i, ax, ay) {
                            drift[(i, j)] += qc / (2.0 * h);
                        }
                        if let Some(j) = grid.neighbor(i, -ax, -ay) {
                            drift[(i, j)] -= qc / (2.0 * h);
                        }
                    }
                    DriftScheme::Upwind => {
                        if qc > 0.0 {
                            drift[(i, i)] += qc / h;
                            if let Some(j) = grid.neighbor(i, -ax, -ay) {
                                drift[(i, j)] -= qc / h;
                            }
                        } else {
                            drift[(i, i)] -= qc / h;
                            if let Some(j) = grid.neighbor(i, ax, ay) {
                                drift[(i, j)] += qc / h;
                            }
                        }
                    }
                }
            }
        }
    }

    let matrix = &base + &drift * lambda;
    Ok(DiscreteOperator {
        grid: grid.clone(),
        s: table.map(|t| t.s),
        lambda_homotopy: lambda,
        drift_scheme: scheme,
        q_sup,
        matrix,
        base,
        drift,
    })
}
