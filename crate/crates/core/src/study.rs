//! Grid-refinement ladders: principal eigenvalue per level and observed
//! convergence orders by Richardson comparison of consecutive levels.

use std::io::Write;
use std::sync::Arc;

use crate::eigen::principal_eig;
use crate::error::{Error, Result};
use crate::frac::FracParams;
use crate::grid::{build_grid, DomainSpec};
use crate::operator::{assemble, DriftField, DriftScheme};

#[derive(Clone, Debug, serde::Serialize)]
pub struct LadderRow {
    pub n: usize,
    pub h: f64,
    pub lambda1: f64,
    pub residual_inf: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct Ladder {
    pub rows: Vec<LadderRow>,
    /// Observed order between consecutive level triples.
    pub orders: Vec<f64>,
}

impl Ladder {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,h,lambda1,residual_inf,observed_order")?;
        for (i, r) in self.rows.iter().enumerate() {
            let order = if i >= 2 {
                format!("{}", self.orders[i - 2])
            } else {
                String::new()
            };
            writeln!(w, "{},{},{},{},{}", r.n, r.h, r.lambda1, r.residual_inf, order)?;
        }
        Ok(())
    }
}

/// Runs the eigensolve on a ladder of refinements of `base` (its `n` is
/// replaced by each level). Fails fast with the partial table attached to
/// the error message if any level diverges.
pub fn eigen_ladder(
    base: &DomainSpec,
    frac: Option<&FracParams>,
    q: &DriftField,
    lambda_homotopy: f64,
    scheme: DriftScheme,
    levels: &[usize],
    tol: f64,
    max_iter: usize,
) -> Result<Ladder> {
    if levels.len() < 3 {
        return Err(Error::InvalidParam(
            "need at least 3 grid levels for an observed order".into(),
        ));
    }
    let mut rows = Vec::with_capacity(levels.len());
    for &n in levels {
        let spec = DomainSpec { n, ..base.clone() };
        let grid = Arc::new(build_grid(&spec)?);
        let op = assemble(&grid, frac, q, lambda_homotopy, scheme)?;
        let e = principal_eig(&op, tol, max_iter).map_err(|err| {
            Error::InvalidParam(format!(
                "eigensolve failed at level n={n}: {err}; partial table {:?}",
                rows.iter().map(|r: &LadderRow| r.lambda1).collect::<Vec<_>>()
            ))
        })?;
        rows.push(LadderRow {
            n,
            h: grid.h,
            lambda1: e.lambda1,
            residual_inf: e.residual_inf,
            iterations: e.iterations,
        });
    }
    let orders = richardson_orders(&rows);
    Ok(Ladder { rows, orders })
}

/// Observed order per consecutive triple:
/// `p = ln(|λ_j - λ_{j+1}| / |λ_{j+1} - λ_{j+2}|) / ln(h_j / h_{j+1})`.
pub fn richardson_orders(rows: &[LadderRow]) -> Vec<f64> {
    let mut orders = Vec::new();
    for w in rows.windows(3) {
        let d1 = (w[0].lambda1 - w[1].lambda1).abs();
        let d2 = (w[1].lambda1 - w[2].lambda1).abs();
        let ratio = w[0].h / w[1].h;
        orders.push((d1 / d2).ln() / ratio.ln());
    }
    orders
}
