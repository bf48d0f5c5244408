//! Uniform lattices over intervals and axis-aligned square boxes.
//!
//! The exterior Dirichlet condition `u = 0 on R^N \ Ω` is structural: a grid
//! only stores interior nodes, and any lattice point outside the interior
//! index set implicitly carries the value zero. No ghost nodes exist.

use std::io::Write;

use crate::error::{Error, Result};

/// Spatial dimension of a domain. Only intervals and square boxes are
/// supported; see [`DomainSpec`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Dim {
    One,
    Two,
}

impl Dim {
    pub fn as_usize(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }
}

/// Specification of the computational domain Ω: per-axis bounds and the
/// number of interior nodes per axis.
///
/// In 2D the spacing `(b_k - a_k) / (n + 1)` must be identical on both axes
/// (square cells), which restricts boxes to equal side lengths.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DomainSpec {
    pub dimension: Dim,
    /// Closed intervals `[a_k, b_k]`, one per axis (length units).
    pub bounds: Vec<[f64; 2]>,
    /// Interior nodes per axis.
    pub n: usize,
}

impl DomainSpec {
    pub fn interval(a: f64, b: f64, n: usize) -> Self {
        Self {
            dimension: Dim::One,
            bounds: vec![[a, b]],
            n,
        }
    }

    pub fn square(a: [f64; 2], b: [f64; 2], n: usize) -> Self {
        Self {
            dimension: Dim::Two,
            bounds: vec![[a[0], b[0]], [a[1], b[1]]],
            n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.len() != self.dimension.as_usize() {
            return Err(Error::InvalidDomain(format!(
                "expected {} axis bounds, got {}",
                self.dimension.as_usize(),
                self.bounds.len()
            )));
        }
        for (k, b) in self.bounds.iter().enumerate() {
            if !(b[1] > b[0]) || !b[0].is_finite() || !b[1].is_finite() {
                return Err(Error::InvalidDomain(format!(
                    "axis {k}: need finite bounds with b > a, got [{}, {}]",
                    b[0], b[1]
                )));
            }
        }
        if self.n < 3 {
            return Err(Error::InvalidDomain(format!(
                "need at least 3 interior nodes per axis, got {}",
                self.n
            )));
        }
        if self.dimension == Dim::Two {
            let lx = self.bounds[0][1] - self.bounds[0][0];
            let ly = self.bounds[1][1] - self.bounds[1][0];
            if (lx - ly).abs() > 1e-12 * lx.max(ly) {
                return Err(Error::InvalidDomain(format!(
                    "non-square cells: side lengths {lx} and {ly} differ; \
                     spacing must be identical across axes"
                )));
            }
        }
        Ok(())
    }

    /// Lattice spacing `h = (b - a) / (n + 1)`.
    pub fn spacing(&self) -> f64 {
        (self.bounds[0][1] - self.bounds[0][0]) / (self.n + 1) as f64
    }

    /// Diameter of Ω (length of the interval, diagonal of the box).
    pub fn diameter(&self) -> f64 {
        let mut d2 = 0.0;
        for b in &self.bounds {
            d2 += (b[1] - b[0]) * (b[1] - b[0]);
        }
        d2.sqrt()
    }
}

/// Immutable uniform lattice over Ω with the interior/exterior split made
/// explicit. Safe to share across threads after construction.
///
/// Node ordering is by flat index: in 1D node `i` sits at `a + (i+1) h`; in
/// 2D the flat index is `iy * n + ix` with `x` varying fastest and node
/// `(ix, iy)` at `(a_x + (ix+1) h, a_y + (iy+1) h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub spec: DomainSpec,
    /// Interior node coordinates, `[x, y]` with `y = 0` in 1D.
    nodes: Vec<[f64; 2]>,
    /// Exact distance from each interior node to ∂Ω.
    boundary_distance: Vec<f64>,
    pub h: f64,
}

/// Builds the lattice for a validated [`DomainSpec`]. Deterministic:
/// identical specs produce bit-identical grids.
pub fn build_grid(spec: &DomainSpec) -> Result<Grid> {
    spec.validate()?;
    let h = spec.spacing();
    let n = spec.n;
    let mut nodes = Vec::new();
    let mut boundary_distance = Vec::new();
    match spec.dimension {
        Dim::One => {
            let [a, b] = spec.bounds[0];
            for i in 0..n {
                let x = a + (i as f64 + 1.0) * h;
                nodes.push([x, 0.0]);
                boundary_distance.push((x - a).min(b - x));
            }
        }
        Dim::Two => {
            let [ax, bx] = spec.bounds[0];
            let [ay, by] = spec.bounds[1];
            for iy in 0..n {
                let y = ay + (iy as f64 + 1.0) * h;
                for ix in 0..n {
                    let x = ax + (ix as f64 + 1.0) * h;
                    nodes.push([x, y]);
                    let dx = (x - ax).min(bx - x);
                    let dy = (y - ay).min(by - y);
                    boundary_distance.push(dx.min(dy));
                }
            }
        }
    }
    Ok(Grid {
        spec: spec.clone(),
        nodes,
        boundary_distance,
        h,
    })
}

impl Grid {
    pub fn interior_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn dim(&self) -> Dim {
        self.spec.dimension
    }

    /// Interior nodes per axis.
    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn node(&self, index: usize) -> [f64; 2] {
        self.nodes[index]
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    /// Exact Euclidean distance from node `index` to ∂Ω (minimum over the
    /// faces for boxes).
    pub fn dist_to_boundary(&self, index: usize) -> Result<f64> {
        self.boundary_distance
            .get(index)
            .copied()
            .ok_or(Error::IndexOutOfRange {
                index,
                len: self.nodes.len(),
            })
    }

    pub fn boundary_distances(&self) -> &[f64] {
        &self.boundary_distance
    }

    /// Splits a flat index into per-axis lattice indices `(ix, iy)`;
    /// `iy = 0` in 1D.
    pub fn axis_indices(&self, index: usize) -> (i64, i64) {
        match self.spec.dimension {
            Dim::One => (index as i64, 0),
            Dim::Two => {
                let n = self.spec.n as i64;
                (index as i64 % n, index as i64 / n)
            }
        }
    }

    /// Flat index of the 1-based-free lattice point `(ix, iy)` if it is an
    /// interior node, `None` if the point lies outside Ω (where `u = 0`).
    pub fn flat_index(&self, ix: i64, iy: i64) -> Option<usize> {
        let n = self.spec.n as i64;
        match self.spec.dimension {
            Dim::One => (ix >= 0 && ix < n && iy == 0).then_some(ix as usize),
            Dim::Two => {
                (ix >= 0 && ix < n && iy >= 0 && iy < n).then_some((iy * n + ix) as usize)
            }
        }
    }

    /// Flat index of the node offset by `(kx, ky)` lattice steps from
    /// `index`, `None` if it falls outside the interior set.
    pub fn neighbor(&self, index: usize, kx: i64, ky: i64) -> Option<usize> {
        let (ix, iy) = self.axis_indices(index);
        self.flat_index(ix + kx, iy + ky)
    }

    /// Whether an arbitrary point lies strictly inside Ω.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        for (k, b) in self.spec.bounds.iter().enumerate() {
            if p[k] <= b[0] || p[k] >= b[1] {
                return false;
            }
        }
        true
    }

    /// Node table as CSV: `index,x[,y],boundary_distance`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        match self.spec.dimension {
            Dim::One => {
                writeln!(w, "index,x,boundary_distance")?;
                for (i, node) in self.nodes.iter().enumerate() {
                    writeln!(w, "{},{},{}", i, node[0], self.boundary_distance[i])?;
                }
            }
            Dim::Two => {
                writeln!(w, "index,x,y,boundary_distance")?;
                for (i, node) in self.nodes.iter().enumerate() {
                    writeln!(
                        w,
                        "{},{},{},{}",
                        i, node[0], node[1], self.boundary_distance[i]
                    )?;
                }
            }
        }
        Ok(())
    }
}
