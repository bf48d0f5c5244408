//! Compensated (Neumaier) summation helpers.
//!
//! Eigen-residuals of order 1e-10 sit barely above the rounding floor of a
//! naive row sum when the stiffness entries are O(1/h^2). All residual and
//! quotient evaluations therefore go through these helpers so the reported
//! numbers measure the discretization, not the accumulation order.

/// Running Neumaier sum. Deterministic for a fixed input order.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated dot product of two slices of equal length.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = Accumulator::new();
    for (x, y) in a.iter().zip(b) {
        acc.add(x * y);
    }
    acc.value()
}

/// Compensated sum of a slice.
pub fn total(xs: &[f64]) -> f64 {
    let mut acc = Accumulator::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}
