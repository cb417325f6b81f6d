//! Sparse operators of the linearized cost: the data residual `xi`, the
//! gradient matrix `d_prime`, the stacked regularizer `d_r` and its bias.
//!
//! `d_r` stacks five blocks in a fixed order:
//!
//! | block            | rows     | stencil                                   |
//! |------------------|----------|-------------------------------------------|
//! | first-row prior  | `2n`     | `gamma * a(1, j)`                         |
//! | axial 1st order  | `2mn`    | `w * (x(i, j) - x(i-1, j))`               |
//! | lateral 1st order| `2mn`    | `w * (x(i, j) - x(i, j-1))`               |
//! | axial 2nd order  | `2mn`    | `w * (x(i-1, j) - 2 x(i, j) + x(i+1, j))` |
//! | lateral 2nd order| `2mn`    | `w * (x(i, j-1) - 2 x(i, j) + x(i, j+1))` |
//!
//! Rows where a stencil would leave the grid are kept as zero rows.

use crate::error::{invalid, Result};
use crate::field::{spatial_gradients, DisplacementField, RfFrame};
use crate::params::{BiasMode, RegParams};
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;

/// Row offsets of the five regularizer blocks inside `d_r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    pub rows: usize,
    pub cols: usize,
}

impl BlockLayout {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    /// Number of unknowns, `2mn`.
    pub fn unknowns(&self) -> usize {
        2 * self.rows * self.cols
    }

    /// Total regularizer rows, `8mn + 2n`.
    pub fn total_rows(&self) -> usize {
        8 * self.rows * self.cols + 2 * self.cols
    }

    /// Start offsets of the five blocks, in stacking order.
    pub fn offsets(&self) -> [usize; 5] {
        let head = 2 * self.cols;
        let block = self.unknowns();
        [0, head, head + block, head + 2 * block, head + 3 * block]
    }
}

fn check_grid(m: usize, n: usize, min_m: usize, min_n: usize, what: &str) -> Result<()> {
    if m < min_m || n < min_n {
        return Err(invalid(format!("{what} needs at least {min_m}x{min_n} samples, got {m}x{n}")));
    }
    Ok(())
}

fn check_weight<T: Scalar>(name: &str, w: T) -> Result<()> {
    if !w.is_finite() || w < T::zero() {
        return Err(invalid(format!("{name} must be finite and nonnegative")));
    }
    Ok(())
}

/// `g(i, j) = I1(i, j) - I2(i + a, j + l)`, zero where the warped point leaves the frame.
pub fn build_xi<T: Scalar>(frame1: &RfFrame<T>, frame2: &RfFrame<T>, d: &DisplacementField<T>) -> Result<Vec<T>> {
    if frame1.dim() != frame2.dim() || frame1.dim() != d.dim() {
        return Err(invalid("frames and displacement field must share dimensions"));
    }
    let (m, n) = frame1.dim();
    let mut xi = Vec::with_capacity(m * n);
    for r in 0..m {
        for c in 0..n {
            let y = T::of_usize(r + 1) + d.axial(r, c);
            let x = T::of_usize(c + 1) + d.lateral(r, c);
            let warped = frame2.interp_unchecked(y, x);
            xi.push(if warped.in_bounds { frame1.samples()[[r, c]] - warped.value } else { T::zero() });
        }
    }
    Ok(xi)
}

/// Linearized data operator: one row per sample holding the axial and
/// lateral derivatives of the post frame at the warped location.
pub fn build_d_prime<T: Scalar>(frame2: &RfFrame<T>, d: &DisplacementField<T>) -> Result<SparseMatrix<T>> {
    let g = spatial_gradients(frame2, d)?;
    let (m, n) = frame2.dim();
    let mut t = Vec::with_capacity(2 * m * n);
    for r in 0..m {
        for c in 0..n {
            if !g.valid[[r, c]] {
                continue;
            }
            let p = r * n + c;
            t.push((p, 2 * p, g.axial[[r, c]]));
            t.push((p, 2 * p + 1, g.lateral[[r, c]]));
        }
    }
    SparseMatrix::from_triplets(m * n, 2 * m * n, t)
}

/// Axial first-order differences, zero on the first grid row.
pub fn build_first_order_axial<T: Scalar>(m: usize, n: usize, alpha1: T, beta1: T) -> Result<SparseMatrix<T>> {
    check_grid(m, n, 2, 1, "axial first-order operator")?;
    check_weight("alpha1", alpha1)?;
    check_weight("beta1", beta1)?;
    let mut t = Vec::with_capacity(8 * m * n);
    for r in 1..m {
        for c in 0..n {
            let p = r * n + c;
            let q = p - n;
            for (k, w) in [(0, alpha1), (1, beta1)] {
                t.push((2 * p + k, 2 * p + k, w));
                t.push((2 * p + k, 2 * q + k, -w));
            }
        }
    }
    SparseMatrix::from_triplets(2 * m * n, 2 * m * n, t)
}

/// Lateral first-order differences, zero on the first sample of every row.
pub fn build_first_order_lateral<T: Scalar>(m: usize, n: usize, alpha2: T, beta2: T) -> Result<SparseMatrix<T>> {
    check_grid(m, n, 1, 2, "lateral first-order operator")?;
    check_weight("alpha2", alpha2)?;
    check_weight("beta2", beta2)?;
    let mut t = Vec::with_capacity(8 * m * n);
    for r in 0..m {
        for c in 1..n {
            let p = r * n + c;
            for (k, w) in [(0, alpha2), (1, beta2)] {
                t.push((2 * p + k, 2 * p + k, w));
                t.push((2 * p + k, 2 * (p - 1) + k, -w));
            }
        }
    }
    SparseMatrix::from_triplets(2 * m * n, 2 * m * n, t)
}

/// Axial second-order differences, zero on the first and last grid rows.
pub fn build_second_order_axial<T: Scalar>(m: usize, n: usize, theta1: T, lambda1: T) -> Result<SparseMatrix<T>> {
    check_grid(m, n, 3, 1, "axial second-order operator")?;
    check_weight("theta1", theta1)?;
    check_weight("lambda1", lambda1)?;
    let two = T::of(2.0);
    let mut t = Vec::with_capacity(12 * m * n);
    for r in 1..m - 1 {
        for c in 0..n {
            let p = r * n + c;
            for (k, w) in [(0, theta1), (1, lambda1)] {
                t.push((2 * p + k, 2 * (p - n) + k, w));
                t.push((2 * p + k, 2 * p + k, -two * w));
                t.push((2 * p + k, 2 * (p + n) + k, w));
            }
        }
    }
    SparseMatrix::from_triplets(2 * m * n, 2 * m * n, t)
}

/// Lateral second-order differences, zero on the first and last sample of every row.
pub fn build_second_order_lateral<T: Scalar>(m: usize, n: usize, theta2: T, lambda2: T) -> Result<SparseMatrix<T>> {
    check_grid(m, n, 1, 3, "lateral second-order operator")?;
    check_weight("theta2", theta2)?;
    check_weight("lambda2", lambda2)?;
    let two = T::of(2.0);
    let mut t = Vec::with_capacity(12 * m * n);
    for r in 0..m {
        for c in 1..n - 1 {
            let p = r * n + c;
            for (k, w) in [(0, theta2), (1, lambda2)] {
                t.push((2 * p + k, 2 * (p - 1) + k, w));
                t.push((2 * p + k, 2 * p + k, -two * w));
                t.push((2 * p + k, 2 * (p + 1) + k, w));
            }
        }
    }
    SparseMatrix::from_triplets(2 * m * n, 2 * m * n, t)
}

/// `2n x 2mn` prior anchoring the axial displacement of the first grid row.
pub fn build_first_row_prior<T: Scalar>(m: usize, n: usize, gamma: T) -> Result<SparseMatrix<T>> {
    check_grid(m, n, 1, 1, "first-row prior")?;
    check_weight("gamma", gamma)?;
    let t = (0..n).map(|c| (2 * c, 2 * c, gamma)).collect();
    SparseMatrix::from_triplets(2 * n, 2 * m * n, t)
}

/// Bias vector added to `d_r (d + delta_d)` inside the L1 term.
pub fn build_bias<T: Scalar>(
    m: usize,
    n: usize,
    mode: BiasMode,
    alpha1: T,
    seed: &DisplacementField<T>,
) -> Result<Vec<T>> {
    if seed.dim() != (m, n) {
        return Err(invalid("seed field does not match the grid"));
    }
    let layout = BlockLayout::new(m, n);
    let mut bias = vec![T::zero(); layout.total_rows()];
    match mode {
        BiasMode::Zero => {}
        BiasMode::MeanStrain => {
            let Some(strain) = median_axial_increment(seed) else {
                return Ok(bias);
            };
            let offset = layout.offsets()[1];
            let value = -alpha1 * strain;
            for p in n..m * n {
                bias[offset + 2 * p] = value;
            }
        }
    }
    Ok(bias)
}

/// Median of `a(i, j) - a(i-1, j)` over the whole grid.
pub fn median_axial_increment<T: Scalar>(field: &DisplacementField<T>) -> Option<T> {
    let (m, n) = field.dim();
    let mut inc: Vec<T> = (1..m)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .map(|(r, c)| field.axial(r, c) - field.axial(r - 1, c))
        .collect();
    if inc.is_empty() {
        return None;
    }
    inc.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let k = inc.len();
    Some(if k % 2 == 1 { inc[k / 2] } else { (inc[k / 2 - 1] + inc[k / 2]) / T::of(2.0) })
}

/// Stacks the five weighted difference blocks in their canonical order.
pub fn build_regularizer<T: Scalar>(m: usize, n: usize, params: &RegParams<T>) -> Result<SparseMatrix<T>> {
    let blocks = [
        build_first_row_prior(m, n, params.gamma)?,
        build_first_order_axial(m, n, params.alpha1, params.beta1)?,
        build_first_order_lateral(m, n, params.alpha2, params.beta2)?,
        build_second_order_axial(m, n, params.theta1, params.lambda1)?,
        build_second_order_lateral(m, n, params.theta2, params.lambda2)?,
    ];
    let refs: Vec<&SparseMatrix<T>> = blocks.iter().collect();
    SparseMatrix::vstack(&refs)
}

/// Everything the solver needs at one linearization point.
#[derive(Clone, Debug)]
pub struct OperatorSet<T> {
    pub layout: BlockLayout,
    pub d_prime: SparseMatrix<T>,
    pub xi: Vec<T>,
    pub d_r: SparseMatrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> OperatorSet<T> {
    /// Linearizes the post frame around `d` and builds the regularizer.
    ///
    /// Samples whose gradient stencil leaves the frame are dropped from the
    /// data term: their `d_prime` row and `xi` entry are both zero.
    pub fn assemble(
        frame1: &RfFrame<T>,
        frame2: &RfFrame<T>,
        d: &DisplacementField<T>,
        params: &RegParams<T>,
    ) -> Result<Self> {
        params.validate()?;
        let (m, n) = frame1.dim();
        let mut xi = build_xi(frame1, frame2, d)?;
        let d_prime = build_d_prime(frame2, d)?;
        for (p, g) in xi.iter_mut().enumerate() {
            if d_prime.row_nnz(p) == 0 {
                *g = T::zero();
            }
        }
        let d_r = build_regularizer(m, n, params)?;
        let bias = build_bias(m, n, params.bias_mode, params.alpha1, d)?;
        Ok(Self { layout: BlockLayout::new(m, n), d_prime, xi, d_r, bias })
    }

    /// `d_r · d + bias`, the constant part of the L1 argument.
    pub fn regularizer_offset(&self, d: &DisplacementField<T>) -> Result<Vec<T>> {
        let mut v = self.d_r.mul_vec(d.as_slice())?;
        v.iter_mut().zip(&self.bias).for_each(|(a, &b)| *a += b);
        Ok(v)
    }
}
