//! ADMM refinement of a seed displacement field.
//!
//! Each cycle minimizes the augmented Lagrangian over the increment `Δd`
//! (a sparse linear solve), soft-thresholds the split variable `ν`, then
//! takes a scaled dual step on `u`:
//!
//! ```text
//! Δd ← argmin ½‖Ξ − D′Δd‖² + ζ/2‖D_RΔd + D_Rd + ℰ − ν + u‖²
//! ν  ← S_{1/ζ}(D_RΔd + D_Rd + ℰ + u)
//! u  ← u + D_RΔd + D_Rd + ℰ − ν
//! ```

pub mod linear;
mod trace;

use serde::{Deserialize, Serialize};

pub use self::linear::{conjugate_gradient, BandedLdl, CgSolution};
pub use self::trace::{ConvergenceTrace, IterationRecord};

use crate::error::{invalid, Error, Result};
use crate::field::{DisplacementField, RfFrame};
use crate::operators::OperatorSet;
use crate::params::RegParams;
use crate::scalar::{norm2, Scalar};
use crate::sparse::SparseMatrix;

/// Grids up to this many samples default to the direct solver.
pub const DIRECT_SOLVER_MAX_SAMPLES: usize = 65_536;

/// Upper bound on banded factor storage (entries) before `Auto` falls back to CG.
pub const DIRECT_SOLVER_MAX_STORAGE: usize = 1 << 26;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearSolverKind {
    /// Direct for small grids, conjugate gradient otherwise.
    #[default]
    Auto,
    Direct,
    ConjugateGradient,
}

impl std::str::FromStr for LinearSolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "direct" => Ok(Self::Direct),
            "cg" | "conjugate-gradient" => Ok(Self::ConjugateGradient),
            other => Err(invalid(format!("unknown linear solver `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMode {
    /// L1 total-variation regularization solved with ADMM.
    #[default]
    Altruist,
    /// Quadratic penalty on the same operator, one linear solve.
    L2Baseline,
}

impl std::str::FromStr for SolverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "altruist" => Ok(Self::Altruist),
            "l2-baseline" | "l2" => Ok(Self::L2Baseline),
            other => Err(invalid(format!("unknown solver mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for SolverMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Altruist => "altruist",
            Self::L2Baseline => "l2-baseline",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<T> {
    pub params: RegParams<T>,
    pub linear_solver: LinearSolverKind,
    pub cg_tolerance: T,
    /// `None` means `10 · 2mn`.
    pub cg_max_iters: Option<usize>,
    pub mode: SolverMode,
    /// Extra passes that re-linearize around the refined field. Zero keeps a
    /// single linearization at the seed.
    pub relinearizations: usize,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn new(params: RegParams<T>) -> Self {
        Self {
            params,
            linear_solver: LinearSolverKind::Auto,
            cg_tolerance: T::of(1e-8),
            cg_max_iters: None,
            mode: SolverMode::Altruist,
            relinearizations: 0,
        }
    }

    pub fn with_mode(mut self, mode: SolverMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_linear_solver(mut self, kind: LinearSolverKind) -> Self {
        self.linear_solver = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.cg_tolerance > T::zero() && self.cg_tolerance < T::one()) {
            return Err(invalid("cg tolerance must lie in (0, 1)"));
        }
        if self.cg_max_iters == Some(0) {
            return Err(invalid("cg iteration cap must be positive"));
        }
        Ok(())
    }
}

/// Primal, split and dual variables of one ADMM run.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmmState<T> {
    pub delta_d: Vec<T>,
    pub nu: Vec<T>,
    pub u: Vec<T>,
    pub iteration: usize,
}

impl<T: Scalar> AdmmState<T> {
    pub fn cold(unknowns: usize, reg_rows: usize) -> Self {
        Self {
            delta_d: vec![T::zero(); unknowns],
            nu: vec![T::zero(); reg_rows],
            u: vec![T::zero(); reg_rows],
            iteration: 0,
        }
    }
}

/// Soft threshold `sign(x) · max(|x| − t, 0)`, element-wise.
pub fn shrink<T: Scalar>(v: &[T], threshold: T) -> Vec<T> {
    v.iter().map(|&x| shrink_scalar(x, threshold)).collect()
}

#[inline]
pub fn shrink_scalar<T: Scalar>(x: T, t: T) -> T {
    let mag = x.abs() - t;
    if mag > T::zero() {
        mag.copysign(x)
    } else {
        T::zero()
    }
}

fn axpy_into<T: Scalar>(out: &mut [T], a: &[T]) {
    out.iter_mut().zip(a).for_each(|(o, &x)| *o += x);
}

fn l1<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc + x.abs())
}

/// Normal-equation system `(D′ᵀD′ + ζD_RᵀD_R) Δd = rhs`, prepared once per
/// linearization point.
#[derive(Clone, Debug)]
pub struct QuadraticSystem<T> {
    matrix: SparseMatrix<T>,
    diagonal: Vec<T>,
    factor: Option<BandedLdl<T>>,
    cg_tolerance: T,
    cg_max_iters: usize,
}

impl<T: Scalar> QuadraticSystem<T> {
    pub fn new(ops: &OperatorSet<T>, zeta: T, kind: LinearSolverKind, cg_tolerance: T, cg_max_iters: Option<usize>) -> Result<Self> {
        if !(zeta > T::zero()) {
            return Err(invalid("zeta must be positive"));
        }
        let stacked = SparseMatrix::vstack(&[&ops.d_prime, &ops.d_r.scaled(zeta.sqrt())])?;
        let matrix = stacked.transpose_mul(&stacked)?;
        let diagonal = (0..matrix.rows()).map(|i| matrix.get(i, i)).collect();
        let unknowns = matrix.rows();
        let direct = match kind {
            LinearSolverKind::Direct => true,
            LinearSolverKind::ConjugateGradient => false,
            LinearSolverKind::Auto => {
                let samples = ops.layout.rows * ops.layout.cols;
                samples <= DIRECT_SOLVER_MAX_SAMPLES
                    && BandedLdl::<T>::storage_len(unknowns, matrix.bandwidth()) <= DIRECT_SOLVER_MAX_STORAGE
            }
        };
        let factor = if direct { Some(BandedLdl::factor(&matrix)?) } else { None };
        Ok(Self {
            matrix,
            diagonal,
            factor,
            cg_tolerance,
            cg_max_iters: cg_max_iters.unwrap_or(10 * unknowns).max(1),
        })
    }

    pub fn matrix(&self) -> &SparseMatrix<T> {
        &self.matrix
    }

    pub fn is_direct(&self) -> bool {
        self.factor.is_some()
    }

    /// Solves for one right-hand side. `warm` seeds the iterative path.
    pub fn solve(&self, rhs: &[T], warm: Option<&[T]>) -> Result<Vec<T>> {
        let rhs_norm = norm2(rhs);
        if rhs_norm == T::zero() {
            return Ok(vec![T::zero(); rhs.len()]);
        }
        let Some(factor) = &self.factor else {
            let sol = conjugate_gradient(&self.matrix, rhs, warm, Some(&self.diagonal), self.cg_tolerance, self.cg_max_iters)?;
            return Ok(sol.x);
        };
        let mut x = factor.solve(rhs);
        if factor.is_singular() {
            let res = linear::residual_norm(&self.matrix, &x, rhs)?;
            if res > T::of(1e-6).max(self.cg_tolerance) * rhs_norm {
                return Err(Error::Singular(format!(
                    "{} zero pivots and right-hand side outside the range (residual {:.3e})",
                    factor.zero_pivots(),
                    res.to_f64_lossy()
                )));
            }
            // Consistent: plain CG from zero converges to the minimum-norm solution.
            let sol = conjugate_gradient(&self.matrix, rhs, None, None, self.cg_tolerance, self.cg_max_iters)?;
            return Ok(sol.x);
        }
        // One step of iterative refinement.
        let ax = self.matrix.mul_vec(&x)?;
        let r: Vec<T> = rhs.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
        axpy_into(&mut x, &factor.solve(&r));
        Ok(x)
    }

    pub fn residual(&self, x: &[T], rhs: &[T]) -> Result<T> {
        linear::residual_norm(&self.matrix, x, rhs)
    }
}

/// `D′ᵀΞ − ζ D_Rᵀ(D_R d + ℰ − ν + u)` where `offset = D_R d + ℰ`.
fn quadratic_rhs<T: Scalar>(ops: &OperatorSet<T>, offset: &[T], nu: &[T], u: &[T], zeta: T) -> Result<Vec<T>> {
    let target: Vec<T> = offset.iter().zip(nu).zip(u).map(|((&c, &n), &w)| c - n + w).collect();
    let reg = ops.d_r.tmul_vec(&target)?;
    let mut rhs = ops.d_prime.tmul_vec(&ops.xi)?;
    rhs.iter_mut().zip(&reg).for_each(|(r, &g)| *r -= zeta * g);
    Ok(rhs)
}

fn data_residual<T: Scalar>(ops: &OperatorSet<T>, delta_d: &[T]) -> Result<Vec<T>> {
    let pred = ops.d_prime.mul_vec(delta_d)?;
    Ok(ops.xi.iter().zip(&pred).map(|(&x, &p)| x - p).collect())
}

/// `½‖Ξ − D′Δd‖² + ζ/2‖D_RΔd + offset − ν + u‖²`.
pub fn subproblem_objective<T: Scalar>(
    ops: &OperatorSet<T>,
    offset: &[T],
    delta_d: &[T],
    nu: &[T],
    u: &[T],
    zeta: T,
) -> Result<T> {
    let half = T::of(0.5);
    let data = norm2(&data_residual(ops, delta_d)?);
    let reg = ops.d_r.mul_vec(delta_d)?;
    let pen: T = reg
        .iter()
        .zip(offset)
        .zip(nu)
        .zip(u)
        .map(|(((&r, &c), &n), &w)| {
            let e = r + c - n + w;
            e * e
        })
        .sum();
    Ok(half * data * data + half * zeta * pen)
}

/// `½‖Ξ − D′Δd‖² + ‖D_R(Δd + d) + ℰ‖₁`.
pub fn objective<T: Scalar>(ops: &OperatorSet<T>, offset: &[T], delta_d: &[T]) -> Result<T> {
    let data = norm2(&data_residual(ops, delta_d)?);
    let mut reg = ops.d_r.mul_vec(delta_d)?;
    axpy_into(&mut reg, offset);
    Ok(T::of(0.5) * data * data + l1(&reg))
}

/// Minimizer of the quadratic ADMM step for given `ν`, `u`.
pub fn solve_quadratic<T: Scalar>(
    ops: &OperatorSet<T>,
    d: &DisplacementField<T>,
    nu: &[T],
    u: &[T],
    zeta: T,
    config: &SolverConfig<T>,
) -> Result<Vec<T>> {
    check_lengths(ops, nu, u)?;
    let system = QuadraticSystem::new(ops, zeta, config.linear_solver, config.cg_tolerance, config.cg_max_iters)?;
    let offset = ops.regularizer_offset(d)?;
    let rhs = quadratic_rhs(ops, &offset, nu, u, zeta)?;
    system.solve(&rhs, None)
}

/// `ν = S_{1/ζ}(D_RΔd + D_R d + ℰ + u)`.
pub fn update_nu<T: Scalar>(
    ops: &OperatorSet<T>,
    d: &DisplacementField<T>,
    delta_d: &[T],
    u: &[T],
    zeta: T,
) -> Result<Vec<T>> {
    if !(zeta > T::zero()) {
        return Err(invalid("zeta must be positive"));
    }
    let mut arg = ops.d_r.mul_vec(delta_d)?;
    axpy_into(&mut arg, &ops.regularizer_offset(d)?);
    axpy_into(&mut arg, u);
    Ok(shrink(&arg, T::one() / zeta))
}

/// `u + D_RΔd + D_R d + ℰ − ν`.
pub fn update_dual<T: Scalar>(
    u: &[T],
    ops: &OperatorSet<T>,
    d: &DisplacementField<T>,
    delta_d: &[T],
    nu: &[T],
) -> Result<Vec<T>> {
    check_lengths(ops, nu, u)?;
    let mut out = ops.d_r.mul_vec(delta_d)?;
    axpy_into(&mut out, &ops.regularizer_offset(d)?);
    Ok(out.iter().zip(u).zip(nu).map(|((&r, &w), &n)| w + r - n).collect())
}

fn check_lengths<T>(ops: &OperatorSet<T>, nu: &[T], u: &[T]) -> Result<()> {
    let rows = ops.layout.total_rows();
    if nu.len() != rows || u.len() != rows {
        return Err(invalid(format!("nu/u must have {rows} entries, got {}/{}", nu.len(), u.len())));
    }
    Ok(())
}

/// Result of a full refinement.
#[derive(Clone, Debug)]
pub struct Estimate<T> {
    /// Seed plus the optimal increment.
    pub displacement: DisplacementField<T>,
    pub trace: ConvergenceTrace,
    pub state: AdmmState<T>,
}

/// Refines `seed` between two frames.
///
/// Builds the operators once at the seed, starts from `Δd = ν = u = 0` and
/// runs `params.iterations` cycles (or a single quadratic solve in
/// [`SolverMode::L2Baseline`]).
pub fn run<T: Scalar>(
    frame1: &RfFrame<T>,
    frame2: &RfFrame<T>,
    seed: &DisplacementField<T>,
    config: &SolverConfig<T>,
) -> Result<Estimate<T>> {
    config.validate()?;
    if frame1.dim() != frame2.dim() || frame1.dim() != seed.dim() {
        return Err(invalid("frames and seed must share dimensions"));
    }
    let mut current = seed.clone();
    let mut trace = ConvergenceTrace::default();
    let mut state = None;
    for _ in 0..=config.relinearizations {
        let ops = OperatorSet::assemble(frame1, frame2, &current, &config.params)?;
        let pass = match config.mode {
            SolverMode::Altruist => admm_pass(&ops, &current, config, &mut trace)?,
            SolverMode::L2Baseline => baseline_pass(&ops, &current, config, &mut trace)?,
        };
        current = current.add_increment(&pass.delta_d)?;
        state = Some(pass);
    }
    Ok(Estimate { displacement: current, trace, state: state.expect("at least one pass") })
}

fn admm_pass<T: Scalar>(
    ops: &OperatorSet<T>,
    d: &DisplacementField<T>,
    config: &SolverConfig<T>,
    trace: &mut ConvergenceTrace,
) -> Result<AdmmState<T>> {
    let zeta = config.params.zeta;
    let system = QuadraticSystem::new(ops, zeta, config.linear_solver, config.cg_tolerance, config.cg_max_iters)?;
    let offset = ops.regularizer_offset(d)?;
    let mut state = AdmmState::cold(ops.layout.unknowns(), ops.layout.total_rows());
    let threshold = T::one() / zeta;
    let first = trace.len();
    for k in 1..=config.params.iterations {
        let rhs = quadratic_rhs(ops, &offset, &state.nu, &state.u, zeta)?;
        let before = subproblem_objective(ops, &offset, &state.delta_d, &state.nu, &state.u, zeta)?;
        let delta_d = system.solve(&rhs, Some(&state.delta_d))?;
        let after = subproblem_objective(ops, &offset, &delta_d, &state.nu, &state.u, zeta)?;
        let linear_residual = system.residual(&delta_d, &rhs)?;

        let mut constraint = ops.d_r.mul_vec(&delta_d)?;
        axpy_into(&mut constraint, &offset);
        let arg: Vec<T> = constraint.iter().zip(&state.u).map(|(&c, &w)| c + w).collect();
        let nu = shrink(&arg, threshold);
        let primal: Vec<T> = constraint.iter().zip(&nu).map(|(&c, &n)| c - n).collect();
        axpy_into(&mut state.u, &primal);
        let dnu: Vec<T> = nu.iter().zip(&state.nu).map(|(&a, &b)| a - b).collect();
        let dual = zeta * norm2(&ops.d_r.tmul_vec(&dnu)?);
        let data = norm2(&data_residual(ops, &delta_d)?);

        trace.records.push(IterationRecord {
            iteration: first + k,
            objective: (T::of(0.5) * data * data + l1(&constraint)).to_f64_lossy(),
            primal_residual: norm2(&primal).to_f64_lossy(),
            dual_residual: dual.to_f64_lossy(),
            data_residual: data.to_f64_lossy(),
            subproblem_before: before.to_f64_lossy(),
            subproblem_after: after.to_f64_lossy(),
            linear_residual: linear_residual.to_f64_lossy(),
            rhs_norm: norm2(&rhs).to_f64_lossy(),
        });
        state.delta_d = delta_d;
        state.nu = nu;
        state.iteration = k;
        if !state.delta_d.iter().chain(&state.nu).chain(&state.u).all(|v| v.is_finite()) {
            return Err(Error::Singular(format!("non-finite ADMM state at iteration {k}")));
        }
    }
    Ok(state)
}

fn baseline_pass<T: Scalar>(
    ops: &OperatorSet<T>,
    d: &DisplacementField<T>,
    config: &SolverConfig<T>,
    trace: &mut ConvergenceTrace,
) -> Result<AdmmState<T>> {
    let zeta = config.params.zeta;
    let system = QuadraticSystem::new(ops, zeta, config.linear_solver, config.cg_tolerance, config.cg_max_iters)?;
    let offset = ops.regularizer_offset(d)?;
    let mut state = AdmmState::cold(ops.layout.unknowns(), ops.layout.total_rows());
    let rhs = quadratic_rhs(ops, &offset, &state.nu, &state.u, zeta)?;
    let before = subproblem_objective(ops, &offset, &state.delta_d, &state.nu, &state.u, zeta)?;
    let delta_d = system.solve(&rhs, None)?;
    let after = subproblem_objective(ops, &offset, &delta_d, &state.nu, &state.u, zeta)?;
    let mut constraint = ops.d_r.mul_vec(&delta_d)?;
    axpy_into(&mut constraint, &offset);
    let data = norm2(&data_residual(ops, &delta_d)?);
    trace.records.push(IterationRecord {
        iteration: trace.len() + 1,
        objective: (T::of(0.5) * data * data + l1(&constraint)).to_f64_lossy(),
        primal_residual: norm2(&constraint).to_f64_lossy(),
        dual_residual: 0.0,
        data_residual: data.to_f64_lossy(),
        subproblem_before: before.to_f64_lossy(),
        subproblem_after: after.to_f64_lossy(),
        linear_residual: system.residual(&delta_d, &rhs)?.to_f64_lossy(),
        rhs_norm: norm2(&rhs).to_f64_lossy(),
    });
    state.delta_d = delta_d;
    state.iteration = 1;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn shrink_examples() {
        assert_eq!(shrink(&[0.5, -0.1, 0.0], 0.25), vec![0.25, 0.0, 0.0]);
        assert_eq!(shrink(&[-3.0], 1.0), vec![-2.0]);
        assert!(shrink(&[0.3, -0.3, 0.1], 0.3).iter().all(|v| *v == 0.0));
        assert_eq!(shrink_scalar(0.4f32, 0.5), 0.0);
    }

    #[test]
    fn solver_kind_and_mode_parse() {
        assert_eq!("cg".parse::<LinearSolverKind>().unwrap(), LinearSolverKind::ConjugateGradient);
        assert_eq!("direct".parse::<LinearSolverKind>().unwrap(), LinearSolverKind::Direct);
        assert_eq!("l2-baseline".parse::<SolverMode>().unwrap(), SolverMode::L2Baseline);
        assert!("newton".parse::<SolverMode>().is_err());
    }

    #[test]
    fn config_validation() {
        let p = RegParams::<f64>::preset("layer").unwrap();
        let mut c = SolverConfig::new(p);
        assert!(c.validate().is_ok());
        c.cg_tolerance = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn cold_state_has_matching_lengths() {
        let s = AdmmState::<f64>::cold(32, 136);
        assert_eq!((s.delta_d.len(), s.nu.len(), s.u.len(), s.iteration), (32, 136, 136, 0));
        assert_abs_diff_eq!(s.u.iter().sum::<f64>(), 0.0);
    }
}
