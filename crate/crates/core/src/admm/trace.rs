use std::io::Write;

use serde::Serialize;

/// Diagnostics recorded after one ADMM cycle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `½‖Ξ − D′Δd‖² + ‖D_R(Δd + d) + ℰ‖₁`
    pub objective: f64,
    /// `‖D_R(Δd + d) + ℰ − ν‖₂`
    pub primal_residual: f64,
    /// `ζ‖D_Rᵀ(ν_k − ν_{k−1})‖₂`
    pub dual_residual: f64,
    /// `‖Ξ − D′Δd‖₂`
    pub data_residual: f64,
    /// Quadratic-step objective at the previous `Δd` (same `ν`, `u`).
    pub subproblem_before: f64,
    /// Quadratic-step objective at the new `Δd`.
    pub subproblem_after: f64,
    /// `‖AΔd − rhs‖₂` of the linear solve.
    pub linear_residual: f64,
    pub rhs_norm: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConvergenceTrace {
    pub records: Vec<IterationRecord>,
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn primal_residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.primal_residual).collect()
    }

    /// `iter,objective,primal_res,dual_res,data_res`, one line per iteration.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,objective,primal_res,dual_res,data_res")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e}",
                r.iteration, r.objective, r.primal_residual, r.dual_residual, r.data_residual
            )?;
        }
        Ok(())
    }
}
