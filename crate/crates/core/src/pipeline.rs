//! Seed, refine and differentiate in one call.

use crate::admm::{self, ConvergenceTrace, SolverConfig};
use crate::error::Result;
use crate::field::{strain_from_displacement, DisplacementField, RfFrame, StrainImage};
use crate::scalar::Scalar;
use crate::seed::{dp_seed, SeedParams};

#[derive(Clone, Debug)]
pub struct EstimateOptions<T> {
    pub seed: SeedParams<T>,
    pub solver: SolverConfig<T>,
    pub kernel_length: usize,
}

#[derive(Clone, Debug)]
pub struct EstimateOutput<T> {
    pub seed: DisplacementField<T>,
    pub displacement: DisplacementField<T>,
    pub strain: StrainImage<T>,
    pub trace: ConvergenceTrace,
}

pub fn estimate<T: Scalar>(frame1: &RfFrame<T>, frame2: &RfFrame<T>, options: &EstimateOptions<T>) -> Result<EstimateOutput<T>> {
    let seed = dp_seed(frame1, frame2, &options.seed)?;
    let refined = admm::run(frame1, frame2, &seed, &options.solver)?;
    let strain = strain_from_displacement(&refined.displacement, options.kernel_length)?;
    Ok(EstimateOutput { seed, displacement: refined.displacement, strain, trace: refined.trace })
}
