//! Regularization weights and named parameter sets.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// How the bias vector added inside the L1 term is populated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasMode {
    #[default]
    Zero,
    /// Offsets the axial first-order block by the median strain of the seed.
    MeanStrain,
}

impl std::str::FromStr for BiasMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Self::Zero),
            "mean-strain" => Ok(Self::MeanStrain),
            other => Err(invalid(format!("unknown bias mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for BiasMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Zero => "zero",
            Self::MeanStrain => "mean-strain",
        })
    }
}

/// Continuity weights of the first- and second-order penalties.
///
/// `alpha*`/`theta*` weight the axial displacement component and
/// `beta*`/`lambda*` the lateral one; the trailing digit names the
/// differentiation direction (1 = axial, 2 = lateral).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegParams<T> {
    pub alpha1: T,
    pub alpha2: T,
    pub beta1: T,
    pub beta2: T,
    pub theta1: T,
    pub theta2: T,
    pub lambda1: T,
    pub lambda2: T,
    pub gamma: T,
    pub zeta: T,
    /// Factor tying second-order weights to first-order ones, kept for provenance.
    pub mf: T,
    pub iterations: usize,
    pub bias_mode: BiasMode,
}

/// Names accepted by [`RegParams::preset`].
pub const PRESET_NAMES: [&str; 6] = ["layer", "inclusion", "breast", "liver1", "liver2", "liver3"];

impl<T: Scalar> RegParams<T> {
    /// Second-order weights are `mf` times the matching first-order ones.
    #[allow(clippy::too_many_arguments)]
    pub fn with_multiplier(
        alpha1: T,
        alpha2: T,
        beta1: T,
        beta2: T,
        mf: T,
        gamma: T,
        zeta: T,
        iterations: usize,
    ) -> Result<Self> {
        let p = Self {
            alpha1,
            alpha2,
            beta1,
            beta2,
            theta1: mf * alpha1,
            theta2: mf * alpha2,
            lambda1: mf * beta1,
            lambda2: mf * beta2,
            gamma,
            zeta,
            mf,
            iterations,
            bias_mode: BiasMode::Zero,
        };
        p.validate()?;
        Ok(p)
    }

    /// Tuned sets for the layer, inclusion, breast and liver datasets.
    pub fn preset(name: &str) -> Result<Self> {
        let (a1, a2, b1, b2, mf, gamma, zeta) = match name {
            "layer" => (0.015, 0.0012, 0.015, 0.0012, 100.0, 0.0001, 3000.0),
            "inclusion" => (0.05, 0.00015, 0.025, 0.000075, 25.0, 0.0001, 8000.0),
            "breast" => (0.09, 0.0006, 0.045, 0.0003, 25.0, 0.00001, 3000.0),
            "liver1" => (0.03, 0.0005, 0.015, 0.00025, 45.0, 0.0, 20000.0),
            "liver2" => (0.00018, 0.0000006, 0.00018, 0.0000002, 100.0, 0.0, 2200000.0),
            "liver3" => (0.0075, 0.00005, 0.00375, 0.000025, 45.0, 0.0, 20000.0),
            other => {
                return Err(invalid(format!(
                    "unknown parameter preset `{other}` (expected one of {})",
                    PRESET_NAMES.join(", ")
                )))
            }
        };
        Self::with_multiplier(
            T::of(a1),
            T::of(a2),
            T::of(b1),
            T::of(b2),
            T::of(mf),
            T::of(gamma),
            T::of(zeta),
            10,
        )
    }

    /// Every weight zero; only `zeta` and `iterations` are meaningful.
    pub fn unregularized(zeta: T, iterations: usize) -> Self {
        let z = T::zero();
        Self {
            alpha1: z,
            alpha2: z,
            beta1: z,
            beta2: z,
            theta1: z,
            theta2: z,
            lambda1: z,
            lambda2: z,
            gamma: z,
            zeta,
            mf: z,
            iterations,
            bias_mode: BiasMode::Zero,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("theta1", self.theta1),
            ("theta2", self.theta2),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("gamma", self.gamma),
        ];
        for (name, w) in weights {
            if !w.is_finite() || w < T::zero() {
                return Err(invalid(format!("{name} must be finite and nonnegative, got {w}")));
            }
        }
        if !self.zeta.is_finite() || self.zeta <= T::zero() {
            return Err(invalid(format!("zeta must be positive, got {}", self.zeta)));
        }
        if !self.mf.is_finite() {
            return Err(invalid("mf must be finite"));
        }
        if self.iterations == 0 {
            return Err(invalid("iteration count must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_preset_expands_multiplier() {
        let p = RegParams::<f64>::preset("layer").unwrap();
        assert_eq!(p.alpha1, 0.015);
        assert_eq!(p.alpha2, 0.0012);
        assert_eq!(p.beta1, 0.015);
        assert_eq!(p.beta2, 0.0012);
        assert_eq!(p.theta1, 100.0 * 0.015);
        assert_eq!(p.lambda2, 100.0 * 0.0012);
        assert_eq!(p.gamma, 0.0001);
        assert_eq!(p.zeta, 3000.0);
        assert_eq!(p.iterations, 10);
    }

    #[test]
    fn every_preset_is_valid() {
        for name in PRESET_NAMES {
            RegParams::<f32>::preset(name).unwrap();
        }
        assert!(RegParams::<f64>::preset("kidney").is_err());
        assert_eq!(RegParams::<f64>::preset("liver1").unwrap().gamma, 0.0);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut p = RegParams::<f64>::preset("layer").unwrap();
        p.zeta = 0.0;
        assert!(p.validate().is_err());
        let mut p = RegParams::<f64>::preset("layer").unwrap();
        p.alpha2 = -1.0;
        assert!(p.validate().is_err());
        let mut p = RegParams::<f64>::preset("layer").unwrap();
        p.iterations = 0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn bias_mode_parses() {
        assert_eq!("zero".parse::<BiasMode>().unwrap(), BiasMode::Zero);
        assert_eq!("mean-strain".parse::<BiasMode>().unwrap(), BiasMode::MeanStrain);
        assert!("median".parse::<BiasMode>().is_err());
    }
}
