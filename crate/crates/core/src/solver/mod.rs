//! Vortex equation `*F + Phi(u) = 0` on compact regions, solved for the complex
//! gauge potential `xi` with `xi = 0` on the boundary.

mod exhaustion;
mod flatten;
mod flow;
mod kempf_ness;
mod newton;
mod oracle;
mod residual;

pub use exhaustion::{exhaustion_solve, grid_for, render, ExhaustionOutcome, RadiusComparison};
pub use flatten::{flatten_connection, FlattenOutcome};
pub use flow::{heat_flow, FlowOutcome, FlowSample};
pub use kempf_ness::{kempf_ness_project, KempfNess};
pub use newton::{
    measure_certificate, newton_solve, newton_solve_projected, symmetric_solve, symmetry_defect, Certificate, Projection,
    NewtonOutcome, NewtonReport,
};
pub use oracle::{bessel_k, radial_oracle, RadialProfile};
pub use residual::{linearized_apply, moment_matrix, residual, Problem};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub max_iters: usize,
    /// Stop when the discrete L2 norm of the residual drops below this.
    pub residual_tol: f64,
    /// Initial step length of the damped iteration.
    pub initial_step: f64,
    /// Step reduction factor in the backtracking search.
    pub backtrack: f64,
    /// Smallest admissible step before declaring divergence.
    pub min_step: f64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iters: 60,
            residual_tol: 1e-10,
            initial_step: 1.0,
            backtrack: 0.5,
            min_step: 1.0 / (1u64 << 20) as f64,
            cg_tol: 1e-10,
            cg_max_iters: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificateConfig {
    pub enabled: bool,
    pub delta: f64,
    pub power_iters: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for CertificateConfig {
    fn default() -> Self {
        Self { enabled: false, delta: 0.2, power_iters: 30, samples: 20, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub dt: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    pub t_max: f64,
    pub max_steps: usize,
    /// Grow `dt` after accepted steps.
    pub adaptive: bool,
    /// Reject steps that increase the squared residual.
    pub monotonicity_check: bool,
    pub residual_tol: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            dt_max: 1e4,
            dt_min: 1e-12,
            t_max: 1e6,
            max_steps: 10_000,
            adaptive: true,
            monotonicity_check: true,
            residual_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Resolution {
    /// The same node counts on every radius.
    Counts { nr: usize, ntheta: usize },
    /// Fixed radial spacing, so successive grids share their inner nodes.
    Spacing { h: f64, ntheta: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Newton,
    Flow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExhaustionConfig {
    pub radii: Vec<f64>,
    pub warm_start: bool,
    pub resolution: Resolution,
    pub method: Method,
    /// Radius of the comparison ball; half the first radius when absent.
    pub compare_radius: Option<f64>,
    pub convergence_tol: f64,
}

impl Default for ExhaustionConfig {
    fn default() -> Self {
        Self {
            radii: vec![8.0, 16.0],
            warm_start: true,
            resolution: Resolution::Counts { nr: 256, ntheta: 256 },
            method: Method::Newton,
            compare_radius: None,
            convergence_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymmetryConfig {
    pub n: u32,
    pub enabled: bool,
    /// Angles `psi` of the deck element `gamma = exp(i psi)` in the torus.
    pub gamma: Vec<f64>,
    pub tolerance: f64,
}

impl Default for SymmetryConfig {
    fn default() -> Self {
        Self { n: 1, enabled: false, gamma: Vec::new(), tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub newton: NewtonConfig,
    pub certificate: CertificateConfig,
    pub flow: FlowConfig,
    pub exhaustion: ExhaustionConfig,
    pub symmetry: SymmetryConfig,
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let n = &self.newton;
        let positive = [
            ("newton.residual_tol", n.residual_tol),
            ("newton.initial_step", n.initial_step),
            ("newton.min_step", n.min_step),
            ("newton.cg_tol", n.cg_tol),
            ("certificate.delta", self.certificate.delta),
            ("flow.dt", self.flow.dt),
            ("flow.dt_max", self.flow.dt_max),
            ("flow.dt_min", self.flow.dt_min),
            ("flow.t_max", self.flow.t_max),
            ("flow.residual_tol", self.flow.residual_tol),
            ("exhaustion.convergence_tol", self.exhaustion.convergence_tol),
            ("symmetry.tolerance", self.symmetry.tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidDatum(format!("{name} must be positive, got {v}")));
            }
        }
        if !(n.backtrack > 0.0 && n.backtrack < 1.0) {
            return Err(Error::InvalidDatum("newton.backtrack must lie in (0, 1)".into()));
        }
        let radii = &self.exhaustion.radii;
        if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidDatum("exhaustion.radii must be positive and strictly increasing".into()));
        }
        if self.symmetry.n == 0 {
            return Err(Error::InvalidDatum("symmetry.n must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: SolveConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let c = SolveConfig::from_json("{}").unwrap();
        assert_eq!(c.newton.residual_tol, 1e-10);
        assert_eq!(c.certificate.power_iters, 30);
        let c = SolveConfig::from_json(r#"{"exhaustion":{"radii":[8,16,32],"resolution":{"kind":"spacing","h":0.0625,"ntheta":64}}}"#).unwrap();
        assert_eq!(c.exhaustion.radii.len(), 3);
        assert!(SolveConfig::from_json(r#"{"exhaustion":{"radii":[16,8]}}"#).is_err());
        assert!(SolveConfig::from_json(r#"{"newton":{"residual_tol":-1}}"#).is_err());
        assert!(SolveConfig::from_json(r#"{"newton":{"bogus":1}}"#).is_err());
    }
}
