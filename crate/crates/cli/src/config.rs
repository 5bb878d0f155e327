//! Experiment configuration: JSON round-trippable, with every run embedding
//! the fully resolved copy in its report.

use fracgap::cantor::{FractalConfig, Regime};
use fracgap::integrate::QuadPolicy;
use fracgap::minimize::SolverPolicy;
use fracgap::orlicz::{self, OrliczModel};
use fracgap::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Power {
        p: f64,
    },
    VarExp {
        p_minus: f64,
        p_plus: f64,
        #[serde(default)]
        continuous: bool,
        #[serde(default = "default_kappa")]
        kappa: f64,
    },
    DoublePhase {
        p: f64,
        q: f64,
        alpha: f64,
    },
    Weighted {
        p: f64,
        alpha: f64,
        beta: f64,
        /// Mixing amplitude; when absent it is constructed from the measured
        /// modular constants.
        #[serde(default)]
        eps: Option<f64>,
    },
}

fn default_kappa() -> f64 {
    0.5
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::VarExp { p_minus: 1.9, p_plus: 2.1, continuous: false, kappa: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadConfig {
    pub min_depth: u32,
    pub max_depth: u32,
    pub tol: f64,
    pub edge_tol: f64,
    pub delta: f64,
    pub budget: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        let p = QuadPolicy::default();
        Self {
            min_depth: p.min_depth,
            max_depth: p.max_depth,
            tol: p.tol,
            edge_tol: p.edge_tol,
            delta: p.delta,
            budget: p.budget,
        }
    }
}

impl QuadConfig {
    pub fn policy(&self) -> QuadPolicy {
        QuadPolicy {
            min_depth: self.min_depth,
            max_depth: self.max_depth,
            tol: self.tol,
            edge_tol: self.edge_tol,
            delta: self.delta,
            budget: self.budget,
            abs_tol: 1e-12,
            tail: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub n: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { n: 65, max_iters: 20_000, rel_tol: 1e-10 }
    }
}

impl SolverConfig {
    pub fn policy(&self) -> SolverPolicy {
        SolverPolicy { max_iters: self.max_iters, rel_tol: self.rel_tol, stall_window: 10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub seed: u64,
    pub regime: Option<Regime>,
    pub d: usize,
    /// Saddle exponent; defaulted per regime (and derived for the double
    /// phase) when absent.
    pub p0: Option<f64>,
    pub model: ModelConfig,
    pub quad: QuadConfig,
    pub solver: SolverConfig,
    /// Geometric gap-scan grid `2^min .. 2^max`, half-integer steps.
    pub gap_t_log2_min: i32,
    pub gap_t_log2_max: i32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema: 1,
            seed: 0,
            regime: None,
            d: 2,
            p0: None,
            model: ModelConfig::default(),
            quad: QuadConfig::default(),
            solver: SolverConfig::default(),
            gap_t_log2_min: -20,
            gap_t_log2_max: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::Domain(format!("config parse: {e}")))?;
        if cfg.schema != 1 {
            return Err(Error::Domain(format!("unsupported config schema {}", cfg.schema)));
        }
        Ok(cfg)
    }

    fn default_p0(&self, regime: Regime) -> f64 {
        match regime {
            Regime::Matching => self.d as f64,
            Regime::Sub => 1.5,
            Regime::Super => 3.0,
        }
    }

    /// Resolve the geometry and build the model; fills in every defaulted
    /// field so the resolved copy can be embedded in reports.
    pub fn resolve(&self) -> Result<(FractalConfig, OrliczModel, ExperimentConfig)> {
        let mut resolved = self.clone();
        let (fractal, model) = match &self.model {
            ModelConfig::DoublePhase { p, q, alpha } => {
                let p0 = match self.p0 {
                    Some(v) => v,
                    None => orlicz::double_phase_p0(self.d, *p, *q, *alpha)?,
                };
                let regime = self.regime.unwrap_or_else(|| orlicz::regime_for_p0(self.d, p0));
                let fractal = FractalConfig::new(regime, self.d, p0)?;
                let model = orlicz::double_phase_model(&fractal, *p, *q, *alpha)?;
                resolved.regime = Some(regime);
                resolved.p0 = Some(p0);
                (fractal, model)
            }
            other => {
                let regime = self.regime.unwrap_or(Regime::Matching);
                let p0 = self.p0.unwrap_or_else(|| self.default_p0(regime));
                let fractal = FractalConfig::new(regime, self.d, p0)?;
                let model = match other {
                    ModelConfig::Power { p } => orlicz::power_model(&fractal, *p)?,
                    ModelConfig::VarExp { p_minus, p_plus, continuous, kappa } => {
                        if *continuous {
                            orlicz::variable_exponent_model_continuous(&fractal, *kappa)?
                        } else {
                            orlicz::variable_exponent_model(&fractal, *p_minus, *p_plus)?
                        }
                    }
                    ModelConfig::Weighted { p, alpha, beta, eps } => {
                        let eps_v = match eps {
                            Some(v) => *v,
                            None => {
                                let fields = fracgap::fields::Fields::new(fractal.clone());
                                let (_, _, e) = fracgap::verify::weighted_epsilon(
                                    &fractal,
                                    &fields,
                                    *p,
                                    *alpha,
                                    *beta,
                                    &self.quad.policy(),
                                )?;
                                e
                            }
                        };
                        if let ModelConfig::Weighted { eps, .. } = &mut resolved.model {
                            *eps = Some(eps_v);
                        }
                        orlicz::weighted_model(&fractal, *p, *alpha, *beta, eps_v)?
                    }
                    ModelConfig::DoublePhase { .. } => unreachable!(),
                };
                resolved.regime = Some(regime);
                resolved.p0 = Some(p0);
                (fractal, model)
            }
        };
        Ok((fractal, model, resolved))
    }

    pub fn gap_grid(&self) -> Vec<f64> {
        let lo = 2 * self.gap_t_log2_min;
        let hi = 2 * self.gap_t_log2_max;
        (lo..=hi).map(|j| 2f64.powf(j as f64 / 2.0)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        let again = serde_json::to_string_pretty(&back).unwrap();
        assert_eq!(text, again);
    }

    #[test]
    fn double_phase_geometry_is_derived() {
        let mut cfg = ExperimentConfig::default();
        cfg.model = ModelConfig::DoublePhase { p: 1.8, q: 3.2, alpha: 0.5 };
        let (fractal, _, resolved) = cfg.resolve().unwrap();
        assert!(matches!(fractal.regime, Regime::Sub));
        assert!((resolved.p0.unwrap() - 1.9).abs() < 1e-12);
    }

    #[test]
    fn bad_schema_is_rejected() {
        let r = ExperimentConfig::from_json("{\"schema\": 2}");
        assert!(r.is_err());
    }
}
