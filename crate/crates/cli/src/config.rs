//! Run configuration: one JSON file drives the whole pipeline.
//!
//! Scalar fields can be overridden from the command line; the effective
//! (post-override) configuration is what gets hashed into the manifest.

use serde::{Deserialize, Serialize};
use tagdiff_core::dynamics::{IntegratorParams, Scheme};
use tagdiff_core::gibbs::GcmcParams;
use tagdiff_core::{PairPotential, TorusBox};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; all stage randomness is derived from it.
    pub seed: Option<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    pub potential: PotentialConfig,
    #[serde(rename = "box")]
    pub bbox: BoxConfig,
    #[serde(default)]
    pub gcmc: GcmcConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub audit: AuditConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    /// Estimators to run during `analyze`; empty means the default suite.
    #[serde(default)]
    pub estimators: Vec<String>,
}

fn default_output_dir() -> String {
    "out".to_string()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// One of `zero`, `lennard-jones`, `smooth-bump`, `attractive-tail`.
    pub kind: String,
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    /// Truncate-and-shift radius; omit for the untruncated potential.
    pub cutoff: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub side: f64,
    pub dim: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GcmcConfig {
    pub activity: f64,
    pub sweeps: u64,
    pub displacement_scale: f64,
    /// Number of configurations written by `sample`.
    pub samples: usize,
    /// Sweeps between retained samples.
    pub thin: u64,
}

impl Default for GcmcConfig {
    fn default() -> Self {
        GcmcConfig { activity: 0.3, sweeps: 400, displacement_scale: 0.25, samples: 100, thin: 5 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub dt: f64,
    pub total_time: f64,
    pub record_stride: usize,
    pub f_max: f64,
    /// `euler` or `adaptive`.
    pub scheme: String,
    /// Trajectories per ensemble.
    pub ensemble: usize,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            dt: 1e-4,
            total_time: 1.0,
            record_stride: 100,
            f_max: 1e6,
            scheme: "euler".to_string(),
            ensemble: 200,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub p_values: Vec<f64>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig { p_values: vec![2.0, 4.0] }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Window scales for the displacement reconstruction.
    pub n_grid: Vec<f64>,
    /// Shell width at the reference scale; the shell at scale `n` uses
    /// `delta / n` so the expected shell occupancy stays level.
    pub delta: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { n_grid: vec![1.5, 2.5, 3.5], delta: 0.1 }
    }
}

/// Estimator names accepted in the `estimators` list.
pub const KNOWN_ESTIMATORS: &[&str] = &[
    "diffusion",
    "martingale",
    "velocity",
    "reconstruction",
    "ergodicity",
    "stationarity",
    "scaling",
    "ibp",
    "ibp2",
    "generator_symmetry",
];

/// Scalar overrides collected from command-line flags.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<String>,
    pub dt: Option<f64>,
    pub total_time: Option<f64>,
    pub activity: Option<f64>,
    pub ensemble: Option<usize>,
    pub sweeps: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("config parse error: {e}"))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(v) = o.dt {
            self.dynamics.dt = v;
        }
        if let Some(v) = o.total_time {
            self.dynamics.total_time = v;
        }
        if let Some(v) = o.activity {
            self.gcmc.activity = v;
        }
        if let Some(v) = o.ensemble {
            self.dynamics.ensemble = v;
        }
        if let Some(v) = o.sweeps {
            self.gcmc.sweeps = v;
        }
    }

    /// Field-level validation; collects every problem instead of stopping at
    /// the first.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        if self.seed.is_none() {
            errors.push("seed: required".to_string());
        }
        if !(self.bbox.side > 0.0) {
            errors.push("box.side: must be positive".to_string());
        }
        if self.bbox.dim == 0 || self.bbox.dim > tagdiff_core::MAX_DIM {
            errors.push(format!("box.dim: must be 1..={}", tagdiff_core::MAX_DIM));
        }
        match self.potential.kind.as_str() {
            "zero" | "lennard-jones" | "smooth-bump" | "attractive-tail" => {}
            other => errors.push(format!("potential.kind: unknown kind `{other}`")),
        }
        if let Some(rc) = self.potential.cutoff {
            if !(rc > 0.0) {
                errors.push("potential.cutoff: must be positive".to_string());
            } else if rc > self.bbox.side / 2.0 {
                errors.push("potential.cutoff: must not exceed half the box side".to_string());
            }
        }
        if !(self.gcmc.activity >= 0.0) {
            errors.push("gcmc.activity: must be non-negative".to_string());
        }
        if !(self.dynamics.dt > 0.0) {
            errors.push("dynamics.dt: must be positive".to_string());
        }
        if !(self.dynamics.total_time > 0.0) {
            errors.push("dynamics.total_time: must be positive".to_string());
        }
        if self.dynamics.record_stride == 0 {
            errors.push("dynamics.record_stride: must be at least 1".to_string());
        }
        match self.dynamics.scheme.as_str() {
            "euler" | "adaptive" => {}
            other => errors.push(format!("dynamics.scheme: unknown scheme `{other}`")),
        }
        for p in &self.audit.p_values {
            if !(*p >= 1.0) {
                errors.push(format!("audit.p_values: exponent {p} must be >= 1"));
            }
        }
        for n in &self.schedule.n_grid {
            if !(*n > 0.0) || *n + self.schedule.delta / *n >= self.bbox.side / 2.0 {
                errors.push(format!(
                    "schedule.n_grid: window {n} (plus shell) must fit inside half the box"
                ));
            }
        }
        for e in &self.estimators {
            if !KNOWN_ESTIMATORS.contains(&e.as_str()) {
                errors.push(format!("estimators: unknown estimator `{e}`"));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    pub fn build_potential(&self) -> PairPotential {
        let d = self.bbox.dim;
        let p = &self.potential;
        let base = match p.kind.as_str() {
            "zero" => PairPotential::zero(d),
            "lennard-jones" => PairPotential::lennard_jones(p.epsilon, p.sigma, d),
            "smooth-bump" => PairPotential::smooth_bump(p.epsilon, p.sigma, d),
            "attractive-tail" => PairPotential::attractive_tail(p.epsilon, d),
            other => panic!("unvalidated potential kind `{other}`"),
        };
        match p.cutoff {
            Some(rc) => base.truncate_and_shift(rc),
            None => base,
        }
    }

    pub fn build_box(&self) -> TorusBox {
        TorusBox::new(self.bbox.side, self.bbox.dim)
    }

    pub fn build_gcmc(&self) -> GcmcParams {
        let mut params = GcmcParams::new(self.gcmc.activity);
        params.sweeps = self.gcmc.sweeps;
        params.displacement_scale = self.gcmc.displacement_scale;
        params
    }

    pub fn build_integrator(&self) -> IntegratorParams {
        let mut params = IntegratorParams::new(self.dynamics.dt);
        params.f_max = self.dynamics.f_max;
        params.record_stride = self.dynamics.record_stride;
        params.scheme = match self.dynamics.scheme.as_str() {
            "adaptive" => Scheme::SubstepAdaptive,
            _ => Scheme::EulerMaruyama,
        };
        params
    }

    /// Canonical JSON used for manifest hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"{
            "seed": 7,
            "potential": {"kind": "lennard-jones", "cutoff": 2.5},
            "box": {"side": 10.0, "dim": 2}
        }"#
        .to_string()
    }

    #[test]
    fn minimal_config_parses_and_validates() {
        let cfg = RunConfig::from_json(&minimal()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.seed, Some(7));
        let pot = cfg.build_potential();
        assert_eq!(pot.cutoff_radius, Some(2.5));
    }

    #[test]
    fn missing_seed_is_a_field_error() {
        let cfg = RunConfig::from_json(
            r#"{"potential": {"kind": "zero"}, "box": {"side": 10.0, "dim": 2}}"#,
        )
        .unwrap();
        let errs = cfg.validate().unwrap_err();
        assert!(errs.iter().any(|e| e.starts_with("seed:")), "{errs:?}");
    }

    #[test]
    fn cutoff_beyond_half_box_rejected() {
        let cfg = RunConfig::from_json(
            r#"{"seed": 1, "potential": {"kind": "lennard-jones", "cutoff": 6.0},
                "box": {"side": 10.0, "dim": 2}}"#,
        )
        .unwrap();
        let errs = cfg.validate().unwrap_err();
        assert!(errs.iter().any(|e| e.starts_with("potential.cutoff")), "{errs:?}");
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = RunConfig::from_json(&minimal()).unwrap();
        cfg.apply(&Overrides { seed: Some(99), dt: Some(5e-4), ..Default::default() });
        assert_eq!(cfg.seed, Some(99));
        assert_eq!(cfg.dynamics.dt, 5e-4);
    }

    #[test]
    fn unknown_field_is_a_parse_error() {
        assert!(RunConfig::from_json(
            r#"{"seed": 1, "potential": {"kind": "zero"}, "box": {"side": 10, "dim": 2},
                "bogus": true}"#
        )
        .is_err());
    }
}
