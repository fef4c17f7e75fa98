//! Experiment configuration: a serde mirror of the TOML file plus a
//! validated, resolved form the rest of the harness consumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::{Family, FamilyKind};
use crate::sampler::McmcAlgorithm;

use super::design::DesignKind;
use super::truth::TruthKind;

/// Design matrix generator named in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignChoice {
    GaussianIid,
    Correlated,
    Orthogonal,
}

/// True-parameter generator named in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthChoice {
    ExactSparse,
    Misspecified,
}

/// Chain initialization named in a config file. `Mle` falls back to the
/// origin, then to a prior draw, whenever the likelihood fit is infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitChoice {
    Mle,
    Zero,
    PriorDraw,
}

/// How the prior scale ζ is chosen per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZetaMode {
    /// ζ = 1/(n·p·‖X‖) — the scale the risk bound is stated for. Narrower
    /// than any practical Markov step at realistic sizes.
    Theorem,
    /// ζ matched to the sampler's step-size heuristic, so the prior spikes
    /// stay wide enough to mix through; the harness default.
    Mixing,
    /// A fixed ζ from the `zeta` key.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FamilySection {
    kind: FamilyKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_hi: Option<f64>,
}

impl Default for FamilySection {
    fn default() -> Self {
        FamilySection {
            kind: FamilyKind::Gaussian,
            scale: None,
            theta_hi: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct DataSection {
    n: Vec<usize>,
    p: Vec<usize>,
    p0: Vec<usize>,
    design: DesignChoice,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    truth: TruthChoice,
    amplitude: f64,
    decay: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            n: vec![100, 200, 400],
            p: vec![20, 50],
            p0: vec![1, 2, 4, 8],
            design: DesignChoice::GaussianIid,
            rho: None,
            truth: TruthChoice::ExactSparse,
            amplitude: 1.0,
            decay: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunSection {
    replications: usize,
    seed: u64,
    epsilons: Vec<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            replications: 50,
            seed: 1,
            epsilons: vec![0.5, 0.2, 0.1, 0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SamplerSection {
    algorithm: McmcAlgorithm,
    n_iters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    burn_in: Option<usize>,
    thin: usize,
    n_chains: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    step_size: Option<f64>,
    init: InitChoice,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection {
            algorithm: McmcAlgorithm::Mala,
            n_iters: 12_000,
            burn_in: None,
            thin: 1,
            n_chains: 2,
            step_size: None,
            init: InitChoice::Mle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct OverridesSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    zeta_mode: ZetaMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    zeta: Option<f64>,
    b1: f64,
}

impl Default for OverridesSection {
    fn default() -> Self {
        OverridesSection {
            lambda: None,
            zeta_mode: ZetaMode::Mixing,
            zeta: None,
            b1: 100.0,
        }
    }
}

/// Literal serde mirror of the TOML config file. Every key has a default,
/// so the empty string parses to the desk-scale reference experiment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    family: FamilySection,
    data: DataSection,
    run: RunSection,
    sampler: SamplerSection,
    overrides: OverridesSection,
}

impl FileConfig {
    /// Canonical TOML rendering, used for the `config_echo.toml` report file.
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Sampler settings shared by every replication; the per-replication seed
/// and initial point are filled in at run time.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerTemplate {
    pub algorithm: McmcAlgorithm,
    pub n_iters: usize,
    pub burn_in: Option<usize>,
    pub thin: usize,
    pub n_chains: usize,
    pub step_size: Option<f64>,
    pub init: InitChoice,
}

/// A validated experiment plan: the cross product of `n_list × p_list ×
/// p0_list` defines the cells, each run for `replications` replications.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub family: Family,
    pub n_list: Vec<usize>,
    pub p_list: Vec<usize>,
    pub p0_list: Vec<usize>,
    pub design: DesignKind,
    pub truth: TruthKind,
    pub replications: usize,
    pub seed: u64,
    pub epsilons: Vec<f64>,
    pub sampler: SamplerTemplate,
    pub lambda: Option<f64>,
    pub zeta_mode: ZetaMode,
    pub zeta: Option<f64>,
    pub b1: f64,
    /// The file form this plan was resolved from, kept for echoing.
    pub raw: FileConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::resolve(FileConfig::default()).expect("default config is valid")
    }
}

impl ExperimentConfig {
    /// Parse and validate a TOML config string.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: FileConfig = toml::from_str(text).map_err(|e| Error::ConfigParse {
            path: "<config>".into(),
            message: e.to_string(),
        })?;
        ExperimentConfig::resolve(file)
    }

    /// Validate a parsed file config and resolve names into concrete types.
    pub fn resolve(file: FileConfig) -> Result<Self> {
        let family = match file.family.kind {
            FamilyKind::Gaussian => Family::gaussian(file.family.scale.unwrap_or(1.0))?,
            FamilyKind::Bernoulli => {
                if file.family.scale.is_some() {
                    return Err(Error::InvalidConfig(
                        "the Bernoulli family has a fixed scale; remove family.scale".into(),
                    ));
                }
                Family::bernoulli()
            }
            FamilyKind::Poisson => {
                if file.family.scale.is_some() {
                    return Err(Error::InvalidConfig(
                        "the Poisson family has a fixed scale; remove family.scale".into(),
                    ));
                }
                Family::poisson(file.family.theta_hi.unwrap_or(3.0))?
            }
        };
        if file.family.theta_hi.is_some() && file.family.kind != FamilyKind::Poisson {
            return Err(Error::InvalidConfig(
                "family.theta_hi only applies to the Poisson family".into(),
            ));
        }

        let d = &file.data;
        if d.n.is_empty() || d.p.is_empty() || d.p0.is_empty() {
            return Err(Error::InvalidConfig(
                "data.n, data.p, and data.p0 must each list at least one value".into(),
            ));
        }
        if d.n.contains(&0) || d.p.contains(&0) || d.p0.contains(&0) {
            return Err(Error::InvalidConfig(
                "sample sizes, dimensions, and sparsity levels must be ≥ 1".into(),
            ));
        }
        let p_min = *d.p.iter().min().expect("nonempty");
        let p0_max = *d.p0.iter().max().expect("nonempty");
        if p0_max > p_min {
            return Err(Error::InvalidConfig(format!(
                "every p0 must be ≤ every p (cells are a full cross product); got p0={p0_max} with p={p_min}"
            )));
        }
        let design = match d.design {
            DesignChoice::GaussianIid => {
                if d.rho.is_some() {
                    return Err(Error::InvalidConfig(
                        "data.rho only applies to the correlated design".into(),
                    ));
                }
                DesignKind::GaussianIid
            }
            DesignChoice::Correlated => {
                let rho = d.rho.unwrap_or(0.5);
                if !rho.is_finite() || rho.abs() >= 1.0 {
                    return Err(Error::InvalidConfig(format!(
                        "correlated design needs |rho| < 1, got {rho}"
                    )));
                }
                DesignKind::Correlated { rho }
            }
            DesignChoice::Orthogonal => {
                if d.rho.is_some() {
                    return Err(Error::InvalidConfig(
                        "data.rho only applies to the correlated design".into(),
                    ));
                }
                let n_min = *d.n.iter().min().expect("nonempty");
                let p_max = *d.p.iter().max().expect("nonempty");
                if p_max > n_min {
                    return Err(Error::InvalidConfig(format!(
                        "orthogonal design needs p ≤ n in every cell; got p={p_max} with n={n_min}"
                    )));
                }
                DesignKind::Orthogonal
            }
        };
        if !d.amplitude.is_finite() || d.amplitude <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "data.amplitude must be positive and finite, got {}",
                d.amplitude
            )));
        }
        let truth = match d.truth {
            TruthChoice::ExactSparse => TruthKind::ExactSparse {
                amplitude: d.amplitude,
            },
            TruthChoice::Misspecified => {
                if !d.decay.is_finite() || d.decay <= 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "data.decay must be positive and finite, got {}",
                        d.decay
                    )));
                }
                TruthKind::Misspecified {
                    amplitude: d.amplitude,
                    decay: d.decay,
                }
            }
        };

        let r = &file.run;
        if r.replications == 0 {
            return Err(Error::InvalidConfig(
                "run.replications must be ≥ 1".into(),
            ));
        }
        if r.epsilons.is_empty() {
            return Err(Error::InvalidConfig(
                "run.epsilons must list at least one tail level".into(),
            ));
        }
        for &e in &r.epsilons {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "tail levels must lie strictly inside (0, 1), got {e}"
                )));
            }
        }
        for (i, &e) in r.epsilons.iter().enumerate() {
            if r.epsilons[..i].contains(&e) {
                return Err(Error::InvalidConfig(format!(
                    "tail levels must be distinct, {e} appears twice"
                )));
            }
        }

        let s = &file.sampler;
        if s.n_iters == 0 {
            return Err(Error::InvalidConfig("sampler.n_iters must be ≥ 1".into()));
        }
        if let Some(b) = s.burn_in {
            if b >= s.n_iters {
                return Err(Error::InvalidConfig(format!(
                    "sampler.burn_in ({b}) must be < sampler.n_iters ({})",
                    s.n_iters
                )));
            }
        }
        if s.thin == 0 || s.n_chains == 0 {
            return Err(Error::InvalidConfig(
                "sampler.thin and sampler.n_chains must be ≥ 1".into(),
            ));
        }
        if let Some(h) = s.step_size {
            if !h.is_finite() || h <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "sampler.step_size must be positive and finite, got {h}"
                )));
            }
        }

        let o = &file.overrides;
        if let Some(l) = o.lambda {
            if !l.is_finite() || l < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "overrides.lambda must be finite and ≥ 0, got {l}"
                )));
            }
        }
        match o.zeta_mode {
            ZetaMode::Explicit => {
                let z = o.zeta.ok_or_else(|| {
                    Error::InvalidConfig(
                        "overrides.zeta_mode = \"explicit\" requires overrides.zeta".into(),
                    )
                })?;
                if !z.is_finite() || z <= 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "overrides.zeta must be positive and finite, got {z}"
                    )));
                }
            }
            _ => {
                if o.zeta.is_some() {
                    return Err(Error::InvalidConfig(
                        "overrides.zeta requires overrides.zeta_mode = \"explicit\"".into(),
                    ));
                }
            }
        }
        if !o.b1.is_finite() || o.b1 <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "overrides.b1 must be positive and finite, got {}",
                o.b1
            )));
        }

        Ok(ExperimentConfig {
            family,
            n_list: d.n.clone(),
            p_list: d.p.clone(),
            p0_list: d.p0.clone(),
            design,
            truth,
            replications: r.replications,
            seed: r.seed,
            epsilons: r.epsilons.clone(),
            sampler: SamplerTemplate {
                algorithm: s.algorithm,
                n_iters: s.n_iters,
                burn_in: s.burn_in,
                thin: s.thin,
                n_chains: s.n_chains,
                step_size: s.step_size,
                init: s.init,
            },
            lambda: o.lambda,
            zeta_mode: o.zeta_mode,
            zeta: o.zeta,
            b1: o.b1,
            raw: file,
        })
    }

    /// Override the master seed (e.g. from a CLI flag), keeping the echo
    /// consistent with what actually runs.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.raw.run.seed = seed;
        self
    }

    /// Number of cells the plan defines.
    pub fn n_cells(&self) -> usize {
        self.n_list.len() * self.p_list.len() * self.p0_list.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_yields_the_reference_plan() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.n_list, vec![100, 200, 400]);
        assert_eq!(cfg.p_list, vec![20, 50]);
        assert_eq!(cfg.p0_list, vec![1, 2, 4, 8]);
        assert_eq!(cfg.replications, 50);
        assert_eq!(cfg.n_cells(), 24);
        assert_eq!(cfg.design, DesignKind::GaussianIid);
        assert_eq!(cfg.zeta_mode, ZetaMode::Mixing);
        assert_eq!(cfg.sampler.init, InitChoice::Mle);
        assert!(cfg.lambda.is_none());
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn full_toml_round_trips_every_section() {
        let text = r#"
            [family]
            kind = "bernoulli"

            [data]
            n = [60]
            p = [8]
            p0 = [1, 2]
            design = "correlated"
            rho = 0.3
            truth = "misspecified"
            amplitude = 0.7
            decay = 1.2

            [run]
            replications = 5
            seed = 99
            epsilons = [0.5, 0.1]

            [sampler]
            algorithm = "rwm"
            n_iters = 500
            burn_in = 100
            thin = 2
            n_chains = 3
            step_size = 0.05
            init = "zero"

            [overrides]
            lambda = 30.0
            zeta_mode = "explicit"
            zeta = 0.02
            b1 = 50.0
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.family.kind(), FamilyKind::Bernoulli);
        assert_eq!(cfg.design, DesignKind::Correlated { rho: 0.3 });
        assert_eq!(
            cfg.truth,
            TruthKind::Misspecified {
                amplitude: 0.7,
                decay: 1.2
            }
        );
        assert_eq!(cfg.sampler.algorithm, McmcAlgorithm::Rwm);
        assert_eq!(cfg.sampler.burn_in, Some(100));
        assert_eq!(cfg.sampler.step_size, Some(0.05));
        assert_eq!(cfg.lambda, Some(30.0));
        assert_eq!(cfg.zeta, Some(0.02));
        assert_eq!(cfg.b1, 50.0);

        // Echo text parses back to the same plan.
        let echoed = ExperimentConfig::from_toml_str(&cfg.raw.to_toml_string()).unwrap();
        assert_eq!(echoed, cfg);
    }

    #[test]
    fn structural_mistakes_are_rejected() {
        let bad = [
            "[data]\np0 = [30]",                          // p0 > p
            "[data]\nn = []",                             // empty n list
            "[data]\nrho = 0.5",                          // rho without correlated
            "[data]\ndesign = \"correlated\"\nrho = 1.0", // |rho| ≥ 1
            "[data]\ndesign = \"orthogonal\"\np = [300]", // p > n
            "[data]\namplitude = 0.0",
            "[run]\nreplications = 0",
            "[run]\nepsilons = [0.0]",
            "[run]\nepsilons = [1.0]",
            "[run]\nepsilons = [0.2, 0.2]",
            "[sampler]\nn_iters = 0",
            "[sampler]\nburn_in = 12000",
            "[sampler]\nstep_size = -1.0",
            "[overrides]\nlambda = -2.0",
            "[overrides]\nzeta_mode = \"explicit\"",
            "[overrides]\nzeta = 0.1",
            "[overrides]\nb1 = 0.0",
            "[family]\nkind = \"bernoulli\"\nscale = 2.0",
            "[family]\nkind = \"gaussian\"\ntheta_hi = 3.0",
            "nonsense = true",
        ];
        for text in bad {
            assert!(
                ExperimentConfig::from_toml_str(text).is_err(),
                "accepted: {text}"
            );
        }
    }

    #[test]
    fn seed_override_updates_the_echo() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap().with_seed(777);
        assert_eq!(cfg.seed, 777);
        let echoed = ExperimentConfig::from_toml_str(&cfg.raw.to_toml_string()).unwrap();
        assert_eq!(echoed.seed, 777);
    }
}
