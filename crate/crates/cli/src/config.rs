//! Run configuration: a small TOML file with one section per concern.
//!
//! Every field has a default except the ones a scenario needs, which
//! [`RunConfig::validate`] checks before any computation starts.

use std::path::Path;

use pohozaev_core::domain_geometry::Domain;
use pohozaev_core::elliptic_core::CoefficientH;
use pohozaev_core::vec3::Point;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// What a run computes; one per CLI verb, with `construct` split by mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Green,
    Pohozaev,
    RadialSolve,
    Extract,
    ConstructRadial,
    ConstructTwoBubble,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Radial,
    TwoBubble,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "radial" => Ok(Self::Radial),
            "two-bubble" => Ok(Self::TwoBubble),
            _ => Err(format!("unknown mode `{s}`, expected radial or two-bubble")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    /// Ball radius; the domain is the ball of this radius centred at the origin.
    #[serde(default = "one")]
    pub radius: f64,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self { radius: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HSpec {
    Constant { value: f64 },
    RadiusSquared,
    /// `h(x) = Σ cₖ|x|ᵏ`.
    Polynomial { coefficients: Vec<f64> },
}

impl Default for HSpec {
    fn default() -> Self {
        Self::Constant { value: 0.0 }
    }
}

impl HSpec {
    pub fn build(&self) -> CoefficientH {
        match self {
            Self::Constant { value } => CoefficientH::Constant(*value),
            Self::RadiusSquared => CoefficientH::radius_squared(),
            Self::Polynomial { coefficients } => CoefficientH::RadialPolynomial(coefficients.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// Lattice spacing of 3D solves and extraction.
    pub spacing: f64,
    /// Nodes of the radial shooting grid.
    pub radial_nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { spacing: 1.0 / 32.0, radial_nodes: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative residual of the conjugate-gradient solves.
    pub solver: f64,
    /// Accepted relative RMS residual of the mass fit.
    pub fit: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { solver: 1e-11, fit: 5e-2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct GreenSpec {
    pub sources: Vec<Point>,
    /// Weights for the Green–Pohožaev sum; the sum is skipped when empty.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    #[default]
    Zero,
    /// The radial solution found by shooting with the configured `h`.
    RadialSolution,
    /// The standard bubble of height `mu^{-1/2}` at the origin.
    Bubble,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PohozaevSpec {
    pub field: FieldKind,
    pub mu: f64,
}

impl Default for PohozaevSpec {
    fn default() -> Self {
        Self { field: FieldKind::Zero, mu: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractSpec {
    /// Centres of the synthetic bubble sum.
    pub centers: Vec<Point>,
    pub mu: f64,
    pub threshold: f64,
}

impl Default for ExtractSpec {
    fn default() -> Self {
        Self { centers: Vec::new(), mu: 1e-2, threshold: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstructSpec {
    pub eps: Option<f64>,
    /// Sample size of the two-bubble norms.
    pub samples: usize,
    /// Candidates for `x₁` of the two-bubble family.
    pub candidates: Vec<Point>,
}

impl Default for ConstructSpec {
    fn default() -> Self {
        Self { eps: None, samples: 100_000, candidates: vec![[0.0; 3]] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub mode: Option<Mode>,
    pub eps: Vec<f64>,
    pub samples: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { mode: None, eps: Vec::new(), samples: 100_000 }
    }
}

fn one() -> f64 {
    1.0
}

fn default_out() -> String {
    "out".into()
}

/// Everything a run needs, echoed into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: String,
    #[serde(default)]
    pub domain: DomainSpec,
    #[serde(default)]
    pub h: HSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub green: GreenSpec,
    #[serde(default)]
    pub pohozaev: PohozaevSpec,
    #[serde(default)]
    pub extract: ExtractSpec,
    #[serde(default)]
    pub construct: ConstructSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn domain(&self) -> Result<Domain, CliError> {
        if self.domain.radius == 1.0 {
            return Ok(Domain::unit_ball());
        }
        Domain::ball(self.domain.radius).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Checks that `scenario` has what it needs; runs before any computation.
    pub fn validate(&self, scenario: Scenario) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(s) = self.scenario {
            if s != scenario {
                return bad(format!("config scenario {s:?} does not match the requested {scenario:?}"));
            }
        }
        if !(self.domain.radius > 0.0) {
            return bad("domain.radius must be positive".into());
        }
        if !(self.grid.spacing > 0.0 && self.grid.spacing < self.domain.radius) {
            return bad("grid.spacing must lie in (0, radius)".into());
        }
        if !(self.tolerances.solver > 0.0 && self.tolerances.fit > 0.0) {
            return bad("tolerances must be positive".into());
        }
        let r = self.domain.radius;
        let inside = |p: &Point| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() < r;
        match scenario {
            Scenario::Green => {
                if self.green.sources.is_empty() {
                    return bad("green.sources is required".into());
                }
                if !self.green.sources.iter().all(inside) {
                    return bad("every green source must lie inside the domain".into());
                }
                if !self.green.weights.is_empty() && self.green.weights.len() != self.green.sources.len() {
                    return bad("green.weights must match green.sources".into());
                }
                if self.green.weights.iter().any(|&w| !(w > 0.0)) {
                    return bad("green.weights must be positive".into());
                }
            }
            Scenario::Pohozaev => {
                if !(self.pohozaev.mu > 0.0) {
                    return bad("pohozaev.mu must be positive".into());
                }
            }
            Scenario::RadialSolve => {
                if self.grid.radial_nodes < 1000 {
                    return bad("grid.radial_nodes must be at least 1000".into());
                }
            }
            Scenario::Extract => {
                if self.extract.centers.is_empty() {
                    return bad("extract.centers is required".into());
                }
                if !self.extract.centers.iter().all(inside) {
                    return bad("every extract centre must lie inside the domain".into());
                }
                if !(self.extract.mu > 0.0 && self.extract.threshold > 0.0) {
                    return bad("extract.mu and extract.threshold must be positive".into());
                }
            }
            Scenario::ConstructRadial | Scenario::ConstructTwoBubble => {
                let Some(eps) = self.construct.eps else {
                    return bad("construct.eps is required".into());
                };
                if !(eps > 0.0 && eps < 0.1) {
                    return bad("construct.eps must lie in (0, 0.1)".into());
                }
                if scenario == Scenario::ConstructRadial && r != 1.0 {
                    return bad("the radial construction needs the unit ball".into());
                }
                if scenario == Scenario::ConstructTwoBubble && (self.construct.samples < 10 || self.construct.candidates.is_empty()) {
                    return bad("construct.samples must be at least 10 and construct.candidates non-empty".into());
                }
            }
            Scenario::Sweep => {
                if self.sweep.mode.is_none() {
                    return bad("sweep.mode is required".into());
                }
                if self.sweep.eps.is_empty() {
                    return bad("sweep.eps is required".into());
                }
                if self.sweep.eps.iter().any(|&e| !(e > 0.0 && e < 0.1)) {
                    return bad("sweep.eps values must lie in (0, 0.1)".into());
                }
                if self.sweep.eps.windows(2).any(|w| w[1] >= w[0]) {
                    return bad("sweep.eps must decrease strictly".into());
                }
                if self.sweep.mode == Some(Mode::Radial) && r != 1.0 {
                    return bad("the radial sweep needs the unit ball".into());
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c.h, HSpec::Constant { value: 0.0 });
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn sweep_needs_eps() {
        let c = RunConfig::parse("[sweep]\nmode = \"radial\"\n").unwrap();
        assert!(matches!(c.validate(Scenario::Sweep), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[grid]\nspacingg = 0.1\n").is_err());
    }

    #[test]
    fn h_variants() {
        let c = RunConfig::parse("[h]\nkind = \"polynomial\"\ncoefficients = [1.0, 0.0, 2.0]\n").unwrap();
        assert_eq!(c.h.build().eval([0.5, 0.0, 0.0]), 1.5);
        let c = RunConfig::parse("[h]\nkind = \"radius-squared\"\n").unwrap();
        assert_eq!(c.h.build().eval([0.0, 0.5, 0.0]), 0.25);
    }
}
