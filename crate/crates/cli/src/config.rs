//! Run configuration: one TOML file with nested sections.

use quasikin::continuum::WLineRule;
use quasikin::verification::CampaignConfig;
use quasikin::wke_solver::Scheme;
use quasikin::{Error, Horizon, LatticeSpec, PhysicalParams, Profiles};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    Wick,
    Kinetic,
    Wke,
    Verify,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Wick => "wick",
            Mode::Kinetic => "kinetic",
            Mode::Wke => "wke",
            Mode::Verify => "verify",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeBlock {
    pub d: usize,
    pub period: f64,
    pub cutoff: f64,
}

impl Default for LatticeBlock {
    fn default() -> Self {
        Self { d: 2, period: 10.0, cutoff: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsBlock {
    pub nu: f64,
    pub eps: f64,
    /// Horizon T; absent means T = ∞.
    pub horizon: Option<f64>,
    pub taus: Vec<f64>,
    /// Overrides the default ℵ_d.
    pub aleph: Option<f64>,
}

impl Default for ParamsBlock {
    fn default() -> Self {
        Self {
            nu: 0.1,
            eps: 0.05,
            horizon: None,
            taus: vec![0.0],
            aleph: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateBlock {
    pub samples: usize,
    /// Number of probed modes; absent means every mode.
    pub probes: Option<usize>,
    pub with_a2: bool,
    /// h_osc = ν / h_div.
    pub h_div: f64,
}

impl Default for SimulateBlock {
    fn default() -> Self {
        Self {
            samples: 200,
            probes: Some(16),
            with_a2: true,
            h_div: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WickQuantity {
    Sigma,
    N2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WickDomain {
    Lattice,
    Continuum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WickBlock {
    pub quantity: WickQuantity,
    pub domain: WickDomain,
    pub probes: usize,
    /// |s| values for the continuum domain.
    pub radii: Vec<f64>,
    pub rule: WLineRule,
}

impl Default for WickBlock {
    fn default() -> Self {
        Self {
            quantity: WickQuantity::Sigma,
            domain: WickDomain::Lattice,
            probes: 16,
            radii: vec![0.0, 0.5, 1.0],
            rule: WLineRule::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    pub dr: f64,
    pub nodes: usize,
    pub r: f64,
    pub support: f64,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self { dr: 0.25, nodes: 21, r: 4.0, support: 5.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WkeBlock {
    pub h: f64,
    pub scheme: Scheme,
    pub tau_end: f64,
    pub steady: bool,
}

impl Default for WkeBlock {
    fn default() -> Self {
        Self {
            h: 0.02,
            scheme: Scheme::ExpEuler,
            tau_end: 1.0,
            steady: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub lattice: LatticeBlock,
    #[serde(default)]
    pub profiles: Profiles,
    #[serde(default)]
    pub params: ParamsBlock,
    #[serde(default)]
    pub simulate: SimulateBlock,
    #[serde(default)]
    pub wick: WickBlock,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub wke: WkeBlock,
    #[serde(default)]
    pub verify: CampaignConfig,
}

fn default_seed() -> u64 {
    1
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; field order is fixed by the struct layout.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn horizon(&self) -> Horizon {
        match self.params.horizon {
            Some(t) => Horizon::Finite(t),
            None => Horizon::Infinite,
        }
    }

    pub fn physical(&self) -> Result<PhysicalParams, Error> {
        let mut p = PhysicalParams::new(self.lattice.d, self.params.nu, self.params.eps, self.horizon())?;
        if let Some(a) = self.params.aleph {
            p.aleph = a;
            p.validate()?;
        }
        Ok(p)
    }

    pub fn lattice_spec(&self) -> Result<LatticeSpec, Error> {
        LatticeSpec::new(self.lattice.d, self.lattice.period, self.lattice.cutoff)
    }

    /// Re-checks the invariants of every referenced type.
    pub fn validate(&self) -> Result<(), Error> {
        self.profiles.validate()?;
        self.physical()?;
        if self.params.taus.is_empty() {
            return Err(Error::Config("params.taus must not be empty".into()));
        }
        if self.params.taus.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("params.taus must increase".into()));
        }
        if let Some(t) = self.params.horizon {
            if self.params.taus[0] < -t {
                return Err(Error::Config("params.taus precede −T".into()));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        if self.mode == Mode::Simulate || (self.mode == Mode::Wick && self.wick.domain == WickDomain::Lattice) {
            self.lattice_spec()?;
        }
        if self.mode == Mode::Simulate && self.simulate.samples < 2 {
            return Err(Error::Config("simulate.samples must be at least 2".into()));
        }
        if !(self.grid.dr > 0.0) || self.grid.nodes < 3 {
            return Err(Error::Config("grid needs dr > 0 and at least 3 nodes".into()));
        }
        if self.mode == Mode::Verify {
            self.verify.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = RunConfig::parse("mode = \"wke\"").unwrap();
        assert_eq!(c.seed, 1);
        assert_eq!(c.horizon(), Horizon::Infinite);
        assert_eq!(c.lattice.d, 2);
    }

    #[test]
    fn canonical_form_round_trips() {
        let text = "mode = \"simulate\"\nseed = 9\n[params]\nnu = 0.2\nhorizon = 1.0\ntaus = [-0.5, 0.0]\n";
        let c = RunConfig::parse(text).unwrap();
        let again = RunConfig::parse(&c.canonical()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.canonical(), again.canonical());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::parse("mode = \"wke\"\n[params]\nnu = 0.9").is_err());
        assert!(RunConfig::parse("mode = \"wke\"\nbogus = 1").is_err());
        assert!(RunConfig::parse("mode = \"nope\"").is_err());
        assert!(RunConfig::parse("mode = \"wke\"\n[params]\ntaus = [0.2, 0.1]").is_err());
        assert!(RunConfig::parse("mode = \"verify\"\n[verify]\nchecks = [\"x\"]").is_err());
    }
}
