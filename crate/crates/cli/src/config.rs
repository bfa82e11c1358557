//! Run configuration: one JSON object, unknown keys rejected.

use std::path::Path;

use ambistop::diffusion::DiffusionSpec;
use ambistop::dynamics::{Conditioning, Omega};
use ambistop::model::{llr, PayoffSpec};
use ambistop::twosource::TwoSourceSpec;
use serde::Deserialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    #[default]
    Poisson,
    Twosource,
    Diffusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Payoff of action a in state ω is `u_a_Ω`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Payoffs {
    pub u_r_R: f64,
    pub u_l_R: f64,
    pub u_r_L: f64,
    pub u_l_L: f64,
}

/// Inclusive grid `lo, ..., hi` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        (0..self.n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64).collect()
    }

    /// `lo:hi:n` as used on the command line.
    pub fn parse(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts.as_slice() else {
            return Err(format!("grid `{s}` is not lo:hi:n"));
        };
        let g = Grid {
            lo: lo.parse().map_err(|e| format!("grid lo: {e}"))?,
            hi: hi.parse().map_err(|e| format!("grid hi: {e}"))?,
            n: n.parse().map_err(|e| format!("grid n: {e}"))?,
        };
        g.check("grid")?;
        Ok(g)
    }

    fn check(&self, name: &str) -> Result<(), String> {
        if !self.lo.is_finite() || !self.hi.is_finite() || self.n == 0 || self.hi < self.lo {
            return Err(format!("{name}: need finite lo <= hi and n >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum OmegaName {
    L,
    R,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: Model,
    /// General Poisson payoffs; when absent the symmetric payoffs with `delta` are used.
    pub payoffs: Option<Payoffs>,
    /// Symmetric stopping payoff `u_r^R = u_l^L`.
    pub delta: Option<f64>,
    pub c: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    /// Diffusion signal-to-noise ratio.
    pub psi: Option<f64>,
    /// Degree of ambiguity in log-odds. Excludes `prior`.
    pub ambiguity: Option<f64>,
    /// Explicit prior interval `[lo, hi]`. Excludes `ambiguity` and `p_bar0`.
    pub prior: Option<[f64; 2]>,
    pub p_bar0: Option<f64>,
    /// Probability of state R; used by `simulate`, `cdf` and as a prior.
    pub theta: Option<f64>,
    /// Conditioning state for `cdf` and `cdf-compare`.
    pub omega: Option<OmegaName>,
    pub n_paths: Option<usize>,
    pub seed: Option<u64>,
    pub state_grid: Option<Grid>,
    pub theta_grid: Option<Grid>,
    pub time_grid: Option<Grid>,
    pub delta_grid: Option<Vec<f64>>,
    /// Diffusion initial log-odds.
    pub z0: Option<f64>,
    #[serde(default)]
    pub format: Format,
}

fn one() -> f64 {
    1.0
}

/// A parsed config with the hash of its exact bytes.
pub struct Loaded {
    pub config: RunConfig,
    pub sha256: String,
}

pub fn load(path: &Path) -> Result<Loaded, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let config: RunConfig = serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    config.validate()?;
    let sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    Ok(Loaded { config, sha256 })
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        let mut nums: Vec<(&str, f64)> = vec![("c", self.c), ("lambda", self.lambda)];
        for (name, v) in [("delta", self.delta), ("psi", self.psi), ("ambiguity", self.ambiguity), ("p_bar0", self.p_bar0), ("theta", self.theta), ("z0", self.z0)] {
            if let Some(v) = v {
                nums.push((name, v));
            }
        }
        if let Some(p) = self.payoffs {
            nums.extend([("u_r_R", p.u_r_R), ("u_l_R", p.u_l_R), ("u_r_L", p.u_r_L), ("u_l_L", p.u_l_L)]);
        }
        if let Some([lo, hi]) = self.prior {
            nums.extend([("prior[0]", lo), ("prior[1]", hi)]);
        }
        for d in self.delta_grid.iter().flatten() {
            nums.push(("delta_grid", *d));
        }
        if let Some((name, v)) = nums.iter().find(|(_, v)| !v.is_finite()) {
            return Err(format!("{name} must be finite, got {v}"));
        }
        if !(self.c > 0.0) {
            return Err(format!("c must be positive, got {}", self.c));
        }
        if !(self.lambda > 0.0) {
            return Err(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.prior.is_some() && (self.ambiguity.is_some() || self.p_bar0.is_some()) {
            return Err("give either prior or ambiguity/p_bar0, not both".into());
        }
        if let Some([lo, hi]) = self.prior {
            if !(0.0 < lo && lo <= hi && hi < 1.0) {
                return Err(format!("prior must satisfy 0 < lo <= hi < 1, got [{lo}, {hi}]"));
            }
        }
        if self.ambiguity.is_some_and(|d| d < 0.0) || self.delta_grid.iter().flatten().any(|&d| d < 0.0) {
            return Err("ambiguity must be non-negative".into());
        }
        if let Some(t) = self.theta {
            if !(0.0..=1.0).contains(&t) {
                return Err(format!("theta must lie in [0, 1], got {t}"));
            }
        }
        for (name, g) in [("state_grid", self.state_grid), ("theta_grid", self.theta_grid), ("time_grid", self.time_grid)] {
            if let Some(g) = g {
                g.check(name)?;
            }
        }
        match self.model {
            Model::Poisson if self.payoffs.is_none() && self.delta.is_none() => Err("poisson model needs payoffs or delta".into()),
            Model::Twosource if self.delta.is_none() || self.payoffs.is_some() => Err("twosource model needs delta and no general payoffs".into()),
            Model::Diffusion if self.delta.is_none() || self.psi.is_none() => Err("diffusion model needs delta and psi".into()),
            _ => Ok(()),
        }
    }

    pub fn payoff_spec(&self) -> ambistop::Result<PayoffSpec> {
        match (self.payoffs, self.delta) {
            (Some(p), _) => PayoffSpec::new(p.u_r_R, p.u_l_R, p.u_r_L, p.u_l_L, self.c, self.lambda),
            (None, Some(d)) => PayoffSpec::symmetric(d, self.c, self.lambda),
            (None, None) => Err(ambistop::Error::InvalidSpec("no payoffs".into())),
        }
    }

    pub fn two_source_spec(&self) -> ambistop::Result<TwoSourceSpec> {
        TwoSourceSpec::new(self.delta.unwrap_or(f64::NAN), self.c, self.lambda)
    }

    pub fn diffusion_spec(&self) -> ambistop::Result<DiffusionSpec> {
        DiffusionSpec::from_psi(self.psi.unwrap_or(f64::NAN), self.delta.unwrap_or(f64::NAN), self.c)
    }

    /// Degree of ambiguity from `ambiguity` or the width of `prior`; zero if neither.
    pub fn ambiguity(&self) -> f64 {
        match (self.ambiguity, self.prior) {
            (Some(d), _) => d,
            (None, Some([lo, hi])) => llr(hi) - llr(lo),
            _ => 0.0,
        }
    }

    /// Upper end of the initial prior set.
    pub fn p_bar0(&self) -> Result<f64, String> {
        match (self.p_bar0, self.prior) {
            (Some(p), _) => Ok(p),
            (None, Some([_, hi])) => Ok(hi),
            _ => Err("p_bar0 (or prior) is required for this command".into()),
        }
    }

    pub fn seed(&self) -> Result<u64, String> {
        self.seed.ok_or_else(|| "seed is required for simulation commands".into())
    }

    pub fn n_paths(&self) -> Result<usize, String> {
        match self.n_paths {
            Some(n) if n > 0 => Ok(n),
            Some(_) => Err("n_paths must be positive".into()),
            None => Err("n_paths is required for simulation commands".into()),
        }
    }

    pub fn conditioning(&self) -> Conditioning {
        match (self.omega, self.theta) {
            (Some(OmegaName::L), _) => Conditioning::State(Omega::L),
            (Some(OmegaName::R), _) => Conditioning::State(Omega::R),
            (None, Some(t)) => Conditioning::Prior(t),
            (None, None) => Conditioning::State(Omega::L),
        }
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.delta_grid.clone().unwrap_or_else(|| vec![0.0, 1.0, 2.0])
    }
}
