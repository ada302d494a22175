//! Experiment configuration: one JSON document whose keys can each be
//! overridden by a flag of the same name (`gamma_u` <-> `--gamma-u`).
//!
//! Resolution order is file, then the output-directory environment override,
//! then flags. Defaults are filled only after merging, so the resolved
//! settings echoed in the manifest are complete.

use std::path::Path;

use clap::{Args, ValueEnum};
use dqlm::exact::SteadyParams;
use dqlm::lattice::{LatticeLayout, LayoutKind};
use dqlm::liouvillian::TwistVariant;
use dqlm::models::{Disorder, Hamiltonian, JumpFamily, ModelSpec};
use dqlm::numerics::DENSE_CAP;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::fail::{CliError, Exit};

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "DQLM_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Spectrum,
    SteadyState,
    Dynamics,
    Winding,
    VerifyExact,
    Profile,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutChoice {
    /// Chain whose boundary comes from `boundary`.
    Chain,
    ChainObc,
    ChainPbc,
    Hierarchical,
    Square,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Obc,
    Pbc,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum JumpChoice {
    Biased,
    XLike,
    Dephasing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum VariantChoice {
    Lindblad,
    DoubleSpace,
}

/// Every configurable key. All fields are optional so the same struct
/// describes a config file, a set of flag overrides and the resolved result.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Task to run; set by the subcommand, or read from the file by `run`.
    #[arg(skip)]
    pub task: Option<Task>,

    #[arg(long, value_enum)]
    pub layout: Option<LayoutChoice>,
    #[arg(long, value_enum)]
    pub boundary: Option<Boundary>,
    /// Sites per chain, top-layer sites of the ladder, or L_x.
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    /// L_y of the square lattice.
    #[arg(long = "L-y")]
    #[serde(rename = "L_y")]
    pub l_y: Option<usize>,

    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<f64>,
    #[arg(long = "J1")]
    #[serde(rename = "J1")]
    pub j1: Option<f64>,
    #[arg(long = "J2")]
    #[serde(rename = "J2")]
    pub j2: Option<f64>,

    #[arg(long, value_enum)]
    pub jumps: Option<JumpChoice>,
    #[arg(long = "gamma-u")]
    pub gamma_u: Option<f64>,
    #[arg(long = "gamma-d")]
    pub gamma_d: Option<f64>,
    /// Vertical-link rates on the square lattice.
    #[arg(long = "gamma-u-v")]
    pub gamma_u_v: Option<f64>,
    #[arg(long = "gamma-d-v")]
    pub gamma_d_v: Option<f64>,
    /// Dephasing rate.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Gauge-fixing rate; the `G_n` jumps are added when positive.
    #[arg(long = "Gamma")]
    #[serde(rename = "Gamma")]
    pub gauge_fixing: Option<f64>,

    /// Enables symmetric chain disorder with this seed.
    #[arg(long = "disorder-seed")]
    pub disorder_seed: Option<u64>,
    #[arg(long = "W")]
    #[serde(rename = "W")]
    pub w: Option<f64>,
    #[arg(long = "W-prime")]
    #[serde(rename = "W_prime")]
    pub w_prime: Option<f64>,

    /// Particle number (chain and square layouts).
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<u32>,
    /// Weak gauge label `𝒢_n` per site; all zeros by default.
    #[arg(long = "weak-gauge", value_delimiter = ',', allow_hyphen_values = true)]
    pub weak_gauge: Option<Vec<f64>>,
    /// Diagonalize the whole double space block by block.
    #[arg(long = "full-space", num_args = 0..=1, default_missing_value = "true")]
    pub full_space: Option<bool>,
    /// Hierarchical sector `(N_H', D_H')`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub sector: Option<Vec<f64>>,

    #[arg(long)]
    pub alpha: Option<f64>,
    /// Defaults to `gamma_u / gamma_d`.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "alpha-prime")]
    pub alpha_prime: Option<f64>,
    /// Defaults to `gamma_u_v / gamma_d_v` when both are set, else `beta`.
    #[arg(long = "beta-prime")]
    pub beta_prime: Option<f64>,
    /// Filling fractions; `N = round(f · sites)`.
    #[arg(long, value_delimiter = ',')]
    pub fillings: Option<Vec<f64>>,

    /// Boundary flux on periodic chains.
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    #[arg(long = "phi-steps")]
    pub phi_steps: Option<usize>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantChoice>,

    #[arg(long = "t-final")]
    pub t_final: Option<f64>,
    #[arg(long = "t-points")]
    pub t_points: Option<usize>,
    /// Occupied sites of the initial product state, 1-based.
    #[arg(long = "initial-sites", value_delimiter = ',')]
    pub initial_sites: Option<Vec<usize>>,

    #[arg(long = "dense-cap")]
    pub dense_cap: Option<usize>,
    #[arg(long)]
    pub atol: Option<f64>,
    #[arg(long)]
    pub rtol: Option<f64>,

    #[arg(long = "output-dir")]
    pub output_dir: Option<String>,
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::new(Exit::Schema, "schema", msg)
}

fn as_object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

impl Settings {
    /// Parses a config document, rejecting unknown keys.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| schema(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| schema(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Keys set in `over` replace those in `self`.
    pub fn overlay(&self, over: &Settings) -> Result<Self, CliError> {
        let mut base = as_object(serde_json::to_value(self).map_err(|e| schema(e.to_string()))?);
        for (k, v) in as_object(serde_json::to_value(over).map_err(|e| schema(e.to_string()))?) {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
        serde_json::from_value(Value::Object(base)).map_err(|e| schema(e.to_string()))
    }

    fn layout_kind(&self) -> LayoutChoice {
        self.layout.unwrap_or(LayoutChoice::Chain)
    }

    fn has_particle_number(&self) -> bool {
        self.layout_kind() != LayoutChoice::Hierarchical
    }

    /// Fills every key relevant to the task with its default and checks
    /// cross-key consistency.
    pub fn resolve(mut self, task: Task) -> Result<Self, CliError> {
        self.task = Some(task);
        let layout = self.layout_kind();
        self.layout = Some(layout);
        let boundary = match (layout, self.boundary) {
            (LayoutChoice::ChainObc, Some(Boundary::Pbc | Boundary::Both)) | (LayoutChoice::ChainPbc, Some(Boundary::Obc | Boundary::Both)) => {
                return Err(schema("boundary contradicts the layout"));
            }
            (LayoutChoice::ChainObc, _) | (LayoutChoice::Hierarchical | LayoutChoice::Square, _) => Boundary::Obc,
            (LayoutChoice::ChainPbc, _) => Boundary::Pbc,
            (LayoutChoice::Chain, Some(b)) => b,
            (LayoutChoice::Chain, None) => match task {
                Task::Spectrum | Task::Dynamics => Boundary::Both,
                Task::Winding => Boundary::Pbc,
                _ => Boundary::Obc,
            },
        };
        if layout != LayoutChoice::Chain && layout != LayoutChoice::ChainObc && layout != LayoutChoice::ChainPbc && boundary != Boundary::Obc {
            return Err(schema("only chains support periodic boundaries"));
        }
        if task == Task::Winding && (!matches!(layout, LayoutChoice::Chain | LayoutChoice::ChainPbc) || boundary != Boundary::Pbc) {
            return Err(schema("winding needs a periodic chain"));
        }
        if matches!(task, Task::Profile | Task::VerifyExact) && boundary != Boundary::Obc {
            return Err(schema("exact states exist for open boundaries only"));
        }
        self.boundary = Some(boundary);

        let l = *self.l.get_or_insert(7);
        if layout == LayoutChoice::Square {
            self.l_y.get_or_insert(2);
        } else if self.l_y.is_some() {
            return Err(schema("L_y applies to the square lattice only"));
        }
        let j = *self.j.get_or_insert(1.0);
        if matches!(layout, LayoutChoice::Hierarchical | LayoutChoice::Square) {
            self.j1.get_or_insert(j);
            self.j2.get_or_insert(j);
        }
        let jumps = *self.jumps.get_or_insert(JumpChoice::Biased);
        // relaxation runs default to a stronger bias than spectra
        let (gu0, gd0) = if task == Task::Dynamics { (3.0, 1.0) } else { (2.4, 1.6) };
        let gu = *self.gamma_u.get_or_insert(gu0);
        let gd = *self.gamma_d.get_or_insert(gd0);
        if jumps == JumpChoice::Dephasing {
            self.gamma.get_or_insert(1.0);
        }
        self.gauge_fixing.get_or_insert(0.0);
        if self.disorder_seed.is_some() {
            self.w.get_or_insert(0.5);
            self.w_prime.get_or_insert(0.5);
        } else if self.w.is_some() || self.w_prime.is_some() {
            return Err(schema("W and W_prime need disorder_seed"));
        }

        if self.has_particle_number() {
            if self.sector.is_some() {
                return Err(schema("sector applies to the hierarchical layout only"));
            }
            if !matches!(task, Task::Profile | Task::VerifyExact) {
                if task == Task::Dynamics && self.n.is_none() {
                    self.n = self.initial_sites.as_ref().map(|v| v.len() as u32);
                }
                let n = *self.n.get_or_insert(2);
                if task == Task::Dynamics {
                    let sites = self.initial_sites.get_or_insert_with(|| (1..=n as usize).collect());
                    if sites.len() != n as usize {
                        return Err(schema(format!("initial_sites lists {} sites but N = {n}", sites.len())));
                    }
                }
            }
        } else {
            if self.n.is_some() {
                return Err(schema("N is not defined on the hierarchical layout"));
            }
            if task == Task::Profile {
                let s = self.sector.get_or_insert(vec![0.0, 0.0]);
                if s.len() != 2 {
                    return Err(schema("sector takes two values: N_H', D_H'"));
                }
            }
            if task == Task::Dynamics && self.initial_sites.is_none() {
                return Err(schema("dynamics on the ladder needs initial_sites"));
            }
        }

        match task {
            Task::Profile => {
                self.alpha.get_or_insert(1.0);
                self.beta.get_or_insert(gu / gd);
                if layout == LayoutChoice::Hierarchical {
                    self.alpha_prime.get_or_insert(1.0);
                }
                if layout == LayoutChoice::Square {
                    let b = self.beta.unwrap();
                    let bp = match (self.gamma_u_v, self.gamma_d_v) {
                        (Some(u), Some(d)) => u / d,
                        _ => b,
                    };
                    self.beta_prime.get_or_insert(bp);
                }
                if self.has_particle_number() && self.n.is_none() {
                    self.fillings.get_or_insert(vec![0.25, 0.5, 0.75]);
                }
            }
            Task::VerifyExact => {
                if !matches!(layout, LayoutChoice::Chain | LayoutChoice::ChainObc) {
                    return Err(schema("verify-exact runs its own ladder and square checks; choose a chain layout"));
                }
                self.alpha.get_or_insert(1.0);
                self.disorder_seed.get_or_insert(20_240 + l as u64);
                self.w.get_or_insert(0.5);
                self.w_prime.get_or_insert(0.5);
            }
            Task::Winding => {
                self.phi_steps.get_or_insert(8);
                self.variant.get_or_insert(VariantChoice::DoubleSpace);
            }
            Task::Dynamics => {
                self.t_final.get_or_insert(100.0);
                self.t_points.get_or_insert(101);
                self.atol.get_or_insert(1e-9);
                self.rtol.get_or_insert(1e-9);
            }
            Task::Spectrum | Task::SteadyState => {}
        }
        if matches!(task, Task::Spectrum | Task::SteadyState | Task::Winding) {
            self.full_space.get_or_insert(false);
            if self.full_space == Some(false) && jumps != JumpChoice::XLike {
                let sites = self.sites_hint();
                self.weak_gauge.get_or_insert_with(|| vec![0.0; sites]);
            }
        }
        if boundary != Boundary::Obc {
            self.phi.get_or_insert(0.0);
        } else if self.phi.is_some_and(|p| p != 0.0) {
            return Err(schema("phi needs a periodic chain"));
        }
        self.dense_cap.get_or_insert(DENSE_CAP);
        self.output_dir.get_or_insert_with(|| "out".into());
        self.check_values()?;
        Ok(self)
    }

    fn sites_hint(&self) -> usize {
        let l = self.l.unwrap_or(7);
        match self.layout_kind() {
            LayoutChoice::Square => l * self.l_y.unwrap_or(2),
            _ => l,
        }
    }

    fn check_values(&self) -> Result<(), CliError> {
        let positive = [
            ("gamma_u", self.gamma_u),
            ("gamma_d", self.gamma_d),
            ("gamma_u_v", self.gamma_u_v),
            ("gamma_d_v", self.gamma_d_v),
            ("gamma", self.gamma),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("alpha_prime", self.alpha_prime),
            ("beta_prime", self.beta_prime),
            ("t_final", self.t_final),
            ("atol", self.atol),
            ("rtol", self.rtol),
        ];
        for (name, v) in positive {
            if let Some(x) = v {
                if !(x.is_finite() && x > 0.0) {
                    return Err(schema(format!("{name} must be positive, got {x}")));
                }
            }
        }
        if let Some(g) = self.gauge_fixing {
            if !(g.is_finite() && g >= 0.0) {
                return Err(schema(format!("Gamma must be nonnegative, got {g}")));
            }
        }
        if let Some(f) = &self.fillings {
            if f.is_empty() || f.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(schema("fillings must lie in [0, 1]"));
            }
        }
        if let Some(g) = &self.weak_gauge {
            if g.len() != self.sites_hint() {
                return Err(schema(format!("weak_gauge needs {} values, got {}", self.sites_hint(), g.len())));
            }
        }
        if self.t_points.is_some_and(|n| n < 2) {
            return Err(schema("t_points must be at least 2"));
        }
        if self.phi_steps == Some(0) {
            return Err(schema("phi_steps must be positive"));
        }
        if self.jumps == Some(JumpChoice::XLike) && self.weak_gauge.is_some() {
            return Err(schema("x-like jumps do not conserve the weak gauge label"));
        }
        Ok(())
    }

    /// Layouts in the order their outputs are written.
    pub fn layouts(&self) -> Result<Vec<(&'static str, LatticeLayout)>, CliError> {
        let l = self.l.unwrap_or(7);
        let built = |kind| LatticeLayout::new(kind, l, self.l_y).map_err(CliError::from);
        Ok(match self.layout_kind() {
            LayoutChoice::Hierarchical => vec![("hierarchical", built(LayoutKind::Hierarchical)?)],
            LayoutChoice::Square => vec![("square", built(LayoutKind::Square2d)?)],
            _ => {
                let mut v = Vec::new();
                if matches!(self.boundary, Some(Boundary::Obc | Boundary::Both)) {
                    v.push(("obc", built(LayoutKind::ChainObc)?));
                }
                if matches!(self.boundary, Some(Boundary::Pbc | Boundary::Both)) {
                    v.push(("pbc", built(LayoutKind::ChainPbc)?));
                }
                v
            }
        })
    }

    pub fn model(&self, layout: &LatticeLayout) -> Result<ModelSpec, CliError> {
        let j = self.j.unwrap_or(1.0);
        let hamiltonian = match layout.kind() {
            LayoutKind::ChainObc => Hamiltonian::Qlm1d { j, phi: 0.0 },
            LayoutKind::ChainPbc => Hamiltonian::Qlm1d { j, phi: self.phi.unwrap_or(0.0) },
            LayoutKind::Hierarchical => Hamiltonian::Hierarchical { j1: self.j1.unwrap_or(j), j2: self.j2.unwrap_or(j) },
            LayoutKind::Square2d => Hamiltonian::Qlm2d { j1: self.j1.unwrap_or(j), j2: self.j2.unwrap_or(j) },
        };
        let (gu, gd) = (self.gamma_u.unwrap_or(2.4), self.gamma_d.unwrap_or(1.6));
        let mut jumps = vec![match self.jumps.unwrap_or(JumpChoice::Biased) {
            JumpChoice::Biased => JumpFamily::Biased { gamma_u: gu, gamma_d: gd, gamma_u_v: self.gamma_u_v, gamma_d_v: self.gamma_d_v },
            JumpChoice::XLike => JumpFamily::XLike { gamma_u: gu, gamma_d: gd },
            JumpChoice::Dephasing => JumpFamily::Dephasing { gamma: self.gamma.unwrap_or(1.0) },
        }];
        if let Some(g) = self.gauge_fixing.filter(|&g| g > 0.0) {
            jumps.push(JumpFamily::GaugeFixing { gamma: g });
        }
        let disorder = self.disorder_seed.map(|seed| Disorder { seed, w: self.w.unwrap_or(0.5), w_prime: self.w_prime.unwrap_or(0.5) });
        let spec = ModelSpec { layout: layout.spec(), hamiltonian, jumps, disorder };
        spec.validate(layout)?;
        Ok(spec)
    }

    pub fn steady_params(&self) -> SteadyParams {
        let beta = self.beta.unwrap_or(self.gamma_u.unwrap_or(2.4) / self.gamma_d.unwrap_or(1.6));
        SteadyParams { alpha: self.alpha.unwrap_or(1.0), beta, alpha_prime: self.alpha_prime.unwrap_or(1.0), beta_prime: self.beta_prime }
    }

    pub fn variant(&self) -> TwistVariant {
        match self.variant.unwrap_or(VariantChoice::DoubleSpace) {
            VariantChoice::Lindblad => TwistVariant::Lindblad,
            VariantChoice::DoubleSpace => TwistVariant::DoubleSpace,
        }
    }

    /// Canonical JSON of the settings; keys follow declaration order and
    /// unset keys are omitted.
    pub fn canonical_json(&self) -> Value {
        let m = as_object(serde_json::to_value(self).unwrap_or(Value::Null));
        Value::Object(m.into_iter().filter(|(_, v)| !v.is_null()).collect())
    }
}

/// Doubles a list of charges that must be integers or half-integers.
pub fn half_units(values: &[f64], what: &str) -> Result<Vec<i32>, CliError> {
    values
        .iter()
        .map(|&x| {
            let y = 2.0 * x;
            if y.is_finite() && (y - y.round()).abs() < 1e-12 {
                Ok(y.round() as i32)
            } else {
                Err(schema(format!("{what} values must be multiples of 1/2, got {x}")))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Settings::from_json(r#"{"L": 5, "bogus": 1}"#).is_err());
        assert_eq!(Settings::from_json(r#"{"L": 5, "gamma_u": 3}"#).unwrap().l, Some(5));
    }

    #[test]
    fn flags_win_over_file() {
        let file = Settings::from_json(r#"{"L": 5, "beta": 2}"#).unwrap();
        let flags = Settings { l: Some(9), ..Default::default() };
        let merged = file.overlay(&flags).unwrap();
        assert_eq!((merged.l, merged.beta), (Some(9), Some(2.0)));
    }

    #[test]
    fn resolution_fills_task_defaults() {
        let s = Settings::default().resolve(Task::Spectrum).unwrap();
        assert_eq!(s.boundary, Some(Boundary::Both));
        assert_eq!(s.n, Some(2));
        assert_eq!(s.weak_gauge.as_deref(), Some(&[0.0; 7][..]));
        let p = Settings { layout: Some(LayoutChoice::Hierarchical), ..Default::default() }.resolve(Task::Profile).unwrap();
        assert_eq!(p.sector, Some(vec![0.0, 0.0]));
        assert!(Settings { n: Some(2), layout: Some(LayoutChoice::Hierarchical), ..Default::default() }.resolve(Task::Spectrum).is_err());
    }

    #[test]
    fn half_unit_conversion() {
        assert_eq!(half_units(&[0.0, -1.5, 2.0], "x").unwrap(), vec![0, -3, 4]);
        assert!(half_units(&[0.3], "x").is_err());
    }
}
