//! Run configuration: a TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use osc_core::fock::InteractionMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Bare,
    Effective,
}

impl From<Mode> for InteractionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Bare => InteractionMode::Bare,
            Mode::Effective => InteractionMode::Effective,
        }
    }
}

/// Symmetric bosons, or one tagged particle plus `N − 1` bosons (needed for
/// single-particle operators).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Symmetric,
    Tagged,
}

/// `separated`: relative levels from the centre-of-mass ground sector plus
/// the exact ladder. `plain`: the whole truncated space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Separated,
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    X1,
    P1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AvgMethod {
    Exact,
    Window,
    Conditioned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Window {
    /// Averaging window `[0, t_max]`.
    pub t_max: f64,
    /// Step; `π/(4 E_max)` when absent.
    pub dt: Option<f64>,
    /// Series output on `n_times` points of `[0, t_end]`.
    pub t_end: f64,
    pub n_times: usize,
}

impl Default for Window {
    fn default() -> Self {
        Window { t_max: 200.0 * std::f64::consts::PI, dt: None, t_end: 20.0 * std::f64::consts::PI, n_times: 2001 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub resonance: f64,
    pub completeness: f64,
    pub cm_tail: f64,
    /// Gate on diagonal operator elements in the condition audit.
    pub diag: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { resonance: 1e-8, completeness: 0.999, cm_tail: 1e-12, diag: 1e-10 }
    }
}

/// Grid for `sweep`. `e_cut_work` and `e_cut_otoc` are aligned with `n`; an
/// empty `e_cut_otoc` skips the commutator average.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub n: Vec<usize>,
    pub g: Vec<f64>,
    pub gamma: Vec<f64>,
    pub e_cut_work: Vec<f64>,
    pub e_cut_otoc: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub g: f64,
    pub gamma: f64,
    /// Energy cutoff: states with `Σ(n_i + ½) ≤ e_cut`.
    pub e_cut: f64,
    /// Alternative to `e_cut`: number of oscillator orbitals.
    pub n_orb: Option<usize>,
    pub mode: Mode,
    pub space: SpaceKind,
    pub route: Route,
    pub ops: [Operator; 2],
    pub method: AvgMethod,
    pub window: Window,
    pub tol: Tolerances,
    pub output_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 2,
            g: 5.0,
            gamma: 0.5,
            e_cut: 20.0,
            n_orb: None,
            mode: Mode::Effective,
            space: SpaceKind::Tagged,
            route: Route::Separated,
            ops: [Operator::X1, Operator::X1],
            method: AvgMethod::Exact,
            window: Window::default(),
            tol: Tolerances::default(),
            output_dir: PathBuf::from("out"),
            cache_dir: None,
            sweep: SweepConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Cutoff in use: from `n_orb` when given.
    pub fn effective_e_cut(&self) -> f64 {
        match self.n_orb {
            Some(k) => 0.5 * self.n as f64 + (k as f64 - 1.0),
            None => self.e_cut,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(1..=6).contains(&self.n) {
            return Err(format!("N = {} outside [1, 6]", self.n));
        }
        if !(self.g.is_finite() && self.g >= 0.0) {
            return Err(format!("g = {} must be finite and non-negative", self.g));
        }
        if !(0.25..=4.0).contains(&self.gamma) {
            return Err(format!("gamma = {} outside [0.25, 4]", self.gamma));
        }
        if self.n_orb == Some(0) {
            return Err("n_orb must be positive".into());
        }
        if !(self.effective_e_cut() >= 0.5 * self.n as f64) {
            return Err(format!("e_cut = {} below the ground energy {}", self.effective_e_cut(), 0.5 * self.n as f64));
        }
        let w = &self.window;
        if !(w.t_max > 0.0 && w.t_end >= 0.0 && w.n_times >= 1) || w.dt.is_some_and(|d| !(d > 0.0)) {
            return Err("window needs t_max > 0, t_end ≥ 0, n_times ≥ 1 and dt > 0".into());
        }
        let t = &self.tol;
        if !(t.resonance >= 0.0 && t.cm_tail > 0.0 && t.diag > 0.0 && (0.0..=1.0).contains(&t.completeness)) {
            return Err("tolerances out of range".into());
        }
        let s = &self.sweep;
        if s.e_cut_work.len() != s.n.len() || !(s.e_cut_otoc.is_empty() || s.e_cut_otoc.len() == s.n.len()) {
            return Err("sweep cutoffs must be aligned with sweep.n".into());
        }
        for &n in &s.n {
            if !(1..=6).contains(&n) {
                return Err(format!("sweep N = {n} outside [1, 6]"));
            }
        }
        if s.g.iter().any(|g| !(g.is_finite() && *g >= 0.0)) || s.gamma.iter().any(|x| !(0.25..=4.0).contains(x)) {
            return Err("sweep g or gamma out of range".into());
        }
        Ok(())
    }

    pub fn needs_tagged(&self) -> bool {
        self.space == SpaceKind::Tagged
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.g = 0.1 + 0.2;
        c.gamma = 1.0 / 3.0;
        c.n_orb = Some(12);
        c.window.dt = Some(std::f64::consts::PI / 97.0);
        c.sweep = SweepConfig { n: vec![2, 3], g: vec![5.0], gamma: vec![0.4, 0.5], e_cut_work: vec![30.0, 36.5], e_cut_otoc: vec![] };
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        c.gamma = 5.0;
        assert!(c.validate().is_err());
        c.gamma = 0.5;
        c.n = 7;
        assert!(c.validate().is_err());
        c.n = 2;
        c.g = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("n = 2\nfoo = 1\n").is_err());
        let c: RunConfig = toml::from_str("n = 3\nmode = \"bare\"\nops = [\"x1\", \"p1\"]\n[tol]\nresonance = 1e-9\n").unwrap();
        assert_eq!(c.mode, Mode::Bare);
        assert_eq!(c.ops, [Operator::X1, Operator::P1]);
        assert_eq!(c.tol.resonance, 1e-9);
        assert_eq!(c.tol.completeness, 0.999);
    }
}
