//! TOML run configuration.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use meanfield_core::coeffs::{InitialCoefficients, SlotPoly};
use meanfield_core::hierarchy::{InitialDataSpec, Route};
use meanfield_core::lattice::{LatticeConfig, Potential};
use meanfield_core::linalg::{CMat, C64};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RunError};

/// Largest correction order accepted from a configuration file.
pub const MAX_ORDER: usize = 3;

/// A complex number written as `[re, im]`.
pub type Complex = [f64; 2];

fn c64(z: &Complex) -> C64 {
    C64::new(z[0], z[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub lattice: LatticeSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub l: f64,
    /// Strength of `g (1 + cos(2πx/L))`; ignored when `potential` is set.
    #[serde(default)]
    pub g: f64,
    /// Values `v(i h)`, `i = 0..M`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<Vec<f64>>,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t: f64,
}

impl Default for LatticeSection {
    fn default() -> Self {
        LatticeSection { m: 2, l: 2.0 * PI, g: 0.5, potential: None, dt: 1e-3, t: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouteName {
    Ode,
    Duhamel,
    DuhamelFock,
    CTensor,
}

impl RouteName {
    pub fn route(self) -> Route {
        match self {
            RouteName::Ode => Route::Ode,
            RouteName::Duhamel => Route::DuhamelTensor,
            RouteName::DuhamelFock => Route::DuhamelFock,
            RouteName::CTensor => Route::CTensor,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RouteName::Ode => "ode",
            RouteName::Duhamel => "duhamel",
            RouteName::DuhamelFock => "duhamel-fock",
            RouteName::CTensor => "c-tensor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    NormError,
    Depletion,
    Rdm,
    Moments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Correction order `a`.
    pub order: usize,
    /// Fock cutoff `K`.
    pub cutoff: usize,
    pub n_list: Vec<usize>,
    /// Evaluation time of the particle-number sweeps; `T/2` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_eval: Option<f64>,
    pub routes: Vec<RouteName>,
    pub observables: Vec<Observable>,
    pub output: PathBuf,
    pub seed: u64,
    pub workers: usize,
    /// Grid steps between rows of time-series CSVs.
    pub stride: usize,
    /// Number of equally spaced times at which the quadrature routes are compared.
    pub route_samples: usize,
    /// Particle number of the excitation-Hamiltonian consistency run.
    pub consistency_n: usize,
    /// `(ℓ, k)` pairs of the generalized Wick comparison.
    pub wick_pairs: Vec<[usize; 2]>,
    /// Longest ladder word in the generalized Wick comparison.
    pub wick_max_len: usize,
    /// Random points for the square-root remainder check.
    pub taylor_samples: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            order: 2,
            cutoff: 24,
            n_list: vec![8, 16, 32, 64],
            t_eval: None,
            routes: vec![RouteName::Ode, RouteName::Duhamel, RouteName::CTensor],
            observables: vec![Observable::NormError, Observable::Depletion, Observable::Rdm, Observable::Moments],
            output: PathBuf::from("out"),
            seed: 0,
            workers: 1,
            stride: 100,
            route_samples: 2,
            consistency_n: 6,
            wick_pairs: vec![[0, 1], [1, 1], [0, 2]],
            wick_max_len: 2,
            taylor_samples: 64,
        }
    }
}

/// Initial excitation data in the orthonormal site basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    /// Hermitian `A` of the quadratic generator, row-major.
    pub generator_a: Option<Vec<Vec<Complex>>>,
    /// Symmetric `B` of the quadratic generator, row-major.
    pub generator_b: Option<Vec<Vec<Complex>>>,
    pub quasiparticles: Vec<Quasiparticles>,
    pub coefficients: Vec<CoefficientPoly>,
}

/// `c Π_j a†(f_j) Ω`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quasiparticles {
    pub coefficient: Complex,
    pub orbitals: Vec<Vec<Complex>>,
}

/// `𝔞_ℓ` as a sum of ladder words; slot `x` is `a_x`, slot `M + x` is `a†_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientPoly {
    pub order: usize,
    pub terms: Vec<WordTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordTerm {
    pub coefficient: Complex,
    pub word: Vec<usize>,
}

fn matrix(rows: &[Vec<Complex>], m: usize, name: &str) -> Result<CMat> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(RunError::Config(format!("initial.{name} must be {m} x {m}")));
    }
    Ok(CMat::from_fn(m, m, |i, j| c64(&rows[i][j])))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| RunError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn steps(&self) -> usize {
        (self.lattice.t / self.lattice.dt).round() as usize
    }

    pub fn t_eval(&self) -> f64 {
        match self.run.t_eval {
            Some(t) => t,
            None => self.lattice.dt * (self.steps() / 2).max(1) as f64,
        }
    }

    pub fn lattice_config(&self) -> Result<LatticeConfig> {
        let s = &self.lattice;
        let potential = match &s.potential {
            Some(v) => Potential::Table(v.clone()),
            None => Potential::Cosine { g: s.g },
        };
        Ok(LatticeConfig::new(s.m, s.l, potential, s.dt, s.t)?)
    }

    pub fn initial_data(&self) -> Result<InitialDataSpec> {
        let m = self.lattice.m;
        let mut spec = InitialDataSpec::vacuum(m);
        let Some(init) = &self.initial else { return Ok(spec) };
        spec.generator = match (&init.generator_a, &init.generator_b) {
            (None, None) => None,
            (a, b) => {
                let a = a.as_ref().map(|r| matrix(r, m, "generator_a")).transpose()?.unwrap_or_else(|| CMat::zeros(m, m));
                let b = b.as_ref().map(|r| matrix(r, m, "generator_b")).transpose()?.unwrap_or_else(|| CMat::zeros(m, m));
                if a.hermiticity_defect() > 1e-12 {
                    return Err(RunError::Config("initial.generator_a is not Hermitian".into()));
                }
                if b.symmetry_defect() > 1e-12 {
                    return Err(RunError::Config("initial.generator_b is not symmetric".into()));
                }
                Some((a, b))
            }
        };
        for q in &init.quasiparticles {
            if q.orbitals.iter().any(|f| f.len() != m) {
                return Err(RunError::Config(format!("initial.quasiparticles orbitals must have {m} entries")));
            }
            spec.quasiparticles.push((c64(&q.coefficient), q.orbitals.iter().map(|f| f.iter().map(c64).collect()).collect()));
        }
        let top = init.coefficients.iter().map(|c| c.order).max().unwrap_or(0);
        let mut polys = vec![SlotPoly::zero(m); top];
        for c in &init.coefficients {
            if c.order == 0 || c.order > self.run.order {
                return Err(RunError::Config(format!("initial.coefficients order {} is outside 1..={}", c.order, self.run.order)));
            }
            if c.terms.iter().any(|t| t.word.iter().any(|&s| s >= 2 * m)) {
                return Err(RunError::Config(format!("initial.coefficients slot codes must be below {}", 2 * m)));
            }
            let terms: Vec<(C64, Vec<usize>)> = c.terms.iter().map(|t| (c64(&t.coefficient), t.word.clone())).collect();
            polys[c.order - 1].add_scaled_c(C64::new(1.0, 0.0), &SlotPoly::from_terms(m, &terms));
        }
        spec.a_coeffs = InitialCoefficients { m, polys };
        if !spec.a_coeffs.respects_parity() {
            return Err(RunError::Config("initial.coefficients mix word lengths of the wrong parity".into()));
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let lat = &self.lattice;
        if !(lat.g >= 0.0 && lat.g.is_finite()) {
            return Err(RunError::Config(format!("g must be non-negative, got {}", lat.g)));
        }
        self.lattice_config()?;
        let r = &self.run;
        if r.order > MAX_ORDER {
            return Err(RunError::Config(format!("order = {} exceeds the supported maximum {MAX_ORDER}", r.order)));
        }
        let spec = self.initial_data()?;
        let need = 3 * r.order + spec.quasiparticle_count() + 2;
        if r.cutoff < need {
            return Err(RunError::Config(format!("cutoff = {} is below 3a + ν + 2 = {need}", r.cutoff)));
        }
        if r.n_list.iter().any(|&n| n < 2) {
            return Err(RunError::Config("n_list entries must be at least 2".into()));
        }
        if r.workers == 0 || r.stride == 0 || r.route_samples == 0 || r.taylor_samples == 0 {
            return Err(RunError::Config("workers, stride, route_samples and taylor_samples must be positive".into()));
        }
        if r.consistency_n < 2 {
            return Err(RunError::Config("consistency_n must be at least 2".into()));
        }
        let t = self.t_eval();
        let k = t / lat.dt;
        if !(t > 0.0 && t <= lat.t + 1e-12) || (k - k.round()).abs() > 1e-9 * k.max(1.0) {
            return Err(RunError::Config(format!("t_eval = {t} must be a grid time in (0, T]")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn toml_round_trip(m in 2usize..12, g in 0.0f64..5.0, steps in prop_oneof![Just(1usize), 1usize..400], order in 0usize..=3,
                           extra in 0usize..5, seed in any::<u64>(), workers in 1usize..9) {
            let mut cfg = RunConfig::default();
            cfg.lattice.m = m;
            cfg.lattice.g = g;
            cfg.lattice.t = steps as f64 * cfg.lattice.dt;
            cfg.run.order = order;
            cfg.run.cutoff = 3 * order + 2 + extra;
            cfg.run.seed = seed;
            cfg.run.workers = workers;
            cfg.validate().unwrap();
            prop_assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        }
    }

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(cfg.steps(), 1000);
        assert!((cfg.t_eval() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = RunConfig::from_toml("[lattice]\nM = 2\nL = 1.0\ndt = 0.1\nT = 1.0\nbogus = 3\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("bogus"), "{e}");
        let e = RunConfig::from_toml("[runn]\n").unwrap_err();
        assert!(e.to_string().contains("runn"), "{e}");
    }

    #[test]
    fn size_rules() {
        let e = RunConfig::from_toml("[run]\norder = 4\ncutoff = 40\n").unwrap_err();
        assert!(e.to_string().contains("order"));
        let e = RunConfig::from_toml("[run]\norder = 2\ncutoff = 7\n").unwrap_err();
        assert!(e.to_string().contains("cutoff"));
        RunConfig::from_toml("[run]\norder = 2\ncutoff = 8\n").unwrap();
        let q = "[run]\ncutoff = 8\n[[initial.quasiparticles]]\ncoefficient = [1.0, 0.0]\norbitals = [[[0.7071067811865476, 0.0], [-0.7071067811865476, 0.0]]]\n";
        assert!(RunConfig::from_toml(q).is_err());
        RunConfig::from_toml(&q.replace("cutoff = 8", "cutoff = 9")).unwrap();
    }

    #[test]
    fn lattice_checks() {
        assert!(RunConfig::from_toml("[lattice]\nM = 2\nL = 1.0\ndt = 0.3\nT = 1.0\n").is_err());
        assert!(RunConfig::from_toml("[lattice]\nM = 2\nL = -1.0\ndt = 0.1\nT = 1.0\n").is_err());
        assert!(RunConfig::from_toml("[lattice]\nM = 3\nL = 1.0\ndt = 0.1\nT = 1.0\npotential = [1.0, 0.5, 0.2]\n").is_err());
        let cfg = RunConfig::from_toml("[lattice]\nM = 3\nL = 1.0\ndt = 0.1\nT = 1.0\npotential = [1.0, 0.5, 0.5]\n").unwrap();
        assert!(matches!(cfg.lattice_config().unwrap().potential, Potential::Table(_)));
        assert!(RunConfig::from_toml("[run]\nt_eval = 0.4005\n").is_err());
    }

    #[test]
    fn initial_coefficients() {
        let ok = "[[initial.coefficients]]\norder = 1\nterms = [{ coefficient = [0.1, 0.0], word = [2] }]\n";
        let spec = RunConfig::from_toml(ok).unwrap().initial_data().unwrap();
        assert_eq!(spec.a_coeffs.polys.len(), 1);
        let bad = ok.replace("word = [2]", "word = [2, 3]");
        assert!(RunConfig::from_toml(&bad).is_err());
        let bad = ok.replace("word = [2]", "word = [4]");
        assert!(RunConfig::from_toml(&bad).is_err());
        let gen = "[initial]\ngenerator_b = [[[0.1, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]\ngenerator_a = [[[0.0, 0.0], [0.0, 1.0]], [[0.0, 0.0], [0.0, 0.0]]]\n";
        assert!(RunConfig::from_toml(gen).is_err());
    }
}
