//! Periodic one-dimensional lattice and the Hartree equation on it.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::integrate::{rk4_step, Stage};
use crate::linalg::{vdot, vnorm, CMat, C64, ZERO};

/// Even, bounded pair potential sampled on lattice distances.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    /// `v(x) = g (1 + cos(2πx/L))`
    Cosine { g: f64 },
    /// Values `v(i h)` for `i = 0..M`; must satisfy `v(i h) = v((M - i) h)`.
    Table(Vec<f64>),
}

impl Potential {
    pub fn zero() -> Self {
        Potential::Cosine { g: 0.0 }
    }

    /// Coupling scale; the cosine potential is linear in it.
    pub fn sup_norm(&self, m: usize, l: f64) -> f64 {
        (0..m).map(|i| libm::fabs(self.at_distance(i, m, l))).fold(0.0, f64::max)
    }

    /// `v` at the periodic distance `i h`.
    pub fn at_distance(&self, i: usize, m: usize, l: f64) -> f64 {
        let i = i % m;
        match self {
            Potential::Cosine { g } => {
                let x = i as f64 * l / m as f64;
                g * (1.0 + libm::cos(2.0 * PI * x / l))
            }
            Potential::Table(v) => v[i],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeConfig {
    pub m: usize,
    pub l: f64,
    pub potential: Potential,
    pub dt: f64,
    pub t_final: f64,
}

impl LatticeConfig {
    pub fn new(m: usize, l: f64, potential: Potential, dt: f64, t_final: f64) -> Result<Self> {
        let cfg = LatticeConfig { m, l, potential, dt, t_final };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::Config(format!("M must be at least 2, got {}", self.m)));
        }
        if !(self.l > 0.0) || !self.l.is_finite() {
            return Err(Error::Config(format!("L must be positive, got {}", self.l)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= self.dt) {
            return Err(Error::Config(format!("T = {} is shorter than dt = {}", self.t_final, self.dt)));
        }
        let n = self.t_final / self.dt;
        if libm::fabs(n - libm::round(n)) > 1e-9 * n.max(1.0) {
            return Err(Error::Config(format!("T = {} is not a multiple of dt = {}", self.t_final, self.dt)));
        }
        if let Potential::Table(v) = &self.potential {
            if v.len() != self.m {
                return Err(Error::Config(format!("potential table has {} entries, expected {}", v.len(), self.m)));
            }
            for i in 1..self.m {
                if libm::fabs(v[i] - v[self.m - i]) > 1e-12 * (1.0 + libm::fabs(v[i])) {
                    return Err(Error::Config("potential table is not even".into()));
                }
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config("potential table has non-finite entries".into()));
            }
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.l / self.m as f64
    }

    pub fn steps(&self) -> usize {
        libm::round(self.t_final / self.dt) as usize
    }

    pub fn with_time(&self, dt: f64, t_final: f64) -> Self {
        LatticeConfig { dt, t_final, ..self.clone() }
    }

    /// `v(x_i - x_j)` as an `M × M` matrix.
    pub fn potential_matrix(&self) -> CMat {
        let m = self.m;
        CMat::from_fn(m, m, |i, j| C64::new(self.potential.at_distance((i + m - j) % m, m, self.l), 0.0))
    }

    /// Wave numbers `2πk/L` of the lattice plane waves, `k` running over
    /// `-⌈M/2⌉+1 ..= ⌊M/2⌋`.
    pub fn wave_numbers(&self) -> Vec<f64> {
        let m = self.m as i64;
        let lo = -((m + 1) / 2) + 1;
        let hi = m / 2;
        (lo..=hi).map(|k| 2.0 * PI * k as f64 / self.l).collect()
    }

    /// The Fourier-multiplier `-Δ` as a real symmetric matrix.
    pub fn laplacian(&self) -> CMat {
        let m = self.m;
        let ks = self.wave_numbers();
        let m_lo = -(((m as i64) + 1) / 2) + 1;
        CMat::from_fn(m, m, |i, j| {
            let d = i as f64 - j as f64;
            let s: f64 = ks
                .iter()
                .enumerate()
                .map(|(idx, k)| {
                    let mode = (m_lo + idx as i64) as f64;
                    k * k * libm::cos(2.0 * PI * mode * d / m as f64)
                })
                .sum();
            C64::new(s / m as f64, 0.0)
        })
    }

    /// Plane wave `e^{ikx}/√L` sampled at the sites, for mode index `k`.
    pub fn plane_wave(&self, k: i64) -> Vec<C64> {
        let s = 1.0 / libm::sqrt(self.l);
        (0..self.m)
            .map(|i| {
                let x = i as f64 * self.h();
                C64::from_polar(s, 2.0 * PI * k as f64 * x / self.l)
            })
            .collect()
    }

    /// `(1 + ½ e^{2πix/L})` normalized; a generic condensate with a
    /// nonzero interaction response.
    pub fn default_condensate(&self) -> Vec<C64> {
        let raw: Vec<C64> = (0..self.m)
            .map(|i| {
                let x = i as f64 * self.h();
                C64::new(1.0, 0.0) + C64::from_polar(0.5, 2.0 * PI * x / self.l)
            })
            .collect();
        normalize(&raw, self.h())
    }
}

/// Rescales point values so that `h Σ|φ|² = 1`.
pub fn normalize(phi: &[C64], h: f64) -> Vec<C64> {
    let n = libm::sqrt(h) * vnorm(phi);
    phi.iter().map(|z| z / n).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondensateState {
    pub phi: Vec<C64>,
    pub mu: f64,
    pub t: f64,
}

impl CondensateState {
    pub fn new(phi: Vec<C64>, t: f64, cfg: &LatticeConfig) -> Self {
        let mu = mean_field(&phi, cfg).1;
        CondensateState { phi, mu, t }
    }

    /// `h Σ|φ|²`
    pub fn norm_sqr(&self, h: f64) -> f64 {
        h * self.phi.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Values in the orthonormal site basis, `√h φ`.
    pub fn orthonormal(&self, h: f64) -> Vec<C64> {
        let s = libm::sqrt(h);
        self.phi.iter().map(|z| z * s).collect()
    }
}

/// `(v ∗ |φ|²)` at every site together with `μ`.
pub fn mean_field(phi: &[C64], cfg: &LatticeConfig) -> (Vec<f64>, f64) {
    let m = cfg.m;
    let h = cfg.h();
    let dens: Vec<f64> = phi.iter().map(|z| z.norm_sqr()).collect();
    let conv: Vec<f64> = (0..m)
        .map(|x| h * (0..m).map(|y| cfg.potential.at_distance((x + m - y) % m, m, cfg.l) * dens[y]).sum::<f64>())
        .collect();
    let mu = 0.5 * h * conv.iter().zip(&dens).map(|(c, d)| c * d).sum::<f64>();
    (conv, mu)
}

fn check_finite(phi: &[C64]) -> Result<()> {
    if phi.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric("condensate has non-finite entries".into()))
    }
}

/// `-i (-Δ + v∗|φ|² - μ) φ`
pub fn hartree_rhs(state: &CondensateState, cfg: &LatticeConfig) -> Result<Vec<C64>> {
    check_finite(&state.phi)?;
    Ok(rhs_with(&cfg.laplacian(), &state.phi, cfg))
}

fn rhs_with(lap: &CMat, phi: &[C64], cfg: &LatticeConfig) -> Vec<C64> {
    let (conv, mu) = mean_field(phi, cfg);
    let kin = lap.mul_vec(phi);
    kin.iter()
        .zip(phi)
        .zip(&conv)
        .map(|((k, p), c)| C64::new(0.0, -1.0) * (k + p * (c - mu)))
        .collect()
}

/// `⟨φ,-Δφ⟩ + ½ h² Σ v(x-y)|φ(x)|²|φ(y)|²`
pub fn hartree_energy(phi: &[C64], cfg: &LatticeConfig) -> f64 {
    let h = cfg.h();
    let kin = h * vdot(phi, &cfg.laplacian().mul_vec(phi)).re;
    let (_, mu) = mean_field(phi, cfg);
    kin + mu
}

/// States on the grid `k dt` plus the half-step states used as RK4 stages
/// by every downstream integrator.
#[derive(Debug, Clone)]
pub struct CondensateTrajectory {
    pub states: Vec<CondensateState>,
    pub midpoints: Vec<CondensateState>,
    pub dt: f64,
    pub max_norm_drift: f64,
}

impl CondensateTrajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    /// The state an RK4 stage of step `k` is evaluated at.
    pub fn stage(&self, k: usize, stage: Stage) -> &CondensateState {
        match stage {
            Stage::Start => &self.states[k],
            Stage::Mid => &self.midpoints[k],
            Stage::End => &self.states[k + 1],
        }
    }

    /// Grid index of time `t`, which must lie on the grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = libm::round(t / self.dt);
        if k < 0.0 || k as usize >= self.states.len() || libm::fabs(k * self.dt - t) > 1e-9 {
            return Err(Error::Usage(format!("time {t} is not on the trajectory grid")));
        }
        Ok(k as usize)
    }

    /// Every `stride`-th grid state together with its midpoints at the
    /// coarser spacing; `stride` must be even.
    pub fn coarsen(&self, stride: usize) -> Result<CondensateTrajectory> {
        if stride == 0 || stride % 2 != 0 || self.steps() % stride != 0 {
            return Err(Error::Usage(format!("cannot coarsen {} steps by {stride}", self.steps())));
        }
        let states: Vec<_> = self.states.iter().step_by(stride).cloned().collect();
        let midpoints = (0..states.len() - 1).map(|k| self.states[k * stride + stride / 2].clone()).collect();
        Ok(CondensateTrajectory { states, midpoints, dt: self.dt * stride as f64, max_norm_drift: self.max_norm_drift })
    }
}

/// Integrates the Hartree equation with RK4 at step `dt/2`, so that the
/// midpoint of every `dt` step is available.
pub fn evolve_hartree(phi0: &[C64], cfg: &LatticeConfig) -> Result<CondensateTrajectory> {
    cfg.validate()?;
    if phi0.len() != cfg.m {
        return Err(Error::Config(format!("initial condensate has {} entries, expected {}", phi0.len(), cfg.m)));
    }
    check_finite(phi0)?;
    let h = cfg.h();
    let lap = cfg.laplacian();
    let steps = cfg.steps();
    let half = 0.5 * cfg.dt;
    let mut states = Vec::with_capacity(steps + 1);
    let mut midpoints = Vec::with_capacity(steps);
    let mut phi = phi0.to_vec();
    let mut drift: f64 = 0.0;
    states.push(CondensateState::new(phi.clone(), 0.0, cfg));
    for k in 0..2 * steps {
        phi = rk4_step(&phi, half, |_, y| rhs_with(&lap, y, cfg));
        check_finite(&phi)?;
        let t = (k + 1) as f64 * half;
        let st = CondensateState::new(phi.clone(), t, cfg);
        drift = drift.max(libm::fabs(st.norm_sqr(h) - 1.0));
        if k % 2 == 0 {
            midpoints.push(st);
        } else {
            states.push(st);
        }
    }
    Ok(CondensateTrajectory { states, midpoints, dt: cfg.dt, max_norm_drift: drift })
}

/// Ground wave `1/√L`.
pub fn uniform_condensate(cfg: &LatticeConfig) -> Vec<C64> {
    let s = 1.0 / libm::sqrt(cfg.l);
    (0..cfg.m).map(|_| C64::new(s, 0.0)).collect()
}

pub fn is_zero(v: &[C64]) -> bool {
    v.iter().all(|z| *z == ZERO)
}
