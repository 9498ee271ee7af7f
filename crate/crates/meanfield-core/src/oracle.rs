//! Exact `N`-body propagation in the symmetric `M`-mode space, the
//! excitation map `𝔘_{N,φ}` and convergence-rate measurements.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::coeffs::TaylorTable;
use crate::error::{Error, Result};
use crate::fock::{build_excitation_hamiltonian, FockBasis};
use crate::hierarchy::{evolve_corrections_ode, CorrectionHierarchy, InitialDataSpec};
use crate::integrate::{fit_slope, rk4_step, Stage};
use crate::kernels::KernelTrajectory;
use crate::lattice::{evolve_hartree, CondensateTrajectory, LatticeConfig};
use crate::linalg::{vdot, vnorm, CMat, C64, I, ZERO};
use crate::sparse::{expm_multiply, Csr};

/// Largest `N`-body dimension the oracle accepts.
pub const NBODY_MAX_DIM: usize = 20_000;

/// Occupation basis of the `N`-particle symmetric space over `M` modes.
#[derive(Debug, Clone)]
pub struct NBodyBasis {
    pub n: usize,
    inner: FockBasis,
}

impl NBodyBasis {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        let dim = crate::fock::choose(n + m - 1, m - 1);
        if dim > NBODY_MAX_DIM {
            return Err(Error::Resource(format!("N-body dimension {dim} exceeds {NBODY_MAX_DIM}")));
        }
        Ok(NBodyBasis { n, inner: FockBasis::with_sectors(m, n, n)? })
    }

    pub fn m(&self) -> usize {
        self.inner.m()
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn occupation(&self, i: usize) -> &[u16] {
        self.inner.occupation(i)
    }

    pub fn index_of(&self, occ: &[u16]) -> Option<usize> {
        self.inner.index_of(occ)
    }

    /// Sparse matrix of a number-conserving operator given as words of slot
    /// codes (rightmost acts first), built directly on occupation tuples.
    pub fn operator(&self, terms: &[(C64, Vec<usize>)]) -> Csr {
        let m = self.m();
        let dim = self.dim();
        let mut cols: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        let mut occ: Vec<u16> = vec![0; m];
        for (j, col) in cols.iter_mut().enumerate() {
            'term: for (c, word) in terms {
                occ.copy_from_slice(self.occupation(j));
                let mut amp = 1.0;
                for &s in word.iter().rev() {
                    if s < m {
                        if occ[s] == 0 {
                            continue 'term;
                        }
                        amp *= libm::sqrt(occ[s] as f64);
                        occ[s] -= 1;
                    } else {
                        occ[s - m] += 1;
                        amp *= libm::sqrt(occ[s - m] as f64);
                    }
                }
                if let Some(i) = self.index_of(&occ) {
                    col.push((i, c * amp));
                }
            }
        }
        Csr::from_columns(dim, &cols)
    }

    /// `dΓ(A)` on the `N`-particle space.
    pub fn second_quantize(&self, a: &CMat) -> Csr {
        let m = self.m();
        let mut terms = Vec::with_capacity(m * m);
        for x in 0..m {
            for y in 0..m {
                terms.push((a[(x, y)], vec![m + x, y]));
            }
        }
        self.operator(&terms)
    }

    /// `φ^{⊗N}` for an orthonormal-basis `φ`.
    pub fn product_state(&self, phi: &[C64]) -> Vec<C64> {
        let a = rotation_generator(phi);
        let mut e = vec![ZERO; self.dim()];
        let mut occ = vec![0u16; self.m()];
        occ[0] = self.n as u16;
        e[self.index_of(&occ).unwrap()] = C64::new(1.0, 0.0);
        expm_multiply(&self.second_quantize(&a), 1.0, &e)
    }

    /// `γ(x,y) = ⟨Ψ, b†_y b_x Ψ⟩ / N`
    pub fn one_body_rdm(&self, psi: &[C64]) -> CMat {
        let m = self.m();
        let nf = self.n as f64;
        CMat::from_fn(m, m, |x, y| {
            let op = self.operator(&[(C64::new(1.0, 0.0), vec![m + y, x])]);
            vdot(psi, &op.mul_vec(psi)) / nf
        })
    }
}

/// `H^N = Σ D b†b + (λ/2) Σ v(x-y) b†_x b†_y b_y b_x` with `λ = 1/(N-1)`.
pub fn nbody_hamiltonian(cfg: &LatticeConfig, nb: &NBodyBasis) -> Result<Csr> {
    if nb.n < 2 {
        return Err(Error::Config(format!("particle number must be at least 2, got {}", nb.n)));
    }
    let m = cfg.m;
    let lam = 1.0 / (nb.n as f64 - 1.0);
    let d = cfg.laplacian();
    let v = cfg.potential_matrix();
    let mut terms = Vec::new();
    for x in 0..m {
        for y in 0..m {
            if d[(x, y)] != ZERO {
                terms.push((d[(x, y)], vec![m + x, y]));
            }
            if v[(x, y)] != ZERO {
                terms.push((v[(x, y)] * (0.5 * lam), vec![m + x, m + y, y, x]));
            }
        }
    }
    Ok(nb.operator(&terms))
}

/// `e^{-iHt}Ψ_0` at each requested time.
pub fn evolve_nbody(psi0: &[C64], h: &Csr, times: &[f64]) -> Result<Vec<Vec<C64>>> {
    let n0 = vnorm(psi0);
    if (n0 - 1.0).abs() > 1e-10 {
        return Err(Error::Usage(format!("N-body initial state has norm {n0}")));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut cur = psi0.to_vec();
    let mut t = 0.0;
    for &s in times {
        cur = expm_multiply(h, s - t, &cur);
        t = s;
        let drift = (vnorm(&cur) - 1.0).abs();
        if drift > 1e-9 {
            return Err(Error::Invariant(format!("N-body norm drift {drift:.2e}")));
        }
        out.push(cur.clone());
    }
    Ok(out)
}

/// Hermitian `A` with `e^{-iA} e_0 = φ`, acting as a rotation in the plane
/// of `e_0` and `φ` times a phase.
pub fn rotation_generator(phi: &[C64]) -> CMat {
    let m = phi.len();
    let c = phi[0].norm();
    let theta = if c > 0.0 { phi[0].arg() } else { 0.0 };
    let ph = C64::from_polar(1.0, -theta);
    let mut u: Vec<C64> = phi.iter().map(|z| z * ph).collect();
    u[0] = ZERO;
    let s = vnorm(&u);
    let mut a = CMat::identity(m).scale(C64::new(-theta, 0.0));
    if s > 1e-14 {
        for z in u.iter_mut() {
            *z /= s;
        }
        let beta = libm::atan2(s, c);
        // G = u e_0† - e_0 u†, A = -θ + iβG
        for x in 0..m {
            a[(x, 0)] += I * beta * u[x];
            a[(0, x)] -= I * beta * u[x].conj();
        }
    }
    a
}

/// `𝔘_{N,φ}Ψ`: the `k`-excitation component is the part of `Ψ` with
/// `N-k` particles in `φ`, re-expressed on `φ^⊥`. Returns the excitation
/// vector and the norm lost above the Fock cutoff.
pub fn excitation_map(psi: &[C64], phi: &[C64], nb: &NBodyBasis, fock: &FockBasis) -> (Vec<C64>, f64) {
    let a = rotation_generator(phi);
    let rotated = expm_multiply(&nb.second_quantize(&a), -1.0, psi);
    let mut chi = vec![ZERO; fock.dim()];
    let mut lost = 0.0;
    let mut occ = vec![0u16; nb.m()];
    for (i, z) in rotated.iter().enumerate() {
        occ.copy_from_slice(nb.occupation(i));
        occ[0] = 0;
        match fock.index_of(&occ) {
            Some(j) => chi[j] = *z,
            None => lost += z.norm_sqr(),
        }
    }
    (expm_multiply(&fock.second_quantize(&a), 1.0, &chi), libm::sqrt(lost))
}

/// `𝔘*_{N,φ}Χ` applied to the sectors `≤ N`; returns the state and the
/// norm of the discarded parts (sectors above `N` and any component along
/// `φ`).
pub fn excitation_map_inverse(chi: &[C64], phi: &[C64], nb: &NBodyBasis, fock: &FockBasis) -> (Vec<C64>, f64) {
    let a = rotation_generator(phi);
    let rotated = expm_multiply(&fock.second_quantize(&a), -1.0, chi);
    let mut psi = vec![ZERO; nb.dim()];
    let mut lost = 0.0;
    let mut occ = vec![0u16; nb.m()];
    for (j, z) in rotated.iter().enumerate() {
        let o = fock.occupation(j);
        let k = fock.excitations(j);
        if o[0] != 0 || k > nb.n {
            lost += z.norm_sqr();
            continue;
        }
        occ.copy_from_slice(o);
        occ[0] = (nb.n - k) as u16;
        psi[nb.index_of(&occ).unwrap()] = *z;
    }
    (expm_multiply(&nb.second_quantize(&a), 1.0, &psi), libm::sqrt(lost))
}

/// Shared inputs of the oracle comparisons: trajectory, kernels and the
/// hierarchy on a Fock space of cutoff `K`.
#[derive(Debug, Clone)]
pub struct OracleContext {
    pub cfg: LatticeConfig,
    pub traj: CondensateTrajectory,
    pub kernels: KernelTrajectory,
    pub basis: FockBasis,
    pub init: InitialDataSpec,
    pub hier: CorrectionHierarchy,
    /// Grid index of the evaluation time.
    pub t_index: usize,
}

impl OracleContext {
    pub fn new(cfg: &LatticeConfig, init: &InitialDataSpec, cutoff: usize, order: usize, t_eval: f64) -> Result<Self> {
        let cfg = cfg.with_time(cfg.dt, t_eval);
        let traj = evolve_hartree(&cfg.default_condensate(), &cfg)?;
        let kernels = KernelTrajectory::build(&traj, &cfg)?;
        let basis = FockBasis::new(cfg.m, cutoff)?;
        let table = TaylorTable::new(order / 2 + 1);
        let t_index = traj.index_of(t_eval)?;
        let hier = evolve_corrections_ode(init, &kernels, &basis, order, &table, t_index.max(1))?;
        Ok(OracleContext { cfg, traj, kernels, basis, init: init.clone(), hier, t_index })
    }

    pub fn lambda(n: usize) -> f64 {
        1.0 / (n as f64 - 1.0)
    }

    /// `Σ_{ℓ≤a} λ^{ℓ/2} Χ_ℓ` at grid index `k` (must be stored).
    pub fn partial_sum(&self, a: usize, n: usize, k: usize) -> Result<Vec<C64>> {
        let i = self.hier.position(k)?;
        Ok(self.hier.partial_sum(a, Self::lambda(n), i))
    }

    /// Exact run at particle number `n` from the matched initial data of
    /// order `a`.
    pub fn run(&self, n: usize, a: usize) -> Result<NBodyRun> {
        let nb = NBodyBasis::new(self.cfg.m, n)?;
        let fock = FockBasis::new(self.cfg.m, self.basis.cutoff().max(n))?;
        let start = self.basis.embed(&self.partial_sum(a, n, 0)?, &fock);
        let (mut psi0, _) = excitation_map_inverse(&start, &self.kernels.grid[0].phi, &nb, &fock);
        let norm = vnorm(&psi0);
        for z in psi0.iter_mut() {
            *z /= norm;
        }
        let h = nbody_hamiltonian(&self.cfg, &nb)?;
        let t = self.kernels.grid[self.t_index].t;
        let psi_t = evolve_nbody(&psi0, &h, &[t])?.remove(0);
        let (chi_t, lost) = excitation_map(&psi_t, &self.kernels.grid[self.t_index].phi, &nb, &fock);
        Ok(NBodyRun { n, lambda: Self::lambda(n), nbasis: nb, psi_t, fock, chi_t, lost })
    }
}

/// Result of one exact propagation.
#[derive(Debug, Clone)]
pub struct NBodyRun {
    pub n: usize,
    pub lambda: f64,
    pub nbasis: NBodyBasis,
    pub psi_t: Vec<C64>,
    /// Fock space of cutoff `max(K, N)` holding `chi_t`.
    pub fock: FockBasis,
    pub chi_t: Vec<C64>,
    pub lost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorPoint {
    pub n: usize,
    pub lambda: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    pub order: usize,
    pub points: Vec<ErrorPoint>,
    pub slope: f64,
    /// `C` in `error ≈ C λ^slope`.
    pub prefactor: f64,
}

impl ErrorCurve {
    pub fn fit(order: usize, points: Vec<ErrorPoint>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Usage(format!("slope fit needs at least 3 points, got {}", points.len())));
        }
        if points.iter().any(|p| !(p.error > 0.0)) {
            return Err(Error::Numeric("slope fit needs positive errors".into()));
        }
        let lx: Vec<f64> = points.iter().map(|p| libm::log(p.lambda)).collect();
        let ly: Vec<f64> = points.iter().map(|p| libm::log(p.error)).collect();
        let slope = fit_slope(&lx, &ly);
        let n = lx.len() as f64;
        let icpt = (ly.iter().sum::<f64>() - slope * lx.iter().sum::<f64>()) / n;
        Ok(ErrorCurve { order, points, slope, prefactor: libm::exp(icpt) })
    }
}

/// `‖Χ^{≤N}(t) - Σ_{ℓ≤a} λ^{ℓ/2}Χ_ℓ(t)‖` for one exact run.
pub fn norm_error(ctx: &OracleContext, run: &NBodyRun, a: usize) -> Result<f64> {
    let approx = ctx.basis.embed(&ctx.partial_sum(a, run.n, ctx.t_index)?, &run.fock);
    let d: Vec<C64> = run.chi_t.iter().zip(&approx).map(|(x, y)| x - y).collect();
    let e = vnorm(&d);
    Ok(libm::sqrt(e * e + run.lost * run.lost))
}

/// Error curve of order `a` over `nlist`, with matched initial data of the
/// same order.
pub fn norm_error_curve(ctx: &OracleContext, nlist: &[usize], a: usize) -> Result<ErrorCurve> {
    if a > ctx.hier.order() {
        return Err(Error::Usage(format!("hierarchy has order {} < {a}", ctx.hier.order())));
    }
    let mut points = Vec::with_capacity(nlist.len());
    for &n in nlist {
        let run = ctx.run(n, a)?;
        points.push(ErrorPoint { n, lambda: run.lambda, error: norm_error(ctx, &run, a)? });
    }
    ErrorCurve::fit(a, points)
}

/// `max_t ‖𝔘_{N,φ(t)}Ψ^N(t) - Χ(t)‖` with `Χ` integrated under the full
/// excitation Hamiltonian at cutoff `K`, starting from `Χ(0) = 𝔘Ψ^N(0)`.
/// `chi0` defaults to a fixed non-Gaussian excitation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Consistency {
    pub times: Vec<f64>,
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
}

pub fn full_vs_excitation_consistency(
    cfg: &LatticeConfig,
    n: usize,
    cutoff: usize,
    chi0: Option<&[C64]>,
    samples: usize,
) -> Result<Consistency> {
    if cutoff < n {
        return Err(Error::Usage(format!("cutoff {cutoff} is below N = {n}")));
    }
    let traj = evolve_hartree(&cfg.default_condensate(), cfg)?;
    let kernels = KernelTrajectory::build(&traj, cfg)?;
    let fock = FockBasis::new(cfg.m, cutoff)?;
    let nb = NBodyBasis::new(cfg.m, n)?;
    let phi0 = &kernels.grid[0].phi;
    let start = match chi0 {
        Some(c) => c.to_vec(),
        None => default_excitation(phi0, &fock),
    };
    let (psi0, lost) = excitation_map_inverse(&start, phi0, &nb, &fock);
    if lost > 1e-10 || (vnorm(&psi0) - 1.0).abs() > 1e-10 {
        return Err(Error::Usage("initial excitation vector must be normalized, orthogonal to φ and within N".into()));
    }
    let (mut chi, _) = excitation_map(&psi0, phi0, &nb, &fock);
    let h = nbody_hamiltonian(cfg, &nb)?;
    let steps = kernels.steps();
    let every = (steps / samples.max(1)).max(1);
    let mut sample_idx: Vec<usize> = (1..=steps).filter(|k| k % every == 0).collect();
    if sample_idx.last() != Some(&steps) {
        sample_idx.push(steps);
    }
    let times: Vec<f64> = sample_idx.iter().map(|&k| kernels.grid[k].t).collect();
    let exact = evolve_nbody(&psi0, &h, &times)?;
    let mut deviations = Vec::with_capacity(times.len());
    let mut hs = build_excitation_hamiltonian(&kernels.grid[0], n, &fock)?;
    let mut next = 0;
    for k in 0..steps {
        let mid = build_excitation_hamiltonian(&kernels.mid[k], n, &fock)?;
        let end = build_excitation_hamiltonian(&kernels.grid[k + 1], n, &fock)?;
        chi = rk4_step(&chi, kernels.dt, |st, y: &Vec<C64>| {
            let m = match st {
                Stage::Start => &hs,
                Stage::Mid => &mid,
                Stage::End => &end,
            };
            m.mul_vec(y).into_iter().map(|z| z * -I).collect()
        });
        hs = end;
        if next < sample_idx.len() && sample_idx[next] == k + 1 {
            let (ex, _) = excitation_map(&exact[next], &kernels.grid[k + 1].phi, &nb, &fock);
            let d: Vec<C64> = ex.iter().zip(&chi).map(|(x, y)| x - y).collect();
            deviations.push(vnorm(&d));
            next += 1;
        }
    }
    let max_deviation = deviations.iter().cloned().fold(0.0, f64::max);
    Ok(Consistency { times, deviations, max_deviation })
}

/// `(Ω + ½ a†(f)² Ω + ¼ a†(f)a†(g) Ω)` normalized, with `f, g ⊥ φ`.
pub fn default_excitation(phi: &[C64], fock: &FockBasis) -> Vec<C64> {
    let m = fock.m();
    let basis = crate::linalg::complete_basis(phi);
    let f: Vec<C64> = (0..m).map(|x| basis[(x, 1 % m)]).collect();
    let g: Vec<C64> = (0..m).map(|x| basis[(x, (m - 1).max(1))] * C64::new(0.6, 0.8)).collect();
    let create = |v: &[C64], w: &[C64]| {
        let mut out = vec![ZERO; fock.dim()];
        for (x, fx) in w.iter().enumerate() {
            fock.apply_ladder_acc(m + x, *fx, v, &mut out);
        }
        out
    };
    let vac = fock.vacuum();
    let ff = create(&create(&vac, &f), &f);
    let fg = create(&create(&vac, &g), &f);
    let mut v: Vec<C64> = (0..fock.dim()).map(|i| vac[i] + ff[i] * 0.5 + fg[i] * 0.25).collect();
    let n = vnorm(&v);
    for z in v.iter_mut() {
        *z /= n;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Potential;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn cfg(m: usize, g: f64, dt: f64, t: f64) -> LatticeConfig {
        LatticeConfig::new(m, 2.0 * PI, Potential::Cosine { g }, dt, t).unwrap()
    }

    fn phi_of(c: &LatticeConfig) -> Vec<C64> {
        let h = c.h();
        c.default_condensate().iter().map(|z| z * libm::sqrt(h)).collect()
    }

    #[test]
    fn dimension_and_product_state() {
        let nb = NBodyBasis::new(3, 5).unwrap();
        assert_eq!(nb.dim(), 21);
        let c = cfg(3, 1.0, 1e-2, 0.1);
        let phi = phi_of(&c);
        let fock = FockBasis::new(3, 5).unwrap();
        let psi = nb.product_state(&phi);
        let (chi, lost) = excitation_map(&psi, &phi, &nb, &fock);
        assert!(lost < 1e-14);
        let vac = fock.vacuum();
        assert!(vnorm(&crate::linalg::vsub(&chi, &vac)) < 1e-12);
        let g = nb.one_body_rdm(&psi);
        assert!(g.sub(&CMat::outer(&phi, &phi)).max_abs() < 1e-12);
    }

    #[test]
    fn rotation_moves_e0_to_phi() {
        let c = cfg(4, 1.0, 1e-2, 0.1);
        let phi = phi_of(&c);
        let w = crate::linalg::expm(&rotation_generator(&phi).scale(-I));
        for x in 0..4 {
            assert!((w[(x, 0)] - phi[x]).norm() < 1e-13);
        }
        let e0 = {
            let mut v = vec![ZERO; 3];
            v[0] = C64::new(0.0, 1.0);
            v
        };
        let w = crate::linalg::expm(&rotation_generator(&e0).scale(-I));
        assert!((w[(0, 0)] - e0[0]).norm() < 1e-13);
    }

    #[test]
    fn nbody_evolution_conserves_norm_and_energy() {
        let c = cfg(3, 1.5, 1e-2, 1.0);
        let nb = NBodyBasis::new(3, 8).unwrap();
        let h = nbody_hamiltonian(&c, &nb).unwrap();
        assert!(h.hermiticity_defect() < 1e-13);
        let psi0 = nb.product_state(&phi_of(&c));
        let e0 = vdot(&psi0, &h.mul_vec(&psi0)).re;
        for psi in evolve_nbody(&psi0, &h, &[0.3, 0.7, 1.0]).unwrap() {
            assert!((vnorm(&psi) - 1.0).abs() < 1e-9);
            assert!((vdot(&psi, &h.mul_vec(&psi)).re - e0).abs() < 1e-8);
        }
    }

    #[test]
    fn free_product_state_stays_pure() {
        let c = cfg(3, 0.0, 1e-2, 1.0);
        let nb = NBodyBasis::new(3, 6).unwrap();
        let h = nbody_hamiltonian(&c, &nb).unwrap();
        let psi0 = nb.product_state(&phi_of(&c));
        let psi = evolve_nbody(&psi0, &h, &[1.0]).unwrap().remove(0);
        let g = nb.one_body_rdm(&psi);
        let purity = g.matmul(&g).trace().re;
        assert!((purity - 1.0).abs() < 1e-8);
    }

    #[test]
    fn substitution_rule() {
        let c = cfg(3, 1.0, 1e-2, 0.1);
        let phi = phi_of(&c);
        let n = 5;
        let nb = NBodyBasis::new(3, n).unwrap();
        let fock = FockBasis::new(3, n).unwrap();
        let chi = default_excitation(&phi, &fock);
        let (psi, lost) = excitation_map_inverse(&chi, &phi, &nb, &fock);
        assert!(lost < 1e-12);
        let basis = crate::linalg::complete_basis(&phi);
        let f: Vec<C64> = (0..3).map(|x| basis[(x, 2)]).collect();
        let m = 3;
        // ⟨Ψ, a†(f) a(φ) Ψ⟩
        let mut terms = Vec::new();
        for x in 0..m {
            for y in 0..m {
                terms.push((f[x] * phi[y].conj(), vec![m + x, y]));
            }
        }
        let lhs = vdot(&psi, &nb.operator(&terms).mul_vec(&psi));
        // ⟨Χ, a†(f) √(N-𝒩) Χ⟩
        let root = fock.apply_number_fn(|k| libm::sqrt((n as f64 - k as f64).max(0.0)), &chi);
        let mut af = vec![ZERO; fock.dim()];
        for x in 0..m {
            fock.apply_ladder_acc(m + x, f[x], &root, &mut af);
        }
        let rhs = vdot(&chi, &af);
        assert!((lhs - rhs).norm() < 1e-9, "{lhs} vs {rhs}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn excitation_map_is_unitary(seed in proptest::collection::vec(-1.0f64..1.0, 20), n in 2usize..7) {
            let m = 3;
            let raw: Vec<C64> = (0..m).map(|i| C64::new(seed[i] + 0.1, seed[i + 3])).collect();
            let nr = vnorm(&raw);
            let phi: Vec<C64> = raw.iter().map(|z| z / nr).collect();
            let nb = NBodyBasis::new(m, n).unwrap();
            let fock = FockBasis::new(m, n).unwrap();
            let mut psi: Vec<C64> = (0..nb.dim()).map(|i| C64::new(seed[(6 + i) % 20], seed[(7 + 2 * i) % 20])).collect();
            let np = vnorm(&psi);
            for z in psi.iter_mut() { *z /= np; }
            let (chi, lost) = excitation_map(&psi, &phi, &nb, &fock);
            prop_assert!(lost < 1e-12);
            prop_assert!((vnorm(&chi) - 1.0).abs() < 1e-10);
            let (back, lost2) = excitation_map_inverse(&chi, &phi, &nb, &fock);
            prop_assert!(lost2 < 1e-10);
            prop_assert!(vnorm(&crate::linalg::vsub(&back, &psi)) < 1e-10);
            let p = fock.second_quantize(&CMat::outer(&phi, &phi));
            prop_assert!(vdot(&chi, &p.mul_vec(&chi)).re.abs() < 1e-10);
        }
    }

    #[test]
    fn excitation_dynamics_matches_nbody() {
        let c = cfg(2, 1.0, 1e-2, 0.5);
        let r = full_vs_excitation_consistency(&c, 6, 6, None, 5).unwrap();
        let c2 = c.with_time(5e-3, 0.5);
        let r2 = full_vs_excitation_consistency(&c2, 6, 6, None, 5).unwrap();
        assert!(r.max_deviation < 1e-5);
        assert!(r.max_deviation / r2.max_deviation > 8.0);
        let free = full_vs_excitation_consistency(&cfg(2, 0.0, 1e-2, 0.5), 6, 6, None, 5).unwrap();
        assert!(free.max_deviation < 1e-9, "{}", free.max_deviation);
        assert!(matches!(full_vs_excitation_consistency(&c, 6, 5, None, 5), Err(Error::Usage(_))));
    }

    #[test]
    fn vacuum_free_error_vanishes() {
        let c = cfg(2, 0.0, 1e-2, 0.2);
        let ctx = OracleContext::new(&c, &InitialDataSpec::vacuum(2), 8, 1, 0.2).unwrap();
        for a in 0..=1 {
            for n in [4, 8] {
                let run = ctx.run(n, a).unwrap();
                let e = norm_error(&ctx, &run, a).unwrap();
                // only the time-stepping error of the free condensate remains
                assert!(e < 1e-10, "{e}");
            }
        }
    }

    #[test]
    fn error_curve_slopes() {
        let c = cfg(2, 0.5, 1e-2, 0.5);
        let ctx = OracleContext::new(&c, &InitialDataSpec::vacuum(2), 16, 1, 0.5).unwrap();
        let ns = [8, 16, 32];
        let c0 = norm_error_curve(&ctx, &ns, 0).unwrap();
        let c1 = norm_error_curve(&ctx, &ns, 1).unwrap();
        assert!(c0.slope > 0.35);
        assert!(c1.slope > 0.85);
        assert!(c1.slope >= c0.slope);
        assert!(ErrorCurve::fit(0, c0.points[..2].to_vec()).is_err());
    }
}
