//! Correlation-function series, condensate depletion, the one-body reduced
//! density matrix expansion and the `β₀,₁` equation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::bogomap::{pde_rhs, TwoPointPair};
use crate::coeffs::TaylorTable;
use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::hierarchy::CorrectionHierarchy;
use crate::integrate::rk4_step;
use crate::kernels::{KernelSet, KernelTrajectory};
use crate::linalg::{trace_norm_hermitian, vdot, CMat, C64, I, ZERO};
use crate::sparse::Csr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesMode {
    /// Every order `ℓ ≤ a` weighted by `λ^{ℓ/2}`.
    General,
    /// Only total orders of the parity of `n + p`, weighted by integer or
    /// half-integer powers of `λ`.
    Split,
}

/// `Σ_m ⟨B, a†…a†a…a⟩_{m,ℓ-m}` for each total order `ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub mode: SeriesMode,
    pub n: usize,
    pub p: usize,
    pub a: usize,
    pub per_order: Vec<C64>,
    /// Largest contribution of the parity that the split mode drops.
    pub dropped: f64,
}

impl CorrelationSeries {
    /// Total orders and their `λ` exponents that enter the partial sum.
    pub fn terms(&self) -> Vec<(usize, f64)> {
        match self.mode {
            SeriesMode::General => (0..=self.a).map(|l| (l, l as f64 / 2.0)).collect(),
            SeriesMode::Split if (self.n + self.p) % 2 == 0 => (0..=self.a).map(|l| (2 * l, l as f64)).collect(),
            SeriesMode::Split => (0..self.a).map(|l| (2 * l + 1, l as f64 + 0.5)).collect(),
        }
    }

    pub fn partial_sum(&self, lambda: f64) -> C64 {
        self.terms().iter().map(|&(l, e)| self.per_order[l] * libm::pow(lambda, e)).sum()
    }
}

/// `Σ B(x;y) a†_{x1}…a†_{xn} a_{y1}…a_{yp}`; `B` is indexed with `x1`
/// most significant and `y_p` least.
pub fn correlation_operator(basis: &FockBasis, b: &[C64], n: usize, p: usize) -> Result<Csr> {
    let m = basis.m();
    let len = m.pow((n + p) as u32);
    if b.len() != len {
        return Err(Error::Usage(format!("kernel has {} entries, expected {len}", b.len())));
    }
    let mut terms = Vec::new();
    for (idx, c) in b.iter().enumerate() {
        if *c == ZERO {
            continue;
        }
        let mut word = vec![0; n + p];
        let mut r = idx;
        for j in (0..n + p).rev() {
            let x = r % m;
            r /= m;
            word[j] = if j < n { m + x } else { x };
        }
        terms.push((*c, word));
    }
    Ok(basis.poly_matrix(&terms))
}

/// Per-order contributions at stored time `i` up to the total order the
/// mode needs for `a`.
pub fn correlation_series(
    hier: &CorrectionHierarchy,
    i: usize,
    basis: &FockBasis,
    b: &[C64],
    n: usize,
    p: usize,
    a: usize,
    mode: SeriesMode,
) -> Result<CorrelationSeries> {
    let need = match mode {
        SeriesMode::General => a,
        SeriesMode::Split => 2 * a,
    };
    if hier.order() < need {
        return Err(Error::Usage(format!("series needs hierarchy order {need}, have {}", hier.order())));
    }
    let op = correlation_operator(basis, b, n, p)?;
    let chis = &hier.chis[i];
    let applied: Vec<Vec<C64>> = chis[..=need].iter().map(|v| op.mul_vec(v)).collect();
    let per_order: Vec<C64> =
        (0..=need).map(|l| (0..=l).map(|m| vdot(&chis[m], &applied[l - m])).sum()).collect();
    let dropped = match mode {
        SeriesMode::General => 0.0,
        SeriesMode::Split => (0..=need).filter(|l| (l + n + p) % 2 == 1).map(|l| per_order[l].norm()).fold(0.0, f64::max),
    };
    Ok(CorrelationSeries { mode, n, p, a, per_order, dropped })
}

/// `⟨Χ^{≤N}, O_B Χ^{≤N}⟩` for an exact excitation vector.
pub fn exact_correlation(chi: &[C64], basis: &FockBasis, b: &[C64], n: usize, p: usize) -> Result<C64> {
    Ok(vdot(chi, &correlation_operator(basis, b, n, p)?.mul_vec(chi)))
}

/// Depletion orders `Σ_{m≤2j} ⟨Χ_m, 𝒩 Χ_{2j-m}⟩` for `j ≤ a`.
pub fn depletion_series(hier: &CorrectionHierarchy, i: usize, basis: &FockBasis, a: usize) -> Result<Vec<f64>> {
    if hier.order() < 2 * a {
        return Err(Error::Usage(format!("depletion to order {a} needs hierarchy order {}", 2 * a)));
    }
    let chis = &hier.chis[i];
    let nchi: Vec<Vec<C64>> = chis[..=2 * a].iter().map(|v| basis.apply_number_fn(|k| k as f64, v)).collect();
    Ok((0..=a).map(|j| (0..=2 * j).map(|m| vdot(&chis[m], &nchi[2 * j - m]).re).sum()).collect())
}

#[derive(Debug, Clone)]
pub struct RdmExpansion {
    pub t: f64,
    pub gammas: Vec<CMat>,
    pub exact: Option<CMat>,
    /// `⟨a⟩_{0,1} + ⟨a⟩_{1,0}` from the hierarchy.
    pub beta01: Vec<C64>,
    /// `φβ̄ + βφ̄ + γ_{Χ0} - Tr γ_{Χ0} |φ⟩⟨φ|` with the hierarchy `β`.
    pub gamma1_closed: CMat,
}

impl RdmExpansion {
    pub fn partial_sum(&self, a: usize, lambda: f64) -> CMat {
        let m = self.gammas[0].rows();
        let mut s = CMat::zeros(m, m);
        for (l, g) in self.gammas.iter().enumerate().take(a + 1) {
            s.axpy(C64::new(libm::pow(lambda, l as f64), 0.0), g);
        }
        s
    }

    /// `Tr|γ_Ψ - Σ_{ℓ≤a} λ^ℓ γ_ℓ|`
    pub fn trace_residual(&self, a: usize, lambda: f64) -> Result<f64> {
        let exact = self.exact.as_ref().ok_or_else(|| Error::Usage("no exact density matrix attached".into()))?;
        Ok(trace_norm_hermitian(&exact.sub(&self.partial_sum(a, lambda))))
    }
}

/// `γ_ℓ^{(1)}` for `ℓ ≤ a` at stored time `i`, with `φ` the orthonormal
/// condensate at that time.
pub fn rdm_expansion(
    hier: &CorrectionHierarchy,
    i: usize,
    phi: &[C64],
    basis: &FockBasis,
    a: usize,
    table: &TaylorTable,
    exact: Option<CMat>,
) -> Result<RdmExpansion> {
    let need = (2 * a).saturating_sub(1).max(1);
    if hier.order() < need {
        return Err(Error::Usage(format!("density expansion to order {a} needs hierarchy order {need}")));
    }
    if table.max < a + 1 {
        return Err(Error::Usage("Taylor table too short".into()));
    }
    let m = basis.m();
    let chis = &hier.chis[i];
    let ann: Vec<Vec<Vec<C64>>> = chis[..=need].iter().map(|v| (0..m).map(|x| basis.apply_ladder(x, v)).collect()).collect();
    let pow = |k: usize, v: &[C64]| basis.apply_number_fn(|j| libm::pow(j as f64 - 1.0, k as f64), v);
    let number = |l: usize, r: usize| vdot(&chis[l], &basis.apply_number_fn(|j| j as f64, &chis[r]));
    let pp = CMat::outer(phi, phi);
    let mut gammas = vec![pp.clone()];
    for l in 1..=a {
        let mut g = CMat::zeros(m, m);
        for mm in 1..=l {
            for k in 0..=l - mm {
                let c = table.ctilde2(l - mm, k);
                for n in 0..2 * mm {
                    let r = 2 * mm - n - 1;
                    // ⟨(𝒩-1)^k a_x⟩_{n,r}
                    let left = pow(k, &chis[n]);
                    let ax: Vec<C64> = (0..m).map(|x| vdot(&left, &ann[r][x])).collect();
                    // ⟨a†_y (𝒩-1)^k⟩_{n,r}
                    let right = pow(k, &chis[r]);
                    let ay: Vec<C64> = (0..m).map(|y| vdot(&ann[n][y], &right)).collect();
                    for x in 0..m {
                        for y in 0..m {
                            g[(x, y)] += (phi[x] * ay[y] + ax[x] * phi[y].conj()) * c;
                        }
                    }
                }
            }
            let c = table.ctilde(l - mm);
            for n in 0..=2 * mm - 2 {
                let r = 2 * mm - n - 2;
                let nn = number(n, r);
                for x in 0..m {
                    for y in 0..m {
                        g[(x, y)] += (vdot(&ann[n][y], &ann[r][x]) - pp[(x, y)] * nn) * c;
                    }
                }
            }
        }
        gammas.push(g);
    }
    let beta01: Vec<C64> = (0..m).map(|x| vdot(&chis[0], &ann[1][x]) + vdot(&chis[1], &ann[0][x])).collect();
    let pair = basis.two_point(&chis[0], hier.times[i]);
    let gamma1_closed = gamma1_closed_form(phi, &beta01, &pair.gamma);
    Ok(RdmExpansion { t: hier.times[i], gammas, exact, beta01, gamma1_closed })
}

/// `|φ⟩⟨β| + |β⟩⟨φ| + γ - (Tr γ)|φ⟩⟨φ|`
pub fn gamma1_closed_form(phi: &[C64], beta: &[C64], gamma: &CMat) -> CMat {
    let tr = gamma.trace();
    CMat::outer(phi, beta).add(&CMat::outer(beta, phi)).add(gamma).sub(&CMat::outer(phi, phi).scale(tr))
}

fn beta_rhs(k: &KernelSet, g: &CMat, a: &CMat, beta: &[C64]) -> Vec<C64> {
    let m = k.m;
    let hk = k.h_plus_k1();
    let mut out = hk.mul_vec(beta);
    let bbar: Vec<C64> = beta.iter().map(|z| z.conj()).collect();
    for (o, z) in out.iter_mut().zip(k.k2.mul_vec(&bbar)) {
        *o += z;
    }
    for x in 0..m {
        let mut s = ZERO;
        for y1 in 0..m {
            for y2 in 0..m {
                s += (k.k3_at(x, y1, y2) + k.k3_at(y1, x, y2)) * g[(y2, y1)];
                s += k.k3_at(y1, y2, x).conj() * a[(y1, y2)];
            }
        }
        out[x] += s;
    }
    out.into_iter().map(|z| z * -I).collect()
}

/// Integrates `β₀,₁` jointly with `(γ, α)` of `Χ₀` along the kernels.
pub fn beta01_pde(init: &TwoPointPair, beta0: &[C64], kernels: &KernelTrajectory) -> Result<Vec<Vec<C64>>> {
    if beta0.len() != kernels.m() || init.m() != kernels.m() {
        return Err(Error::Usage("initial data do not match the number of modes".into()));
    }
    let mut cur = (init.gamma.clone(), init.alpha.clone(), beta0.to_vec());
    let mut out = vec![cur.2.clone()];
    for k in 0..kernels.steps() {
        cur = rk4_step(&cur, kernels.dt, |st, y: &(CMat, CMat, Vec<C64>)| {
            let ks = kernels.stage(k, st);
            let (dg, da) = pde_rhs(ks, &y.0, &y.1);
            (dg, da, beta_rhs(ks, &y.0, &y.1, &y.2))
        });
        if !cur.2.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Numeric(format!("β became non-finite at step {k}")));
        }
        out.push(cur.2.clone());
    }
    Ok(out)
}
