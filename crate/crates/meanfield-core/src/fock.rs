//! Truncated bosonic Fock space over `M` modes.
//!
//! Basis states are occupation tuples ordered by total excitation number
//! and then lexicographically, so the basis with cutoff `K` is a prefix of
//! every basis with a larger cutoff. Creation operators drop components
//! pushed past the cutoff.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::bogomap::{slot, BogoliubovMap, Sign, TwoPointPair};
use crate::coeffs::TaylorTable;
use crate::error::{Error, Result};
use crate::integrate::rk4_step;
use crate::kernels::{KernelSet, KernelTrajectory};
use crate::linalg::{expm, vdot, vnorm, CMat, C64, I, ZERO};
use crate::sparse::Csr;

const NONE: u32 = u32::MAX;

/// Default cap on basis dimensions.
pub const MAX_DIM: usize = 200_000;

#[derive(Debug, Clone)]
pub struct FockBasis {
    m: usize,
    cutoff: usize,
    states: Vec<Vec<u16>>,
    lookup: BTreeMap<Vec<u16>, usize>,
    sector_start: Vec<usize>,
    raise: Vec<u32>,
    lower: Vec<u32>,
}

/// `C(n, k)` as an integer.
pub fn choose(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as usize
}

fn tuples(m: usize, total: usize, prefix: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
    if prefix.len() == m - 1 {
        let mut t = prefix.clone();
        t.push(total as u16);
        out.push(t);
        return;
    }
    for n in (0..=total).rev() {
        prefix.push(n as u16);
        tuples(m, total - n, prefix, out);
        prefix.pop();
    }
}

impl FockBasis {
    pub fn new(m: usize, cutoff: usize) -> Result<Self> {
        Self::with_sectors(m, 0, cutoff)
    }

    /// Only the states with `lo ≤ Σn ≤ hi`.
    pub(crate) fn with_sectors(m: usize, lo: usize, cutoff: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("Fock space needs at least one mode".into()));
        }
        let dim: usize = (lo..=cutoff).map(|k| choose(m + k - 1, k)).sum();
        if dim > MAX_DIM {
            return Err(Error::Resource(format!("Fock dimension {dim} exceeds the cap {MAX_DIM}")));
        }
        let mut states = Vec::with_capacity(dim);
        let mut sector_start = vec![0; cutoff + 2];
        for k in lo..=cutoff {
            sector_start[k] = states.len();
            tuples(m, k, &mut Vec::new(), &mut states);
        }
        sector_start[cutoff + 1] = states.len();
        let lookup: BTreeMap<Vec<u16>, usize> = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let mut raise = vec![NONE; dim * m];
        let mut lower = vec![NONE; dim * m];
        let mut buf = vec![0u16; m];
        for (i, s) in states.iter().enumerate() {
            for j in 0..m {
                buf.copy_from_slice(s);
                buf[j] += 1;
                if let Some(&r) = lookup.get(&buf) {
                    raise[i * m + j] = r as u32;
                }
                if s[j] > 0 {
                    buf[j] -= 2;
                    if let Some(&r) = lookup.get(&buf) {
                        lower[i * m + j] = r as u32;
                    }
                }
            }
        }
        Ok(FockBasis { m, cutoff, states, lookup, sector_start, raise, lower })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn occupation(&self, i: usize) -> &[u16] {
        &self.states[i]
    }

    /// Total excitation number of basis state `i`.
    pub fn excitations(&self, i: usize) -> usize {
        self.states[i].iter().map(|&n| n as usize).sum()
    }

    pub fn index_of(&self, occ: &[u16]) -> Option<usize> {
        self.lookup.get(occ).copied()
    }

    /// Index range of the states with exactly `k` excitations.
    pub fn sector(&self, k: usize) -> core::ops::Range<usize> {
        self.sector_start[k]..self.sector_start[k + 1]
    }

    /// Result of applying the ladder operator with slot code `c` to basis
    /// state `i`, or `None` if it vanishes or leaves the truncated space.
    #[inline]
    pub fn apply_slot(&self, c: usize, i: usize) -> Option<(usize, f64)> {
        let m = self.m;
        if c < m {
            let n = self.states[i][c];
            let r = self.lower[i * m + c];
            if n == 0 || r == NONE {
                None
            } else {
                Some((r as usize, libm::sqrt(n as f64)))
            }
        } else {
            let j = c - m;
            let r = self.raise[i * m + j];
            if r == NONE {
                None
            } else {
                Some((r as usize, libm::sqrt((self.states[i][j] + 1) as f64)))
            }
        }
    }

    /// `a^{c} v`
    pub fn apply_ladder(&self, c: usize, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim()];
        self.apply_ladder_acc(c, C64::new(1.0, 0.0), v, &mut out);
        out
    }

    /// `out += s a^{c} v`
    pub fn apply_ladder_acc(&self, c: usize, s: C64, v: &[C64], out: &mut [C64]) {
        for (i, z) in v.iter().enumerate() {
            if *z != ZERO {
                if let Some((r, amp)) = self.apply_slot(c, i) {
                    out[r] += s * z * amp;
                }
            }
        }
    }

    /// `a^{c1} … a^{cn} e_i` as a single basis state and amplitude.
    pub fn apply_word(&self, word: &[usize], i: usize) -> Option<(usize, f64)> {
        let mut cur = i;
        let mut amp = 1.0;
        for &c in word.iter().rev() {
            let (r, a) = self.apply_slot(c, cur)?;
            cur = r;
            amp *= a;
        }
        Some((cur, amp))
    }

    /// `a^{c1} … a^{cn} v`
    pub fn apply_word_vec(&self, word: &[usize], v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim()];
        for (i, z) in v.iter().enumerate() {
            if *z != ZERO {
                if let Some((r, a)) = self.apply_word(word, i) {
                    out[r] += z * a;
                }
            }
        }
        out
    }

    pub fn vacuum(&self) -> Vec<C64> {
        let mut v = vec![ZERO; self.dim()];
        v[0] = C64::new(1.0, 0.0);
        v
    }

    /// `f(n)` for the excitation number of every basis state.
    pub fn number_diag(&self, f: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..=self.cutoff).flat_map(|k| core::iter::repeat(f(k)).take(self.sector(k).len())).collect()
    }

    /// `f(𝒩) v`
    pub fn apply_number_fn(&self, f: impl Fn(usize) -> f64, v: &[C64]) -> Vec<C64> {
        let d = self.number_diag(f);
        v.iter().zip(&d).map(|(z, s)| z * s).collect()
    }

    /// Norm of the component with exactly `k` excitations, for each `k`.
    pub fn sector_norms(&self, v: &[C64]) -> Vec<f64> {
        (0..=self.cutoff).map(|k| vnorm(&v[self.sector(k)])).collect()
    }

    /// `⟨v, 𝒩 v⟩`
    pub fn number_expectation(&self, v: &[C64]) -> f64 {
        (0..=self.cutoff).map(|k| k as f64 * v[self.sector(k)].iter().map(|z| z.norm_sqr()).sum::<f64>()).sum()
    }

    /// `⟨v, (𝒩+1)^b v⟩`
    pub fn number_moment(&self, v: &[C64], b: u32) -> f64 {
        (0..=self.cutoff)
            .map(|k| libm::pow((k + 1) as f64, b as f64) * v[self.sector(k)].iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// Norm of the part whose excitation number has the parity opposite
    /// to `parity`.
    pub fn off_parity_norm(&self, v: &[C64], parity: usize) -> f64 {
        let mut s = 0.0;
        for k in 0..=self.cutoff {
            if k % 2 != parity % 2 {
                s += v[self.sector(k)].iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
        }
        libm::sqrt(s)
    }

    /// Copies `v` into a basis with a larger cutoff.
    pub fn embed(&self, v: &[C64], bigger: &FockBasis) -> Vec<C64> {
        debug_assert!(bigger.m == self.m && bigger.cutoff >= self.cutoff);
        let mut out = vec![ZERO; bigger.dim()];
        out[..v.len()].copy_from_slice(v);
        out
    }

    /// Drops every component above this basis' cutoff.
    pub fn restrict(&self, v: &[C64]) -> Vec<C64> {
        v[..self.dim()].to_vec()
    }

    /// `⟨left, a^{c1} … a^{cn} right⟩`
    pub fn matrix_element(&self, left: &[C64], word: &[usize], right: &[C64]) -> C64 {
        vdot(left, &self.apply_word_vec(word, right))
    }

    /// `γ(x,y) = ⟨v, a†_y a_x v⟩` and `α(x,y) = ⟨v, a_x a_y v⟩`.
    pub fn two_point(&self, v: &[C64], t: f64) -> TwoPointPair {
        let m = self.m;
        let lowered: Vec<Vec<C64>> = (0..m).map(|x| self.apply_ladder(x, v)).collect();
        let gamma = CMat::from_fn(m, m, |x, y| vdot(&lowered[y], &lowered[x]));
        let alpha = CMat::from_fn(m, m, |x, y| vdot(v, &self.apply_ladder(x, &lowered[y])));
        TwoPointPair { gamma, alpha, t }
    }

    /// Sparse matrix of `Σ coeff · word` over the basis, built column by
    /// column.
    pub fn poly_matrix(&self, terms: &[(C64, Vec<usize>)]) -> Csr {
        let cols: Vec<Vec<(usize, C64)>> = (0..self.dim())
            .map(|i| {
                terms
                    .iter()
                    .filter(|(c, _)| *c != ZERO)
                    .filter_map(|(c, w)| self.apply_word(w, i).map(|(r, a)| (r, c * a)))
                    .collect()
            })
            .collect();
        Csr::from_columns(self.dim(), &cols)
    }

    /// The ladder operators `a_j` and `a†_j` as sparse matrices.
    pub fn build_ladder(&self) -> (Vec<Csr>, Vec<Csr>) {
        let m = self.m;
        let one = C64::new(1.0, 0.0);
        let ann = (0..m).map(|j| self.poly_matrix(&[(one, vec![slot(-1, j, m)])])).collect();
        let cre = (0..m).map(|j| self.poly_matrix(&[(one, vec![slot(1, j, m)])])).collect();
        (ann, cre)
    }

    /// `dΓ(A) = Σ A_xy a†_x a_y`
    pub fn second_quantize(&self, a: &CMat) -> Csr {
        let m = self.m;
        let mut terms = Vec::new();
        for x in 0..m {
            for y in 0..m {
                terms.push((a[(x, y)], vec![m + x, y]));
            }
        }
        self.poly_matrix(&terms)
    }

    /// `Σ_c T[c] a^{c1} … a^{cn} v` for a dense tensor over slot codes with
    /// `c1` most significant.
    pub fn apply_slot_tensor(&self, order: usize, values: &[C64], v: &[C64]) -> Vec<C64> {
        let s = 2 * self.m;
        debug_assert_eq!(values.len(), s.pow(order as u32));
        if order == 0 {
            return v.iter().map(|z| z * values[0]).collect();
        }
        let leaves: Vec<Vec<C64>> = (0..s).map(|c| self.apply_ladder(c, v)).collect();
        self.tensor_rec(order, values, &leaves)
    }

    fn tensor_rec(&self, order: usize, values: &[C64], leaves: &[Vec<C64>]) -> Vec<C64> {
        let s = 2 * self.m;
        let mut out = vec![ZERO; self.dim()];
        if values.iter().all(|z| *z == ZERO) {
            return out;
        }
        if order == 1 {
            for (c, w) in values.iter().enumerate() {
                if *w != ZERO {
                    for (o, z) in out.iter_mut().zip(&leaves[c]) {
                        *o += w * z;
                    }
                }
            }
            return out;
        }
        let block = values.len() / s;
        for c in 0..s {
            let inner = self.tensor_rec(order - 1, &values[c * block..(c + 1) * block], leaves);
            if inner.iter().any(|z| *z != ZERO) {
                self.apply_ladder_acc(c, C64::new(1.0, 0.0), &inner, &mut out);
            }
        }
        out
    }
}

/// A Fock-space vector with a time stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    pub coeffs: Vec<C64>,
    pub t: f64,
}

impl FockVector {
    pub fn vacuum(basis: &FockBasis, t: f64) -> Self {
        FockVector { coeffs: basis.vacuum(), t }
    }

    pub fn norm(&self) -> f64 {
        vnorm(&self.coeffs)
    }
}

/// The operators `𝕂^{(0)}, …, 𝕂^{(4)}` and the adjoints of `𝕂^{(2)}`,
/// `𝕂^{(3)}` on a truncated Fock space.
#[derive(Debug, Clone)]
pub struct KPieces {
    pub k0: Csr,
    pub k1: Csr,
    pub k2: Csr,
    pub k2bar: Csr,
    pub k3: Csr,
    pub k3bar: Csr,
    pub k4: Csr,
}

pub fn k_pieces(k: &KernelSet, basis: &FockBasis) -> KPieces {
    let m = k.m;
    let half = C64::new(0.5, 0.0);
    let mut t0 = Vec::new();
    let mut t1 = Vec::new();
    let mut t2 = Vec::new();
    let mut t2b = Vec::new();
    for x in 0..m {
        for y in 0..m {
            t0.push((k.hphi[(x, y)], vec![m + x, y]));
            t1.push((k.k1[(x, y)], vec![m + x, y]));
            t2.push((half * k.k2[(x, y)], vec![m + x, m + y]));
            t2b.push((half * k.k2[(x, y)].conj(), vec![y, x]));
        }
    }
    let mut t3 = Vec::new();
    let mut t3b = Vec::new();
    for x1 in 0..m {
        for x2 in 0..m {
            for x3 in 0..m {
                let c = k.k3_at(x1, x2, x3);
                t3.push((c, vec![m + x1, m + x2, x3]));
                t3b.push((c.conj(), vec![m + x3, x2, x1]));
            }
        }
    }
    let mut t4 = Vec::new();
    for x1 in 0..m {
        for x2 in 0..m {
            for x3 in 0..m {
                for x4 in 0..m {
                    t4.push((half * k.k4_at(x1, x2, x3, x4), vec![m + x1, m + x2, x3, x4]));
                }
            }
        }
    }
    KPieces {
        k0: basis.poly_matrix(&t0),
        k1: basis.poly_matrix(&t1),
        k2: basis.poly_matrix(&t2),
        k2bar: basis.poly_matrix(&t2b),
        k3: basis.poly_matrix(&t3),
        k3bar: basis.poly_matrix(&t3b),
        k4: basis.poly_matrix(&t4),
    }
}

/// The Bogoliubov Hamiltonian `𝕂0 + 𝕂1 + 𝕂2 + 𝕂2*`.
pub fn bogoliubov_hamiltonian(k: &KernelSet, basis: &FockBasis) -> Csr {
    let p = k_pieces(k, basis);
    let one = C64::new(1.0, 0.0);
    Csr::linear_combination(basis.dim(), &[(one, &p.k0), (one, &p.k1), (one, &p.k2), (one, &p.k2bar)])
}

/// The excitation Hamiltonian at particle number `n` with the exact
/// square-root number factors.
pub fn build_excitation_hamiltonian(k: &KernelSet, n: usize, basis: &FockBasis) -> Result<Csr> {
    if n < 2 {
        return Err(Error::Config(format!("particle number must be at least 2, got {n}")));
    }
    Ok(full_from_pieces(&k_pieces(k, basis), n, basis))
}

fn full_from_pieces(p: &KPieces, n: usize, basis: &FockBasis) -> Csr {
    let nf = n as f64;
    let lam = 1.0 / (nf - 1.0);
    let f1 = basis.number_diag(|k| (nf - k as f64) * lam);
    let f2 = basis.number_diag(|k| {
        let x = (nf - k as f64) * (nf - k as f64 - 1.0);
        libm::sqrt(x.max(0.0)) * lam
    });
    let f3 = basis.number_diag(|k| libm::sqrt((nf - k as f64).max(0.0)) * lam);
    let one = C64::new(1.0, 0.0);
    let parts = [
        p.k1.scale_rows(&f1),
        p.k2.scale_cols(&f2),
        p.k2bar.scale_rows(&f2),
        p.k3.scale_cols(&f3),
        p.k3bar.scale_rows(&f3),
    ];
    Csr::linear_combination(
        basis.dim(),
        &[
            (one, &p.k0),
            (one, &parts[0]),
            (one, &parts[1]),
            (one, &parts[2]),
            (one, &parts[3]),
            (one, &parts[4]),
            (C64::new(lam, 0.0), &p.k4),
        ],
    )
}

/// `ℍ^{(0)}, …, ℍ^{(a)}` from the expansion of the square roots.
pub fn expansion_terms(p: &KPieces, a: usize, basis: &FockBasis, table: &TaylorTable) -> Vec<Csr> {
    let dim = basis.dim();
    let one = C64::new(1.0, 0.0);
    let mone = C64::new(-1.0, 0.0);
    let pow_n1 = |e: usize| basis.number_diag(move |k| libm::pow(k as f64 - 1.0, e as f64));
    (0..=a)
        .map(|n| match n {
            0 => Csr::linear_combination(dim, &[(one, &p.k0), (one, &p.k1), (one, &p.k2), (one, &p.k2bar)]),
            1 => Csr::linear_combination(dim, &[(one, &p.k3), (one, &p.k3bar)]),
            2 => {
                let nm1 = pow_n1(1);
                let nh = basis.number_diag(|k| k as f64 - 0.5);
                let a1 = p.k1.scale_rows(&nm1);
                let a2 = p.k2.scale_cols(&nh);
                let a3 = p.k2bar.scale_rows(&nh);
                Csr::linear_combination(dim, &[(mone, &a1), (mone, &a2), (mone, &a3), (one, &p.k4)])
            }
            _ if n % 2 == 1 => {
                let e = (n + 1) / 2 - 1;
                let c = C64::new(table.c(e), 0.0);
                let d = pow_n1(e);
                let a1 = p.k3.scale_cols(&d);
                let a2 = p.k3bar.scale_rows(&d);
                Csr::linear_combination(dim, &[(c, &a1), (c, &a2)])
            }
            _ => {
                let h = n / 2;
                let mats: Vec<(C64, Csr, Csr)> = (0..=h)
                    .map(|nu| {
                        let d = pow_n1(nu);
                        (C64::new(table.d(h, nu), 0.0), p.k2.scale_cols(&d), p.k2bar.scale_rows(&d))
                    })
                    .collect();
                let terms: Vec<(C64, &Csr)> = mats.iter().flat_map(|(c, x, y)| [(*c, x), (*c, y)]).collect();
                Csr::linear_combination(dim, &terms)
            }
        })
        .collect()
}

/// Full Hamiltonian, its expansion to order `a`, and the rescaled
/// remainder `λ^{-(a+1)/2}(ℍ - Σ λ^{n/2} ℍ^{(n)})`.
#[derive(Debug, Clone)]
pub struct ExcitationHamiltonianTerms {
    pub n: usize,
    pub lambda: f64,
    pub h_full: Csr,
    pub h_n: Vec<Csr>,
    pub residual: Csr,
}

pub fn expand_excitation_hamiltonian(
    k: &KernelSet,
    a: usize,
    n: usize,
    basis: &FockBasis,
    table: &TaylorTable,
) -> Result<ExcitationHamiltonianTerms> {
    if n < 2 {
        return Err(Error::Config(format!("particle number must be at least 2, got {n}")));
    }
    if table.max < a / 2 + 1 {
        return Err(Error::Usage(format!("Taylor table too short for order {a}")));
    }
    let p = k_pieces(k, basis);
    let h_full = full_from_pieces(&p, n, basis);
    let h_n = expansion_terms(&p, a, basis, table);
    let lambda = 1.0 / (n as f64 - 1.0);
    let mut terms: Vec<(C64, &Csr)> = vec![(C64::new(1.0, 0.0), &h_full)];
    for (i, h) in h_n.iter().enumerate() {
        terms.push((C64::new(-libm::pow(lambda, i as f64 / 2.0), 0.0), h));
    }
    let diff = Csr::linear_combination(basis.dim(), &terms);
    let residual = diff.scale(C64::new(libm::pow(lambda, -((a + 1) as f64) / 2.0), 0.0));
    Ok(ExcitationHamiltonianTerms { n, lambda, h_full, h_n, residual })
}

/// A state produced by a quadratic generator together with its map.
#[derive(Debug, Clone)]
pub struct BogoliubovState {
    pub vector: FockVector,
    pub map: BogoliubovMap,
    /// Norm in the top sector of the input; the truncated exponential is
    /// only faithful when this is small.
    pub leak: f64,
}

/// The quadratic operator `Σ A_ij a†_i a_j + ½ Σ (B_ij a†_i a†_j + h.c.)`.
pub fn quadratic_operator(a: &CMat, b: &CMat, basis: &FockBasis) -> Csr {
    let m = basis.m();
    let half = C64::new(0.5, 0.0);
    let mut terms = Vec::new();
    for i in 0..m {
        for j in 0..m {
            terms.push((a[(i, j)], vec![m + i, j]));
            terms.push((half * b[(i, j)], vec![m + i, m + j]));
            terms.push((half * b[(i, j)].conj(), vec![j, i]));
        }
    }
    basis.poly_matrix(&terms)
}

/// `e^{-i𝒬} v` by a dense exponential on the truncated space, paired with
/// the Bogoliubov map of the same generator.
pub fn apply_bogoliubov(a: &CMat, b: &CMat, v: &FockVector, basis: &FockBasis) -> Result<BogoliubovState> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Numeric("quadratic generator has non-finite entries".into()));
    }
    if a.hermiticity_defect() > 1e-12 || b.symmetry_defect() > 1e-12 {
        return Err(Error::Usage("quadratic generator needs Hermitian A and symmetric B".into()));
    }
    let q = quadratic_operator(a, b, basis).to_dense();
    let e = expm(&q.scale(-I));
    let out = e.mul_vec(&v.coeffs);
    let leak = vnorm(&out[basis.sector(basis.cutoff())]);
    Ok(BogoliubovState { vector: FockVector { coeffs: out, t: v.t }, map: BogoliubovMap::from_generator(a, b), leak })
}

/// Integrates `i∂_t Χ = ℍ^{(0)}(t) Χ` along the trajectory.
pub fn evolve_bogoliubov_state(
    chi0: &FockVector,
    kernels: &KernelTrajectory,
    basis: &FockBasis,
) -> Result<Vec<FockVector>> {
    let dt = kernels.dt;
    let n0 = chi0.norm();
    let mut out = Vec::with_capacity(kernels.grid.len());
    let mut cur = chi0.coeffs.clone();
    out.push(FockVector { coeffs: cur.clone(), t: kernels.grid[0].t });
    let mut next_start = bogoliubov_hamiltonian(&kernels.grid[0], basis);
    for k in 0..kernels.steps() {
        let mid = bogoliubov_hamiltonian(&kernels.mid[k], basis);
        let end = bogoliubov_hamiltonian(&kernels.grid[k + 1], basis);
        let hs = [&next_start, &mid, &end];
        cur = rk4_step(&cur, dt, |st, y: &Vec<C64>| {
            let h = hs[stage_index(st)];
            h.mul_vec(y).into_iter().map(|z| z * -I).collect()
        });
        let drift = libm::fabs(vnorm(&cur) - n0);
        if !(drift <= 1e-6) {
            return Err(Error::Invariant(format!("norm drift {drift:.3e} in Bogoliubov evolution at step {k}")));
        }
        out.push(FockVector { coeffs: cur.clone(), t: kernels.grid[k + 1].t });
        next_start = end;
    }
    Ok(out)
}

pub(crate) fn stage_index(s: crate::integrate::Stage) -> usize {
    match s {
        crate::integrate::Stage::Start => 0,
        crate::integrate::Stage::Mid => 1,
        crate::integrate::Stage::End => 2,
    }
}

/// Slot code from a sign and a mode.
pub fn slot_of(sign: Sign, x: usize, m: usize) -> usize {
    slot(sign, x, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bogomap::two_point_transform;
    use crate::kernels::build_kernels;
    use crate::lattice::{evolve_hartree, CondensateState, LatticeConfig, Potential};
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn kernels_at(m: usize, g: f64) -> KernelSet {
        let c = LatticeConfig::new(m, 2.0 * PI, Potential::Cosine { g }, 1e-3, 1.0).unwrap();
        build_kernels(&CondensateState::new(c.default_condensate(), 0.0, &c), &c).unwrap()
    }

    #[test]
    fn dimension_and_prefix_property() {
        let b = FockBasis::new(3, 10).unwrap();
        assert_eq!(b.dim(), 286);
        let small = FockBasis::new(3, 6).unwrap();
        for i in 0..small.dim() {
            assert_eq!(small.occupation(i), b.occupation(i));
        }
        assert_eq!(b.excitations(0), 0);
        for i in 0..b.dim() {
            assert_eq!(b.index_of(b.occupation(i)), Some(i));
        }
    }

    #[test]
    fn canonical_commutation_below_cutoff() {
        let b = FockBasis::new(2, 6).unwrap();
        let (ann, cre) = b.build_ladder();
        for i in 0..2 {
            for j in 0..2 {
                let comm = ann[i].to_dense().matmul(&cre[j].to_dense()).sub(&cre[j].to_dense().matmul(&ann[i].to_dense()));
                for r in b.sector(0).start..b.sector(5).end {
                    for c in b.sector(0).start..b.sector(5).end {
                        let want = if i == j && r == c { 1.0 } else { 0.0 };
                        assert!((comm[(r, c)] - C64::new(want, 0.0)).norm() < 1e-13);
                    }
                }
            }
        }
        let vac = b.vacuum();
        for a in &ann {
            assert!(a.mul_vec(&vac).iter().all(|z| *z == ZERO));
        }
    }

    #[test]
    fn number_operator_is_diagonal() {
        let b = FockBasis::new(3, 4).unwrap();
        let n = b.second_quantize(&CMat::identity(3));
        for (i, j, v) in n.entries() {
            assert_eq!(i, j);
            assert!((v - C64::new(b.excitations(i) as f64, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn free_hamiltonian_is_second_quantized_laplacian() {
        let k = kernels_at(3, 0.0);
        let b = FockBasis::new(3, 5).unwrap();
        let h = build_excitation_hamiltonian(&k, 10, &b).unwrap();
        let want = b.second_quantize(&k.hphi);
        assert!(h.combine(C64::new(1.0, 0.0), &want, C64::new(-1.0, 0.0)).max_abs() < 1e-14);
        let t = expand_excitation_hamiltonian(&k, 3, 10, &b, &TaylorTable::new(3)).unwrap();
        for hn in &t.h_n[1..] {
            assert_eq!(hn.max_abs(), 0.0);
        }
        assert!(t.residual.max_abs() < 1e-13);
    }

    #[test]
    fn full_hamiltonian_is_hermitian_and_keeps_sector_bound() {
        let k = kernels_at(2, 0.7);
        let n = 4;
        let b = FockBasis::new(2, n + 2).unwrap();
        let h = build_excitation_hamiltonian(&k, n, &b).unwrap();
        assert!(h.hermiticity_defect() < 1e-12);
        for (i, j, v) in h.entries() {
            if b.excitations(j) <= n && b.excitations(i) > n {
                assert!(v.norm() < 1e-14);
            }
        }
        for hn in expansion_terms(&k_pieces(&k, &b), 4, &b, &TaylorTable::new(4)) {
            assert!(hn.hermiticity_defect() < 1e-12);
        }
    }

    #[test]
    fn residual_is_bounded_uniformly_in_n() {
        let k = kernels_at(2, 0.5);
        let b = FockBasis::new(2, 4).unwrap();
        let table = TaylorTable::new(3);
        for a in 0..3 {
            let mut ratios = Vec::new();
            for n in [16usize, 32, 64] {
                let t = expand_excitation_hamiltonian(&k, a, n, &b, &table).unwrap();
                let mut worst: f64 = 0.0;
                for i in 0..b.dim() {
                    let mut e = vec![ZERO; b.dim()];
                    e[i] = C64::new(1.0, 0.0);
                    let r = vnorm(&t.residual.mul_vec(&e));
                    worst = worst.max(r / libm::pow((b.excitations(i) + 1) as f64, (a + 4) as f64 / 2.0));
                }
                ratios.push(worst);
            }
            assert!(ratios[2] < 2.0 * ratios[0] + 1e-12, "a={a}: {ratios:?}");
        }
    }

    #[test]
    fn quasi_free_state_matches_map() {
        let m = 2;
        let a = CMat::from_fn(m, m, |i, j| if i == j { C64::new(0.3 + i as f64, 0.0) } else { C64::new(0.1, 0.2 * (i as f64 - j as f64)) });
        let bm = CMat::from_fn(m, m, |i, j| C64::new(0.15, 0.05 * (i + j) as f64));
        let basis = FockBasis::new(m, 24).unwrap();
        let st = apply_bogoliubov(&a, &bm, &FockVector::vacuum(&basis, 0.0), &basis).unwrap();
        let fock = basis.two_point(&st.vector.coeffs, 0.0);
        let classical = two_point_transform(&st.map, &TwoPointPair::vacuum(m, 0.0));
        assert!(fock.max_gap(&classical) < 1e-7, "{}", fock.max_gap(&classical));
        assert!(fock.quasi_free_defect() < 1e-7);
        assert!(st.leak < 1e-6, "{}", st.leak);
    }

    #[test]
    fn number_conserving_generator_keeps_vacuum() {
        let m = 2;
        let a = CMat::from_fn(m, m, |i, j| C64::new((i + j) as f64, 0.0));
        let basis = FockBasis::new(m, 4).unwrap();
        let st = apply_bogoliubov(&a, &CMat::zeros(m, m), &FockVector::vacuum(&basis, 0.0), &basis).unwrap();
        assert!((st.vector.coeffs[0] - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert_eq!(st.map.v.max_abs(), 0.0);
        assert!(st.map.u.sub(&expm(&a.scale(-I))).max_abs() < 1e-13);
    }

    #[test]
    fn bogoliubov_evolution_matches_two_point_pde() {
        let c = LatticeConfig::new(2, 2.0 * PI, Potential::Cosine { g: 1.0 }, 1e-2, 1.0).unwrap();
        let traj = evolve_hartree(&c.default_condensate(), &c).unwrap();
        let kt = KernelTrajectory::build(&traj, &c).unwrap();
        let basis = FockBasis::new(2, 28).unwrap();
        let states = evolve_bogoliubov_state(&FockVector::vacuum(&basis, 0.0), &kt, &basis).unwrap();
        let pde = crate::bogomap::two_point_pde(&TwoPointPair::vacuum(2, 0.0), &kt).unwrap();
        for (s, p) in states.iter().zip(&pde).step_by(10) {
            let tp = basis.two_point(&s.coeffs, s.t);
            assert!(tp.max_gap(p) < 1e-6, "{}", tp.max_gap(p));
            assert!(tp.quasi_free_defect() < 1e-6);
            let k = crate::kernels::build_kernels(&traj.states[libm::round(s.t / kt.dt) as usize], &c).unwrap();
            let dp = basis.second_quantize(&k.p);
            assert!(vdot(&s.coeffs, &dp.mul_vec(&s.coeffs)).re < 1e-6);
            assert!((s.norm() - 1.0).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn slot_tensor_matches_words(vals in proptest::collection::vec(-1.0f64..1.0, 16)) {
            let b = FockBasis::new(2, 5).unwrap();
            let t: Vec<C64> = vals.iter().map(|x| C64::new(*x, 0.5 * x)).collect();
            let v: Vec<C64> = (0..b.dim()).map(|i| C64::new(1.0 / (1.0 + i as f64), 0.0)).collect();
            let got = b.apply_slot_tensor(2, &t, &v);
            let mut want = vec![ZERO; b.dim()];
            for c1 in 0..4 {
                for c2 in 0..4 {
                    let w = b.apply_word_vec(&[c1, c2], &v);
                    for (o, z) in want.iter_mut().zip(&w) {
                        *o += t[c1 * 4 + c2] * z;
                    }
                }
            }
            for (a, b) in got.iter().zip(&want) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }
    }
}
