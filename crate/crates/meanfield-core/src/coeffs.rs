//! Scalar Taylor tables and the coefficient tensors of the reduced
//! correction formulas.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::Ratio;

use crate::bogomap::{slot, BogoliubovMap, MapTrajectory, Sign};
use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::integrate::{CumulativeSimpson, Linear};
use crate::kernels::{KernelSet, KernelTrajectory};
use crate::linalg::{CMat, C64, I, ZERO};

pub type Q = Ratio<i128>;

fn q(n: i128, d: i128) -> Q {
    Ratio::new(n, d)
}

fn to_f64(r: &Q) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `c^{(ℓ)}_n = (ℓ-½)(ℓ+½)…(ℓ+n-3/2) / n!` for rational `ℓ`.
pub fn c_general(l: Q, n: usize) -> Q {
    let mut r = q(1, 1);
    for i in 0..n {
        r = r * (l - q(1, 2) + q(i as i128, 1)) / q((i + 1) as i128, 1);
    }
    r
}

/// Exact expansion coefficients of the square roots in the excitation
/// Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorTable {
    pub max: usize,
    /// `c[ℓ][n] = c^{(ℓ)}_n` for integer `ℓ`.
    c: Vec<Vec<Q>>,
    /// `d[n][ν]`
    d: Vec<Vec<Q>>,
    /// `c̃_ℓ = (-1)^ℓ c^{(3/2)}_ℓ`
    ctilde: Vec<Q>,
}

impl TaylorTable {
    /// All entries with indices up to `a_max + 2`.
    pub fn new(a_max: usize) -> Self {
        let max = a_max + 2;
        let c: Vec<Vec<Q>> = (0..=max).map(|l| (0..=max).map(|n| c_general(q(l as i128, 1), n)).collect()).collect();
        let d = (0..=max)
            .map(|n| {
                (0..=n)
                    .map(|nu| (0..=nu).fold(q(0, 1), |acc, l| acc + c[0][l] * c[0][nu - l] * c[l][n - nu]))
                    .collect()
            })
            .collect();
        let ctilde = (0..=max)
            .map(|l| {
                let v = c_general(q(3, 2), l);
                if l % 2 == 0 {
                    v
                } else {
                    -v
                }
            })
            .collect();
        TaylorTable { max, c, d, ctilde }
    }

    pub fn c_exact(&self, l: usize, n: usize) -> Q {
        self.c[l][n]
    }

    /// `c_n = c^{(0)}_n`
    pub fn c(&self, n: usize) -> f64 {
        to_f64(&self.c[0][n])
    }

    pub fn c_l(&self, l: usize, n: usize) -> f64 {
        to_f64(&self.c[l][n])
    }

    pub fn d_exact(&self, n: usize, nu: usize) -> Q {
        self.d[n][nu]
    }

    pub fn d(&self, n: usize, nu: usize) -> f64 {
        to_f64(&self.d[n][nu])
    }

    pub fn ctilde_exact(&self, l: usize) -> Q {
        self.ctilde[l]
    }

    pub fn ctilde(&self, l: usize) -> f64 {
        to_f64(&self.ctilde[l])
    }

    /// `c̃_{ℓ,k} = c̃_{ℓ-k} c_k`
    pub fn ctilde2(&self, l: usize, k: usize) -> f64 {
        to_f64(&(self.ctilde[l - k] * self.c[0][k]))
    }
}

/// `Σ_{ℓ≤a} c_ℓ x^ℓ`
pub fn sqrt_partial_sum(table: &TaylorTable, a: usize, x: f64) -> f64 {
    let mut s = 0.0;
    let mut p = 1.0;
    for l in 0..=a {
        s += table.c(l) * p;
        p *= x;
    }
    s
}

/// Binomial coefficient as `f64`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Stirling numbers of the second kind `S(n, k)` for `n, k ≤ max`.
pub fn stirling2(max: usize) -> Vec<Vec<f64>> {
    let mut s = vec![vec![0.0; max + 1]; max + 1];
    s[0][0] = 1.0;
    for n in 1..=max {
        for k in 1..=n {
            s[n][k] = k as f64 * s[n - 1][k] + s[n - 1][k - 1];
        }
    }
    s
}

/// A polynomial in the ladder operators stored as one dense tensor per
/// monomial length. `parts[p]` holds the coefficients of
/// `a^{c1} … a^{cp}` over slot codes with `c1` most significant, or is
/// empty when that length is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotPoly {
    pub m: usize,
    pub parts: Vec<Vec<C64>>,
}

impl SlotPoly {
    pub fn zero(m: usize) -> Self {
        SlotPoly { m, parts: Vec::new() }
    }

    pub fn scalar(m: usize, c: C64) -> Self {
        SlotPoly { m, parts: vec![vec![c]] }
    }

    pub fn slots(&self) -> usize {
        2 * self.m
    }

    /// `Σ coeff · word` with words given as slot-code lists.
    pub fn from_terms(m: usize, terms: &[(C64, Vec<usize>)]) -> Self {
        let mut out = SlotPoly::zero(m);
        let s = 2 * m;
        for (c, w) in terms {
            let part = out.part_mut(w.len());
            let idx = w.iter().fold(0, |acc, &x| acc * s + x);
            part[idx] += c;
        }
        out
    }

    fn part_mut(&mut self, p: usize) -> &mut Vec<C64> {
        if self.parts.len() <= p {
            self.parts.resize(p + 1, Vec::new());
        }
        if self.parts[p].is_empty() {
            self.parts[p] = vec![ZERO; self.slots().pow(p as u32)];
        }
        &mut self.parts[p]
    }

    pub fn part(&self, p: usize) -> Option<&[C64]> {
        self.parts.get(p).filter(|v| !v.is_empty()).map(|v| v.as_slice())
    }

    /// Monomial lengths with a stored tensor.
    pub fn orders(&self) -> Vec<usize> {
        (0..self.parts.len()).filter(|&p| !self.parts[p].is_empty()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.parts.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_of(&self, p: usize) -> f64 {
        self.part(p).map_or(0.0, |v| v.iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    /// `self += c · other`
    pub fn add_scaled_c(&mut self, c: C64, other: &SlotPoly) {
        for p in other.orders() {
            let src = &other.parts[p];
            let dst = self.part_mut(p);
            for (d, x) in dst.iter_mut().zip(src) {
                *d += c * x;
            }
        }
    }

    pub fn scale(&self, c: C64) -> SlotPoly {
        let mut out = SlotPoly::zero(self.m);
        out.add_scaled_c(c, self);
        out
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &SlotPoly) -> SlotPoly {
        let mut out = SlotPoly::zero(self.m);
        for p in self.orders() {
            for q in other.orders() {
                let a = &self.parts[p];
                let b = &other.parts[q];
                let dst = out.part_mut(p + q);
                for (i, x) in a.iter().enumerate() {
                    if *x == ZERO {
                        continue;
                    }
                    let row = &mut dst[i * b.len()..(i + 1) * b.len()];
                    for (d, y) in row.iter_mut().zip(b) {
                        *d += x * y;
                    }
                }
            }
        }
        out
    }

    /// Image under `a^{c} ↦ Σ_{c'} Ω[c][c'] a^{c'}` applied to every slot.
    pub fn transform(&self, omega: &CMat) -> SlotPoly {
        let s = self.slots();
        let mut out = SlotPoly::zero(self.m);
        for p in self.orders() {
            let mut cur = self.parts[p].clone();
            for axis in 0..p {
                let post = s.pow((p - axis - 1) as u32);
                let pre = s.pow(axis as u32);
                let mut next = vec![ZERO; cur.len()];
                for a in 0..pre {
                    for c in 0..s {
                        let base = (a * s + c) * post;
                        for c2 in 0..s {
                            let w = omega[(c, c2)];
                            if w == ZERO {
                                continue;
                            }
                            let dst = (a * s + c2) * post;
                            for r in 0..post {
                                next[dst + r] += cur[base + r] * w;
                            }
                        }
                    }
                }
                cur = next;
            }
            out.parts.resize(p + 1, Vec::new());
            out.parts[p] = cur;
        }
        out
    }

    /// The adjoint polynomial: words reversed, slots flipped between
    /// `a` and `a†`, coefficients conjugated.
    pub fn adjoint(&self) -> SlotPoly {
        let s = self.slots();
        let m = self.m;
        let flip = |c: usize| if c < m { c + m } else { c - m };
        let mut out = SlotPoly::zero(m);
        for p in self.orders() {
            let src = &self.parts[p];
            let dst = out.part_mut(p);
            for (idx, z) in src.iter().enumerate() {
                let mut rest = idx;
                let mut rev = 0;
                for _ in 0..p {
                    rev = rev * s + flip(rest % s);
                    rest /= s;
                }
                dst[rev] = z.conj();
            }
        }
        out
    }

    /// `Σ_p T_p a^{c1} … a^{cp} v` on a truncated Fock space.
    pub fn apply(&self, basis: &FockBasis, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; basis.dim()];
        for p in self.orders() {
            let w = basis.apply_slot_tensor(p, &self.parts[p], v);
            for (o, z) in out.iter_mut().zip(&w) {
                *o += z;
            }
        }
        out
    }

    /// The order-`p` part as a coefficient tensor.
    pub fn tensor(&self, family: Family, p: usize, t: f64, s: f64) -> CoefficientTensor {
        let values = self.part(p).map_or_else(|| vec![ZERO; self.slots().pow(p as u32)], |v| v.to_vec());
        CoefficientTensor { family, order: p, m: self.m, values, t, s }
    }
}

impl Linear for SlotPoly {
    fn add_scaled(&mut self, s: f64, other: &Self) {
        self.add_scaled_c(C64::new(s, 0.0), other);
    }
}

/// Which coefficient family a tensor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Conjugated Hamiltonian term `𝔄_{n,p}`.
    A { n: usize, p: usize },
    /// Transported initial data `𝔄̃_ℓ`.
    ATilde { l: usize },
    BTilde { l: usize },
    C { l: usize },
    D { l: usize, k: usize, b: usize },
    /// User-supplied initial data `𝔞_ℓ`.
    Initial { l: usize },
}

/// Order-`p` slice of a coefficient family, dense over slot codes.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTensor {
    pub family: Family,
    pub order: usize,
    pub m: usize,
    pub values: Vec<C64>,
    pub t: f64,
    pub s: f64,
}

impl CoefficientTensor {
    /// The component with fixed operator types, as a tensor over `M^p`
    /// mode indices.
    pub fn signed(&self, signs: &[Sign]) -> Result<Vec<C64>> {
        if signs.len() != self.order {
            return Err(Error::Usage(format!("{} signs for a tensor of order {}", signs.len(), self.order)));
        }
        let m = self.m;
        let s = 2 * m;
        let n = m.pow(self.order as u32);
        Ok((0..n)
            .map(|mut i| {
                let mut idx = 0;
                let mut mul = 1;
                for j in signs.iter().rev() {
                    idx += slot(*j, i % m, m) * mul;
                    mul *= s;
                    i /= m;
                }
                self.values[idx]
            })
            .collect())
    }
}

/// `𝒩 - shift` as a ladder polynomial.
pub fn number_poly(m: usize, shift: f64) -> SlotPoly {
    let mut terms: Vec<(C64, Vec<usize>)> = (0..m).map(|x| (C64::new(1.0, 0.0), vec![m + x, x])).collect();
    terms.push((C64::new(-shift, 0.0), Vec::new()));
    SlotPoly::from_terms(m, &terms)
}

/// The kernel pieces `𝕂^{(0..4)}` as ladder polynomials, in the order
/// `[𝕂0, 𝕂1, 𝕂2, 𝕂2*, 𝕂3, 𝕂3*, 𝕂4]`.
pub fn kernel_polys(k: &KernelSet) -> [SlotPoly; 7] {
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
    let mut t4 = Vec::new();
    for x1 in 0..m {
        for x2 in 0..m {
            for x3 in 0..m {
                let c = k.k3_at(x1, x2, x3);
                t3.push((c, vec![m + x1, m + x2, x3]));
                t3b.push((c.conj(), vec![m + x3, x2, x1]));
                for x4 in 0..m {
                    t4.push((half * k.k4_at(x1, x2, x3, x4), vec![m + x1, m + x2, x3, x4]));
                }
            }
        }
    }
    [&t0, &t1, &t2, &t2b, &t3, &t3b, &t4].map(|t| SlotPoly::from_terms(m, t))
}

/// `ℍ^{(n)}` as a ladder polynomial; number factors are expanded into
/// `a†a` words in place.
pub fn hamiltonian_poly(k: &KernelSet, n: usize, table: &TaylorTable) -> SlotPoly {
    let m = k.m;
    let [k0, k1, k2, k2b, k3, k3b, k4] = kernel_polys(k);
    let one = C64::new(1.0, 0.0);
    let nm1 = number_poly(m, 1.0);
    let power = |e: usize| (0..e).fold(SlotPoly::scalar(m, one), |acc, _| acc.mul(&nm1));
    let mut out = SlotPoly::zero(m);
    match n {
        0 => {
            for p in [&k0, &k1, &k2, &k2b] {
                out.add_scaled_c(one, p);
            }
        }
        1 => {
            out.add_scaled_c(one, &k3);
            out.add_scaled_c(one, &k3b);
        }
        2 => {
            let nh = number_poly(m, 0.5);
            out.add_scaled_c(-one, &nm1.mul(&k1));
            out.add_scaled_c(-one, &k2.mul(&nh));
            out.add_scaled_c(-one, &nh.mul(&k2b));
            out.add_scaled_c(one, &k4);
        }
        _ if n % 2 == 1 => {
            let e = (n + 1) / 2 - 1;
            let c = C64::new(table.c(e), 0.0);
            let pw = power(e);
            out.add_scaled_c(c, &k3.mul(&pw));
            out.add_scaled_c(c, &pw.mul(&k3b));
        }
        _ => {
            let h = n / 2;
            for nu in 0..=h {
                let c = C64::new(table.d(h, nu), 0.0);
                let pw = power(nu);
                out.add_scaled_c(c, &k2.mul(&pw));
                out.add_scaled_c(c, &pw.mul(&k2b));
            }
        }
    }
    out
}

/// `𝒰_{𝒱(t,s)} ℍ^{(n)}(s) 𝒰*_{𝒱(t,s)}` as a ladder polynomial.
pub fn conjugated_hamiltonian(n: usize, kernels_s: &KernelSet, map: &BogoliubovMap, table: &TaylorTable) -> SlotPoly {
    hamiltonian_poly(kernels_s, n, table).transform(&map.slot_matrix())
}

/// The family `𝔄_{n,p}(t,s)` for one monomial length `p`.
pub fn assemble_a(
    n: usize,
    p: usize,
    kernels_s: &KernelSet,
    map: &BogoliubovMap,
    table: &TaylorTable,
) -> Result<CoefficientTensor> {
    if p < 2 || p > n + 2 || (p + n) % 2 != 0 {
        return Err(Error::Usage(format!("no coefficient 𝔄_{{{n},{p}}}: need 2 ≤ p ≤ n+2 and n+p even")));
    }
    if table.max < n / 2 + 1 {
        return Err(Error::Usage(format!("Taylor table too short for order {n}")));
    }
    Ok(conjugated_hamiltonian(n, kernels_s, map, table).tensor(Family::A { n, p }, p, map.t, map.s))
}

/// Initial-data coefficients `𝔞_ℓ`, so that `Χ_ℓ(0) = 𝔞_ℓ Χ_0(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCoefficients {
    pub m: usize,
    /// `polys[ℓ-1] = 𝔞_ℓ`
    pub polys: Vec<SlotPoly>,
}

impl InitialCoefficients {
    pub fn zero(m: usize) -> Self {
        InitialCoefficients { m, polys: Vec::new() }
    }

    pub fn get(&self, l: usize) -> SlotPoly {
        if l == 0 {
            SlotPoly::scalar(self.m, C64::new(1.0, 0.0))
        } else {
            self.polys.get(l - 1).cloned().unwrap_or_else(|| SlotPoly::zero(self.m))
        }
    }

    /// True when every `𝔞_ℓ` only contains lengths `n` with `n + ℓ` even.
    pub fn respects_parity(&self) -> bool {
        self.polys.iter().enumerate().all(|(i, p)| p.orders().iter().all(|n| (n + i + 1) % 2 == 0))
    }
}

/// `ℭ_ℓ(t)` for `ℓ ≤ a`, so that `Χ_ℓ(t) = ℭ_ℓ(t) Χ_0(t)`.
#[derive(Debug, Clone)]
pub struct CTable {
    pub t: f64,
    pub index: usize,
    pub polys: Vec<SlotPoly>,
}

impl CTable {
    pub fn tensor(&self, l: usize, q: usize) -> Result<CoefficientTensor> {
        if (l + q) % 2 != 0 {
            return Err(Error::Usage(format!("ℭ_{{{l},{q}}} has odd parity")));
        }
        let poly = self.polys.get(l).ok_or_else(|| Error::Usage(format!("ℭ of order {l} not assembled")))?;
        Ok(poly.tensor(Family::C { l }, q, self.t, 0.0))
    }
}

/// Assembles `ℭ_ℓ(t_i)` for `ℓ ≤ a` by streaming the recursion
/// `𝔅̃_ℓ(s) = 𝔄̃_ℓ - i Σ_n ∫_0^s 𝔄_n(t,r) 𝔅̃_{ℓ-n}(r) dr`, `ℭ_ℓ = 𝔅̃_ℓ(t)`,
/// with composite Simpson in `r`.
pub fn assemble_c(
    a: usize,
    index: usize,
    kernels: &KernelTrajectory,
    maps: &MapTrajectory,
    init: &InitialCoefficients,
    table: &TaylorTable,
) -> Result<CTable> {
    let m = kernels.m();
    if init.m != m {
        return Err(Error::Config(format!("initial coefficients are for {} modes, lattice has {m}", init.m)));
    }
    if init.polys.len() > a {
        return Err(Error::Config(format!("initial coefficients given up to order {}, run order is {a}", init.polys.len())));
    }
    if index >= maps.len() || index >= kernels.grid.len() {
        return Err(Error::Usage(format!("time index {index} is outside the trajectory")));
    }
    if table.max < a / 2 + 1 {
        return Err(Error::Usage(format!("Taylor table too short for order {a}")));
    }
    let at = maps.between(index, 0).slot_matrix();
    let tilde: Vec<SlotPoly> = (0..=a).map(|l| init.get(l).transform(&at)).collect();
    let mut sums: Vec<CumulativeSimpson<SlotPoly>> =
        (0..=a).map(|_| CumulativeSimpson::new(kernels.dt, SlotPoly::zero(m))).collect();
    let mut btilde = tilde.clone();
    for r in 0..=index {
        let map = maps.between(index, r);
        let om = map.slot_matrix();
        let hs: Vec<SlotPoly> =
            (1..=a).map(|n| hamiltonian_poly(&kernels.grid[r], n, table).transform(&om)).collect();
        for l in 1..=a {
            let mut integrand = SlotPoly::zero(m);
            for n in 1..=l {
                integrand.add_scaled_c(C64::new(1.0, 0.0), &hs[n - 1].mul(&btilde[l - n]));
            }
            let integral = sums[l].push(integrand);
            let mut b = tilde[l].clone();
            b.add_scaled_c(-I, &integral);
            btilde[l] = b;
        }
    }
    Ok(CTable { t: kernels.grid[index].t, index, polys: btilde })
}

/// `𝔇_{ℓ,k,n;b}`: the length-`b` words `ℭ_ℓ† · a^{j1}_{x1} … a^{jn}_{xn} · ℭ_k`
/// whose Wick contractions over `Χ_0` give the mixed correlator. The
/// external slots are kept as delta insertions; each block pairs the
/// reversed conjugate of `ℭ_{ℓ,b-n-q}` with `ℭ_{k,q}`.
#[derive(Debug, Clone)]
pub struct DTensor {
    pub l: usize,
    pub k: usize,
    pub b: usize,
    pub signs: Vec<Sign>,
    pub m: usize,
    /// `(q, left, right)` with `left` of length `b-n-q`.
    pub blocks: Vec<(usize, Vec<C64>, Vec<C64>)>,
}

impl DTensor {
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// The full length-`b` tensor for one choice of external modes.
    pub fn materialize(&self, xs: &[usize]) -> Vec<C64> {
        let m = self.m;
        let s = 2 * m;
        let n = self.signs.len();
        let mut mid = 0;
        for (j, x) in self.signs.iter().zip(xs) {
            mid = mid * s + slot(*j, *x, m);
        }
        let mut out = vec![ZERO; s.pow(self.b as u32)];
        for (q, left, right) in &self.blocks {
            let rlen = s.pow(*q as u32);
            let shift = s.pow((n + q) as u32);
            for (i, x) in left.iter().enumerate() {
                if *x == ZERO {
                    continue;
                }
                let base = i * shift + mid * rlen;
                for (r, y) in right.iter().enumerate() {
                    out[base + r] += x * y;
                }
            }
        }
        out
    }
}

pub fn assemble_d(l: usize, k: usize, signs: &[Sign], b: usize, cl: &SlotPoly, ck: &SlotPoly) -> Result<DTensor> {
    let n = signs.len();
    if b < n || b % 2 != 0 {
        return Err(Error::Usage(format!("𝔇 needs even b ≥ n, got b = {b}, n = {n}")));
    }
    if b > n + 3 * (l + k) {
        return Err(Error::Usage(format!("b = {b} exceeds n + 3(ℓ+k) = {}", n + 3 * (l + k))));
    }
    let left_poly = cl.adjoint();
    let mut blocks = Vec::new();
    for q in 0..=(b - n) {
        if (q + k) % 2 != 0 {
            continue;
        }
        if let (Some(lp), Some(rp)) = (left_poly.part(b - n - q), ck.part(q)) {
            blocks.push((q, lp.to_vec(), rp.to_vec()));
        }
    }
    Ok(DTensor { l, k, b, signs: signs.to_vec(), m: cl.m, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn leading_coefficients() {
        let t = TaylorTable::new(4);
        for l in 0..=t.max {
            assert_eq!(t.c_exact(l, 0), q(1, 1));
        }
        assert_eq!(t.c_exact(0, 1), q(-1, 2));
        assert_eq!(t.c_exact(0, 2), q(-1, 8));
        assert_eq!(t.c_exact(0, 3), q(-1, 16));
        assert_eq!(t.d_exact(1, 0), q(-1, 2));
        assert_eq!(t.d_exact(1, 1), q(-1, 1));
        assert_eq!(t.ctilde_exact(1), q(-1, 1));
        assert_eq!(t.ctilde_exact(2), q(1, 1));
        assert_eq!(t.ctilde_exact(3), q(-1, 1));
    }

    // f(x) = √(1-x) has f^{(n)}(0) = (-1)^n (½)(½-1)…(½-n+1)
    #[test]
    fn matches_symbolic_derivatives() {
        let t = TaylorTable::new(6);
        let mut falling = 1.0;
        let mut fact = 1.0;
        for n in 1..=8 {
            falling *= 0.5 - (n - 1) as f64;
            fact *= n as f64;
            let want = if n % 2 == 0 { falling } else { -falling } / fact;
            assert!((t.c(n) - want).abs() < 1e-15, "n={n}");
        }
    }

    #[test]
    fn coefficient_bounds() {
        let t = TaylorTable::new(6);
        for l in 1..=t.max {
            assert!(t.c(l).abs() <= 1.0 / (2.0 * l as f64) + 1e-15);
        }
        // c^{(0)}_0 = 1 is the single entry outside the bound
        for j in 0..=t.max {
            for l in usize::from(j == 0)..=t.max {
                assert!(t.c_l(j, l).abs() <= libm::pow(2.0, (j + l) as f64 - 1.0) + 1e-12);
            }
        }
        for l in 0..=t.max {
            for j in 0..=l {
                assert!(t.d(l, j).abs() <= libm::pow(2.0, l as f64) * (j + 1) as f64);
            }
        }
    }

    // d is the Taylor coefficient of √((1-x)(1-x-λ)) in λ at fixed x/λ
    #[test]
    fn d_reproduces_product_of_roots() {
        let t = TaylorTable::new(6);
        for &y in &[0.0, 1.0, 2.5, 4.0] {
            let lam = 1e-3;
            let x = lam * y;
            let exact = libm::sqrt((1.0 - x) * (1.0 - x - lam));
            let mut s = 0.0;
            for n in 0..=4 {
                let mut cn = 0.0;
                for nu in 0..=n {
                    cn += t.d(n, nu) * libm::pow(y, nu as f64);
                }
                s += cn * libm::pow(lam, n as f64);
            }
            assert!((s - exact).abs() < 1e-14 * (1.0 + y).powi(5));
        }
    }

    #[test]
    fn stirling_rows() {
        let s = stirling2(5);
        assert_eq!(s[4][2], 7.0);
        assert_eq!(s[5][3], 25.0);
    }

    use crate::bogomap::evolve_bogoliubov_map;
    use crate::fock::{evolve_bogoliubov_state, expansion_terms, k_pieces, FockVector};
    use crate::kernels::build_kernels;
    use crate::lattice::{evolve_hartree, CondensateState, LatticeConfig, Potential};
    use crate::linalg::{vdot, vnorm};
    use core::f64::consts::PI;

    fn cfg(m: usize, g: f64, dt: f64, t: f64) -> LatticeConfig {
        LatticeConfig::new(m, 2.0 * PI, Potential::Cosine { g }, dt, t).unwrap()
    }

    fn kernels_at(c: &LatticeConfig) -> KernelSet {
        build_kernels(&CondensateState::new(c.default_condensate(), 0.0, c), c).unwrap()
    }

    fn low_vector(basis: &FockBasis, top: usize) -> Vec<C64> {
        (0..basis.dim())
            .map(|i| {
                if basis.excitations(i) <= top {
                    C64::new(1.0 / (1.0 + i as f64), 0.3 * libm::sin(i as f64))
                } else {
                    ZERO
                }
            })
            .collect()
    }

    #[test]
    fn hamiltonian_polys_match_sparse_terms() {
        let c = cfg(2, 0.7, 1e-3, 1.0);
        let k = kernels_at(&c);
        let basis = FockBasis::new(2, 14).unwrap();
        let table = TaylorTable::new(5);
        let sparse = expansion_terms(&k_pieces(&k, &basis), 5, &basis, &table);
        let v = low_vector(&basis, 6);
        for n in 0..=5 {
            let a = hamiltonian_poly(&k, n, &table).apply(&basis, &v);
            let b = sparse[n].mul_vec(&v);
            let gap = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(gap < 1e-12, "n={n}: {gap}");
            let orders = hamiltonian_poly(&k, n, &table).orders();
            assert!(orders.iter().all(|p| (p + n) % 2 == 0 && *p >= 2 && *p <= n + 2), "{orders:?}");
        }
    }

    #[test]
    fn adjoint_and_product() {
        let c = cfg(2, 0.7, 1e-3, 1.0);
        let k = kernels_at(&c);
        let basis = FockBasis::new(2, 14).unwrap();
        let table = TaylorTable::new(3);
        let p = hamiltonian_poly(&k, 1, &table).mul(&number_poly(2, 0.5)).mul(&kernel_polys(&k)[2]);
        let u = low_vector(&basis, 5);
        let v: Vec<C64> = low_vector(&basis, 5).iter().map(|z| z.conj() * C64::new(0.5, 1.0)).collect();
        let lhs = vdot(&u, &p.apply(&basis, &v));
        let rhs = vdot(&p.adjoint().apply(&basis, &u), &v);
        assert!((lhs - rhs).norm() < 1e-12);
        let h1 = hamiltonian_poly(&k, 1, &table);
        let mut d = h1.adjoint();
        d.add_scaled_c(C64::new(-1.0, 0.0), &h1);
        assert!(d.max_abs() < 1e-15);
    }

    #[test]
    fn identity_map_gives_kernel() {
        let c = cfg(3, 0.6, 1e-3, 1.0);
        let k = kernels_at(&c);
        let table = TaylorTable::new(2);
        let a = assemble_a(1, 3, &k, &BogoliubovMap::identity(3, 0.0), &table).unwrap();
        let comp = a.signed(&[1, 1, -1]).unwrap();
        for (i, z) in comp.iter().enumerate() {
            assert!((z - k.k3[i]).norm() < 1e-15);
        }
        assert!(assemble_a(1, 2, &k, &BogoliubovMap::identity(3, 0.0), &table).is_err());
        assert!(assemble_a(2, 5, &k, &BogoliubovMap::identity(3, 0.0), &table).is_err());
    }

    #[test]
    fn free_and_linear_families() {
        let table = TaylorTable::new(3);
        let free = kernels_at(&cfg(3, 0.0, 1e-3, 1.0));
        for (n, p) in [(1, 3), (2, 2), (2, 4), (3, 5)] {
            let a = assemble_a(n, p, &free, &BogoliubovMap::identity(3, 0.0), &table).unwrap();
            assert!(a.values.iter().all(|z| *z == ZERO));
        }
        let c1 = cfg(3, 0.4, 1e-3, 1.0);
        let c2 = cfg(3, 0.8, 1e-3, 1.0);
        let st = CondensateState::new(c1.default_condensate(), 0.0, &c1);
        let k1 = build_kernels(&st, &c1).unwrap();
        let k2 = build_kernels(&st, &c2).unwrap();
        let map = BogoliubovMap::from_generator(&k1.h_plus_k1(), &k1.k2);
        let a1 = assemble_a(1, 3, &k1, &map, &table).unwrap();
        let a2 = assemble_a(1, 3, &k2, &map, &table).unwrap();
        for (x, y) in a1.values.iter().zip(&a2.values) {
            assert!((2.0 * x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn conjugation_matches_fock_propagation() {
        let c = cfg(2, 1.0, 5e-3, 0.6);
        let traj = evolve_hartree(&c.default_condensate(), &c).unwrap();
        let kt = KernelTrajectory::build(&traj, &c).unwrap();
        let maps = evolve_bogoliubov_map(&kt).unwrap();
        let basis = FockBasis::new(2, 34).unwrap();
        let table = TaylorTable::new(2);
        let (s, t) = (40, 120);
        let sub = KernelTrajectory { grid: kt.grid[s..=t].to_vec(), mid: kt.mid[s..t].to_vec(), dt: kt.dt };
        let v = low_vector(&basis, 3);
        let v = v.iter().map(|z| z / vnorm(&v)).collect::<Vec<_>>();
        let pieces = k_pieces(&kt.grid[s], &basis);
        let h1v = expansion_terms(&pieces, 1, &basis, &table)[1].mul_vec(&v);
        let prop = |x: &[C64]| evolve_bogoliubov_state(&FockVector { coeffs: x.to_vec(), t: 0.0 }, &sub, &basis);
        let wh = prop(&h1v).unwrap().pop().unwrap().coeffs;
        let wv = prop(&v).unwrap().pop().unwrap().coeffs;
        let a = conjugated_hamiltonian(1, &kt.grid[s], &maps.between(t, s), &table).apply(&basis, &wv);
        let gap = a.iter().zip(&wh).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(gap < 1e-6, "{gap}");
    }

    #[test]
    fn first_order_c_is_integrated_a() {
        let c = cfg(2, 0.8, 1e-2, 0.4);
        let traj = evolve_hartree(&c.default_condensate(), &c).unwrap();
        let kt = KernelTrajectory::build(&traj, &c).unwrap();
        let maps = evolve_bogoliubov_map(&kt).unwrap();
        let table = TaylorTable::new(2);
        let idx = 40;
        let ct = assemble_c(2, idx, &kt, &maps, &InitialCoefficients::zero(2), &table).unwrap();
        assert_eq!(ct.polys[1].max_abs_of(1), 0.0);
        assert!(ct.tensor(1, 2).is_err());
        assert_eq!(ct.polys[1].orders(), vec![3]);
        assert_eq!(ct.polys[2].orders().iter().filter(|q| *q % 2 == 1).count(), 0);
        let w = crate::integrate::cumulative_weights(idx, kt.dt);
        let mut want = SlotPoly::zero(2);
        for (r, wr) in w.iter().enumerate() {
            let a = conjugated_hamiltonian(1, &kt.grid[r], &maps.between(idx, r), &table);
            want.add_scaled_c(C64::new(0.0, -wr), &a);
        }
        let mut d = ct.polys[1].clone();
        d.add_scaled_c(C64::new(-1.0, 0.0), &want);
        assert!(d.max_abs() < 1e-13);

        let free = cfg(2, 0.0, 1e-2, 0.4);
        let ft = evolve_hartree(&free.default_condensate(), &free).unwrap();
        let fk = KernelTrajectory::build(&ft, &free).unwrap();
        let fm = evolve_bogoliubov_map(&fk).unwrap();
        let fc = assemble_c(3, 40, &fk, &fm, &InitialCoefficients::zero(2), &TaylorTable::new(3)).unwrap();
        assert!(fc.polys[1..].iter().all(|p| p.max_abs() == 0.0));
    }

    #[test]
    fn d_blocks_and_ranges() {
        let one = SlotPoly::scalar(2, C64::new(1.0, 0.0));
        let d = assemble_d(0, 0, &[-1, 1], 2, &one, &one).unwrap();
        assert_eq!(d.blocks.len(), 1);
        let t = d.materialize(&[1, 0]);
        assert_eq!(t.iter().filter(|z| **z != ZERO).count(), 1);
        assert_eq!(t[1 * 4 + 2], C64::new(1.0, 0.0));
        assert!(assemble_d(0, 0, &[-1, 1], 3, &one, &one).is_err());
        assert!(assemble_d(0, 0, &[-1, 1], 4, &one, &one).is_err());
        let c3 = SlotPoly::from_terms(2, &[(C64::new(1.0, 0.0), vec![2, 3, 0])]);
        let e = assemble_d(0, 1, &[-1], 2, &one, &c3).unwrap();
        assert!(e.is_empty());
        let f = assemble_d(0, 1, &[-1], 4, &one, &c3).unwrap();
        assert_eq!(f.blocks.len(), 1);
    }

    proptest! {
        #[test]
        fn sqrt_remainder_bound(x in -1.0f64..=1.0, a in 0usize..=4) {
            let t = TaylorTable::new(4);
            let r = (libm::sqrt(1.0 - x) - sqrt_partial_sum(&t, a, x)).abs();
            prop_assert!(r <= libm::pow(2.0, (a + 1) as f64) * libm::pow(x.abs(), (a + 1) as f64));
        }
    }
}
