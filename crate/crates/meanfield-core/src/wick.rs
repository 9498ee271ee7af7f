//! Pairings, Wick's rule for quasi-free states and its generalization to
//! mixed correlators between correction orders.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::bogomap::{slot, Sign, TwoPointPair};
use crate::coeffs::{assemble_d, CTable};
use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::linalg::{vdot, CMat, C64, ZERO};

/// A perfect matching of `0..2a` listed as `(first, second)` with
/// `first < second` and the firsts increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairing {
    pub pairs: Vec<(usize, usize)>,
}

impl Pairing {
    /// Every index appears once and the ordering constraints hold.
    pub fn is_valid(&self, two_a: usize) -> bool {
        let mut seen = vec![false; two_a];
        for &(i, j) in &self.pairs {
            if i >= j || j >= two_a || seen[i] || seen[j] {
                return false;
            }
            seen[i] = true;
            seen[j] = true;
        }
        self.pairs.windows(2).all(|w| w[0].0 < w[1].0) && seen.iter().all(|&s| s)
    }
}

/// All pairings of `two_a` ordered slots.
pub fn enumerate_pairings(two_a: usize) -> Result<Vec<Pairing>> {
    if two_a == 0 || two_a % 2 != 0 {
        return Err(Error::Usage(format!("pairings need an even positive count, got {two_a}")));
    }
    let mut out = Vec::new();
    let mut free: Vec<usize> = (0..two_a).collect();
    let mut cur = Vec::new();
    pair_rec(&mut free, &mut cur, &mut out);
    Ok(out)
}

fn pair_rec(free: &mut Vec<usize>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Pairing>) {
    if free.is_empty() {
        out.push(Pairing { pairs: cur.clone() });
        return;
    }
    let first = free.remove(0);
    for k in 0..free.len() {
        let partner = free.remove(k);
        cur.push((first, partner));
        pair_rec(free, cur, out);
        cur.pop();
        free.insert(k, partner);
    }
    free.insert(0, first);
}

/// `G[c][c'] = ⟨a^{c} a^{c'}⟩` in slot codes for a state with two-point
/// functions `(γ, α)`.
pub fn slot_two_point(pair: &TwoPointPair) -> CMat {
    let m = pair.m();
    let mut g = CMat::zeros(2 * m, 2 * m);
    for x in 0..m {
        for y in 0..m {
            g[(x, y)] = pair.alpha[(x, y)];
            g[(m + x, m + y)] = pair.alpha[(x, y)].conj();
            g[(m + x, y)] = pair.gamma[(y, x)];
            g[(x, m + y)] = pair.gamma[(x, y)] + if x == y { C64::new(1.0, 0.0) } else { ZERO };
        }
    }
    g
}

/// `⟨a^{j1}_{x1} … a^{j2n}_{x2n}⟩` of a quasi-free state as a tensor over
/// `M^{2n}`, summed explicitly over pairings.
pub fn wick_evaluate(pair: &TwoPointPair, signs: &[Sign]) -> Result<Vec<C64>> {
    let m = pair.m();
    let n = signs.len();
    let size = m.pow(n as u32);
    if n % 2 == 1 {
        return Ok(vec![ZERO; size]);
    }
    if n == 0 {
        return Ok(vec![C64::new(1.0, 0.0)]);
    }
    let g = slot_two_point(pair);
    let pairings = enumerate_pairings(n)?;
    let mut out = vec![ZERO; size];
    let mut xs = vec![0; n];
    for (idx, o) in out.iter_mut().enumerate() {
        let mut r = idx;
        for i in (0..n).rev() {
            xs[i] = r % m;
            r /= m;
        }
        let codes: Vec<usize> = (0..n).map(|i| slot(signs[i], xs[i], m)).collect();
        *o = pairings
            .iter()
            .map(|p| p.pairs.iter().map(|&(i, j)| g[(codes[i], codes[j])]).product::<C64>())
            .sum();
    }
    Ok(out)
}

/// Wick contraction of a dense slot tensor of the given length: the first
/// remaining slot is paired with every later one and the rest is
/// contracted recursively.
pub fn wick_contract(t: &[C64], order: usize, g: &CMat) -> C64 {
    let s = g.rows();
    if order == 0 {
        return t[0];
    }
    if order % 2 == 1 || t.iter().all(|z| *z == ZERO) {
        return ZERO;
    }
    let mut rest = vec![ZERO; s.pow(order as u32 - 2)];
    for j in 1..order {
        let inner = s.pow((order - 1 - j) as u32);
        let mid = s.pow((j - 1) as u32);
        for c0 in 0..s {
            for cj in 0..s {
                let w = g[(c0, cj)];
                if w == ZERO {
                    continue;
                }
                for mi in 0..mid {
                    let src = ((c0 * mid + mi) * s + cj) * inner;
                    let dst = mi * inner;
                    for ii in 0..inner {
                        rest[dst + ii] += t[src + ii] * w;
                    }
                }
            }
        }
    }
    wick_contract(&rest, order - 2, g)
}

/// `⟨Χ_ℓ, a^{j1}_{x1} … a^{jn}_{xn} Χ_k⟩` over all mode tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedCorrelator {
    pub l: usize,
    pub k: usize,
    pub signs: Vec<Sign>,
    pub values: Vec<C64>,
    pub t: f64,
}

impl MixedCorrelator {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_gap(&self, other: &MixedCorrelator) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

fn mode_tuple(mut idx: usize, m: usize, n: usize) -> Vec<usize> {
    let mut xs = vec![0; n];
    for i in (0..n).rev() {
        xs[i] = idx % m;
        idx /= m;
    }
    xs
}

/// Mixed correlator by applying ladder operators to Fock vectors.
pub fn mixed_correlator_direct(
    basis: &FockBasis,
    chi_l: &[C64],
    chi_k: &[C64],
    l: usize,
    k: usize,
    signs: &[Sign],
    t: f64,
) -> Result<MixedCorrelator> {
    let m = basis.m();
    let n = signs.len();
    if n > basis.cutoff() {
        return Err(Error::Resource(format!("{n} ladder operators exceed the cutoff {}", basis.cutoff())));
    }
    let values = (0..m.pow(n as u32))
        .map(|idx| {
            let xs = mode_tuple(idx, m, n);
            let word: Vec<usize> = signs.iter().zip(&xs).map(|(j, x)| slot(*j, *x, m)).collect();
            vdot(chi_l, &basis.apply_word_vec(&word, chi_k))
        })
        .collect();
    Ok(MixedCorrelator { l, k, signs: signs.to_vec(), values, t })
}

/// Contribution of one even word length `b` to the generalized Wick
/// expansion.
pub fn generalized_wick_term(
    ctab: &CTable,
    pair: &TwoPointPair,
    l: usize,
    k: usize,
    signs: &[Sign],
    b: usize,
) -> Result<MixedCorrelator> {
    let m = pair.m();
    let n = signs.len();
    let cl = ctab.polys.get(l).ok_or_else(|| Error::Usage(format!("ℭ of order {l} not assembled")))?;
    let ck = ctab.polys.get(k).ok_or_else(|| Error::Usage(format!("ℭ of order {k} not assembled")))?;
    let d = assemble_d(l, k, signs, b, cl, ck)?;
    let g = slot_two_point(pair);
    let values = (0..m.pow(n as u32))
        .map(|idx| if d.is_empty() { ZERO } else { wick_contract(&d.materialize(&mode_tuple(idx, m, n)), b, &g) })
        .collect();
    Ok(MixedCorrelator { l, k, signs: signs.to_vec(), values, t: ctab.t })
}

/// Mixed correlator from the `ℭ` tensors and the two-point functions of a
/// quasi-free `Χ_0(t)`, summed over all even word lengths.
pub fn mixed_correlator_generalized_wick(
    ctab: &CTable,
    pair: &TwoPointPair,
    l: usize,
    k: usize,
    signs: &[Sign],
) -> Result<MixedCorrelator> {
    let n = signs.len();
    let m = pair.m();
    let mut values = vec![ZERO; m.pow(n as u32)];
    let mut b = n + n % 2;
    while b <= n + 3 * (l + k) {
        let term = generalized_wick_term(ctab, pair, l, k, signs, b)?;
        for (v, x) in values.iter_mut().zip(&term.values) {
            *v += x;
        }
        b += 2;
    }
    Ok(MixedCorrelator { l, k, signs: signs.to_vec(), values, t: ctab.t })
}
