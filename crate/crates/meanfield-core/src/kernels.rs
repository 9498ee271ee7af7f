//! One- and two-body kernels generated by the interaction around a condensate.
//!
//! All kernels are expressed in the orthonormal site basis, so that the
//! quadratic and higher parts of the excitation Hamiltonian read
//! `Σ K1(x,y) a†_x a_y`, `½ Σ K2(x,y) a†_x a†_y`, `Σ K3(x1,x2;x3) a†a†a` and
//! `½ Σ K4(x1,x2;x3,x4) a†a†aa` with plain sums.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::integrate::Stage;
use crate::lattice::{mean_field, CondensateState, CondensateTrajectory, LatticeConfig};
use crate::linalg::{CMat, C64, ZERO};

#[derive(Debug, Clone)]
pub struct KernelSet {
    pub m: usize,
    pub t: f64,
    /// Condensate in the orthonormal basis.
    pub phi: Vec<C64>,
    pub mu: f64,
    /// `-Δ + v∗|φ|² - μ`
    pub hphi: CMat,
    pub k1: CMat,
    /// Symmetric pair kernel `K2(x1,x2)`.
    pub k2: CMat,
    /// `K3(x1,x2;x3)` at `x1 M² + x2 M + x3`.
    pub k3: Vec<C64>,
    /// `K4(x1,x2;x3,x4)` with row `x1 M + x2` and column `x3 M + x4`.
    pub k4: CMat,
    /// Real multiplication kernel `W(x,y)`.
    pub w: CMat,
    pub p: CMat,
    pub q: CMat,
}

impl KernelSet {
    #[inline]
    pub fn k3_at(&self, x1: usize, x2: usize, x3: usize) -> C64 {
        self.k3[(x1 * self.m + x2) * self.m + x3]
    }

    #[inline]
    pub fn k4_at(&self, x1: usize, x2: usize, x3: usize, x4: usize) -> C64 {
        self.k4[(x1 * self.m + x2, x3 * self.m + x4)]
    }

    /// `h + K1`, the one-body block of the Bogoliubov generator.
    pub fn h_plus_k1(&self) -> CMat {
        self.hphi.add(&self.k1)
    }

    /// Largest violation of the projection identities.
    pub fn projection_defect(&self) -> f64 {
        let m = self.m;
        let mut worst = self.p.matmul(&self.p).sub(&self.p).max_abs();
        worst = worst.max(self.q.matmul(&self.q).sub(&self.q).max_abs());
        worst = worst.max(self.k1.mul_vec(&self.phi).iter().map(|z| z.norm()).fold(0.0, f64::max));
        worst = worst.max(self.k1.adjoint().mul_vec(&self.phi).iter().map(|z| z.norm()).fold(0.0, f64::max));
        let pc: Vec<C64> = self.phi.iter().map(|z| z.conj()).collect();
        // φ-contractions of the output slots of K2, K3 and all slots of K4
        for x in 0..m {
            let s: C64 = (0..m).map(|y| pc[y] * self.k2[(y, x)]).sum();
            worst = worst.max(s.norm());
            for z in 0..m {
                let a: C64 = (0..m).map(|y| pc[y] * self.k3_at(y, x, z)).sum();
                let b: C64 = (0..m).map(|y| pc[y] * self.k3_at(x, y, z)).sum();
                let c: C64 = (0..m).map(|y| self.k3_at(x, z, y) * self.phi[y]).sum();
                worst = worst.max(a.norm()).max(b.norm()).max(c.norm());
            }
        }
        for a in 0..m * m {
            for x in 0..m {
                let l: C64 = (0..m).map(|y| pc[y] * self.k4[(y * m + x, a)]).sum();
                let r: C64 = (0..m).map(|y| self.k4[(a, x * m + y)] * self.phi[y]).sum();
                worst = worst.max(l.norm()).max(r.norm());
            }
        }
        worst
    }
}

/// Assembles every kernel at the time of `state`.
pub fn build_kernels(state: &CondensateState, cfg: &LatticeConfig) -> Result<KernelSet> {
    let m = cfg.m;
    let h = cfg.h();
    let (conv, mu) = mean_field(&state.phi, cfg);
    let phi = state.orthonormal(h);
    let v = cfg.potential_matrix();
    let p = CMat::outer(&phi, &phi);
    let q = CMat::identity(m).sub(&p);

    let mut hphi = cfg.laplacian();
    for x in 0..m {
        hphi[(x, x)] += C64::new(conv[x] - mu, 0.0);
    }
    let k1t = CMat::from_fn(m, m, |x, y| v[(x, y)] * phi[x] * phi[y].conj());
    let k1 = q.matmul(&k1t).matmul(&q);
    let k2t = CMat::from_fn(m, m, |x, y| v[(x, y)] * phi[x] * phi[y]);
    let k2 = q.matmul(&k2t).matmul(&q.transpose());
    let w = CMat::from_fn(m, m, |x, y| C64::new(v[(x, y)].re - conv[x] - conv[y] + 2.0 * mu, 0.0));

    // inner[y1,y2;x3] = W(y1,y2) φ(y1) q(y2,x3)
    let mut inner = vec![ZERO; m * m * m];
    for y1 in 0..m {
        for y2 in 0..m {
            let c = w[(y1, y2)] * phi[y1];
            for x3 in 0..m {
                inner[(y1 * m + y2) * m + x3] = c * q[(y2, x3)];
            }
        }
    }
    let qq = kron(&q, &q);
    let inner_mat = CMat::from_vec(m * m, m, inner);
    let k3 = qq.matmul(&inner_mat).data().to_vec();

    let wdiag: Vec<C64> = (0..m * m).map(|i| w[(i / m, i % m)]).collect();
    let k4 = qq.matmul(&CMat::diag(&wdiag)).matmul(&qq);

    Ok(KernelSet { m, t: state.t, phi, mu, hphi, k1, k2, k3, k4, w, p, q })
}

/// Kernels at every grid time and every step midpoint of a trajectory.
#[derive(Debug, Clone)]
pub struct KernelTrajectory {
    pub grid: Vec<KernelSet>,
    pub mid: Vec<KernelSet>,
    pub dt: f64,
}

impl KernelTrajectory {
    pub fn build(traj: &CondensateTrajectory, cfg: &LatticeConfig) -> Result<Self> {
        let grid = traj.states.iter().map(|s| build_kernels(s, cfg)).collect::<Result<Vec<_>>>()?;
        let mid = traj.midpoints.iter().map(|s| build_kernels(s, cfg)).collect::<Result<Vec<_>>>()?;
        Ok(KernelTrajectory { grid, mid, dt: traj.dt })
    }

    pub fn steps(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn m(&self) -> usize {
        self.grid[0].m
    }

    pub fn stage(&self, k: usize, stage: Stage) -> &KernelSet {
        match stage {
            Stage::Start => &self.grid[k],
            Stage::Mid => &self.mid[k],
            Stage::End => &self.grid[k + 1],
        }
    }
}

/// `A ⊗ B` with row `i1 rows(B) + i2`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca, rb, cb) = (a.rows(), a.cols(), b.rows(), b.cols());
    CMat::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{uniform_condensate, Potential};
    use core::f64::consts::PI;

    fn cfg(m: usize, g: f64) -> LatticeConfig {
        LatticeConfig::new(m, 2.0 * PI, Potential::Cosine { g }, 1e-3, 1.0).unwrap()
    }

    fn state(c: &LatticeConfig) -> CondensateState {
        CondensateState::new(c.default_condensate(), 0.0, c)
    }

    #[test]
    fn free_kernels_vanish() {
        let c = cfg(4, 0.0);
        let k = build_kernels(&state(&c), &c).unwrap();
        assert_eq!(k.k1.max_abs(), 0.0);
        assert_eq!(k.k2.max_abs(), 0.0);
        assert!(k.k3.iter().all(|z| z.norm() == 0.0));
        assert_eq!(k.k4.max_abs(), 0.0);
        assert_eq!(k.w.max_abs(), 0.0);
    }

    #[test]
    fn projections_annihilate_condensate() {
        for m in [2, 3, 5] {
            let c = cfg(m, 0.8);
            let k = build_kernels(&state(&c), &c).unwrap();
            assert!(k.projection_defect() < 1e-12, "m={m}");
            assert!(k.hphi.hermiticity_defect() < 1e-13);
            assert!(k.k1.hermiticity_defect() < 1e-13);
            assert!(k.k2.symmetry_defect() < 1e-13);
        }
    }

    #[test]
    fn k4_swap_symmetry() {
        let c = cfg(3, 0.6);
        let k = build_kernels(&state(&c), &c).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                for x in 0..3 {
                    for y in 0..3 {
                        assert!((k.k4_at(a, b, x, y) - k.k4_at(b, a, y, x)).norm() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn uniform_condensate_pair_kernel_by_loops() {
        let c = cfg(4, 0.5);
        let st = CondensateState::new(uniform_condensate(&c), 0.0, &c);
        let k = build_kernels(&st, &c).unwrap();
        let m = c.m;
        let h = c.h();
        let sum_v: f64 = (0..m).map(|i| c.potential.at_distance(i, m, c.l)).sum();
        let phi = libm::sqrt(h / c.l);
        for x in 0..m {
            for y in 0..m {
                let want = c.potential.at_distance((x + m - y) % m, m, c.l) - h * sum_v / c.l;
                assert!((k.w[(x, y)].re - want).abs() < 1e-13);
                let mut s = ZERO;
                for a in 0..m {
                    for b in 0..m {
                        let qa = if x == a { 1.0 } else { 0.0 } - phi * phi;
                        let qb = if y == b { 1.0 } else { 0.0 } - phi * phi;
                        s += C64::new(qa * qb * c.potential.at_distance((a + m - b) % m, m, c.l) * phi * phi, 0.0);
                    }
                }
                assert!((k.k2[(x, y)] - s).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn k1_norm_is_bounded_by_potential() {
        let c = cfg(5, 0.9);
        let k = build_kernels(&state(&c), &c).unwrap();
        assert!(k.k1.op_norm() <= c.potential.sup_norm(c.m, c.l) + 1e-12);
    }
}
