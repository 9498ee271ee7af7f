//! Bogoliubov maps `𝒱 = [[U, V̄], [V, Ū]]`, their time evolution and the
//! two-point functions they transport.
//!
//! The Fock implementation `𝒰_𝒱` acts on ladder operators as
//! `𝒰 a_x 𝒰* = Σ_y conj U(y;x) a_y + conj V(y;x) a†_y`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::integrate::{rk4_step, Stage};
use crate::kernels::{KernelSet, KernelTrajectory};
use crate::linalg::{expm, CMat, C64, I};

/// Sign index of a ladder operator: `-1` annihilation, `+1` creation.
pub type Sign = i8;

/// Slot code of `a^{♯s}_x`: `x` for `a`, `M + x` for `a†`.
#[inline]
pub fn slot(sign: Sign, x: usize, m: usize) -> usize {
    if sign < 0 {
        x
    } else {
        m + x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BogoliubovMap {
    pub u: CMat,
    pub v: CMat,
    pub t: f64,
    pub s: f64,
}

impl BogoliubovMap {
    pub fn identity(m: usize, t: f64) -> Self {
        BogoliubovMap { u: CMat::identity(m), v: CMat::zeros(m, m), t, s: t }
    }

    pub fn m(&self) -> usize {
        self.u.rows()
    }

    /// The map generated by the quadratic operator
    /// `Σ A_ij a†_i a_j + ½ Σ (B_ij a†_i a†_j + h.c.)` over unit time.
    pub fn from_generator(a: &CMat, b: &CMat) -> Self {
        let m = a.rows();
        let big = expm(&quadratic_generator(a, b).scale(-I));
        BogoliubovMap { u: big.block(0, 0, m, m), v: big.block(m, 0, m, m), t: 1.0, s: 0.0 }
    }

    /// The full `2M × 2M` block matrix.
    pub fn matrix(&self) -> CMat {
        CMat::block2(&self.u, &self.v.conj(), &self.v, &self.u.conj())
    }

    /// `self ∘ other`; requires `self.s == other.t`.
    pub fn compose(&self, other: &BogoliubovMap) -> Result<BogoliubovMap> {
        if libm::fabs(self.s - other.t) > 1e-12 {
            return Err(Error::Usage(format!(
                "cannot compose maps ({}, {}) and ({}, {})",
                self.t, self.s, other.t, other.s
            )));
        }
        Ok(self.compose_unchecked(other))
    }

    pub fn compose_unchecked(&self, other: &BogoliubovMap) -> BogoliubovMap {
        let u = self.u.matmul(&other.u).add(&self.v.conj().matmul(&other.v));
        let v = self.v.matmul(&other.u).add(&self.u.conj().matmul(&other.v));
        BogoliubovMap { u, v, t: self.t, s: other.s }
    }

    /// `𝒮 𝒱* 𝒮`
    pub fn invert(&self) -> BogoliubovMap {
        BogoliubovMap { u: self.u.adjoint(), v: self.v.transpose().scale(C64::new(-1.0, 0.0)), t: self.s, s: self.t }
    }

    /// `max |U†U - V†V - 1|`
    pub fn symplectic_defect(&self) -> f64 {
        let m = self.m();
        self.u.adjoint().matmul(&self.u).sub(&self.v.adjoint().matmul(&self.v)).sub(&CMat::identity(m)).max_abs()
    }

    /// Largest violation of all four block relations.
    pub fn relation_defect(&self) -> f64 {
        let m = self.m();
        let one = CMat::identity(m);
        let (u, v) = (&self.u, &self.v);
        let (ub, vb) = (u.conj(), v.conj());
        let r1 = self.symplectic_defect();
        let r2 = u.matmul(&u.adjoint()).sub(&vb.matmul(&vb.adjoint())).sub(&one).max_abs();
        let r3 = v.adjoint().matmul(&ub).sub(&u.adjoint().matmul(&vb)).max_abs();
        let r4 = u.matmul(&v.adjoint()).sub(&vb.matmul(&ub.adjoint())).max_abs();
        r1.max(r2).max(r3).max(r4)
    }

    /// Asymmetry of `U V†`.
    pub fn pairing_symmetry_defect(&self) -> f64 {
        self.u.matmul(&self.v.adjoint()).symmetry_defect()
    }

    /// `ω^{(ℓ,j)}(x;y)` as a matrix indexed `[x][y]`.
    pub fn omega(&self, l: Sign, j: Sign) -> CMat {
        match (l < 0, j < 0) {
            (true, true) => self.u.adjoint(),
            (true, false) => self.v.adjoint(),
            (false, true) => self.v.transpose(),
            (false, false) => self.u.transpose(),
        }
    }

    /// `Ω[c][c'] = ω^{(ℓ,j)}(y;x)` for `c = (ℓ,y)` and `c' = (j,x)` in slot
    /// codes, so that `𝒰 a^{c} 𝒰* = Σ_{c'} Ω[c][c'] a^{c'}`.
    pub fn slot_matrix(&self) -> CMat {
        let m = self.m();
        let mut out = CMat::zeros(2 * m, 2 * m);
        for (l, j) in [(-1i8, -1i8), (-1, 1), (1, -1), (1, 1)] {
            let w = self.omega(l, j);
            for y in 0..m {
                for x in 0..m {
                    out[(slot(l, y, m), slot(j, x, m))] = w[(y, x)];
                }
            }
        }
        out
    }

    pub fn hs_norm_v(&self) -> f64 {
        self.v.frobenius_norm()
    }

    pub fn op_norm_u(&self) -> f64 {
        self.u.op_norm()
    }
}

/// `[[A, -B], [B̄, -Ā]]`
pub fn quadratic_generator(a: &CMat, b: &CMat) -> CMat {
    CMat::block2(a, &b.scale(C64::new(-1.0, 0.0)), &b.conj(), &a.conj().scale(C64::new(-1.0, 0.0)))
}

/// The Bogoliubov generator `𝒜(t)`.
pub fn generator(k: &KernelSet) -> CMat {
    quadratic_generator(&k.h_plus_k1(), &k.k2)
}

/// `𝒱(t_k, 0)` at every grid time.
#[derive(Debug, Clone)]
pub struct MapTrajectory {
    pub maps: Vec<BogoliubovMap>,
    pub max_defect: f64,
}

impl MapTrajectory {
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// `𝒱(t_i, t_j) = 𝒱(t_i,0) 𝒱(t_j,0)^{-1}`
    pub fn between(&self, i: usize, j: usize) -> BogoliubovMap {
        self.maps[i].compose_unchecked(&self.maps[j].invert())
    }
}

fn map_rhs(k: &KernelSet, u: &CMat, v: &CMat) -> (CMat, CMat) {
    let hk = k.h_plus_k1();
    let du = hk.matmul(u).sub(&k.k2.matmul(v)).scale(-I);
    let dv = k.k2.conj().matmul(u).sub(&hk.conj().matmul(v)).scale(-I);
    (du, dv)
}

/// Integrates `i∂_t 𝒱(t,0) = 𝒜(t) 𝒱(t,0)` with RK4 on the trajectory grid.
pub fn evolve_bogoliubov_map(kernels: &KernelTrajectory) -> Result<MapTrajectory> {
    let m = kernels.m();
    let dt = kernels.dt;
    let mut maps = Vec::with_capacity(kernels.grid.len());
    let mut cur = BogoliubovMap::identity(m, 0.0);
    let mut worst: f64 = 0.0;
    maps.push(cur.clone());
    for k in 0..kernels.steps() {
        let (u, v) = rk4_step(&(cur.u.clone(), cur.v.clone()), dt, |st: Stage, y: &(CMat, CMat)| {
            map_rhs(kernels.stage(k, st), &y.0, &y.1)
        });
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::Numeric(format!("Bogoliubov map diverged at step {k}")));
        }
        cur = BogoliubovMap { u, v, t: kernels.grid[k + 1].t, s: 0.0 };
        worst = worst.max(cur.symplectic_defect());
        if worst > 1e-6 {
            return Err(Error::Invariant(format!("symplectic drift {worst:.3e} at t = {}", cur.t)));
        }
        maps.push(cur.clone());
    }
    Ok(MapTrajectory { maps, max_defect: worst })
}

/// One-body density `γ(x,y) = ⟨a†_y a_x⟩` and pairing `α(x,y) = ⟨a_x a_y⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPointPair {
    pub gamma: CMat,
    pub alpha: CMat,
    pub t: f64,
}

impl TwoPointPair {
    pub fn vacuum(m: usize, t: f64) -> Self {
        TwoPointPair { gamma: CMat::zeros(m, m), alpha: CMat::zeros(m, m), t }
    }

    pub fn m(&self) -> usize {
        self.gamma.rows()
    }

    /// `Γ = [[γ, α], [α*, 1 + γ^T]]`
    pub fn gamma_block(&self) -> CMat {
        let m = self.m();
        CMat::block2(&self.gamma, &self.alpha, &self.alpha.adjoint(), &CMat::identity(m).add(&self.gamma.transpose()))
    }

    /// Hermiticity of `γ` and symmetry of `α`.
    pub fn structure_defect(&self) -> f64 {
        self.gamma.hermiticity_defect().max(self.alpha.symmetry_defect())
    }

    /// `max |αα* - γ(1+γ)|` and `max |γα - αγ^T|`, both zero for pure
    /// quasi-free states.
    pub fn quasi_free_defect(&self) -> f64 {
        let m = self.m();
        let g1 = self.gamma.matmul(&CMat::identity(m).add(&self.gamma));
        let a = self.alpha.matmul(&self.alpha.adjoint()).sub(&g1).max_abs();
        let b = self.gamma.matmul(&self.alpha).sub(&self.alpha.matmul(&self.gamma.transpose())).max_abs();
        a.max(b)
    }

    pub fn max_gap(&self, other: &TwoPointPair) -> f64 {
        self.gamma.sub(&other.gamma).max_abs().max(self.alpha.sub(&other.alpha).max_abs())
    }
}

/// `(γ, α)` of `𝒰_𝒱 ψ` from those of `ψ`.
pub fn two_point_transform(map: &BogoliubovMap, init: &TwoPointPair) -> TwoPointPair {
    let (u, v) = (&map.u, &map.v);
    let (ub, vb) = (u.conj(), v.conj());
    let (g0, a0) = (&init.gamma, &init.alpha);
    let a0s = a0.adjoint();
    let gamma = vb
        .matmul(&g0.transpose())
        .matmul(&vb.adjoint())
        .add(&u.matmul(g0).matmul(&u.adjoint()))
        .sub(&vb.matmul(&a0s).matmul(&u.adjoint()))
        .sub(&u.matmul(a0).matmul(&vb.adjoint()))
        .add(&vb.matmul(&vb.adjoint()));
    let alpha = u
        .matmul(a0)
        .matmul(&ub.adjoint())
        .add(&vb.matmul(&a0s).matmul(&v.adjoint()))
        .sub(&u.matmul(g0).matmul(&v.adjoint()))
        .sub(&vb.matmul(&g0.transpose()).matmul(&ub.adjoint()))
        .sub(&u.matmul(&v.adjoint()));
    TwoPointPair { gamma, alpha, t: map.t }
}

pub(crate) fn pde_rhs(k: &KernelSet, g: &CMat, a: &CMat) -> (CMat, CMat) {
    let hk = k.h_plus_k1();
    let k2 = &k.k2;
    let dg = hk
        .matmul(g)
        .sub(&g.matmul(&hk))
        .add(&k2.matmul(&a.adjoint()))
        .sub(&a.matmul(&k2.adjoint()))
        .scale(-I);
    let da = hk
        .matmul(a)
        .add(&a.matmul(&hk.transpose()))
        .add(k2)
        .add(&k2.matmul(&g.transpose()))
        .add(&g.matmul(k2))
        .scale(-I);
    (dg, da)
}

/// Integrates the closed `(γ, α)` equations along the trajectory.
pub fn two_point_pde(init: &TwoPointPair, kernels: &KernelTrajectory) -> Result<Vec<TwoPointPair>> {
    let dt = kernels.dt;
    let mut out = Vec::with_capacity(kernels.grid.len());
    let mut cur = (init.gamma.clone(), init.alpha.clone());
    let base = init.structure_defect();
    out.push(TwoPointPair { gamma: cur.0.clone(), alpha: cur.1.clone(), t: kernels.grid[0].t });
    for k in 0..kernels.steps() {
        cur = rk4_step(&cur, dt, |st, y: &(CMat, CMat)| pde_rhs(kernels.stage(k, st), &y.0, &y.1));
        let p = TwoPointPair { gamma: cur.0.clone(), alpha: cur.1.clone(), t: kernels.grid[k + 1].t };
        let d = p.structure_defect() - base;
        if !(d <= 1e-5) {
            return Err(Error::Invariant(format!("two-point structure drift {d:.3e} at t = {}", p.t)));
        }
        out.push(p);
    }
    Ok(out)
}

/// `max |𝒱† Γ(t) 𝒱 - Γ(0)|`
pub fn conjugation_defect(map: &BogoliubovMap, at_t: &TwoPointPair, at_0: &TwoPointPair) -> f64 {
    let vm = map.matrix();
    vm.adjoint().matmul(&at_t.gamma_block()).matmul(&vm).sub(&at_0.gamma_block()).max_abs()
}
