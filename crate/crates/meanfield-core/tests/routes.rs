use std::f64::consts::PI;

use meanfield_core::bogomap::evolve_bogoliubov_map;
use meanfield_core::coeffs::TaylorTable;
use meanfield_core::fock::FockBasis;
use meanfield_core::hierarchy::{evolve_corrections_c, evolve_corrections_duhamel, evolve_corrections_ode, InitialDataSpec};
use meanfield_core::kernels::KernelTrajectory;
use meanfield_core::lattice::{evolve_hartree, LatticeConfig, Potential};

fn gaps(dt: f64) -> (f64, f64, f64) {
    let c = LatticeConfig::new(2, 2.0 * PI, Potential::Cosine { g: 0.5 }, dt, 1.0).unwrap();
    let traj = evolve_hartree(&c.default_condensate(), &c).unwrap();
    let kt = KernelTrajectory::build(&traj, &c).unwrap();
    let maps = evolve_bogoliubov_map(&kt).unwrap();
    // large enough that truncation is far below the time-step error
    let basis = FockBasis::new(2, 36).unwrap();
    let init = InitialDataSpec::vacuum(2);
    let table = TaylorTable::new(2);
    let at = [kt.steps() / 2, kt.steps()];
    let ode = evolve_corrections_ode(&init, &kt, &basis, 2, &table, 1).unwrap();
    let duh = evolve_corrections_duhamel(&init, &kt, &maps, &basis, 2, &table, &at).unwrap();
    let (cr, _) = evolve_corrections_c(&init, &kt, &maps, &basis, 2, &table, &at).unwrap();
    let drift = (0..=2).map(|l| cr.series_norm_drift(l).max(duh.series_norm_drift(l))).fold(0.0, f64::max);
    (ode.max_gap(&duh, 2), ode.max_gap(&cr, 2), drift)
}

#[test]
fn route_gap_is_a_time_step_error() {
    let (a1, b1, d1) = gaps(0.05);
    let (a2, b2, d2) = gaps(0.025);
    assert!(a1 / a2 > 8.0, "{a1} {a2}");
    assert!(b1 / b2 > 8.0, "{b1} {b2}");
    assert!(a2 < 1e-5 && b2 < 1e-5);
    assert!(d1.max(d2) < 1e-5, "{d1} {d2}");
}
