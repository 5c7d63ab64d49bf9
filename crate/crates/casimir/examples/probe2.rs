use casimir::energy::{compute_energy, richardson, EnergyConfig, SolverKind};
use casimir::geometry::{make_box, transform, Scene};
use nalgebra::{Matrix3, Vector3};
use std::time::Instant;

fn main() {
    for z in [1.0f64, 2.0, 3.0] {
        let mut es = Vec::new();
        for h in [0.1f64, 0.05] {
            let t0 = Instant::now();
            let c = make_box([1.0f64, 1.0, 1.0], h).unwrap();
            let t = transform(&c, &Matrix3::identity(), &Vector3::new(0.0, 0.0, -(1.0 + z))).unwrap();
            let scene = Scene::with_groups(vec![c, t], vec![0, 0]).unwrap();
            let cfg = EnergyConfig::<f64> { solver: SolverKind::Dense, ..Default::default() };
            let r = compute_energy(&scene, h, &cfg).unwrap();
            println!("Z={z} h={h}: kappa={:.3} N={} energy={:.6e} [{:.0}s]", r.plan.kappa, r.dim, r.energy_normalized, t0.elapsed().as_secs_f64());
            es.push((h, r.energy_normalized));
        }
        let ex = richardson(es[0].1, es[1].1, es[0].0, es[1].0).unwrap();
        let reference = match z as u32 { 1 => 0.01305, 2 => 0.002195, _ => 0.0007638 };
        println!("Z={z}: extrapolated {ex:.6e} vs {reference} rel {:+.3e}", (ex - reference) / reference);
    }
}
