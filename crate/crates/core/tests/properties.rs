mod common;

use std::sync::Arc;

use bvcontrol::study::{bestfit_slope, eoc};
use bvcontrol::support::detect_support;
use bvcontrol::{phi_from_p, Coefficients, Jump, JumpControl, Mesh, MixedSystem, P0Function, ReducedProblem};
use proptest::prelude::*;

fn mesh_strategy() -> impl Strategy<Value = Mesh> {
    prop::collection::vec(0.05f64..1.0, 2..40).prop_map(|w| {
        let total: f64 = w.iter().sum();
        let mut nodes = vec![0.0];
        for v in &w[..w.len() - 1] {
            nodes.push(nodes.last().unwrap() + v / total);
        }
        nodes.push(1.0);
        Mesh::from_nodes(nodes).unwrap()
    })
}

fn control_strategy() -> impl Strategy<Value = JumpControl> {
    (-2.0f64..2.0, prop::collection::vec((0.001f64..0.999, -3.0f64..3.0), 0..8)).prop_map(|(base, raw)| {
        let mut raw = raw;
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        raw.dedup_by(|a, b| a.0 == b.0);
        JumpControl::new(base, raw.into_iter().map(|(x, c)| Jump { x, c }).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_preserves_cell_integrals(mesh in mesh_strategy(), u in control_strategy()) {
        let mesh = Arc::new(mesh);
        let proj = u.project(&mesh);
        let cells = u.cell_integrals(&mesh);
        for k in 0..mesh.num_cells() {
            prop_assert!((proj.values()[k] * mesh.cell_sizes()[k] - cells[k]).abs() <= 1e-14);
        }
        let total: f64 = cells.iter().sum();
        let direct: f64 = u.pieces().iter().map(|(a, b, v)| v * (b - a)).sum();
        prop_assert!((total - direct).abs() <= 1e-13);
    }

    #[test]
    fn projection_error_and_seminorm_bounds(mesh in mesh_strategy(), u in control_strategy()) {
        let mesh = Arc::new(mesh);
        let proj = u.project(&mesh);
        let back = JumpControl::from_cell_values(&mesh, proj.values()).unwrap();
        prop_assert!(u.l1_distance(&back) <= mesh.h_max() * u.bv_seminorm() + 1e-14);
        prop_assert!(back.bv_seminorm() <= u.bv_seminorm() + 1e-13);
    }

    #[test]
    fn l1_distance_is_a_metric(u in control_strategy(), v in control_strategy(), w in control_strategy()) {
        prop_assert!(u.l1_distance(&u) == 0.0);
        prop_assert!((u.l1_distance(&v) - v.l1_distance(&u)).abs() <= 1e-14);
        prop_assert!(u.l1_distance(&w) <= u.l1_distance(&v) + v.l1_distance(&w) + 1e-13);
        prop_assert!(u.l2_distance(&v) >= 0.0);
    }

    #[test]
    fn seminorm_is_homogeneous(u in control_strategy(), t in 0.0f64..5.0) {
        let scaled = JumpControl::new(
            u.base(),
            u.jumps().iter().map(|j| Jump { x: j.x, c: t * j.c }).collect(),
        ).unwrap();
        prop_assert!((scaled.bv_seminorm() - t * u.bv_seminorm()).abs() <= 1e-12);
    }

    #[test]
    fn phi_telescopes(mesh in mesh_strategy(), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mesh = Arc::new(mesh);
        let p: Vec<f64> = (0..mesh.num_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let phi = phi_from_p(&P0Function::new(mesh.clone(), p.clone()).unwrap());
        prop_assert_eq!(phi.values()[0], 0.0);
        for i in 0..p.len() {
            let step = phi.values()[i + 1] - phi.values()[i];
            prop_assert!((step - p[i] * mesh.cell_sizes()[i]).abs() <= 1e-15);
        }
    }

    #[test]
    fn detected_support_marks_sign_changes(p in prop::collection::vec(prop_oneof![-1.0f64..-0.01, 0.01f64..1.0], 2..50)) {
        let mesh = Arc::new(Mesh::uniform(p.len()).unwrap());
        let d = detect_support(&P0Function::new(mesh, p.clone()).unwrap());
        prop_assert!(!d.degenerate);
        let expected: Vec<usize> = (1..p.len()).filter(|&i| p[i - 1].signum() != p[i].signum()).collect();
        prop_assert_eq!(d.nodes, expected);
    }

    #[test]
    fn eoc_is_antisymmetric(e1 in 1e-8f64..1.0, e2 in 1e-8f64..1.0, k in 1u32..6) {
        let (h1, h2) = (0.5f64.powi(k as i32), 0.5f64.powi(k as i32 + 1));
        let a = eoc(e1, e2, h1, h2).unwrap();
        let b = eoc(e2, e1, h2, h1).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn bestfit_ignores_scaling(errs in prop::collection::vec(1e-6f64..1.0, 2..10), s in 1e-3f64..1e3) {
        let hs: Vec<f64> = (0..errs.len()).map(|k| 0.5f64.powi(k as i32 + 2)).collect();
        let scaled: Vec<f64> = errs.iter().map(|e| e * s).collect();
        let a = bestfit_slope(&hs, &errs).unwrap();
        let b = bestfit_slope(&hs, &scaled).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        prop_assert!((a - common::loglog_slope(&hs, &errs)).abs() <= 1e-9 * (1.0 + a.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn objective_is_convex(
        n in 4usize..40,
        seed in any::<u64>(),
        lambda in 0.01f64..0.99,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mesh = Arc::new(Mesh::uniform(n).unwrap());
        let sys = Arc::new(MixedSystem::assemble(mesh, &Coefficients::constant(rng.gen_range(0.5..2.0), rng.gen_range(0.0..3.0))).unwrap());
        let support: Vec<usize> = (1..n).filter(|_| rng.gen_bool(0.5)).collect();
        let yd: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let prob = ReducedProblem::new(sys, yd, 1e-3, support.clone()).unwrap();
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> (f64, Vec<f64>) {
            (rng.gen_range(-2.0..2.0), support.iter().map(|_| rng.gen_range(-2.0..2.0)).collect())
        };
        let (a1, c1) = draw(&mut rng);
        let (a2, c2) = draw(&mut rng);
        let am = lambda * a1 + (1.0 - lambda) * a2;
        let cm: Vec<f64> = c1.iter().zip(&c2).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
        let f1 = prob.objective(a1, &c1).unwrap();
        let f2 = prob.objective(a2, &c2).unwrap();
        let fm = prob.objective(am, &cm).unwrap();
        prop_assert!(fm <= lambda * f1 + (1.0 - lambda) * f2 + 1e-12);
    }

    #[test]
    fn gradient_matches_differences_with_variable_coefficients(
        n in 4usize..48,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mesh = Arc::new(Mesh::from_nodes(common::random_nodes(&mut rng, n)).unwrap());
        let (k1, k2) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..2.0));
        let coeffs = Coefficients::new(
            move |x: f64| 1.0 + k1 * (3.0 * x).sin().abs(),
            move |x: f64| k2 * x * x,
        );
        let sys = Arc::new(MixedSystem::assemble(mesh, &coeffs).unwrap());
        let support: Vec<usize> = (1..n).filter(|_| rng.gen_bool(0.5)).collect();
        let yd: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let prob = ReducedProblem::new(sys, yd, 1e-4, support.clone()).unwrap();
        let a = rng.gen_range(-1.0..1.0);
        let c: Vec<f64> = support.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        let err = bvcontrol::checks::gradient_fd_error(&prob, a, &c, 1e-3).unwrap();
        prop_assert!(err <= 1e-6, "relative error {}", err);
    }

    #[test]
    fn block_and_schur_paths_agree(n in 2usize..120, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mesh = Arc::new(Mesh::from_nodes(common::random_nodes(&mut rng, n)).unwrap());
        let coeffs = Coefficients::constant(rng.gen_range(0.1..10.0), rng.gen_range(0.0..10.0));
        let sys = MixedSystem::assemble(mesh, &coeffs).unwrap();
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, yb) = sys.solve_state(&u).unwrap();
        let (_, ys) = sys.solve_state_schur(&u).unwrap();
        let scale = yb.max_abs().max(1e-300);
        for (p, q) in yb.values().iter().zip(ys.values()) {
            prop_assert!((p - q).abs() <= 1e-10 * scale);
        }
    }
}
