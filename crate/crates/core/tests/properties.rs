//! Randomized invariants across modules.

use proptest::prelude::*;
use subdiffusion::cli::{parse, render};
use subdiffusion::cq;
use subdiffusion::fespace::{assemble, SpaceKind};
use subdiffusion::mesh::{build_uniform_mesh, refine};
use subdiffusion::oracle::mittag_leffler_neg;

fn space() -> impl Strategy<Value = SpaceKind> {
    prop_oneof![Just(SpaceKind::P1), Just(SpaceKind::P1nc), Just(SpaceKind::Rt0P0)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_keep_sign_and_sum_structure(alpha in 0.01f64..0.99, n in 1usize..300) {
        let w = cq::weights(alpha, n, 1.0).unwrap();
        let b = w.as_slice();
        prop_assert_eq!(b[0], 1.0);
        prop_assert!(b[1..].iter().all(|&x| x < 0.0));
        let s = w.partial_sums();
        prop_assert!(s.iter().all(|&x| x > 0.0));
        prop_assert!(s.windows(2).all(|p| p[1] < p[0]));
        let q = w.dual();
        for m in 0..b.len() {
            let c: f64 = (0..=m).map(|k| b[k] * q[m - k]).sum();
            let delta = if m == 0 { 1.0 } else { 0.0 };
            prop_assert!((c - delta).abs() <= 1e-12, "defect at {}: {}", m, c - delta);
        }
    }

    #[test]
    fn mittag_leffler_is_positive_and_decreasing(alpha in 0.1f64..=1.0, x in 0.0f64..50.0, dx in 0.01f64..5.0) {
        let a = mittag_leffler_neg(alpha, x).unwrap();
        let b = mittag_leffler_neg(alpha, x + dx).unwrap();
        prop_assert!(a > 0.0 && a <= 1.0);
        prop_assert!(b <= a + 1e-12);
    }

    #[test]
    fn refinement_nests_and_preserves_area(m in 1usize..10) {
        let coarse = build_uniform_mesh(m).unwrap();
        let fine = refine(&coarse);
        prop_assert_eq!(fine.m(), 2 * m);
        prop_assert!(coarse.nests_into(&fine));
        let area: f64 = (0..fine.num_triangles()).map(|t| fine.area(t)).sum();
        prop_assert!((area - 1.0).abs() <= 1e-13);
    }

    #[test]
    fn mass_matrices_integrate_constants(m in 2usize..12, kind in space()) {
        let mesh = build_uniform_mesh(m).unwrap();
        let sys = assemble(&mesh, kind);
        prop_assert!(sys.mass.max_asymmetry() <= 1e-14);
        prop_assert!(sys.mass.diag().iter().all(|&d| d > 0.0));
    }

    #[test]
    fn cli_render_round_trips(
        alpha in 0.05f64..=1.0,
        final_time in 0.01f64..2.0,
        steps in 1usize..2000,
        base in 1usize..8,
        levels in 1usize..4,
        kind in space(),
        case in prop_oneof![Just("a"), Just("b"), Just("manufactured"), Just("linear")],
        linearized in any::<bool>(),
        verbosity in 0u8..4,
    ) {
        let ladder: Vec<String> = (0..levels).map(|k| (base << k).to_string()).collect();
        let ref_mesh = (base << levels).to_string();
        let alpha = alpha.to_string();
        let final_time = final_time.to_string();
        let steps = steps.to_string();
        let fem = kind.to_string();
        let ladder = ladder.join(",");
        let mut args = vec![
            "subdiffusion", "study", "--alpha", &alpha, "--final-time", &final_time, "--steps", &steps,
            "--mesh-ladder", &ladder, "--ref-mesh", &ref_mesh, "--fem", &fem, "--case", case,
        ];
        if linearized {
            args.push("--linearized");
        }
        match verbosity {
            0 => args.push("-q"),
            2 => args.push("-v"),
            3 => args.push("-vv"),
            _ => {}
        }
        let config = parse(args).unwrap();
        let mut again = vec!["subdiffusion".to_string()];
        again.extend(render(&config));
        prop_assert_eq!(parse(again).unwrap(), config);
    }
}
