use edgescatter::potential::{Bump, Component};
use edgescatter::channels::eigen_residual;
use edgescatter::scattering::scatter;
use edgescatter::*;
use proptest::prelude::*;
use std::sync::OnceLock;

fn basis() -> &'static TransverseBasis {
    static B: OnceLock<TransverseBasis> = OnceLock::new();
    B.get_or_init(|| build_basis(&WallSpec::linear(), 40, 0).unwrap())
}

fn far_from_thresholds(e: f64) -> bool {
    critical_set(basis(), 4.0).iter().all(|z| (z - e).abs() > 1e-2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn channel_census(e in 0.05f64..3.5) {
        prop_assume!(far_from_thresholds(e));
        let set = channels_at(basis(), e, 4, 1e-3).unwrap();
        prop_assert_eq!(set.n_plus as i64 - set.n_minus as i64, -1);
        let sum: f64 = set.currents().iter().sum();
        let m = set.m() as f64;
        prop_assert!((sum - (set.n_plus as f64 - set.n_minus as f64)).abs() < 1e-12 * m);
        for c in &set.propagating {
            prop_assert!(c.current.abs() > 0.0);
            prop_assert!(eigen_residual(basis(), e, c) < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn random_potentials_are_unitary(
        e in 1.5f64..3.0,
        a in -1.5f64..1.5,
        kind in 0usize..4,
        x0 in -1.0f64..1.0,
        y0 in -1.0f64..1.0,
    ) {
        prop_assume!(far_from_thresholds(e));
        let spec = PotentialSpec {
            bumps: vec![Bump {
                component: [Component::Q0, Component::Q1, Component::Q2, Component::Q3][kind],
                amplitude: a,
                x0,
                y0,
                sx: 1.0,
                sy: Some(1.0),
            }],
            table: None,
        };
        let p = build_potential(&spec, Frame::Rotated).unwrap();
        let s = scatter(basis(), &p, e, &SolverParams::default(), "mode-matching").unwrap();
        prop_assert!(s.unitarity_defect < 1e-8);
        let target = s.n_plus as f64 - s.n_minus as f64;
        prop_assert!((s.trace_difference() - target).abs() <= 2.0 * s.m() as f64 * s.unitarity_defect + 1e-12);
    }
}
