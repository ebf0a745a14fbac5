//! Property-based invariants across modules.

use crate::conformal::{weight_coeffs, CosCoeffs};
use crate::determinant::{det_l, det_l_support, log_det_taylor, subtree_determinants};
use crate::radial::{conjecture_form, conjecture_min_depth, jacobi_reduce, RadialProfile};
use crate::resolvent::green_ball;
use crate::traces::{cheb_trace_diff, trace_side};
use crate::tree::{ball_len, difference_op, frontier_set, Difference};
use crate::{EnergyPoint, Potential, VertexId, WeightSpec};
use num_complex::Complex64;
use proptest::prelude::*;

fn potential() -> impl Strategy<Value = Potential> {
    (0u64..10_000, 0u32..=3, 0.1f64..3.0)
        .prop_map(|(seed, depth, amp)| Potential::random(seed, depth, amp, None))
}

fn disk_point(max_radius: f64) -> impl Strategy<Value = Complex64> {
    (0.0..max_radius, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

fn vertex(max_depth: u32) -> impl Strategy<Value = VertexId> {
    (0..=max_depth)
        .prop_flat_map(|d| (1u64..=(1u64 << d)).prop_map(move |k| VertexId::new(d, k).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linear_index_round_trip(x in vertex(40)) {
        prop_assert_eq!(VertexId::from_linear(x.linear()), x);
        if let Some(p) = x.parent() {
            prop_assert!(x.children().iter().all(|c| c.parent() == Some(x)));
            prop_assert_eq!(p.depth() + 1, x.depth());
        }
    }

    #[test]
    fn frontier_subtrees_tile_the_complement_of_the_path(y in vertex(5)) {
        // every vertex of a deep ball lies on the path or in exactly one frontier subtree
        let f = frontier_set(y);
        let depth = y.depth() + 3;
        for i in 0..ball_len(depth) {
            let z = VertexId::from_linear(i);
            let on_path = f.path.contains(&z);
            let covers = f.frontier.iter().filter(|w| z.relative_to(**w).is_some()).count();
            prop_assert_eq!(covers + usize::from(on_path), 1, "{:?}", z);
        }
    }

    #[test]
    fn determinant_routes_agree(v in potential(), zeta in disk_point(0.9)) {
        let a = det_l(&v, VertexId::ROOT, zeta).unwrap().value;
        let b = det_l_support(&v, VertexId::ROOT, zeta).unwrap();
        prop_assert!((a - b).norm() < 1e-9 * (1.0 + a.norm()));
    }

    #[test]
    fn determinant_is_real_on_real_potentials(v in potential(), zeta in disk_point(0.9)) {
        let a = det_l(&v, VertexId::ROOT, zeta).unwrap().value;
        let b = det_l(&v, VertexId::ROOT, zeta.conj()).unwrap().value;
        prop_assert!((a - b.conj()).norm() < 1e-12 * (1.0 + a.norm()));
        prop_assert!((det_l(&v, VertexId::ROOT, Complex64::new(1e-12, 0.0)).unwrap().value - 1.0).norm() < 1e-10);
    }

    #[test]
    fn subtree_table_matches_views(v in potential(), zeta in disk_point(0.9)) {
        let table = subtree_determinants(&v, zeta).unwrap();
        for x in v.support() {
            let direct = det_l(&v, x, zeta).unwrap().value;
            prop_assert!((table[x.linear()] - direct).norm() < 1e-9 * (1.0 + direct.norm()));
        }
    }

    #[test]
    fn green_matrix_is_symmetric(v in potential(), zeta in disk_point(0.9)) {
        let depth = v.support_depth() + 1;
        if let Ok(g) = green_ball(&v, depth, zeta) {
            let asym = (&g.entries - g.entries.transpose()).iter().map(|c| c.norm()).fold(0.0, f64::max);
            prop_assert!(asym < 1e-9 * (1.0 + g.entries.iter().map(|c| c.norm()).fold(0.0, f64::max)));
        }
    }

    #[test]
    fn truncation_is_idempotent(v in potential(), n in 0u32..4, m in 0u32..4) {
        prop_assert_eq!(v.truncate(n).truncate(n), v.truncate(n));
        prop_assert_eq!(v.truncate(n).truncate(m), v.truncate(n.min(m)));
    }

    #[test]
    fn tilde_difference_kills_constants(c in -5.0f64..5.0, depth in 1u32..5) {
        let v = Potential::radial(&vec![c; depth as usize + 2]);
        let d = difference_op(&v, Difference::DeltaTilde);
        prop_assert!(d.iter().all(|(x, val)| x.depth() > depth || val.abs() < 1e-15));
    }

    #[test]
    fn trace_side_is_linear_in_the_weight(v in potential(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let w2 = weight_coeffs(&WeightSpec::SinPower(2)).unwrap();
        let w4 = weight_coeffs(&WeightSpec::SinPower(4)).unwrap();
        let mix = w2.scale(a).add(&w4.scale(b));
        let lhs = trace_side(&v, VertexId::ROOT, &mix);
        let rhs = a * trace_side(&v, VertexId::ROOT, &w2) + b * trace_side(&v, VertexId::ROOT, &w4);
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn weights_are_nonnegative(e in 1u32..5) {
        let w: CosCoeffs = weight_coeffs(&WeightSpec::SinPower(2 * e)).unwrap();
        prop_assert!(w.ensure_nonnegative().is_ok());
    }

    #[test]
    fn traces_stabilize_in_ball_depth(v in potential(), k in 1usize..8) {
        let r = cheb_trace_diff(&v, VertexId::ROOT, k);
        let padded = Potential::from_values(v.support_depth() + 2, v.iter()).unwrap();
        let s = cheb_trace_diff(&padded, VertexId::ROOT, k);
        prop_assert!((r.value - s.value).abs() < 1e-12 * (1.0 + r.value.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn taylor_coefficients_are_trace_differences(v in potential()) {
        let t = log_det_taylor(&v, VertexId::ROOT, 6).unwrap();
        for (i, c) in t.coeffs.iter().enumerate() {
            let k = i + 1;
            let tr = cheb_trace_diff(&v, VertexId::ROOT, k).value;
            prop_assert!((c + tr / k as f64).abs() < 1e-8 * (1.0 + c.abs()), "k = {} {} {}", k, c, tr);
        }
    }

    #[test]
    fn radial_potentials_reduce_to_the_half_line(
        profile in prop::collection::vec(-3.0f64..3.0, 1..6), re in -6.0f64..6.0, im in 0.05f64..3.0
    ) {
        let r = jacobi_reduce(&RadialProfile::new(profile), &[EnergyPoint(Complex64::new(re, im))]).unwrap();
        prop_assert!(r.max_m_residual < 1e-10);
    }

    #[test]
    fn shell_tiling_preserves_the_weighted_norm(v in potential()) {
        let f = conjecture_form(&[1.0], &v, conjecture_min_depth(&v, 0)).unwrap();
        prop_assert!(f.check_a1 < 1e-12 * (1.0 + f.shell_norm2));
        prop_assert!((f.qform - f.shell_norm2).abs() < 1e-12 * (1.0 + f.shell_norm2));
    }
}
