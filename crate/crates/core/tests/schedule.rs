mod support;

use proptest::prelude::*;
use support::{check_decomposition as check_instance, coverage_problem, rel, Rng};
use tsnopt::geometry::Scenario;
use tsnopt::optimizer::{scheme, Scheme};
use tsnopt::schedule::{decompose, lasers, max_line_sum, varphi, SchedulePlan};
use tsnopt::waterfill::TrafficMatrix;

#[test]
fn decomposition_covers_random_matrices() {
    let mut rng = Rng::new(21);
    for case in 0..500 {
        let s = rng.int(2, 8);
        let sparsity = rng.uniform(0.0, 0.8);
        let a = rng.traffic(s, 1e9, sparsity);
        let phi = s + rng.int(1, 5);
        let n0 = rng.int(1, 4) as f64;
        check_instance(&a, phi, n0).unwrap_or_else(|e| panic!("case {case}: {e}"));
    }
}

#[test]
fn tight_and_degenerate_matrices() {
    // doubly stochastic pattern: every line sum equals the maximum
    let a = TrafficMatrix::from_rows(&[vec![0.0, 1.0, 2.0], vec![2.0, 0.0, 1.0], vec![1.0, 2.0, 0.0]]).unwrap();
    for phi in 4..9 {
        check_instance(&a, phi, 1.0).unwrap();
    }
    // a single link
    let mut rows = vec![vec![0.0; 4]; 4];
    rows[2][0] = 5.0;
    check_instance(&TrafficMatrix::from_rows(&rows).unwrap(), 5, 2.0).unwrap();
    check_instance(&TrafficMatrix::zeros(3), 4, 1.0).unwrap();
    assert!(decompose(&a, 3, 1.0).is_err());
}

#[test]
fn laser_count_formula() {
    let mut rng = Rng::new(22);
    for _ in 0..200 {
        let s = rng.int(2, 8);
        let phi = s + rng.int(1, 10);
        let atilde = rng.uniform(1.0, 1e10);
        let n0 = rng.int(1, 20) as f64;
        let (bit, delta) = (rng.uniform(1e-10, 1e-8), rng.uniform(0.0, 3.0));
        let (alpha, tau) = (rng.uniform(0.05, 0.95), rng.uniform(1.0, 500.0));
        let c = lasers(atilde, phi, s, n0, bit, delta, alpha, tau).unwrap();
        let one = bit * n0 * atilde / (phi - s) as f64 + delta;
        assert!(rel(c.schedule_time, one) < 1e-12);
        assert!(rel(c.real, phi as f64 * one / (alpha * tau)) < 1e-12);
        assert_eq!(c.count, c.real.ceil() as u32);
        assert_eq!(c.fits, one <= alpha * tau);
        let coeff = varphi(atilde, phi, s, n0).unwrap();
        assert!(rel(coeff * bit + delta, one) < 1e-12);
    }
}

#[test]
fn plan_agrees_with_solution() {
    let sc = Scenario::table_one();
    let traffic = tsnopt::harness::gen_traffic(5, 1e4, 5).unwrap();
    let r = scheme(&sc, &traffic, Scheme::Joint).unwrap();
    let plan = r.plan(&sc, true).unwrap();
    assert!(rel(plan.m_bar, r.m_bar) < 1e-12);
    for seg in &plan.segments {
        assert!(seg.lasers.fits);
        let a = &r.stms.stms[seg.segment - 1];
        assert_eq!(seg.atilde, max_line_sum(a));
        assert!(seg.matrices.len() <= seg.phi_count);
        assert!(coverage_problem(a, r.vars.n0, seg.varphi, &seg.matrices).is_none());
    }
    let text = plan.to_text();
    assert!(text.starts_with("schedule-plan v1\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("segment ")).count(), plan.segments.len());
    let links = text.lines().filter(|l| l.trim_start().starts_with("matrix ")).count();
    assert_eq!(links, plan.segments.iter().map(|p| p.matrices.len()).sum::<usize>());
}

#[test]
fn plan_rejects_mismatched_inputs() {
    let sc = Scenario::table_one();
    let traffic = tsnopt::harness::gen_traffic(5, 1e4, 5).unwrap();
    let r = scheme(&sc, &traffic, Scheme::FixedAlpha).unwrap();
    assert!(SchedulePlan::build(&sc, &r.stms, &[6, 6], r.vars.n0, r.vars.alpha, false).is_err());
}

fn matrix() -> impl Strategy<Value = TrafficMatrix> {
    (2usize..=7).prop_flat_map(|s| {
        proptest::collection::vec(prop_oneof![2 => Just(0.0), 3 => 0.0f64..1e6], s * s).prop_map(move |mut d| {
            for i in 0..s {
                d[i * s + i] = 0.0;
            }
            TrafficMatrix::new(s, d).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn theorem_bound_holds(a in matrix(), extra in 1usize..=5, n0 in 1u32..6) {
        let phi = a.size() + extra;
        prop_assert_eq!(check_instance(&a, phi, n0 as f64), Ok(()));
    }
}
