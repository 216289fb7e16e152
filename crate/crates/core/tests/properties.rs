//! Structural invariants as property tests.

use bipde_core::datagen::{gen_burgers, make_shift_pairs, BurgersSpec};
use bipde_core::tape::Tape;
use bipde_core::zernike::{reconstruct_values, ZernikeBasis};
use bipde_core::Tensor;
use proptest::prelude::*;

proptest! {
    // Field reconstruction is linear in the coefficients to roundoff.
    #[test]
    fn reconstruction_is_linear(
        c1 in proptest::collection::vec(-2.0..2.0f64, 6),
        c2 in proptest::collection::vec(-2.0..2.0f64, 6),
        alpha in -3.0..3.0f64,
        beta in -3.0..3.0f64,
    ) {
        let basis = ZernikeBasis::new(2).unwrap();
        let pts = [(0.1, 0.3), (-0.4, 0.2), (0.5, -0.5), (0.0, 0.0)];
        let combo: Vec<f64> = c1.iter().zip(&c2).map(|(&a, &b)| alpha * a + beta * b).collect();
        let f_combo = reconstruct_values(&basis, &combo, &pts).unwrap();
        let f1 = reconstruct_values(&basis, &c1, &pts).unwrap();
        let f2 = reconstruct_values(&basis, &c2, &pts).unwrap();
        for ((fc, a), b) in f_combo.iter().zip(&f1).zip(&f2) {
            let expect = alpha * a + beta * b;
            prop_assert!((fc - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }

    // Gradient through gather equals index multiplicity for a sum loss.
    #[test]
    fn gather_gradient_counts_index_multiplicity(
        idx in proptest::collection::vec(0usize..6, 1..20),
    ) {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![0.5; 6]));
        let g = tape.gather(x, idx.clone()).unwrap();
        let loss = tape.sum(g).unwrap();
        let grads = tape.backward(loss).unwrap();
        let gx = grads.of(x);
        for k in 0..6 {
            let count = idx.iter().filter(|&&i| i == k).count() as f64;
            prop_assert_eq!(gx.values()[k], count);
        }
    }

    // Shift pairing: row k of targets is row k + p of the trajectory.
    #[test]
    fn shift_pairs_align_for_any_valid_shift(p in 0usize..5) {
        let spec = BurgersSpec::standard(0.05, 1.0, 12, 0.001, 0.005);
        let traj = gen_burgers(&spec).unwrap(); // 6 snapshots
        let ds = make_shift_pairs(&traj, p).unwrap();
        prop_assert_eq!(ds.pair_count(), 6 - p);
        for k in 0..ds.pair_count() {
            let n = spec.nx;
            prop_assert_eq!(&ds.inputs.values()[k * n..(k + 1) * n], traj.snapshot(k));
            prop_assert_eq!(&ds.targets.values()[k * n..(k + 1) * n], traj.snapshot(k + p));
        }
    }
}
