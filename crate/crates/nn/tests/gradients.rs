use chordgen_nn::gradcheck::{check_inputs, relative_error, standard_cases};

const TOL: f64 = 1e-6;

#[test]
fn every_operation_and_block_over_random_shapes() {
    for seed in 0..12 {
        let reports = standard_cases(seed);
        assert!(reports.len() == 23);
        for r in reports {
            assert!(r.max_error < TOL, "seed {seed}: {} relative error {:e}", r.name, r.max_error);
        }
    }
}

#[test]
fn the_checker_catches_a_wrong_gradient() {
    // relu has a kink at 0; straddling it makes the numeric slope 0.5.
    let r = check_inputs("relu kink", &vec![(1, 1, vec![0.0])], |g, v| g.relu(v[0]));
    assert!(r.max_error > 0.1, "{r:?}");
    assert_eq!(relative_error(&[1.0, 0.0], &[1.0, 0.0]), 0.0);
    assert_eq!(relative_error(&[0.0], &[1e-12]), 1e-12);
}
