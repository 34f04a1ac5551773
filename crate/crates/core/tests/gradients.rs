mod common;

use common::gradcheck::run_all;

#[test]
fn every_layer_matches_finite_differences() {
    for (name, err) in run_all(20) {
        assert!(err < 1e-4, "{name}: relative error {err:e}");
    }
}
