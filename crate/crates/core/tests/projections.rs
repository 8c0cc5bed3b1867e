mod common;

use common::*;

#[test]
fn projections_are_idempotent_and_solenoidal() {
    for n in [2, 3] {
        let c = projection_checks(n);
        assert!(c.idempotence <= 1e-10, "n={n}: {:e}", c.idempotence);
        assert!(c.divergence <= 1e-12, "n={n}: {:e}", c.divergence);
        assert!(c.curl_of_defect <= 1e-10, "n={n}: {:e}", c.curl_of_defect);
    }
}

#[test]
fn initial_projection_errors_converge_at_second_order() {
    let (ru, rb) = initial_projection_rates(&[2, 4, 8]);
    assert!(ru >= 1.8, "velocity gradient rate {ru}");
    assert!(rb >= 1.8, "magnetic rate {rb}");
}
