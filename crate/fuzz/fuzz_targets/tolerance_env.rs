#![no_main]

use decon_core::Tolerances;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|spec: &str| {
    let mut tol = Tolerances::default();
    let before = tol;
    match tol.apply_overrides(spec) {
        Ok(()) => {
            for v in [
                tol.jacobi,
                tol.zero_eig,
                tol.symmetry,
                tol.subproblem,
                tol.consistency,
                tol.spectral,
                tol.contraction_slack,
                tol.search,
            ] {
                assert!(v.is_finite() && v > 0.0);
            }
        }
        Err(_) => assert_eq!(tol, before),
    }
});
