//! The quick examples are compiled into this test and run as-is.

#[path = "../examples/stationary.rs"]
mod stationary;

#[path = "../examples/dual_norm.rs"]
mod dual_norm;

#[test]
fn stationary_example_runs() {
    stationary::main().unwrap();
}

#[test]
fn dual_norm_example_runs() {
    dual_norm::main().unwrap();
}
