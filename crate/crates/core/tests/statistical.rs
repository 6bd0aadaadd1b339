//! Monte-Carlo identities behind the consistency and graph losses.

mod support;

/// With θ fixed, `E‖f(x;ξ′) − f(x;ξ)‖²` summed over points equals twice the summed
/// per-output variance of `f(x;ξ)`.
#[test]
fn shared_noise_consistency_is_twice_the_variance() {
    let (consistency, variance) = support::shared_noise_variance();
    assert!(variance > 1e-4, "perturbation too weak: {variance}");
    let rel = (consistency - 2.0 * variance).abs() / (2.0 * variance);
    assert!(
        rel < 0.02,
        "consistency {consistency}, 2·variance {}",
        2.0 * variance
    );
}

/// Sub-sampled pair losses average to the exact all-pairs value.
#[test]
fn pair_subsampling_is_unbiased() {
    let (estimate, exact) = support::pair_subsampling();
    let rel = (estimate - exact).abs() / exact;
    assert!(rel < 0.01, "estimate {estimate}, exact {exact}");
}
