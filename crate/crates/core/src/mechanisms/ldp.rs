use rand::Rng;

/// One draw from Laplace(0, `scale_b`) restricted to `[-bound_c, bound_c]`.
///
/// Draws are rejected until one lands inside the interval. The acceptance
/// probability is `1 - exp(-bound_c / scale_b)`, so about ten proposals are
/// needed on average at `bound_c = scale_b / 10`.
pub fn sample_bounded_laplace<R: Rng + ?Sized>(rng: &mut R, scale_b: f64, bound_c: f64) -> f64 {
    debug_assert!(scale_b > 0.0 && bound_c >= 0.0);
    if bound_c == 0.0 {
        return 0.0;
    }
    loop {
        let x = sample_laplace(rng, scale_b);
        if x.abs() <= bound_c {
            return x;
        }
    }
}

/// Inverse-CDF Laplace draw.
pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, scale_b: f64) -> f64 {
    let u: f64 = rng.random::<f64>() - 0.5;
    -scale_b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}
