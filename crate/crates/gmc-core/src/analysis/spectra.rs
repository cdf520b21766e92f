//! Closed-form exponents attached to a chaos measure with parameter
//! `gamma` over a `d`-dimensional base.
//!
//! All functions here are pure arithmetic on `(gamma, d)` and evaluate
//! the exact formulas; the stochastic estimators in the sibling modules
//! are compared against these values, never the other way around.

/// Structure exponent xi(q) = (d + gamma^2/2) q - (gamma^2/2) q^2.
///
/// Governs the box-mass scaling E[M(B_r)^q] ~ r^xi(q) for moments below
/// the divergence threshold.
pub fn structure_exponent(gamma: f64, d: usize, q: f64) -> f64 {
    let half_g2 = 0.5 * gamma * gamma;
    (d as f64 + half_g2) * q - half_g2 * q * q
}

/// Largest finite moment order 2d/gamma^2; positive moments of order
/// q >= this threshold diverge. Infinite for gamma = 0.
pub fn moment_threshold(gamma: f64, d: usize) -> f64 {
    if gamma == 0.0 {
        f64::INFINITY
    } else {
        2.0 * d as f64 / (gamma * gamma)
    }
}

/// L^q spectrum of the measure, defined for all real q.
///
/// Piecewise: linear with slope (sqrt(d) + gamma/sqrt(2))^2 below
/// q = -sqrt(2d)/gamma, equal to xi(q) - d on the middle branch, and
/// linear with slope (sqrt(d) - gamma/sqrt(2))^2 above q = sqrt(2d)/gamma.
/// The three pieces meet tangentially, so tau is concave and C^1.
pub fn tau_spectrum(gamma: f64, d: usize, q: f64) -> f64 {
    let dd = d as f64;
    if gamma == 0.0 {
        return dd * q - dd;
    }
    let q_star = (2.0 * dd).sqrt() / gamma;
    let root_d = dd.sqrt();
    let spread = gamma / std::f64::consts::SQRT_2;
    if q <= -q_star {
        (root_d + spread).powi(2) * q
    } else if q >= q_star {
        (root_d - spread).powi(2) * q
    } else {
        structure_exponent(gamma, d, q) - dd
    }
}

/// Hausdorff dimension of the set of points with local mass exponent
/// delta: d - (d/gamma + gamma/2 - delta/gamma)^2 / 2 on the support
/// interval [(sqrt(d) - gamma/sqrt(2))^2, (sqrt(d) + gamma/sqrt(2))^2],
/// zero outside.
///
/// The apex sits at delta = d + gamma^2/2 with value d, and the
/// spectrum vanishes continuously at both endpoints. For gamma = 0 the
/// spectrum collapses to the single exponent delta = d.
pub fn singularity_spectrum(gamma: f64, d: usize, delta: f64) -> f64 {
    let dd = d as f64;
    if gamma == 0.0 {
        return if delta == dd { dd } else { 0.0 };
    }
    let root_d = dd.sqrt();
    let spread = gamma / std::f64::consts::SQRT_2;
    let lo = (root_d - spread).powi(2);
    let hi = (root_d + spread).powi(2);
    if delta < lo || delta > hi {
        return 0.0;
    }
    let s = dd / gamma + 0.5 * gamma - delta / gamma;
    dd - 0.5 * s * s
}

/// Mass exponent of the ball around a point sampled from the rooted
/// measure at tilt q: mu(B_r) ~ r^alpha with
/// alpha = d + (1/2 - q) gamma^2.
///
/// q = 1 gives the carrier exponent d - gamma^2/2; q = 0 gives the
/// Lebesgue-typical exponent d + gamma^2/2.
pub fn local_exponent_target(gamma: f64, d: usize, q: f64) -> f64 {
    d as f64 + (0.5 - q) * gamma * gamma
}

/// Euclidean scaling exponent of a set with quantum exponent `delta`:
/// x = (gamma^2/4) delta^2 + (1 - gamma^2/4) delta.
pub fn kpz_euclidean_from_quantum(delta: f64, gamma: f64) -> f64 {
    let a = 0.25 * gamma * gamma;
    a * delta * delta + (1.0 - a) * delta
}

/// Inverse of [`kpz_euclidean_from_quantum`]: the nonnegative root
/// delta = (sqrt((1 - gamma^2/4)^2 + gamma^2 x) - (1 - gamma^2/4))
///         / (gamma^2/2).
///
/// Reduces to the identity at gamma = 0.
pub fn kpz_quantum_from_euclidean(x: f64, gamma: f64) -> f64 {
    let a = 0.25 * gamma * gamma;
    if a == 0.0 {
        return x;
    }
    let b = 1.0 - a;
    ((b * b + 4.0 * a * x).sqrt() - b) / (2.0 * a)
}

/// Almost-sure Hausdorff-dimension map from measure dimension to
/// Lebesgue dimension over an `n`-dimensional base:
/// dim_Leb = (1 + gamma^2/(2n)) s - (gamma^2/(2n)) s^2,
/// with `s = dim_M` normalized to [0, 1].
///
/// For n = 2 this equals xi(s)/2 with d = 2.
pub fn kpz_lebesgue_dimension(dim_measure: f64, gamma: f64, n: usize) -> f64 {
    let a = 0.5 * gamma * gamma / n as f64;
    (1.0 + a) * dim_measure - a * dim_measure * dim_measure
}

/// Inverse of [`kpz_lebesgue_dimension`] on [0, 1]: the smaller root of
/// the quadratic, which maps 0 to 0 and 1 to 1. The forward map is
/// monotone on [0, 1] exactly when gamma^2 <= 2n, which covers the
/// subcritical range over the n-dimensional base.
pub fn kpz_quantum_dimension(dim_lebesgue: f64, gamma: f64, n: usize) -> f64 {
    let a = 0.5 * gamma * gamma / n as f64;
    if a == 0.0 {
        return dim_lebesgue;
    }
    let b = 1.0 + a;
    (b - (b * b - 4.0 * a * dim_lebesgue).sqrt()) / (2.0 * a)
}
