//! Disorder-free (λ = 0) closed forms.

use num_complex::Complex64;

/// Forward Green function of the free rooted tree,
/// `Γ₀(z) = (−z + √(z² − 4K)) / (2K)`, the root of `KΓ² + zΓ + 1 = 0` that
/// behaves like `−1/z` at infinity.
///
/// Real `z` on the band `[−2√K, 2√K]` is read as `z + i0`.
pub fn free_forward_green(k: usize, z: Complex64) -> Complex64 {
    let kf = k as f64;
    let a = 2.0 * kf.sqrt();
    // -0.0 would select the lower-half-plane boundary value.
    let z = Complex64::new(z.re, z.im + 0.0);
    // Product of principal roots: cut on [-a, a], ~z at infinity.
    let s = (z - a).sqrt() * (z + a).sqrt();
    // Same root as (−z + s)/(2K), written without cancellation.
    -2.0 / (z + s)
}

/// Diagonal Green function at a vertex of the full (K+1)-regular tree.
pub fn free_lattice_green(k: usize, z: Complex64) -> Complex64 {
    let gamma = free_forward_green(k, z);
    1.0 / (-z - (k as f64 + 1.0) * gamma)
}

/// `L₀(E) = −log|Γ₀(E + i0)|`.
pub fn free_lyapunov(k: usize, energy: f64) -> f64 {
    let kf = k as f64;
    let e = energy.abs();
    if e * e <= 4.0 * kf {
        0.5 * kf.ln()
    } else {
        // 1/|Γ₀| = (|E| + √(E² − 4K))/2, exact at |E| = K+1.
        (0.5 * (e + (e * e - 4.0 * kf).sqrt())).ln()
    }
}

/// Almost-sure spectrum `[E_λ, |E_λ|]` with `E_λ = −(2√K + λ)`, for
/// potentials supported on `[−1, 1]`.
pub fn spectrum_edges(k: usize, lambda: f64) -> (f64, f64) {
    let edge = 2.0 * (k as f64).sqrt() + lambda;
    (-edge, edge)
}

/// `Δ_K = (√K − 1)²/2`.
pub fn weak_disorder_threshold(k: usize) -> f64 {
    let r = (k as f64).sqrt() - 1.0;
    0.5 * r * r
}
