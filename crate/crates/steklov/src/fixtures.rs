//! Seeded fixture factors for tests and the self-check suite.
//!
//! All generators are deterministic functions of their seed (ChaCha8 stream),
//! so identical seeds reproduce identical factors byte for byte.

use crate::harmonics::{normalize, ConformalFactor, TrigPoly};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A random positive normalized factor of the given degree. Mode amplitudes
/// fall off like `k^{−2}` so that the eigenvalue asymptotics are visible well
/// inside the trust horizon; the nonconstant part is rescaled if the sampled
/// minimum gets too close to zero.
pub fn random_factor(seed: u64, degree: usize) -> ConformalFactor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut one_sided = vec![Complex64::new(1.0, 0.0)];
    for k in 1..=degree {
        let amp = 0.05 / (k * k) as f64;
        one_sided.push(Complex64::new(
            amp * rng.gen_range(-1.0..1.0),
            amp * rng.gen_range(-1.0..1.0),
        ));
    }

    loop {
        let f = TrigPoly::from_real_coeffs(&one_sided).expect("mean is real");
        let min = f
            .sample(crate::harmonics::default_grid_size(degree, 64))
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min > 0.3 {
            return normalize(&f, 512).expect("positive by construction");
        }
        for c in one_sided.iter_mut().skip(1) {
            *c *= 0.5;
        }
    }
}

/// A random conformally trivial factor: the boundary factor of the Möbius
/// automorphism with parameter `w`, `|w| ≤ 0.4`, which is supported on modes
/// `{−1, 0, 1}` and exactly normalized. Radii beyond 0.4 push truncation
/// artifacts at the trust horizon above the equality-case tolerances.
pub fn trivial_factor(seed: u64) -> ConformalFactor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius: f64 = rng.gen_range(0.05..0.4);
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let w = Complex64::from_polar(radius, angle);
    trivial_factor_for(w)
}

/// The factor `|Ψ′_w(e^{iθ})|^{−1} = (1 + |w|² − 2Re(w̄ e^{iθ}))/(1 − |w|²)`.
pub fn trivial_factor_for(w: Complex64) -> ConformalFactor {
    assert!(w.norm() < 1.0);
    let denom = 1.0 - w.norm_sqr();
    let one_sided = vec![
        Complex64::new((1.0 + w.norm_sqr()) / denom, 0.0),
        -w.conj() / denom,
    ];
    let series = TrigPoly::from_real_coeffs(&one_sided).expect("mean is real");
    ConformalFactor::new(series, 128).expect("normalized by construction")
}

/// A random zero-mean real direction of the given degree, for variation
/// formulas.
pub fn random_direction(seed: u64, degree: usize) -> TrigPoly {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut one_sided = vec![Complex64::new(0.0, 0.0)];
    for k in 1..=degree {
        let amp = 1.0 / k as f64;
        one_sided.push(Complex64::new(
            amp * rng.gen_range(-1.0..1.0),
            amp * rng.gen_range(-1.0..1.0),
        ));
    }
    TrigPoly::from_real_coeffs(&one_sided).expect("mean is real")
}
