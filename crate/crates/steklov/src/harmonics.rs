//! Finite-degree Fourier algebra on the circle.
//!
//! [`TrigPoly`] stores two-sided Fourier coefficients `c_k`, `|k| ≤ N`, of a
//! trigonometric polynomial `f(θ) = Σ c_k e^{ikθ}`. Real-valued functions
//! satisfy the Hermitian symmetry `c_{−k} = conj(c_k)`; the operators `D` and
//! `H` produce anti-Hermitian coefficient sets (functions of the form
//! `i·(real)`), which the same container holds without loss.
//!
//! Linear operations and products are exact in coefficients. The only
//! approximate operations are the grid-based ones (reciprocal, square root,
//! Möbius reparameterization), which sample on an oversampled power-of-two
//! grid and truncate back, with a tail-mass diagnostic as the error proxy.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::fmt;

/// Margin factor for the sampled-positivity check: a function is accepted as
/// positive only if its sampled minimum exceeds `POSITIVITY_MARGIN · ‖f‖_∞`.
pub const POSITIVITY_MARGIN: f64 = 1e-9;

/// Upper bound on the stored normalization residual of a [`ConformalFactor`]:
/// `|(1/2π)∫ a^{−1} dθ − 1|` must stay below this value.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-8;

/// Tail-mass ratio above which grid-based truncations are considered
/// under-resolved.
pub const TAIL_MASS_TOLERANCE: f64 = 1e-10;

/// Errors from the Fourier-algebra layer.
#[derive(Debug, Clone, PartialEq)]
pub enum HarmonicsError {
    /// A function required to be strictly positive dipped to or below the
    /// positivity margin on the sampling grid.
    NonPositiveSample { min_value: f64 },
    /// The sampling grid is too small relative to the degrees involved, or a
    /// truncated result carries too much tail mass to be trusted.
    AliasingRisk { grid_size: usize, required: usize },
    /// The zero-mode coefficient had a non-negligible imaginary part where a
    /// real-valued function was required.
    NonRealCoefficients { defect: f64 },
    /// `|Φ′|` vanishes (or nearly vanishes) on the closed unit disk.
    DegenerateMap { min_abs_derivative: f64 },
    /// Normalization residual exceeded [`NORMALIZATION_TOLERANCE`].
    NotNormalized { residual: f64 },
    /// A Möbius parameter outside the open unit disk.
    InvalidMobiusParameter { modulus: f64 },
}

impl fmt::Display for HarmonicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarmonicsError::NonPositiveSample { min_value } => {
                write!(f, "sampled minimum {min_value:e} is not strictly positive")
            }
            HarmonicsError::AliasingRisk { grid_size, required } => {
                write!(f, "grid of size {grid_size} too small (need at least {required})")
            }
            HarmonicsError::NonRealCoefficients { defect } => {
                write!(f, "coefficients violate reality by {defect:e}")
            }
            HarmonicsError::DegenerateMap { min_abs_derivative } => {
                write!(f, "conformal map derivative nearly vanishes: min |Φ'| = {min_abs_derivative:e}")
            }
            HarmonicsError::NotNormalized { residual } => {
                write!(f, "normalization residual {residual:e} exceeds tolerance")
            }
            HarmonicsError::InvalidMobiusParameter { modulus } => {
                write!(f, "Möbius parameter has modulus {modulus} ≥ 1")
            }
        }
    }
}

impl std::error::Error for HarmonicsError {}

/// A trigonometric polynomial `Σ_{|k| ≤ N} c_k e^{ikθ}` with dense complex
/// coefficients. Real-valued functions carry Hermitian-symmetric coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    /// Coefficient of `e^{ikθ}` at index `k + degree`, `k = −N..N`.
    coeffs: Vec<Complex64>,
}

impl TrigPoly {
    /// The zero function (degree 0).
    pub fn zero() -> Self {
        TrigPoly { coeffs: vec![Complex64::new(0.0, 0.0)] }
    }

    /// The constant function `c`.
    pub fn constant(c: f64) -> Self {
        TrigPoly { coeffs: vec![Complex64::new(c, 0.0)] }
    }

    /// `amp·cos(kθ)`.
    pub fn cosine(k: usize, amp: f64) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * k + 1];
        if k == 0 {
            coeffs[0] = Complex64::new(amp, 0.0);
        } else {
            coeffs[0] = Complex64::new(amp / 2.0, 0.0);
            coeffs[2 * k] = Complex64::new(amp / 2.0, 0.0);
        }
        TrigPoly { coeffs }
    }

    /// `amp·sin(kθ)`.
    pub fn sine(k: usize, amp: f64) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * k + 1];
        if k > 0 {
            coeffs[2 * k] = Complex64::new(0.0, -amp / 2.0);
            coeffs[0] = Complex64::new(0.0, amp / 2.0);
        }
        TrigPoly { coeffs }
    }

    /// Builds from a two-sided coefficient slice `c_{−N}..c_N` (odd length).
    pub fn from_two_sided(coeffs: Vec<Complex64>) -> Self {
        assert!(coeffs.len() % 2 == 1, "two-sided coefficient vector must have odd length");
        TrigPoly { coeffs }
    }

    /// Builds a real-valued polynomial from one-sided coefficients
    /// `c_0..c_N`, extending by `c_{−k} = conj(c_k)`. Fails if `c_0` has a
    /// non-negligible imaginary part.
    pub fn from_real_coeffs(one_sided: &[Complex64]) -> Result<Self, HarmonicsError> {
        assert!(!one_sided.is_empty());
        let scale = one_sided.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        let defect = one_sided[0].im.abs();
        if defect > 1e-12 * scale {
            return Err(HarmonicsError::NonRealCoefficients { defect });
        }
        let n = one_sided.len() - 1;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * n + 1];
        coeffs[n] = Complex64::new(one_sided[0].re, 0.0);
        for k in 1..=n {
            coeffs[n + k] = one_sided[k];
            coeffs[n - k] = one_sided[k].conj();
        }
        Ok(TrigPoly { coeffs })
    }

    /// Degree bound `N` of the stored coefficient window.
    pub fn degree(&self) -> usize {
        (self.coeffs.len() - 1) / 2
    }

    /// Coefficient of `e^{ikθ}` (zero outside the window).
    pub fn coeff(&self, k: i64) -> Complex64 {
        let n = self.degree() as i64;
        if k.abs() > n {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + n) as usize]
        }
    }

    /// One-sided view `c_0..c_N` (for real-valued polynomials).
    pub fn one_sided(&self) -> Vec<Complex64> {
        (0..=self.degree() as i64).map(|k| self.coeff(k)).collect()
    }

    /// Max deviation from Hermitian symmetry, `max_k |c_{−k} − conj(c_k)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.degree() as i64;
        (0..=n)
            .map(|k| (self.coeff(-k) - self.coeff(k).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Complex evaluation `Σ c_k e^{ikθ}`.
    pub fn evaluate_complex(&self, theta: f64) -> Complex64 {
        let n = self.degree() as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in -n..=n {
            acc += self.coeff(k) * Complex64::from_polar(1.0, k as f64 * theta);
        }
        acc
    }

    /// Real evaluation. Contract: the polynomial is real-valued; the imaginary
    /// part of the sum stays below `1e−12` relative.
    pub fn evaluate(&self, theta: f64) -> f64 {
        let v = self.evaluate_complex(theta);
        debug_assert!(
            v.im.abs() <= 1e-12 * (1.0 + v.re.abs()),
            "evaluate called on a non-real polynomial (im = {:e})",
            v.im
        );
        v.re
    }

    /// Exact coefficient convolution; the output degree is the sum of degrees.
    pub fn multiply(&self, other: &TrigPoly) -> TrigPoly {
        let n1 = self.degree() as i64;
        let n2 = other.degree() as i64;
        let n = n1 + n2;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); (2 * n + 1) as usize];
        for k1 in -n1..=n1 {
            let c1 = self.coeff(k1);
            if c1.norm_sqr() == 0.0 {
                continue;
            }
            for k2 in -n2..=n2 {
                coeffs[(k1 + k2 + n) as usize] += c1 * other.coeff(k2);
            }
        }
        TrigPoly { coeffs }
    }

    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        let n = self.degree().max(other.degree()) as i64;
        let coeffs = (-n..=n).map(|k| self.coeff(k) + other.coeff(k)).collect();
        TrigPoly { coeffs }
    }

    pub fn sub(&self, other: &TrigPoly) -> TrigPoly {
        let n = self.degree().max(other.degree()) as i64;
        let coeffs = (-n..=n).map(|k| self.coeff(k) - other.coeff(k)).collect();
        TrigPoly { coeffs }
    }

    pub fn scale(&self, c: f64) -> TrigPoly {
        TrigPoly { coeffs: self.coeffs.iter().map(|x| x * c).collect() }
    }

    /// Multiplication by `i`; turns anti-Hermitian coefficient sets (`Hf`,
    /// `Df` of a real `f`) into real-valued polynomials and back.
    pub fn times_i(&self) -> TrigPoly {
        let i = Complex64::new(0.0, 1.0);
        TrigPoly { coeffs: self.coeffs.iter().map(|x| x * i).collect() }
    }

    /// `D = −i d/dθ`: `c_k ↦ k·c_k`. Real input yields an `i·(real)` result.
    pub fn derivative_d(&self) -> TrigPoly {
        let n = self.degree() as i64;
        let coeffs = (-n..=n).map(|k| self.coeff(k) * k as f64).collect();
        TrigPoly { coeffs }
    }

    /// The real derivative `d/dθ = i·D`: `c_k ↦ ik·c_k`.
    pub fn real_derivative(&self) -> TrigPoly {
        self.derivative_d().times_i()
    }

    /// Hilbert transform: `c_k ↦ sgn(k)·c_k`, annihilating the mean.
    pub fn hilbert(&self) -> TrigPoly {
        let n = self.degree() as i64;
        let coeffs = (-n..=n).map(|k| self.coeff(k) * k.signum() as f64).collect();
        TrigPoly { coeffs }
    }

    /// `Λ = HD`: `c_k ↦ |k|·c_k`.
    pub fn lambda(&self) -> TrigPoly {
        let n = self.degree() as i64;
        let coeffs = (-n..=n).map(|k| self.coeff(k) * k.abs() as f64).collect();
        TrigPoly { coeffs }
    }

    /// Drops all modes with `|k| > degree`.
    pub fn truncated(&self, degree: usize) -> TrigPoly {
        let n = degree as i64;
        let coeffs = (-n..=n).map(|k| self.coeff(k)).collect();
        TrigPoly { coeffs }
    }

    /// Trims the stored window to the highest nonzero mode.
    pub fn compact(&self) -> TrigPoly {
        let mut n = self.degree();
        while n > 0 && self.coeff(n as i64).norm() == 0.0 && self.coeff(-(n as i64)).norm() == 0.0 {
            n -= 1;
        }
        self.truncated(n)
    }

    /// `∫_0^{2π} f dθ = 2π·c_0`.
    pub fn mean_integral(&self) -> f64 {
        2.0 * PI * self.coeff(0).re
    }

    /// ℓ² mass of the top decile of modes over the total ℓ² mass; the
    /// truncation-quality proxy attached to grid-based operations.
    pub fn tail_mass(&self) -> f64 {
        let n = self.degree();
        if n == 0 {
            return 0.0;
        }
        let cut = ((0.9 * n as f64).ceil() as usize).max(1);
        let total: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let tail: f64 = ((cut as i64)..=(n as i64))
            .map(|k| self.coeff(k).norm_sqr() + self.coeff(-k).norm_sqr())
            .sum();
        tail / total
    }

    /// Samples `f(2πj/M)`, `j = 0..M`, by zero-padded inverse FFT.
    pub fn sample_complex(&self, grid_size: usize) -> Vec<Complex64> {
        assert!(grid_size.is_power_of_two(), "grid size must be a power of two");
        let n = self.degree() as i64;
        assert!(grid_size as i64 > 2 * n, "grid too small for degree {n}");
        let mut buf = vec![Complex64::new(0.0, 0.0); grid_size];
        for k in -n..=n {
            let idx = k.rem_euclid(grid_size as i64) as usize;
            buf[idx] += self.coeff(k);
        }
        FftPlanner::new().plan_fft_inverse(grid_size).process(&mut buf);
        buf
    }

    /// Real samples on the uniform grid.
    pub fn sample(&self, grid_size: usize) -> Vec<f64> {
        self.sample_complex(grid_size).iter().map(|c| c.re).collect()
    }

    /// Sup-norm over the sampling grid.
    pub fn sup_norm(&self, grid_size: usize) -> f64 {
        self.sample_complex(grid_size)
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Grid estimate of `‖f‖_∞ + ‖f′‖_∞`.
    pub fn c1_norm(&self, grid_size: usize) -> f64 {
        self.sup_norm(grid_size) + self.real_derivative().sup_norm(grid_size)
    }
}

/// Forward transform: two-sided coefficients of degree `≤ degree` from `M`
/// uniform samples (`M` a power of two, `M > 2·degree`).
pub fn coeffs_from_samples(samples: &[Complex64], degree: usize) -> TrigPoly {
    let m = samples.len();
    assert!(m.is_power_of_two());
    assert!(m > 2 * degree, "cannot extract degree {degree} from {m} samples");
    let mut buf = samples.to_vec();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let n = degree as i64;
    let coeffs = (-n..=n)
        .map(|k| buf[k.rem_euclid(m as i64) as usize] / m as f64)
        .collect();
    TrigPoly { coeffs }
}

/// Same as [`coeffs_from_samples`] for real sample data.
pub fn coeffs_from_real_samples(samples: &[f64], degree: usize) -> TrigPoly {
    let complex: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    coeffs_from_samples(&complex, degree)
}

/// Smallest power of two `≥ max(lower, 8·degree)`; the default oversampling
/// policy for nonlinear grid operations.
pub fn default_grid_size(degree: usize, lower: usize) -> usize {
    let want = (8 * degree.max(1)).max(lower).max(16);
    want.next_power_of_two()
}

fn check_positive(samples: &[f64]) -> Result<f64, HarmonicsError> {
    let max_abs = samples.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= POSITIVITY_MARGIN * max_abs {
        return Err(HarmonicsError::NonPositiveSample { min_value: min });
    }
    Ok(min)
}

/// Pointwise transform of a strictly positive function on the grid, truncated
/// back to `output_degree`. Shared machinery of reciprocal and square roots.
fn grid_map(
    f: &TrigPoly,
    grid_size: usize,
    output_degree: usize,
    map: impl Fn(f64) -> f64,
) -> Result<TrigPoly, HarmonicsError> {
    if grid_size < 4 * (f.degree() + output_degree) || grid_size <= 2 * f.degree().max(output_degree)
    {
        return Err(HarmonicsError::AliasingRisk {
            grid_size,
            required: 4 * (f.degree() + output_degree),
        });
    }
    let samples = f.sample(grid_size);
    check_positive(&samples)?;
    let mapped: Vec<f64> = samples.iter().map(|&x| map(x)).collect();
    Ok(coeffs_from_real_samples(&mapped, output_degree))
}

/// Reciprocal `1/f` of a strictly positive `f`, via grid sampling.
pub fn reciprocal(
    f: &TrigPoly,
    grid_size: usize,
    output_degree: usize,
) -> Result<TrigPoly, HarmonicsError> {
    grid_map(f, grid_size, output_degree, |x| 1.0 / x)
}

/// `f^{1/2}` of a strictly positive `f`, via grid sampling.
pub fn sqrt_series(
    f: &TrigPoly,
    grid_size: usize,
    output_degree: usize,
) -> Result<TrigPoly, HarmonicsError> {
    grid_map(f, grid_size, output_degree, f64::sqrt)
}

/// `f^{−1/2}` of a strictly positive `f`, via grid sampling.
pub fn rsqrt_series(
    f: &TrigPoly,
    grid_size: usize,
    output_degree: usize,
) -> Result<TrigPoly, HarmonicsError> {
    grid_map(f, grid_size, output_degree, |x| 1.0 / x.sqrt())
}

/// Grid mean of `1/f` for a strictly positive `f`: `(1/2π)∫ f^{−1} dθ`.
pub fn mean_of_reciprocal(f: &TrigPoly, grid_size: usize) -> Result<f64, HarmonicsError> {
    let samples = f.sample(grid_size);
    check_positive(&samples)?;
    Ok(samples.iter().map(|&x| 1.0 / x).sum::<f64>() / grid_size as f64)
}

/// A validated conformal factor: strictly positive on the sampling grid and
/// normalized so that `(1/2π)∫ a^{−1} dθ = 1`.
#[derive(Debug, Clone)]
pub struct ConformalFactor {
    series: TrigPoly,
    grid_size: usize,
    min_value: f64,
    normalization_residual: f64,
}

impl ConformalFactor {
    /// Validates positivity and the normalization residual of `series`.
    pub fn new(series: TrigPoly, grid_size: usize) -> Result<Self, HarmonicsError> {
        let series = series.compact();
        let grid_size = grid_size.max(default_grid_size(series.degree(), 16));
        let samples = series.sample(grid_size);
        let min_value = check_positive(&samples)?;
        let mean_inv = samples.iter().map(|&x| 1.0 / x).sum::<f64>() / grid_size as f64;
        let normalization_residual = (mean_inv - 1.0).abs();
        if normalization_residual > NORMALIZATION_TOLERANCE {
            return Err(HarmonicsError::NotNormalized { residual: normalization_residual });
        }
        Ok(ConformalFactor { series, grid_size, min_value, normalization_residual })
    }

    /// The constant factor `1` (the round disk).
    pub fn one() -> Self {
        ConformalFactor {
            series: TrigPoly::constant(1.0),
            grid_size: 16,
            min_value: 1.0,
            normalization_residual: 0.0,
        }
    }

    pub fn series(&self) -> &TrigPoly {
        &self.series
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn min_value(&self) -> f64 {
        self.min_value
    }

    pub fn normalization_residual(&self) -> f64 {
        self.normalization_residual
    }

    /// Grid sup-distance to the constant function `1`.
    pub fn distance_to_one(&self) -> f64 {
        self.series
            .sample(self.grid_size)
            .iter()
            .map(|&x| (x - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Rescales a strictly positive `f` to `c·f` with
/// `(1/2π)∫ (c f)^{−1} dθ = 1`, i.e. `c = (1/2π)∫ f^{−1} dθ`.
pub fn normalize(f: &TrigPoly, grid_size: usize) -> Result<ConformalFactor, HarmonicsError> {
    let grid_size = grid_size.max(default_grid_size(f.degree(), 16));
    let c = mean_of_reciprocal(f, grid_size)?;
    ConformalFactor::new(f.scale(c), grid_size)
}

/// Orientation of a disk automorphism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Conformal,
    Anticonformal,
}

/// Parameter of the disk automorphism `Ψ(z) = (z − w)/(1 − conj(w)·z)`,
/// optionally precomposed with conjugation.
#[derive(Debug, Clone, Copy)]
pub struct MobiusParameter {
    w: Complex64,
    orientation: Orientation,
}

impl MobiusParameter {
    pub fn new(w: Complex64, orientation: Orientation) -> Result<Self, HarmonicsError> {
        if w.norm() >= 1.0 {
            return Err(HarmonicsError::InvalidMobiusParameter { modulus: w.norm() });
        }
        Ok(MobiusParameter { w, orientation })
    }

    pub fn conformal(w: Complex64) -> Result<Self, HarmonicsError> {
        Self::new(w, Orientation::Conformal)
    }

    pub fn w(&self) -> Complex64 {
        self.w
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }
}

/// Pulls a factor back along the boundary map of a disk automorphism:
/// `b = |dψ/dθ|^{−1}·(a ∘ ψ)` with `e^{iψ(θ)} = Ψ(e^{iθ})`.
///
/// The boundary derivative is evaluated as
/// `|Ψ′(e^{iθ})| = (1 − |w|²)/|1 − conj(w) e^{iθ}|²`, and `a ∘ ψ` through
/// powers of the unit-modulus value `Ψ(e^{iθ})`, so no argument branch is
/// ever taken. Conformal equivalence preserves the normalization; the
/// residual is re-validated on construction.
pub fn mobius_reparameterize(
    a: &ConformalFactor,
    m: &MobiusParameter,
    output_degree: usize,
) -> Result<ConformalFactor, HarmonicsError> {
    let grid_size = default_grid_size(output_degree, a.grid_size());
    let w = m.w;
    let one = Complex64::new(1.0, 0.0);
    let jacobian_scale = 1.0 - w.norm_sqr();

    let a_coeffs = a.series();
    let d = a_coeffs.degree() as i64;
    let mut samples = Vec::with_capacity(grid_size);
    for j in 0..grid_size {
        let theta = 2.0 * PI * j as f64 / grid_size as f64;
        let z = Complex64::from_polar(1.0, theta);
        let zeta = match m.orientation {
            Orientation::Conformal => z,
            Orientation::Anticonformal => z.conj(),
        };
        let denom = one - w.conj() * zeta;
        let psi_prime_abs = jacobian_scale / denom.norm_sqr();
        // unit-modulus image point e^{iψ(θ)}
        let u = (zeta - w) / denom;
        let u = u / u.norm();
        let mut a_at_psi = a_coeffs.coeff(0);
        let mut power = one;
        for k in 1..=d {
            power *= u;
            a_at_psi += a_coeffs.coeff(k) * power + a_coeffs.coeff(-k) * power.conj();
        }
        samples.push(a_at_psi.re / psi_prime_abs);
    }

    check_positive(&samples)?;
    // outputDegree must resolve the composed function: the coefficient mass
    // discarded by the truncation has to fit within the normalization budget.
    let full = coeffs_from_real_samples(&samples, grid_size / 2 - 1);
    let total: f64 = (0..=(full.degree() as i64))
        .map(|k| full.coeff(k).norm_sqr() + if k > 0 { full.coeff(-k).norm_sqr() } else { 0.0 })
        .sum();
    let loss: f64 = ((output_degree as i64 + 1)..=(full.degree() as i64))
        .map(|k| full.coeff(k).norm_sqr() + full.coeff(-k).norm_sqr())
        .sum();
    if total > 0.0 && (loss / total).sqrt() > NORMALIZATION_TOLERANCE {
        return Err(HarmonicsError::AliasingRisk {
            grid_size,
            required: 2 * output_degree,
        });
    }
    ConformalFactor::new(full.truncated(output_degree), grid_size)
}

/// Builds the factor `a = |Φ′(e^{iθ})|^{−1}` (normalized) of a polynomial
/// conformal map `Φ(z) = Σ c_j z^j` with nonvanishing derivative on the
/// closed disk. The derivative is checked by boundary sampling and by the
/// winding number of `Φ′` along the boundary.
pub fn factor_from_conformal_map(
    map_coeffs: &[Complex64],
    output_degree: usize,
) -> Result<ConformalFactor, HarmonicsError> {
    let grid_size = default_grid_size(output_degree, 16 * map_coeffs.len().max(16));
    // Φ′ coefficients
    let dphi: Vec<Complex64> = map_coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, c)| c * j as f64)
        .collect();
    if dphi.is_empty() {
        return Err(HarmonicsError::DegenerateMap { min_abs_derivative: 0.0 });
    }

    let mut boundary = Vec::with_capacity(grid_size);
    for j in 0..grid_size {
        let theta = 2.0 * PI * j as f64 / grid_size as f64;
        let z = Complex64::from_polar(1.0, theta);
        // Horner evaluation of Φ′
        let mut v = Complex64::new(0.0, 0.0);
        for c in dphi.iter().rev() {
            v = v * z + c;
        }
        boundary.push(v);
    }

    let max_abs = boundary.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let min_abs = boundary.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if min_abs <= 1e-9 * max_abs {
        return Err(HarmonicsError::DegenerateMap { min_abs_derivative: min_abs });
    }
    // winding number of Φ′ around 0 counts its zeros inside the disk
    let mut winding = 0.0;
    for j in 0..grid_size {
        let next = boundary[(j + 1) % grid_size];
        winding += (next / boundary[j]).arg();
    }
    let winding = (winding / (2.0 * PI)).round() as i64;
    if winding != 0 {
        return Err(HarmonicsError::DegenerateMap { min_abs_derivative: min_abs });
    }

    let samples: Vec<f64> = boundary.iter().map(|v| 1.0 / v.norm()).collect();
    let series = coeffs_from_real_samples(&samples, output_degree);
    normalize(&series, grid_size)
}

/// JSON encodings accepted wherever a function is an input: one-sided
/// coefficients of a real polynomial, or uniform grid samples.
pub mod encoding {
    use super::*;
    use serde::{Deserialize, Serialize};

    /// `{"degree": N, "coefficients": [[re_0, im_0], ..., [re_N, im_N]]}`
    #[derive(Debug, Serialize, Deserialize)]
    pub struct CoefficientEncoding {
        pub degree: usize,
        pub coefficients: Vec<[f64; 2]>,
    }

    /// `{"samples": [v_0, ..., v_{M−1}]}` at `θ_j = 2πj/M`
    #[derive(Debug, Serialize, Deserialize)]
    pub struct GridEncoding {
        pub samples: Vec<f64>,
    }

    impl TrigPoly {
        pub fn to_coefficient_json(&self) -> serde_json::Value {
            let enc = CoefficientEncoding {
                degree: self.degree(),
                coefficients: self.one_sided().iter().map(|c| [c.re, c.im]).collect(),
            };
            serde_json::to_value(enc).expect("encoding is serializable")
        }

        /// Parses either accepted encoding.
        pub fn from_json(value: &serde_json::Value) -> Result<TrigPoly, String> {
            if value.get("coefficients").is_some() {
                let enc: CoefficientEncoding =
                    serde_json::from_value(value.clone()).map_err(|e| e.to_string())?;
                if enc.coefficients.len() != enc.degree + 1 {
                    return Err(format!(
                        "degree {} does not match {} coefficients",
                        enc.degree,
                        enc.coefficients.len()
                    ));
                }
                if enc.coefficients[0][1] != 0.0 {
                    return Err("im_0 must be 0".to_string());
                }
                let one_sided: Vec<Complex64> = enc
                    .coefficients
                    .iter()
                    .map(|c| Complex64::new(c[0], c[1]))
                    .collect();
                TrigPoly::from_real_coeffs(&one_sided).map_err(|e| e.to_string())
            } else if value.get("samples").is_some() {
                let enc: GridEncoding =
                    serde_json::from_value(value.clone()).map_err(|e| e.to_string())?;
                let m = enc.samples.len();
                if !m.is_power_of_two() || m < 4 {
                    return Err("sample count must be a power of two ≥ 4".to_string());
                }
                Ok(coeffs_from_real_samples(&enc.samples, m / 2 - 1).compact())
            } else {
                Err("expected a \"coefficients\" or \"samples\" object".to_string())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn evaluate_constant_and_modes() {
        assert_close(TrigPoly::constant(1.0).evaluate(0.7), 1.0, 1e-15);
        assert_close(TrigPoly::cosine(1, 1.0).evaluate(0.0), 1.0, 1e-15);
        // c_0 = 2, c_3 = 0.5 at θ = π/3: 2 + 2·Re(0.5·e^{iπ}) = 1
        let f = TrigPoly::from_real_coeffs(&[
            Complex64::new(2.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.5, 0.0),
        ])
        .unwrap();
        assert_close(f.evaluate(PI / 3.0), 1.0, 1e-14);
    }

    #[test]
    fn multiply_matches_product_to_sum() {
        let one = TrigPoly::constant(1.0);
        let cos = TrigPoly::cosine(1, 1.0);
        assert_eq!(one.multiply(&cos).compact(), cos);

        // cos²θ = 1/2 + (1/2)cos 2θ
        let sq = cos.multiply(&cos);
        assert_close(sq.coeff(0).re, 0.5, 1e-15);
        assert_close(sq.coeff(2).re, 0.25, 1e-15);
        assert_close(sq.coeff(1).norm(), 0.0, 1e-15);

        // (1 + cos θ)·sin θ = sin θ + (1/2) sin 2θ, against grid sampling
        let f = one.add(&cos).multiply(&TrigPoly::sine(1, 1.0));
        let m = 64;
        let samples = f.sample(m);
        for (j, s) in samples.iter().enumerate() {
            let theta = 2.0 * PI * j as f64 / m as f64;
            assert_close(*s, theta.sin() + 0.5 * (2.0 * theta).sin(), 1e-13);
        }
    }

    #[test]
    fn derivative_and_hilbert_on_modes() {
        assert_eq!(TrigPoly::constant(1.0).derivative_d().coeff(0).norm(), 0.0);

        let mut mode5 = vec![Complex64::new(0.0, 0.0); 11];
        mode5[10] = Complex64::new(1.0, 0.0);
        let f = TrigPoly::from_two_sided(mode5);
        assert_eq!(f.derivative_d().coeff(5), Complex64::new(5.0, 0.0));

        // D(cos θ) = i sin θ
        let d = TrigPoly::cosine(1, 1.0).derivative_d();
        let expect = TrigPoly::sine(1, 1.0).times_i();
        assert!(d.sub(&expect).sup_norm(16) < 1e-15);

        // H(1) = 0, H(cos θ) = i sin θ, H(sin 3θ) = −i cos 3θ
        assert_eq!(TrigPoly::constant(1.0).hilbert().coeff(0).norm(), 0.0);
        let h = TrigPoly::cosine(1, 1.0).hilbert();
        assert!(h.sub(&expect).sup_norm(16) < 1e-15);
        let h3 = TrigPoly::sine(3, 1.0).hilbert();
        let expect3 = TrigPoly::cosine(3, 1.0).times_i().scale(-1.0);
        assert!(h3.sub(&expect3).sup_norm(16) < 1e-15);
    }

    #[test]
    fn hilbert_squared_removes_mean() {
        let f = TrigPoly::constant(2.0)
            .add(&TrigPoly::cosine(2, 0.7))
            .add(&TrigPoly::sine(5, -0.3));
        let hh = f.hilbert().hilbert();
        let expect = f.sub(&TrigPoly::constant(2.0));
        assert_eq!(hh.compact(), expect.compact());
    }

    #[test]
    fn reciprocal_mean_matches_poisson_integral() {
        // (1/2π)∫ dθ/(1 + ε cos θ) = 1/√(1 − ε²)
        let f = TrigPoly::constant(1.0).add(&TrigPoly::cosine(1, 0.5));
        let r = reciprocal(&f, 256, 24).unwrap();
        assert_close(r.coeff(0).re, 1.0 / (1.0 - 0.25f64).sqrt(), 1e-12);

        // reciprocal of a constant
        let half = reciprocal(&TrigPoly::constant(2.0), 64, 4).unwrap();
        assert_close(half.coeff(0).re, 0.5, 1e-14);

        // round trip
        let back = reciprocal(&r, 256, 24).unwrap();
        assert!(back.sub(&f).sup_norm(256) < 1e-10);
    }

    #[test]
    fn reciprocal_rejects_nonpositive_and_aliasing() {
        let f = TrigPoly::constant(0.5).add(&TrigPoly::cosine(1, 1.0));
        assert!(matches!(
            reciprocal(&f, 256, 8),
            Err(HarmonicsError::NonPositiveSample { .. })
        ));
        let g = TrigPoly::constant(2.0).add(&TrigPoly::cosine(1, 1.0));
        assert!(matches!(
            reciprocal(&g, 16, 16),
            Err(HarmonicsError::AliasingRisk { .. })
        ));
    }

    #[test]
    fn normalize_constants_and_closed_form() {
        let a = normalize(&TrigPoly::constant(3.0), 64).unwrap();
        assert!(a.series().sub(&TrigPoly::constant(1.0)).sup_norm(64) < 1e-14);

        // c = 1/√(1 − 0.09) for f = 1 + 0.3 cos θ
        let f = TrigPoly::constant(1.0).add(&TrigPoly::cosine(1, 0.3));
        let a = normalize(&f, 512).unwrap();
        let c = a.series().coeff(0).re;
        assert_close(c, 1.0 / (1.0 - 0.09f64).sqrt(), 1e-12);
        assert!(a.normalization_residual() < 1e-13);

        // idempotence
        let again = normalize(a.series(), 512).unwrap();
        let ratio = again.series().coeff(0).re / a.series().coeff(0).re;
        assert_close(ratio, 1.0, 1e-12);
    }

    #[test]
    fn mean_integral_values() {
        assert_close(TrigPoly::constant(1.0).mean_integral(), 2.0 * PI, 1e-15);
        assert_close(TrigPoly::cosine(5, 1.0).mean_integral(), 0.0, 1e-15);
        let f = TrigPoly::constant(2.0).add(&TrigPoly::cosine(1, 1.0));
        assert_close(f.mean_integral(), 4.0 * PI, 1e-15);
    }

    #[test]
    fn mobius_identity_and_trivial_class() {
        let f = TrigPoly::constant(1.0)
            .add(&TrigPoly::cosine(1, 0.2))
            .add(&TrigPoly::sine(2, 0.1));
        let a = normalize(&f, 256).unwrap();
        let id = MobiusParameter::conformal(Complex64::new(0.0, 0.0)).unwrap();
        let b = mobius_reparameterize(&a, &id, a.series().degree()).unwrap();
        assert!(b.series().sub(a.series()).sup_norm(256) < 1e-12);

        // a = 1, w = 0.3: image supported on modes {−1, 0, 1} with the
        // closed-form |Ψ'| coefficients
        let one = ConformalFactor::one();
        let m = MobiusParameter::conformal(Complex64::new(0.3, 0.0)).unwrap();
        let b = mobius_reparameterize(&one, &m, 16).unwrap();
        for k in 2..=16 {
            assert!(b.series().coeff(k).norm() < 1e-10, "mode {k} leaked");
        }
        let denom = 1.0 - 0.09;
        assert_close(b.series().coeff(0).re, (1.0 + 0.09) / denom, 1e-12);
        assert_close(b.series().coeff(1).re, -0.3 / denom, 1e-12);
    }

    #[test]
    fn anticonformal_identity_reflects() {
        // w = 0 with the anticonformal orientation sends θ ↦ −θ, so the
        // pulled-back factor is the reflection of the original
        let f = TrigPoly::constant(1.0)
            .add(&TrigPoly::cosine(1, 0.2))
            .add(&TrigPoly::sine(2, 0.1));
        let a = normalize(&f, 256).unwrap();
        let m = MobiusParameter::new(Complex64::new(0.0, 0.0), Orientation::Anticonformal).unwrap();
        let b = mobius_reparameterize(&a, &m, a.series().degree()).unwrap();
        for j in 0..16 {
            let theta = 2.0 * PI * j as f64 / 16.0;
            assert_close(b.series().evaluate(theta), a.series().evaluate(-theta), 1e-12);
        }
    }

    #[test]
    fn mobius_round_trip() {
        let f = TrigPoly::constant(1.0)
            .add(&TrigPoly::cosine(1, 0.25))
            .add(&TrigPoly::cosine(3, 0.1));
        let a = normalize(&f, 512).unwrap();
        let w = Complex64::new(0.3, 0.15);
        let fwd = MobiusParameter::conformal(w).unwrap();
        let bwd = MobiusParameter::conformal(-w).unwrap();
        let b = mobius_reparameterize(&a, &fwd, 48).unwrap();
        let back = mobius_reparameterize(&b, &bwd, 48).unwrap();
        assert!(back.series().sub(a.series()).sup_norm(512) < 1e-8);
    }

    #[test]
    fn conformal_map_factors() {
        // Φ(z) = z gives the disk; Φ(z) = 2z rescales to the same factor
        let a = factor_from_conformal_map(
            &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            8,
        )
        .unwrap();
        assert!(a.series().sub(&TrigPoly::constant(1.0)).sup_norm(64) < 1e-12);
        let a2 = factor_from_conformal_map(
            &[Complex64::new(0.0, 0.0), Complex64::new(2.0, 0.0)],
            8,
        )
        .unwrap();
        assert!(a2.series().sub(&TrigPoly::constant(1.0)).sup_norm(64) < 1e-12);

        // Φ(z) = z + 0.2 z²: a ∝ |1 + 0.4 e^{iθ}|^{−1}, normalized by the
        // mean of |Φ′| (the perimeter rescaling)
        let a3 = factor_from_conformal_map(
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.2, 0.0),
            ],
            32,
        )
        .unwrap();
        let grid = 256;
        let closed_form = |theta: f64| {
            (Complex64::new(1.0, 0.0) + Complex64::from_polar(0.4, theta)).norm()
        };
        let mean_target =
            (0..grid).map(|i| closed_form(2.0 * PI * i as f64 / grid as f64)).sum::<f64>()
                / grid as f64;
        for j in (0..grid).step_by(17) {
            let theta = 2.0 * PI * j as f64 / grid as f64;
            assert_close(a3.series().evaluate(theta), mean_target / closed_form(theta), 1e-8);
        }

        // Φ′ vanishing inside the disk is rejected: Φ(z) = z²
        assert!(matches!(
            factor_from_conformal_map(
                &[
                    Complex64::new(0.0, 0.0),
                    Complex64::new(0.0, 0.0),
                    Complex64::new(1.0, 0.0)
                ],
                8,
            ),
            Err(HarmonicsError::DegenerateMap { .. })
        ));
    }

    #[test]
    fn json_round_trips() {
        let f = TrigPoly::constant(1.0)
            .add(&TrigPoly::cosine(2, 0.4))
            .add(&TrigPoly::sine(3, -0.2));
        let v = f.to_coefficient_json();
        let g = TrigPoly::from_json(&v).unwrap();
        assert!(f.sub(&g).sup_norm(32) < 1e-15);

        let samples: Vec<f64> = (0..32)
            .map(|j| f.evaluate(2.0 * PI * j as f64 / 32.0))
            .collect();
        let v = serde_json::json!({ "samples": samples });
        let g = TrigPoly::from_json(&v).unwrap();
        assert!(f.sub(&g).sup_norm(32) < 1e-12);

        assert!(TrigPoly::from_json(&serde_json::json!({"nope": 1})).is_err());
    }
}
