//! Truncated-matrix realizations of the circle operators.
//!
//! All operators act on the Fourier modes `|k| ≤ N` in the orthonormal basis
//! `e_k = (2π)^{−1/2} e^{ikθ}`, mapped to matrix indices `k + N`. In this
//! basis multiplication by a function `f` is the Toeplitz matrix
//! `entries[k, l] = f̂_{k−l}`, while `Λ`, `D` and `H` are the diagonal
//! multipliers `|k|`, `k`, `sgn(k)`.
//!
//! Multiplication couples modes only within `deg f`, so operator identities
//! that hold on the circle hold exactly on the interior index block
//! `|k| ≤ N − deg f` of their truncations; quantities read off near the
//! truncation edge are not trusted. The spectrum type records this through
//! its trust horizon (`⌊N/2⌋` by default).

use crate::harmonics::{
    self, default_grid_size, ConformalFactor, HarmonicsError, TrigPoly,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;

/// Angle threshold for snapping the numerically smallest eigenvalue to the
/// known kernel direction `a^{−1/2}`.
const KERNEL_SNAP_ANGLE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub enum DtnError {
    /// The Hermitian eigensolver did not converge.
    EigensolveFailure,
    Harmonics(HarmonicsError),
}

impl fmt::Display for DtnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DtnError::EigensolveFailure => write!(f, "Hermitian eigensolver failed to converge"),
            DtnError::Harmonics(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for DtnError {}

impl From<HarmonicsError> for DtnError {
    fn from(e: HarmonicsError) -> Self {
        DtnError::Harmonics(e)
    }
}

/// A dense operator on the Fourier modes `|k| ≤ N`.
#[derive(Debug, Clone)]
pub struct TruncatedOperator {
    truncation: usize,
    entries: DMatrix<Complex64>,
    hermitian: bool,
    /// Assembly-quality record: symmetrization defect for `Λ_a`-type
    /// operators, dropped coefficient mass for multiplication operators.
    assembly_defect: f64,
}

impl TruncatedOperator {
    fn from_parts(truncation: usize, entries: DMatrix<Complex64>, hermitian: bool) -> Self {
        TruncatedOperator { truncation, entries, hermitian, assembly_defect: 0.0 }
    }

    /// Wraps a dense `(2N+1)×(2N+1)` matrix as an operator on modes `|k| ≤ N`.
    pub fn from_entries(truncation: usize, entries: DMatrix<Complex64>, hermitian: bool) -> Self {
        assert_eq!(entries.nrows(), 2 * truncation + 1);
        assert_eq!(entries.ncols(), 2 * truncation + 1);
        TruncatedOperator::from_parts(truncation, entries, hermitian)
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn dim(&self) -> usize {
        2 * self.truncation + 1
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn is_hermitian_flagged(&self) -> bool {
        self.hermitian
    }

    pub fn assembly_defect(&self) -> f64 {
        self.assembly_defect
    }

    /// Matrix index of mode `k`.
    pub fn index_of_mode(&self, k: i64) -> usize {
        let n = self.truncation as i64;
        assert!(k.abs() <= n, "mode {k} outside window ±{n}");
        (k + n) as usize
    }

    /// Entry `⟨A e_l, e_k⟩`.
    pub fn entry(&self, k: i64, l: i64) -> Complex64 {
        self.entries[(self.index_of_mode(k), self.index_of_mode(l))]
    }

    pub fn matmul(&self, other: &TruncatedOperator) -> TruncatedOperator {
        assert_eq!(self.truncation, other.truncation);
        TruncatedOperator::from_parts(self.truncation, &self.entries * &other.entries, false)
    }

    pub fn add(&self, other: &TruncatedOperator) -> TruncatedOperator {
        assert_eq!(self.truncation, other.truncation);
        TruncatedOperator::from_parts(
            self.truncation,
            &self.entries + &other.entries,
            self.hermitian && other.hermitian,
        )
    }

    pub fn sub(&self, other: &TruncatedOperator) -> TruncatedOperator {
        assert_eq!(self.truncation, other.truncation);
        TruncatedOperator::from_parts(
            self.truncation,
            &self.entries - &other.entries,
            self.hermitian && other.hermitian,
        )
    }

    pub fn scale(&self, c: Complex64) -> TruncatedOperator {
        TruncatedOperator::from_parts(self.truncation, &self.entries * c, false)
    }

    pub fn adjoint(&self) -> TruncatedOperator {
        TruncatedOperator::from_parts(self.truncation, self.entries.adjoint(), self.hermitian)
    }

    /// Averages with the adjoint; records the defect and sets the flag.
    pub fn symmetrized(&self) -> TruncatedOperator {
        let adj = self.entries.adjoint();
        let defect = (&self.entries - &adj).camax();
        let sym = (&self.entries + adj) * Complex64::new(0.5, 0.0);
        TruncatedOperator {
            truncation: self.truncation,
            entries: sym,
            hermitian: true,
            assembly_defect: defect,
        }
    }

    /// `max |entries − adjoint(entries)|`.
    pub fn hermitian_defect(&self) -> f64 {
        (&self.entries - self.entries.adjoint()).camax()
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.camax()
    }

    /// Max entry modulus over the interior block `|k|, |l| ≤ margin`.
    pub fn interior_max(&self, margin: usize) -> f64 {
        let n = self.truncation as i64;
        let m = (margin as i64).min(n);
        let mut best = 0.0f64;
        for k in -m..=m {
            for l in -m..=m {
                best = best.max(self.entries[((k + n) as usize, (l + n) as usize)].norm());
            }
        }
        best
    }

    /// `max |entries[k, l]|` over the shell `max(|k|, |l|) = r`; profiles the
    /// off-diagonal decay of smoothing operators.
    pub fn shell_max(&self, r: usize) -> f64 {
        let n = self.truncation as i64;
        let r = r as i64;
        assert!(r <= n);
        let mut best = 0.0f64;
        for k in -r..=r {
            for &l in &[-r, r] {
                best = best.max(self.entries[((k + n) as usize, (l + n) as usize)].norm());
                best = best.max(self.entries[((l + n) as usize, (k + n) as usize)].norm());
            }
        }
        best
    }

    pub fn identity(n: usize) -> TruncatedOperator {
        TruncatedOperator::from_parts(
            n,
            DMatrix::from_diagonal_element(2 * n + 1, 2 * n + 1, Complex64::new(1.0, 0.0)),
            true,
        )
    }

    /// Row-major JSON export `{"truncation": N, "entries": [[re, im], ...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let entries: Vec<[f64; 2]> = self.entries.transpose().iter().map(|c| [c.re, c.im]).collect();
        serde_json::json!({ "truncation": self.truncation, "entries": entries })
    }
}

/// Diagonal operator with entries `g(k)`, `k = −N..N`.
fn diagonal(n: usize, g: impl Fn(i64) -> f64) -> TruncatedOperator {
    let dim = 2 * n + 1;
    let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for k in -(n as i64)..=(n as i64) {
        let i = (k + n as i64) as usize;
        m[(i, i)] = Complex64::new(g(k), 0.0);
    }
    TruncatedOperator::from_parts(n, m, true)
}

/// `Λ = diag(|k|)`.
pub fn lambda_matrix(n: usize) -> TruncatedOperator {
    diagonal(n, |k| k.abs() as f64)
}

/// `D = diag(k)`.
pub fn d_matrix(n: usize) -> TruncatedOperator {
    diagonal(n, |k| k as f64)
}

/// `H = diag(sgn k)`.
pub fn h_matrix(n: usize) -> TruncatedOperator {
    diagonal(n, |k| k.signum() as f64)
}

/// `F_0 = e_0 e_0^*`, the averaging projector.
pub fn f0_matrix(n: usize) -> TruncatedOperator {
    diagonal(n, |k| if k == 0 { 1.0 } else { 0.0 })
}

/// Toeplitz multiplication operator `entries[k, l] = f̂_{k−l}`. Modes of `f`
/// beyond `|j| ≤ 2N` do not fit the window; their dropped ℓ² mass is recorded
/// as the assembly defect.
pub fn mult_operator(f: &TrigPoly, n: usize) -> TruncatedOperator {
    let dim = 2 * n + 1;
    let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for k in -(n as i64)..=(n as i64) {
        for l in -(n as i64)..=(n as i64) {
            m[((k + n as i64) as usize, (l + n as i64) as usize)] = f.coeff(k - l);
        }
    }
    let dropped: f64 = ((2 * n as i64 + 1)..=(f.degree() as i64))
        .map(|j| f.coeff(j).norm_sqr() + f.coeff(-j).norm_sqr())
        .sum();
    let hermitian = f.hermitian_defect() < 1e-12;
    TruncatedOperator {
        truncation: n,
        entries: m,
        hermitian,
        assembly_defect: dropped.sqrt(),
    }
}

fn sqrt_of_factor(a: &ConformalFactor, degree: usize) -> Result<TrigPoly, HarmonicsError> {
    let grid = default_grid_size(a.series().degree() + degree, a.grid_size());
    harmonics::sqrt_series(a.series(), grid, degree)
}

fn rsqrt_of_factor(a: &ConformalFactor, degree: usize) -> Result<TrigPoly, HarmonicsError> {
    let grid = default_grid_size(a.series().degree() + degree, a.grid_size());
    harmonics::rsqrt_series(a.series(), grid, degree)
}

/// `Λ_a = a^{1/2} Λ a^{1/2}`, symmetrized after assembly.
pub fn lambda_a(a: &ConformalFactor, n: usize) -> Result<TruncatedOperator, DtnError> {
    let sqrt_a = sqrt_of_factor(a, n)?;
    let m = mult_operator(&sqrt_a, n);
    Ok(m.matmul(&lambda_matrix(n)).matmul(&m).symmetrized())
}

/// `D_a = a^{1/2} D a^{1/2}`, symmetrized after assembly.
pub fn d_a(a: &ConformalFactor, n: usize) -> Result<TruncatedOperator, DtnError> {
    let sqrt_a = sqrt_of_factor(a, n)?;
    let m = mult_operator(&sqrt_a, n);
    Ok(m.matmul(&d_matrix(n)).matmul(&m).symmetrized())
}

/// Mode-basis coefficient vector of `(2π)^{−1/2} a^{−1/2}`, normalized.
fn kernel_vector(a: &ConformalFactor, n: usize) -> Result<Vec<Complex64>, DtnError> {
    let rsqrt = rsqrt_of_factor(a, n)?;
    let mut v: Vec<Complex64> = (-(n as i64)..=(n as i64)).map(|k| rsqrt.coeff(k)).collect();
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in &mut v {
        *c /= norm;
    }
    Ok(v)
}

/// Rank-one projector onto the kernel direction `a^{−1/2}` of `Λ_a`.
pub fn p0_matrix(a: &ConformalFactor, n: usize) -> Result<TruncatedOperator, DtnError> {
    let v = kernel_vector(a, n)?;
    let dim = 2 * n + 1;
    let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for i in 0..dim {
        for j in 0..dim {
            m[(i, j)] = v[i] * v[j].conj();
        }
    }
    Ok(TruncatedOperator::from_parts(n, m, true))
}

/// The smoothing difference `Λ_a² − D_a²`; zero exactly when `a` is
/// conformally trivial, rapidly decaying off low modes in general.
pub fn smoothing_difference(a: &ConformalFactor, n: usize) -> Result<TruncatedOperator, DtnError> {
    let la = lambda_a(a, n)?;
    let da = d_a(a, n)?;
    Ok(la.matmul(&la).sub(&da.matmul(&da)).symmetrized())
}

/// Steklov spectrum of `Λ_a` at truncation `N`: ascending eigenvalues with
/// orthonormal eigenvectors in the mode basis. Eigenvalues with index beyond
/// the trust horizon carry truncation artifacts.
#[derive(Debug, Clone)]
pub struct SteklovSpectrum {
    truncation: usize,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<Complex64>,
    trust_horizon: usize,
}

impl SteklovSpectrum {
    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.eigenvalues[k]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvector column of `λ_k` in the mode basis.
    pub fn eigenvector(&self, k: usize) -> nalgebra::DVectorView<'_, Complex64> {
        self.eigenvectors.column(k)
    }

    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.eigenvectors
    }

    pub fn trust_horizon(&self) -> usize {
        self.trust_horizon
    }

    /// Eigenvalue of `Λ_a + P_0` associated with `λ_k`: the kernel mode is
    /// shifted to `1`, the rest are untouched.
    pub fn shifted_eigenvalue(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.eigenvalue(k)
        }
    }

    /// `‖Ψ^H Ψ − I‖_max`.
    pub fn orthonormality_residual(&self) -> f64 {
        let gram = self.eigenvectors.adjoint() * &self.eigenvectors;
        let dim = gram.nrows();
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// The integer `⌊(k+1)/2⌋` that `λ_k` approaches.
    pub fn asymptotic_integer(k: usize) -> usize {
        k.div_ceil(2)
    }

    /// Functional calculus `U diag(g(λ'_k)) U^H` on the shifted spectrum of
    /// `Λ_a + P_0`.
    pub fn apply_function(&self, n: usize, g: impl Fn(f64) -> f64) -> TruncatedOperator {
        assert_eq!(n, self.truncation);
        let dim = self.eigenvectors.nrows();
        let mut diag = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for k in 0..dim {
            diag[(k, k)] = Complex64::new(g(self.shifted_eigenvalue(k)), 0.0);
        }
        let m = &self.eigenvectors * diag * self.eigenvectors.adjoint();
        TruncatedOperator::from_parts(self.truncation, m, true)
    }

    /// Diagonal of `U^H B U` restricted to eigenvector index `k`, i.e.
    /// `⟨B Ψ_k, Ψ_k⟩`.
    pub fn rayleigh(&self, b: &TruncatedOperator, k: usize) -> Complex64 {
        let col = self.eigenvectors.column(k);
        let bv = &b.entries * col;
        col.dotc(&bv)
    }

    /// CSV rows `(k, lambda_k, gap_to_integer)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,lambda_k,gap_to_integer\n");
        for (k, l) in self.eigenvalues.iter().enumerate() {
            let gap = l - Self::asymptotic_integer(k) as f64;
            out.push_str(&format!("{k},{l:.15e},{gap:.15e}\n"));
        }
        out
    }
}

/// Full Hermitian eigendecomposition of `Λ_a` at truncation `N`.
///
/// The eigenvalue nearest zero is snapped to exactly zero and its eigenvector
/// replaced by the normalized coefficient vector of `a^{−1/2}` whenever the
/// two directions agree to within `1e−4` rad; `−1e−10`-level negative noise
/// is clipped.
pub fn spectrum(a: &ConformalFactor, n: usize) -> Result<SteklovSpectrum, DtnError> {
    let la = lambda_a(a, n)?;
    let eig = la
        .entries
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(DtnError::EigensolveFailure)?;

    let dim = 2 * n + 1;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());

    let mut eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for (col, &i) in order.iter().enumerate() {
        eigenvectors.set_column(col, &eig.eigenvectors.column(i));
    }

    for l in eigenvalues.iter_mut() {
        if *l < 0.0 && *l > -1e-10 {
            *l = 0.0;
        }
    }

    // Snap the kernel: the zero mode of Λ_a is span{a^{−1/2}} exactly.
    let kernel = kernel_vector(a, n)?;
    let smallest = eigenvalues
        .iter()
        .enumerate()
        .min_by(|(_, x), (_, y)| x.abs().partial_cmp(&y.abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let overlap: Complex64 = eigenvectors
        .column(smallest)
        .iter()
        .zip(kernel.iter())
        .map(|(u, v)| u.conj() * v)
        .sum();
    let angle = overlap.norm().min(1.0).acos();
    if angle < KERNEL_SNAP_ANGLE {
        eigenvalues[smallest] = 0.0;
        // keep the phase continuous with the solver output
        let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { Complex64::new(1.0, 0.0) };
        for (i, v) in kernel.iter().enumerate() {
            eigenvectors[(i, smallest)] = v * phase.conj();
        }
    }

    Ok(SteklovSpectrum {
        truncation: n,
        eigenvalues,
        eigenvectors,
        trust_horizon: n / 2,
    })
}

/// The explicit eigenbasis `φ_n` of `D_a` represented on a sampling grid:
/// `φ_n(θ) = (2π)^{−1/2} a(θ)^{−1/2} exp[i n ∫_0^θ a^{−1}]`.
#[derive(Debug, Clone)]
pub struct DaEigenbasis {
    grid_size: usize,
    max_mode: usize,
    rsqrt_samples: Vec<f64>,
    /// Antiderivative table `∫_0^{θ_j} a^{−1}(s) ds`.
    antiderivative: Vec<f64>,
    periodicity_residual: f64,
}

impl DaEigenbasis {
    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn max_mode(&self) -> usize {
        self.max_mode
    }

    /// `|∫_0^{2π} a^{−1} − 2π|`; must vanish up to the normalization residual.
    pub fn periodicity_residual(&self) -> f64 {
        self.periodicity_residual
    }

    pub fn antiderivative(&self) -> &[f64] {
        &self.antiderivative
    }

    /// Grid samples of `φ_n`.
    pub fn phi(&self, n: i64) -> Vec<Complex64> {
        assert!(n.unsigned_abs() as usize <= self.max_mode);
        let scale = 1.0 / (2.0 * PI).sqrt();
        (0..self.grid_size)
            .map(|j| {
                Complex64::from_polar(scale * self.rsqrt_samples[j], n as f64 * self.antiderivative[j])
            })
            .collect()
    }

    /// Grid `L²` inner product `∫ u conj(v) dθ`.
    pub fn inner_product(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        let h = 2.0 * PI / self.grid_size as f64;
        u.iter().zip(v.iter()).map(|(x, y)| x * y.conj()).sum::<Complex64>() * h
    }

    pub fn norm(&self, u: &[Complex64]) -> f64 {
        self.inner_product(u, u).re.max(0.0).sqrt()
    }
}

/// Builds the `D_a` eigenbasis on a grid of at least `16·N` points. The
/// cumulative integral of `a^{−1}` is evaluated spectrally: the oscillating
/// part is integrated termwise in Fourier space.
pub fn da_eigenbasis(a: &ConformalFactor, n: usize) -> Result<DaEigenbasis, DtnError> {
    let grid_size = default_grid_size(2 * n.max(a.series().degree()), 16 * n.max(64));
    let samples = a.series().sample(grid_size);
    let max_abs = samples.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= harmonics::POSITIVITY_MARGIN * max_abs {
        return Err(HarmonicsError::NonPositiveSample { min_value: min }.into());
    }

    let inv_samples: Vec<f64> = samples.iter().map(|&x| 1.0 / x).collect();
    let inv_coeffs = harmonics::coeffs_from_real_samples(&inv_samples, grid_size / 2 - 1);
    let mean = inv_coeffs.coeff(0).re;

    // ∫_0^θ a^{−1} = mean·θ + Σ_{k≠0} ĝ_k (e^{ikθ} − 1)/(ik)
    let mut antiderivative = Vec::with_capacity(grid_size);
    for j in 0..grid_size {
        let theta = 2.0 * PI * j as f64 / grid_size as f64;
        let mut acc = mean * theta;
        for k in 1..=(inv_coeffs.degree() as i64) {
            let c = inv_coeffs.coeff(k);
            if c.norm() == 0.0 && inv_coeffs.coeff(-k).norm() == 0.0 {
                continue;
            }
            // 2 Re[ c (e^{ikθ} − 1) / (ik) ] collects the ±k pair
            let term = c * (Complex64::from_polar(1.0, k as f64 * theta) - 1.0)
                / Complex64::new(0.0, k as f64);
            acc += 2.0 * term.re;
        }
        antiderivative.push(acc);
    }

    let rsqrt_samples: Vec<f64> = samples.iter().map(|&x| 1.0 / x.sqrt()).collect();
    let periodicity_residual = 2.0 * PI * (mean - 1.0).abs();

    Ok(DaEigenbasis {
        grid_size,
        max_mode: n,
        rsqrt_samples,
        antiderivative,
        periodicity_residual,
    })
}

/// Converts a mode-basis coefficient vector to grid samples of the function
/// `Σ_k v_k (2π)^{−1/2} e^{ikθ}`.
pub fn mode_vector_to_grid(
    v: nalgebra::DVectorView<'_, Complex64>,
    truncation: usize,
    grid_size: usize,
) -> Vec<Complex64> {
    let n = truncation as i64;
    let mut coeffs = Vec::with_capacity(2 * truncation + 1);
    for k in -n..=n {
        coeffs.push(v[(k + n) as usize] / (2.0 * PI).sqrt());
    }
    TrigPoly::from_two_sided(coeffs).sample_complex(grid_size)
}

/// `‖Ψ_k − P Ψ_k‖` where `P` projects onto `span{φ_n, φ_{−n}}` with
/// `n = ⌊(k+1)/2⌋` (onto `span{φ_0}` when `k = 0`). Invariant under
/// re-phasing of `Ψ_k`.
pub fn alignment_residual(spec: &SteklovSpectrum, basis: &DaEigenbasis, k: usize) -> f64 {
    let n = SteklovSpectrum::asymptotic_integer(k) as i64;
    let psi = mode_vector_to_grid(spec.eigenvector(k), spec.truncation(), basis.grid_size());

    let mut frame: Vec<Vec<Complex64>> = if n == 0 {
        vec![basis.phi(0)]
    } else {
        vec![basis.phi(n), basis.phi(-n)]
    };
    // Gram–Schmidt; the φ's are orthonormal only up to quadrature error.
    for i in 0..frame.len() {
        for j in 0..i {
            let proj = basis.inner_product(&frame[i], &frame[j]);
            let fj = frame[j].clone();
            for (x, y) in frame[i].iter_mut().zip(fj.iter()) {
                *x -= proj * y;
            }
        }
        let nrm = basis.norm(&frame[i]);
        for x in frame[i].iter_mut() {
            *x /= nrm;
        }
    }

    let mut residual = psi;
    for f in &frame {
        let proj = basis.inner_product(&residual, f);
        for (x, y) in residual.iter_mut().zip(f.iter()) {
            *x -= proj * y;
        }
    }
    basis.norm(&residual)
}

/// Convenience form of [`alignment_residual`] computing both ingredients.
pub fn eigen_alignment_residual(
    a: &ConformalFactor,
    n: usize,
    k: usize,
) -> Result<f64, DtnError> {
    let spec = spectrum(a, n)?;
    let basis = da_eigenbasis(a, n)?;
    Ok(alignment_residual(&spec, &basis, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::normalize;

    fn trivial_factor() -> ConformalFactor {
        let f = TrigPoly::constant(1.0).add(&TrigPoly::cosine(1, 0.3));
        normalize(&f, 512).unwrap()
    }

    fn generic_factor() -> ConformalFactor {
        let f = TrigPoly::constant(1.0)
            .add(&TrigPoly::cosine(1, 0.2))
            .add(&TrigPoly::sine(2, 0.15))
            .add(&TrigPoly::cosine(4, 0.05));
        normalize(&f, 512).unwrap()
    }

    #[test]
    fn mult_operator_identity_and_cosine() {
        let id = mult_operator(&TrigPoly::constant(1.0), 4);
        assert!((id.entries() - TruncatedOperator::identity(4).entries()).camax() < 1e-15);

        let mc = mult_operator(&TrigPoly::cosine(1, 1.0), 4);
        assert!((mc.entry(1, 0) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((mc.entry(0, 1) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!(mc.entry(2, 0).norm() < 1e-15);
        assert!(mc.is_hermitian_flagged());
    }

    #[test]
    fn mult_operators_compose_on_interior() {
        let f = TrigPoly::cosine(2, 0.7).add(&TrigPoly::constant(1.0));
        let g = TrigPoly::sine(1, 0.4).add(&TrigPoly::constant(0.5));
        let n = 12;
        let prod = mult_operator(&f, n).matmul(&mult_operator(&g, n));
        let direct = mult_operator(&f.multiply(&g), n);
        let margin = n - f.degree() - g.degree();
        assert!(prod.sub(&direct).interior_max(margin) < 1e-14);
    }

    #[test]
    fn diagonal_operator_relations() {
        let n = 6;
        let l = lambda_matrix(n);
        let d = d_matrix(n);
        let h = h_matrix(n);
        assert!((l.entry(2, 2) - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert!(h.entry(0, 0).norm() < 1e-15);
        assert!(l.sub(&h.matmul(&d)).max_entry() < 1e-15);
        assert!(l.sub(&d.matmul(&h)).max_entry() < 1e-15);
    }

    #[test]
    fn lambda_a_reduces_to_lambda_for_one() {
        let one = ConformalFactor::one();
        let la = lambda_a(&one, 8).unwrap();
        assert!(la.sub(&lambda_matrix(8)).max_entry() < 1e-12);
        let da = d_a(&one, 8).unwrap();
        assert!(da.sub(&d_matrix(8)).max_entry() < 1e-12);
    }

    #[test]
    fn lambda_a_symmetrization_defect_is_recorded_and_small() {
        let a = generic_factor();
        let la = lambda_a(&a, 32).unwrap();
        assert!(la.is_hermitian_flagged());
        assert!(la.hermitian_defect() < 1e-14);
        assert!(la.assembly_defect() < 1e-9 * la.max_entry(), "defect {:e}", la.assembly_defect());
    }

    #[test]
    fn mult_operator_records_dropped_modes() {
        // a degree-3 function at window N = 1 keeps only |j| ≤ 2
        let f = TrigPoly::cosine(1, 1.0).add(&TrigPoly::cosine(3, 0.4));
        let op = mult_operator(&f, 1);
        assert!((op.assembly_defect() - (2.0 * (0.2f64).powi(2)).sqrt()).abs() < 1e-15);
        assert_eq!(mult_operator(&f, 4).assembly_defect(), 0.0);
    }

    #[test]
    fn p0_is_rank_one_projector_annihilated_by_lambda_a() {
        let a = generic_factor();
        let n = 24;
        let p0 = p0_matrix(&a, n).unwrap();
        // idempotent, trace one
        assert!(p0.matmul(&p0).sub(&p0).max_entry() < 1e-10);
        let trace: Complex64 = (0..p0.dim()).map(|i| p0.entries()[(i, i)]).sum();
        assert!((trace - Complex64::new(1.0, 0.0)).norm() < 1e-10);

        let la = lambda_a(&a, n).unwrap();
        let margin = n - a.series().degree() - 2;
        assert!(la.matmul(&p0).interior_max(margin) < 1e-8);
        assert!(p0.matmul(&la).interior_max(margin) < 1e-8);

        // (Λ_a + P_0)² = Λ_a² + P_0 on the interior block
        let sum = la.add(&p0);
        let lhs = sum.matmul(&sum);
        let rhs = la.matmul(&la).add(&p0);
        assert!(lhs.sub(&rhs).interior_max(margin) < 1e-8);
    }

    #[test]
    fn smoothing_difference_vanishes_in_trivial_class() {
        let one = ConformalFactor::one();
        assert!(smoothing_difference(&one, 8).unwrap().max_entry() < 1e-12);

        let a = trivial_factor();
        let n = 24;
        let delta = smoothing_difference(&a, n).unwrap();
        let margin = n - a.series().degree() - 2;
        assert!(delta.interior_max(margin) < 1e-8);
    }

    #[test]
    fn smoothing_difference_decays_off_low_modes() {
        let a = generic_factor();
        let n = 32;
        let delta = smoothing_difference(&a, n).unwrap();
        // fit the (1 + r)^{−6} envelope at the innermost shell; the decay is
        // superpolynomial, so outer shells must stay below the fitted bound
        let c_fit = delta.shell_max(8) * 9.0f64.powi(6);
        for r in 9..=(n / 2) {
            let bound = 1.5 * c_fit * (1.0 + r as f64).powi(-6);
            assert!(
                delta.shell_max(r) <= bound,
                "shell {r}: {:e} above envelope {bound:e}",
                delta.shell_max(r)
            );
        }
        // and it genuinely beats the power law across an octave
        assert!(delta.shell_max(16) < 1e-2 * delta.shell_max(8));
    }

    #[test]
    fn spectrum_of_one_is_exact() {
        let spec = spectrum(&ConformalFactor::one(), 16).unwrap();
        for k in 0..spec.len() {
            let expect = SteklovSpectrum::asymptotic_integer(k) as f64;
            assert!((spec.eigenvalue(k) - expect).abs() < 1e-10, "k = {k}");
        }
        assert!(spec.orthonormality_residual() < 1e-10);
    }

    #[test]
    fn spectrum_nonnegative_and_orthonormal() {
        let a = generic_factor();
        let spec = spectrum(&a, 32).unwrap();
        assert!(spec.eigenvalue(0).abs() <= 1e-10);
        assert!(spec.eigenvalues().iter().all(|&l| l >= -1e-10));
        assert!(spec.orthonormality_residual() < 1e-10);
        // trusted eigenvalues pair up around integers
        for k in 10..=spec.trust_horizon() {
            let expect = SteklovSpectrum::asymptotic_integer(k) as f64;
            assert!((spec.eigenvalue(k) - expect).abs() < 0.02, "k = {k}");
        }
    }

    #[test]
    fn trivial_factor_is_isospectral_to_one() {
        let a = trivial_factor();
        let spec = spectrum(&a, 32).unwrap();
        for k in 0..=spec.trust_horizon() {
            let expect = SteklovSpectrum::asymptotic_integer(k) as f64;
            assert!(
                (spec.eigenvalue(k) - expect).abs() < 1e-8,
                "k = {k}: {}",
                spec.eigenvalue(k)
            );
        }
    }

    #[test]
    fn da_eigenbasis_for_one_is_trigonometric() {
        let basis = da_eigenbasis(&ConformalFactor::one(), 4).unwrap();
        let phi1 = basis.phi(1);
        let m = basis.grid_size();
        for (j, v) in phi1.iter().enumerate().step_by(m / 8) {
            let theta = 2.0 * PI * j as f64 / m as f64;
            let expect = Complex64::from_polar(1.0 / (2.0 * PI).sqrt(), theta);
            assert!((v - expect).norm() < 1e-12);
        }
        assert!(basis.periodicity_residual() < 1e-12);
    }

    #[test]
    fn da_eigenbasis_orthonormal_and_diagonalizes() {
        let a = generic_factor();
        let n = 8;
        let basis = da_eigenbasis(&a, n).unwrap();
        assert!(basis.periodicity_residual() < 1e-8);

        for ni in [-3i64, 0, 1, 5] {
            for mi in [-3i64, 0, 1, 5] {
                let ip = basis.inner_product(&basis.phi(ni), &basis.phi(mi));
                let target = if ni == mi { 1.0 } else { 0.0 };
                assert!(
                    (ip - Complex64::new(target, 0.0)).norm() < 1e-8,
                    "⟨φ_{ni}, φ_{mi}⟩ = {ip}"
                );
            }
        }

        // D_a φ_n = n φ_n on the grid: a^{1/2} D (a^{1/2} φ_n)
        let m = basis.grid_size();
        let sqrt_samples: Vec<f64> =
            a.series().sample(m).iter().map(|&x| x.sqrt()).collect();
        for ni in [1i64, 3] {
            let phi = basis.phi(ni);
            let staged: Vec<Complex64> = phi
                .iter()
                .zip(sqrt_samples.iter())
                .map(|(p, s)| p * s)
                .collect();
            let coeffs = harmonics::coeffs_from_samples(&staged, m / 2 - 1);
            let derived = coeffs.derivative_d().sample_complex(m);
            let result: Vec<Complex64> = derived
                .iter()
                .zip(sqrt_samples.iter())
                .map(|(d, s)| d * s)
                .collect();
            let diff: Vec<Complex64> = result
                .iter()
                .zip(phi.iter())
                .map(|(r, p)| r - p * ni as f64)
                .collect();
            assert!(basis.norm(&diff) < 1e-8, "D_a defect for n = {ni}");
        }
    }

    #[test]
    fn eigenfunction_bounds_hold() {
        // ⟨Λ_a φ_n, φ_n⟩ ≥ |n| and ⟨(Λ_a + P_0)^{−1} φ_n, φ_n⟩ ≥ |n|^{−1}
        // for modes inside the trust horizon
        let a = generic_factor();
        let n = 64;
        let la = lambda_a(&a, n).unwrap();
        let spec = spectrum(&a, n).unwrap();
        let inv = spec.apply_function(n, |l| 1.0 / l);
        let basis = da_eigenbasis(&a, n).unwrap();
        let scale = (2.0 * PI).sqrt();
        for mode in [1i64, 2, 5, 9, 16, 25, 32, -3, -16, -32] {
            let phi = basis.phi(mode);
            let coeffs = harmonics::coeffs_from_samples(&phi, n);
            let v = nalgebra::DVector::from_iterator(
                2 * n + 1,
                (-(n as i64)..=(n as i64)).map(|k| coeffs.coeff(k) * scale),
            );
            let norm_sq = v.dotc(&v).re;
            let rayleigh_la = v.dotc(&(la.entries() * &v)).re / norm_sq;
            assert!(
                rayleigh_la >= mode.unsigned_abs() as f64 - 1e-7,
                "⟨Λ_a φ_{mode}, φ_{mode}⟩ = {rayleigh_la}"
            );
            let rayleigh_inv = v.dotc(&(inv.entries() * &v)).re / norm_sq;
            assert!(
                rayleigh_inv >= 1.0 / mode.unsigned_abs() as f64 - 1e-7,
                "⟨(Λ_a+P_0)^{{-1}} φ_{mode}, φ_{mode}⟩ = {rayleigh_inv}"
            );
        }
    }

    #[test]
    fn alignment_residual_zero_for_one() {
        let one = ConformalFactor::one();
        let spec = spectrum(&one, 8).unwrap();
        let basis = da_eigenbasis(&one, 8).unwrap();
        for k in 0..=4 {
            assert!(alignment_residual(&spec, &basis, k) < 1e-10, "k = {k}");
        }
    }

    #[test]
    fn operator_json_and_spectrum_csv_exports() {
        let op = mult_operator(&TrigPoly::cosine(1, 1.0), 2);
        let v = op.to_json();
        assert_eq!(v["truncation"], serde_json::json!(2));
        let entries = v["entries"].as_array().unwrap();
        assert_eq!(entries.len(), 25);
        // row-major: slot 1 is matrix entry (k = −2, l = −1) = f̂_{−1} = 1/2
        assert_eq!(entries[1][0], serde_json::json!(0.5));

        let spec = spectrum(&ConformalFactor::one(), 4).unwrap();
        let csv = spec.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "k,lambda_k,gap_to_integer");
        let first = lines.next().unwrap();
        assert!(first.starts_with("0,"));
        assert_eq!(csv.lines().count(), 10);
    }

    #[test]
    fn alignment_residual_phase_invariant() {
        let a = generic_factor();
        let n = 16;
        let spec = spectrum(&a, n).unwrap();
        let basis = da_eigenbasis(&a, n).unwrap();
        let r1 = alignment_residual(&spec, &basis, 3);

        let mut rephased = spec.clone();
        let phase = Complex64::from_polar(1.0, 1.234);
        let col: Vec<Complex64> = rephased.eigenvectors.column(3).iter().map(|c| c * phase).collect();
        for (i, v) in col.iter().enumerate() {
            rephased.eigenvectors[(i, 3)] = *v;
        }
        let r2 = alignment_residual(&rephased, &basis, 3);
        assert!((r1 - r2).abs() < 1e-12);
    }
}
