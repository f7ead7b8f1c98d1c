//! Labeled finite-dimensional complex state spaces.
//!
//! Everything here is dense. The largest space in use is three three-level
//! transmons (27 states), so no sparse storage is needed; a couple of
//! zero-skipping products are provided for the integrator hot loops.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Tolerance used by the structural validity checks (Hermiticity, trace,
/// normalization, positivity).
pub const STATE_TOL: f64 = 1e-9;

/// Unit conversions into the internal convention: angular frequency in
/// rad/ns, time in ns.
pub mod units {
    use std::f64::consts::TAU;

    pub fn ghz(x: f64) -> f64 {
        TAU * x
    }

    pub fn mhz(x: f64) -> f64 {
        TAU * x * 1e-3
    }

    pub fn khz(x: f64) -> f64 {
        TAU * x * 1e-6
    }

    /// rad/ns back to MHz.
    pub fn to_mhz(omega: f64) -> f64 {
        omega / (TAU * 1e-3)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisLabel {
    pub name: String,
    pub index: usize,
}

/// Ordered list of basis labels, indices contiguous from zero.
#[derive(Clone, PartialEq, Eq)]
pub struct Basis {
    labels: Arc<[BasisLabel]>,
}

impl Basis {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<BasisLabel> = names
            .into_iter()
            .enumerate()
            .map(|(index, name)| BasisLabel {
                name: name.into(),
                index,
            })
            .collect();
        Self {
            labels: labels.into(),
        }
    }

    /// Basis `{0, 1, ..., d-1}` of a single d-level system.
    pub fn levels(d: usize) -> Self {
        Self::new((0..d).map(|n| n.to_string()))
    }

    /// The `{A, M, B}` basis of the bare three-level model.
    pub fn three_level() -> Self {
        Self::new(["A", "M", "B"])
    }

    /// Single-excitation subspace `{|100>, |010>, |001>}` of the chain.
    pub fn single_excitation() -> Self {
        Self::new(["100", "010", "001"])
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[BasisLabel] {
        &self.labels
    }

    pub fn name(&self, index: usize) -> &str {
        &self.labels[index].name
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.name == name)
    }

    /// Product basis, `self`-major, names concatenated.
    pub fn tensor(&self, other: &Basis) -> Basis {
        let names = self.labels.iter().flat_map(|a| {
            other
                .labels
                .iter()
                .map(move |b| format!("{}{}", a.name, b.name))
        });
        Basis::new(names)
    }
}

impl fmt::Debug for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.labels.iter().map(|l| &l.name))
            .finish()
    }
}

/// Dense complex square matrix over a labeled basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    basis: Basis,
    matrix: CMatrix,
}

impl Operator {
    pub fn new(basis: Basis, matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: matrix.nrows(),
            });
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("building an operator".into()));
        }
        Ok(Self { basis, matrix })
    }

    pub fn zeros(basis: Basis) -> Self {
        let n = basis.len();
        Self {
            basis,
            matrix: CMatrix::zeros(n, n),
        }
    }

    pub fn identity(basis: Basis) -> Self {
        let n = basis.len();
        Self {
            basis,
            matrix: CMatrix::identity(n, n),
        }
    }

    /// `|ket><bra|` on the given basis.
    pub fn projector(basis: Basis, ket: usize, bra: usize) -> Self {
        let mut op = Self::zeros(basis);
        op.matrix[(ket, bra)] = ONE;
        op
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    /// Entry addressed by basis label names.
    pub fn entry(&self, row: &str, col: &str) -> Option<C64> {
        let r = self.basis.index_of(row)?;
        let c = self.basis.index_of(col)?;
        Some(self.matrix[(r, c)])
    }

    pub fn dagger(&self) -> Self {
        Self {
            basis: self.basis.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn hermitian_deviation(&self) -> f64 {
        hermitian_deviation(&self.matrix)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn unitarity_deviation(&self) -> f64 {
        unitarity_deviation(&self.matrix)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        self.check_dim(other.dim())?;
        Ok(Self {
            basis: self.basis.clone(),
            matrix: &self.matrix * &other.matrix,
        })
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        self.check_dim(other.dim())?;
        Ok(Self {
            basis: self.basis.clone(),
            matrix: commutator(&self.matrix, &other.matrix),
        })
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            basis: self.basis.clone(),
            matrix: self.matrix.map(|z| z * factor),
        }
    }

    pub fn apply(&self, state: &PureState) -> Result<PureState> {
        self.check_dim(state.dim())?;
        Ok(PureState {
            basis: self.basis.clone(),
            amplitudes: &self.matrix * &state.amplitudes,
        })
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }
}

/// Kronecker product with `a` as the major factor.
pub fn tensor_product(a: &Operator, b: &Operator) -> Operator {
    Operator {
        basis: a.basis.tensor(&b.basis),
        matrix: a.matrix.kronecker(&b.matrix),
    }
}

/// `exp(-i h dt)` for Hermitian `h`, by eigendecomposition.
pub fn matrix_exponential_step(h: &Operator, dt: f64) -> Result<Operator> {
    let deviation = h.hermitian_deviation();
    if deviation > STATE_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(Operator {
        basis: h.basis.clone(),
        matrix: expm_hermitian(&h.matrix, dt),
    })
}

/// Unchecked kernel behind [`matrix_exponential_step`]. Only the lower
/// triangle of `h` is read.
pub fn expm_hermitian(h: &CMatrix, dt: f64) -> CMatrix {
    let n = h.nrows();
    if h.iter().all(|z| *z == ZERO) {
        return CMatrix::identity(n, n);
    }
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (k, &e) in eig.eigenvalues.iter().enumerate() {
        let phase = C64::from_polar(1.0, -e * dt);
        for z in scaled.column_mut(k).iter_mut() {
            *z *= phase;
        }
    }
    scaled * v.adjoint()
}

/// Normalized pure state; `unnormalized` lifts the norm check.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    basis: Basis,
    amplitudes: CVector,
}

impl PureState {
    pub fn new(basis: Basis, amplitudes: CVector) -> Result<Self> {
        let state = Self::unnormalized(basis, amplitudes)?;
        let norm_err = (state.norm_sqr() - 1.0).abs();
        if norm_err > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "squared norm deviates from 1 by {norm_err:e}"
            )));
        }
        Ok(state)
    }

    pub fn unnormalized(basis: Basis, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: amplitudes.len(),
            });
        }
        if amplitudes
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite("building a state".into()));
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn from_slice(basis: Basis, amplitudes: &[C64]) -> Result<Self> {
        Self::new(basis, CVector::from_column_slice(amplitudes))
    }

    pub fn basis_state(basis: Basis, index: usize) -> Self {
        let mut amplitudes = CVector::zeros(basis.len());
        amplitudes[index] = ONE;
        Self { basis, amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amplitudes[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            basis: self.basis.clone(),
            amplitudes: self.amplitudes.map(|z| z * factor),
        }
    }

    /// `|self><other|`
    pub fn outer(&self, other: &PureState) -> Operator {
        Operator {
            basis: self.basis.clone(),
            matrix: &self.amplitudes * other.amplitudes.adjoint(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            basis: self.basis.clone(),
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    basis: Basis,
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(basis: Basis, matrix: CMatrix) -> Result<Self> {
        Self::with_tolerance(basis, matrix, STATE_TOL)
    }

    /// Validates Hermiticity, unit trace and positivity, each to `tol`.
    pub fn with_tolerance(basis: Basis, matrix: CMatrix, tol: f64) -> Result<Self> {
        let op = Operator::new(basis, matrix)?;
        let herm = op.hermitian_deviation();
        if herm > tol {
            return Err(Error::InvalidState(format!(
                "density matrix not Hermitian ({herm:e})"
            )));
        }
        let tr = op.matrix.trace();
        if (tr - ONE).norm() > tol {
            return Err(Error::InvalidState(format!(
                "density matrix trace is {tr}"
            )));
        }
        let min_eig = min_eigenvalue(&op.matrix);
        if min_eig < -tol {
            return Err(Error::InvalidState(format!(
                "density matrix has eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self {
            basis: op.basis,
            matrix: op.matrix,
        })
    }

    pub fn maximally_mixed(basis: Basis) -> Self {
        let n = basis.len();
        Self {
            basis,
            matrix: CMatrix::identity(n, n).map(|z| z / n as f64),
        }
    }

    pub(crate) fn from_raw(basis: Basis, matrix: CMatrix) -> Self {
        Self { basis, matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn population(&self, index: usize) -> f64 {
        self.matrix[(index, index)].re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.population(i)).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    /// `p * self + (1 - p) * other`
    pub fn mix(&self, other: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(Self {
            basis: self.basis.clone(),
            matrix: self.matrix.map(|z| z * p) + other.matrix.map(|z| z * (1.0 - p)),
        })
    }
}

/// Real part of `<target|rho|target>`, clamped to `[0, 1]`.
pub fn fidelity_pure_target(target: &PureState, rho: &DensityMatrix) -> Result<f64> {
    if target.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: target.dim(),
        });
    }
    let norm_err = (target.norm_sqr() - 1.0).abs();
    if norm_err > STATE_TOL {
        return Err(Error::InvalidState(format!(
            "fidelity target is not normalized ({norm_err:e})"
        )));
    }
    let value = expectation(&rho.matrix, &target.amplitudes);
    if value.im.abs() >= STATE_TOL {
        return Err(Error::InvalidState(format!(
            "fidelity has imaginary part {:e}",
            value.im
        )));
    }
    Ok(value.re.clamp(0.0, 1.0))
}

/// `<v|m|v>`
pub fn expectation(m: &CMatrix, v: &CVector) -> C64 {
    v.dotc(&(m * v))
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in j..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `|U^dagger U - I|_F`
pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - CMatrix::identity(n, n)).norm()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

/// Sorted eigenvalues of a Hermitian matrix (lower triangle is read).
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut values: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

fn min_eigenvalue(m: &CMatrix) -> f64 {
    // Symmetrize first so a tiny anti-Hermitian part does not bias the result.
    let sym = (m + m.adjoint()).map(|z| z * 0.5);
    hermitian_eigenvalues(&sym)
        .first()
        .copied()
        .unwrap_or(0.0)
}

/// `a * b`, skipping the zero entries of `a`.
pub(crate) fn mul_sparse_left(a: &CMatrix, b: &CMatrix, out: &mut CMatrix) {
    let n = a.nrows();
    let m = b.ncols();
    out.fill(ZERO);
    let bs = b.as_slice();
    let os = out.as_mut_slice();
    for k in 0..a.ncols() {
        for i in 0..n {
            let aik = a[(i, k)];
            if aik == ZERO {
                continue;
            }
            for j in 0..m {
                os[j * n + i] += aik * bs[j * b.nrows() + k];
            }
        }
    }
}

/// `b * a`, skipping the zero entries of `a`.
pub(crate) fn mul_sparse_right(b: &CMatrix, a: &CMatrix, out: &mut CMatrix) {
    let n = b.nrows();
    out.fill(ZERO);
    let bs = b.as_slice();
    let os = out.as_mut_slice();
    for j in 0..a.ncols() {
        for k in 0..a.nrows() {
            let akj = a[(k, j)];
            if akj == ZERO {
                continue;
            }
            let src = &bs[k * n..(k + 1) * n];
            let dst = &mut os[j * n..(j + 1) * n];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s * akj;
            }
        }
    }
}
