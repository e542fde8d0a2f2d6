//! The `(λ,0)` irrep of su(3) in the bosonic realization `C_ij = a_i† a_j`.
//!
//! Basis kets `|n1 n2 n3⟩` with `n1 + n2 + n3 = λ` are ordered by
//! descending `n1`, then descending `n2`. Mode indices are 1-based to match
//! the usual `C_ij` labels.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::group::Su2Subgroup;
use crate::C64;

/// Tolerance below which `‖M − M†‖_max` counts as hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on the norm of a [`StateVector`].
pub const NORM_TOL: f64 = 1e-12;
/// Most negative variance accepted before clamping to zero.
pub const VARIANCE_FLOOR: f64 = -1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    pub n1: u32,
    pub n2: u32,
    pub n3: u32,
}

impl BasisState {
    pub fn new(n1: u32, n2: u32, n3: u32) -> Self {
        Self { n1, n2, n3 }
    }

    /// Occupation of mode `m` (1-based).
    pub fn occupation(&self, m: usize) -> u32 {
        match m {
            1 => self.n1,
            2 => self.n2,
            3 => self.n3,
            _ => panic!("mode index {m} out of range 1..=3"),
        }
    }

    fn with_occupation(mut self, m: usize, n: u32) -> Self {
        match m {
            1 => self.n1 = n,
            2 => self.n2 = n,
            _ => self.n3 = n,
        }
        self
    }

    pub fn total(&self) -> u32 {
        self.n1 + self.n2 + self.n3
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{},{}⟩", self.n1, self.n2, self.n3)
    }
}

/// Weight basis of the `(λ,0)` irrep.
pub struct IrrepSpace {
    lambda: u32,
    basis: Vec<BasisState>,
    subgroups: [OnceLock<Arc<Su2Subgroup>>; 3],
}

impl fmt::Debug for IrrepSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IrrepSpace")
            .field("lambda", &self.lambda)
            .field("dimension", &self.basis.len())
            .finish()
    }
}

impl PartialEq for IrrepSpace {
    fn eq(&self, other: &Self) -> bool {
        self.lambda == other.lambda
    }
}

/// Enumerates the `(λ,0)` basis in canonical order.
pub fn enumerate_basis(lambda: u32) -> Result<Arc<IrrepSpace>> {
    IrrepSpace::new(lambda)
}

impl IrrepSpace {
    pub fn new(lambda: u32) -> Result<Arc<Self>> {
        if lambda == 0 {
            return Err(invalid("lambda must be at least 1"));
        }
        let mut basis = Vec::with_capacity(Self::dimension_of(lambda));
        for n1 in (0..=lambda).rev() {
            for n2 in (0..=lambda - n1).rev() {
                basis.push(BasisState::new(n1, n2, lambda - n1 - n2));
            }
        }
        Ok(Arc::new(Self {
            lambda,
            basis,
            subgroups: Default::default(),
        }))
    }

    pub fn dimension_of(lambda: u32) -> usize {
        let l = lambda as usize;
        (l + 1) * (l + 2) / 2
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[BasisState] {
        &self.basis
    }

    pub fn state(&self, index: usize) -> BasisState {
        self.basis[index]
    }

    /// Position of `s` in the canonical order, or `None` when `s` is not a
    /// weight of this irrep.
    pub fn index_of(&self, s: BasisState) -> Option<usize> {
        if s.total() != self.lambda {
            return None;
        }
        let (l, n1, n2) = (self.lambda as usize, s.n1 as usize, s.n2 as usize);
        // Blocks with larger n1 come first; block n1' holds λ − n1' + 1 states.
        let k = l - n1;
        let offset = k * (k + 1) / 2;
        Some(offset + (l - n1) - n2)
    }

    /// Index of the highest weight `|λ00⟩`.
    pub fn highest_weight_index(&self) -> usize {
        0
    }

    pub(crate) fn subgroup(self: &Arc<Self>, i: usize, j: usize) -> Arc<Su2Subgroup> {
        let slot = match (i.min(j), i.max(j)) {
            (1, 2) => 0,
            (2, 3) => 1,
            _ => 2,
        };
        self.subgroups[slot]
            .get_or_init(|| Arc::new(Su2Subgroup::build(self, i.min(j), i.max(j))))
            .clone()
    }
}

fn check_mode(m: usize) -> Result<()> {
    if (1..=3).contains(&m) {
        Ok(())
    } else {
        Err(invalid(format!("mode index {m} outside 1..=3")))
    }
}

fn check_same_space(a: &IrrepSpace, b: &IrrepSpace) -> Result<()> {
    if a.lambda != b.lambda {
        return Err(invalid(format!(
            "operators live on different irreps (lambda {} vs {})",
            a.lambda, b.lambda
        )));
    }
    Ok(())
}

/// Sparse operator stored as `(row, col, value)` triplets.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    space: Arc<IrrepSpace>,
    triplets: Vec<(usize, usize, C64)>,
}

impl SparseOperator {
    pub fn from_triplets(space: Arc<IrrepSpace>, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        // merge duplicates
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|t| t.2 != C64::new(0.0, 0.0));
        Self {
            space,
            triplets: merged,
        }
    }

    pub fn space(&self) -> &Arc<IrrepSpace> {
        &self.space
    }

    pub fn triplets(&self) -> &[(usize, usize, C64)] {
        &self.triplets
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(v.len());
        for &(r, c, a) in &self.triplets {
            out[r] += a * v[c];
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            space: self.space.clone(),
            triplets: self.triplets.iter().map(|&(r, c, v)| (r, c, v * s)).collect(),
        }
    }

    pub fn sum(terms: &[(C64, &SparseOperator)]) -> Result<Self> {
        let space = terms
            .first()
            .map(|t| t.1.space.clone())
            .ok_or_else(|| invalid("empty operator sum"))?;
        let mut all = Vec::new();
        for (s, op) in terms {
            check_same_space(&space, &op.space)?;
            all.extend(op.triplets.iter().map(|&(r, c, v)| (r, c, v * s)));
        }
        Ok(Self::from_triplets(space, all))
    }

    /// Product `self · other`.
    pub fn compose(&self, other: &SparseOperator) -> Result<Self> {
        check_same_space(&self.space, &other.space)?;
        let dim = self.space.dimension();
        let mut by_row: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        for &(r, c, v) in &other.triplets {
            by_row[r].push((c, v));
        }
        let mut out = Vec::new();
        for &(r, k, a) in &self.triplets {
            for &(c, b) in &by_row[k] {
                out.push((r, c, a * b));
            }
        }
        Ok(Self::from_triplets(self.space.clone(), out))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.space.clone(),
            self.triplets.iter().map(|&(r, c, v)| (c, r, v.conj())).collect(),
        )
    }

    pub fn to_dense(&self) -> LinearOperator {
        let n = self.space.dimension();
        let mut m = DMatrix::zeros(n, n);
        for &(r, c, v) in &self.triplets {
            m[(r, c)] += v;
        }
        LinearOperator::from_matrix_unchecked(self.space.clone(), m)
    }
}

/// Sparse `a_i† a_j`.
pub fn generator_sparse(space: &Arc<IrrepSpace>, i: usize, j: usize) -> Result<SparseOperator> {
    check_mode(i)?;
    check_mode(j)?;
    let mut triplets = Vec::with_capacity(space.dimension());
    for (col, &s) in space.basis().iter().enumerate() {
        if i == j {
            let n = s.occupation(i);
            if n > 0 {
                triplets.push((col, col, C64::new(n as f64, 0.0)));
            }
            continue;
        }
        let (ni, nj) = (s.occupation(i), s.occupation(j));
        if nj == 0 {
            continue;
        }
        let amp = (((ni + 1) * nj) as f64).sqrt();
        let target = s.with_occupation(j, nj - 1).with_occupation(i, ni + 1);
        let row = space.index_of(target).expect("generator preserves total occupation");
        triplets.push((row, col, C64::new(amp, 0.0)));
    }
    Ok(SparseOperator::from_triplets(space.clone(), triplets))
}

/// Dense matrix of `C_ij = a_i† a_j` in the canonical basis.
pub fn generator(space: &Arc<IrrepSpace>, i: usize, j: usize) -> Result<LinearOperator> {
    Ok(generator_sparse(space, i, j)?.to_dense())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cartan {
    /// `h1 = 2C11 − C22 − C33`
    H1,
    /// `h2 = C22 − C33`
    H2,
}

/// Eigenvalue of a Cartan element on a basis ket.
pub fn cartan_weight(which: Cartan, s: BasisState) -> f64 {
    match which {
        Cartan::H1 => 2.0 * s.n1 as f64 - s.n2 as f64 - s.n3 as f64,
        Cartan::H2 => s.n2 as f64 - s.n3 as f64,
    }
}

pub fn cartan_sparse(space: &Arc<IrrepSpace>, which: Cartan) -> SparseOperator {
    let triplets = space
        .basis()
        .iter()
        .enumerate()
        .map(|(k, &s)| (k, k, C64::new(cartan_weight(which, s), 0.0)))
        .collect();
    SparseOperator::from_triplets(space.clone(), triplets)
}

pub fn cartan(space: &Arc<IrrepSpace>, which: Cartan) -> LinearOperator {
    cartan_sparse(space, which).to_dense()
}

/// Dense complex operator on an [`IrrepSpace`].
#[derive(Debug, Clone)]
pub struct LinearOperator {
    space: Arc<IrrepSpace>,
    matrix: DMatrix<C64>,
    hermitian: bool,
}

impl LinearOperator {
    /// Wraps a matrix; the hermitian flag is detected from the entries.
    pub fn new(space: Arc<IrrepSpace>, matrix: DMatrix<C64>) -> Result<Self> {
        let n = space.dimension();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(invalid(format!(
                "matrix is {}x{}, space dimension is {n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("matrix has non-finite entries"));
        }
        Ok(Self::from_matrix_unchecked(space, matrix))
    }

    pub(crate) fn from_matrix_unchecked(space: Arc<IrrepSpace>, matrix: DMatrix<C64>) -> Self {
        let hermitian = hermitian_defect(&matrix) < HERMITIAN_TOL;
        Self {
            space,
            matrix,
            hermitian,
        }
    }

    pub fn identity(space: &Arc<IrrepSpace>) -> Self {
        let n = space.dimension();
        Self::from_matrix_unchecked(space.clone(), DMatrix::identity(n, n))
    }

    pub fn projector(state: &StateVector) -> Self {
        let a = state.amplitudes();
        Self::from_matrix_unchecked(state.space().clone(), a * a.adjoint())
    }

    pub fn space(&self) -> &Arc<IrrepSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn adjoint(&self) -> Self {
        Self::from_matrix_unchecked(self.space.clone(), self.matrix.adjoint())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_matrix_unchecked(self.space.clone(), &self.matrix * s)
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.matrix * v
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        check_same_space(&self.space, &other.space)?;
        Ok(Self::from_matrix_unchecked(
            self.space.clone(),
            &self.matrix * &other.matrix,
        ))
    }

    /// `‖self − other‖_max`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.matrix - &other.matrix)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn hermitian_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

fn combine(a: &LinearOperator, b: &LinearOperator, f: impl Fn(&DMatrix<C64>, &DMatrix<C64>) -> DMatrix<C64>) -> LinearOperator {
    check_same_space(&a.space, &b.space).expect("operator arithmetic across different irreps");
    LinearOperator::from_matrix_unchecked(a.space.clone(), f(&a.matrix, &b.matrix))
}

impl Add for &LinearOperator {
    type Output = LinearOperator;
    fn add(self, rhs: Self) -> LinearOperator {
        combine(self, rhs, |a, b| a + b)
    }
}

impl Sub for &LinearOperator {
    type Output = LinearOperator;
    fn sub(self, rhs: Self) -> LinearOperator {
        combine(self, rhs, |a, b| a - b)
    }
}

impl Mul for &LinearOperator {
    type Output = LinearOperator;
    fn mul(self, rhs: Self) -> LinearOperator {
        combine(self, rhs, |a, b| a * b)
    }
}

/// `AB − BA`.
pub fn commutator(a: &LinearOperator, b: &LinearOperator) -> Result<LinearOperator> {
    check_same_space(&a.space, &b.space)?;
    let m = &a.matrix * &b.matrix - &b.matrix * &a.matrix;
    Ok(LinearOperator::from_matrix_unchecked(a.space.clone(), m))
}

/// Normalized amplitude vector over an [`IrrepSpace`].
#[derive(Debug, Clone)]
pub struct StateVector {
    space: Arc<IrrepSpace>,
    amplitudes: DVector<C64>,
}

impl StateVector {
    /// Accepts amplitudes already normalized within [`NORM_TOL`].
    pub fn new(space: Arc<IrrepSpace>, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != space.dimension() {
            return Err(invalid("amplitude vector length does not match the space"));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(invalid(format!("state norm {norm} is not 1")));
        }
        Ok(Self { space, amplitudes })
    }

    pub fn normalized(space: Arc<IrrepSpace>, amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(invalid("cannot normalize a zero or non-finite vector"));
        }
        Self::new(space, amplitudes / C64::new(norm, 0.0))
    }

    /// `|λ00⟩`.
    pub fn highest_weight(space: &Arc<IrrepSpace>) -> Self {
        Self::basis_state(space, space.highest_weight_index())
    }

    pub fn basis_state(space: &Arc<IrrepSpace>, index: usize) -> Self {
        let mut a = DVector::zeros(space.dimension());
        a[index] = C64::new(1.0, 0.0);
        Self {
            space: space.clone(),
            amplitudes: a,
        }
    }

    pub(crate) fn from_unitary_image(space: Arc<IrrepSpace>, amplitudes: DVector<C64>) -> Self {
        Self { space, amplitudes }
    }

    pub fn space(&self) -> &Arc<IrrepSpace> {
        &self.space
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// Global phase chosen so that the amplitude of largest modulus is real
    /// and positive.
    pub fn phase_aligned(&self) -> Self {
        let (k, _) = self
            .amplitudes
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (k, z)| if z.norm() > best.1 { (k, z.norm()) } else { best });
        let z = self.amplitudes[k];
        let phase = if z.norm() > 0.0 { z.conj() / z.norm() } else { C64::new(1.0, 0.0) };
        Self {
            space: self.space.clone(),
            amplitudes: &self.amplitudes * phase,
        }
    }

    /// Largest amplitude difference after aligning both global phases.
    pub fn ray_distance(&self, other: &StateVector) -> f64 {
        let a = self.phase_aligned();
        let b = other.phase_aligned();
        (a.amplitudes - b.amplitudes)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// `⟨ψ|A|ψ⟩`.
pub fn expectation(state: &StateVector, a: &LinearOperator) -> Result<C64> {
    check_same_space(&state.space, &a.space)?;
    Ok(state.amplitudes.dotc(&a.apply(&state.amplitudes)))
}

/// `⟨A²⟩ − ⟨A⟩²` for hermitian `A`, clamped at zero.
pub fn variance(state: &StateVector, a: &LinearOperator) -> Result<f64> {
    check_same_space(&state.space, &a.space)?;
    if !a.is_hermitian() {
        return Err(invalid("variance requires a hermitian operator"));
    }
    let av = a.apply(&state.amplitudes);
    variance_from_image(&state.amplitudes, &av)
}

/// Variance of a hermitian operator given `ψ` and `Aψ`.
pub(crate) fn variance_from_image(psi: &DVector<C64>, a_psi: &DVector<C64>) -> Result<f64> {
    let mean = psi.dotc(a_psi).re;
    let v = a_psi.norm_squared() - mean * mean;
    clamp_variance(v)
}

pub(crate) fn clamp_variance(v: f64) -> Result<f64> {
    if v < VARIANCE_FLOOR {
        return Err(Error::Numerical(format!("variance {v} below the noise floor")));
    }
    Ok(v.max(0.0))
}
