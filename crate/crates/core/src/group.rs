//! SU(2)-subgroup rotations, the coset displacement `D(ω)`, coherent states
//! and the stabilizer `U(2)` of the highest weight.
//!
//! `R_ij(η, θ, φ) = exp(−iη Jz) exp(−iθ Jy) exp(−iφ Jz)` with
//! `Jz = (C_ii − C_jj)/2` and `Jy = (C_ij − C_ji)/(2i)`. Every `R_ij`
//! preserves the occupation of the third mode, so it is stored block-diagonally
//! and exponentiated by diagonalizing `Jy` once per block.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{invalid, Result};
use crate::irrep::{cartan_weight, generator_sparse, Cartan, IrrepSpace, LinearOperator, StateVector};
use crate::C64;

/// Point `(α1, β1, α2, β2)` of the coset `SU(3)/U(2) ≅ S⁴`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosetPoint {
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub beta2: f64,
}

pub(crate) fn wrap_angle(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

impl CosetPoint {
    /// Azimuths are wrapped into `[0, 2π)`; polar angles must lie in `[0, π]`.
    pub fn new(alpha1: f64, beta1: f64, alpha2: f64, beta2: f64) -> Result<Self> {
        for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
            if !(0.0..=PI).contains(&b) {
                return Err(invalid(format!("{name} = {b} outside [0, pi]")));
            }
        }
        if !alpha1.is_finite() || !alpha2.is_finite() {
            return Err(invalid("azimuthal angles must be finite"));
        }
        Ok(Self {
            alpha1: wrap_angle(alpha1, TAU),
            beta1,
            alpha2: wrap_angle(alpha2, TAU),
            beta2,
        })
    }

    pub fn origin() -> Self {
        Self {
            alpha1: 0.0,
            beta1: 0.0,
            alpha2: 0.0,
            beta2: 0.0,
        }
    }

    /// The initial point `(0, 0, 0, B2)`.
    pub fn polar(beta2: f64) -> Self {
        Self {
            beta2,
            ..Self::origin()
        }
    }

    /// Single-qutrit amplitudes `(c1, c2, c3)` of the coherent state.
    pub fn qutrit_amplitudes(&self) -> [C64; 3] {
        let (s1, c1) = (0.5 * self.beta1).sin_cos();
        let (s2, c2) = (0.5 * self.beta2).sin_cos();
        [
            C64::new(c2, 0.0),
            C64::from_polar(c1 * s2, self.alpha2),
            C64::from_polar(s1 * s2, self.alpha1 + self.alpha2),
        ]
    }

    /// Coset coordinates of the ray through a single-qutrit vector.
    /// Coordinates that are undefined at the poles are set to zero.
    pub fn from_qutrit(v: [C64; 3]) -> Self {
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let m: Vec<f64> = v.iter().map(|z| z.norm() / norm).collect();
        let beta2 = 2.0 * m[0].min(1.0).acos();
        const TINY: f64 = 1e-14;
        if m[1] < TINY && m[2] < TINY {
            return Self::origin();
        }
        let beta1 = 2.0 * m[2].atan2(m[1]);
        let ref_phase = if m[0] > TINY { v[0].arg() } else { 0.0 };
        let (alpha1, alpha2) = if m[1] > TINY {
            let a2 = v[1].arg() - ref_phase;
            let a1 = if m[2] > TINY { v[2].arg() - v[1].arg() } else { 0.0 };
            (a1, a2)
        } else {
            (0.0, v[2].arg() - ref_phase)
        };
        Self {
            alpha1: wrap_angle(alpha1, TAU),
            beta1,
            alpha2: wrap_angle(alpha2, TAU),
            beta2,
        }
    }
}

/// Element `T = R23(α3, β3, −α3) exp(−iγ1 h1) exp(−iγ2 h2)` of the stabilizer
/// of `|λ00⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizerElement {
    pub alpha3: f64,
    pub beta3: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl StabilizerElement {
    pub fn new(alpha3: f64, beta3: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&beta3) {
            return Err(invalid(format!("beta3 = {beta3} outside [0, pi]")));
        }
        Ok(Self {
            alpha3,
            beta3,
            gamma1,
            gamma2,
        })
    }

    /// Phase angle of the conjugated observable family. With
    /// `h2 = C22 − C33`, `T C13 T⁻¹` picks up `exp(−i(3γ1 + γ2))`, so
    /// `χ = 6γ1 + 2γ2`.
    pub fn chi(&self) -> f64 {
        6.0 * self.gamma1 + 2.0 * self.gamma2
    }

    pub fn apply(&self, space: &Arc<IrrepSpace>, v: &DVector<C64>) -> DVector<C64> {
        let mut out = v.clone();
        for (k, &s) in space.basis().iter().enumerate() {
            let phase = -(self.gamma1 * cartan_weight(Cartan::H1, s) + self.gamma2 * cartan_weight(Cartan::H2, s));
            out[k] *= C64::from_polar(1.0, phase);
        }
        su2_rotation_unchecked(space, 2, 3, self.alpha3, self.beta3, -self.alpha3).apply(&out)
    }

    pub fn operator(&self, space: &Arc<IrrepSpace>) -> LinearOperator {
        let r = su2_rotation_unchecked(space, 2, 3, self.alpha3, self.beta3, -self.alpha3);
        let mut m = r.to_dense_matrix();
        for (k, &s) in space.basis().iter().enumerate() {
            let phase = -(self.gamma1 * cartan_weight(Cartan::H1, s) + self.gamma2 * cartan_weight(Cartan::H2, s));
            let z = C64::from_polar(1.0, phase);
            m.column_mut(k).iter_mut().for_each(|x| *x *= z);
        }
        LinearOperator::from_matrix_unchecked(space.clone(), m)
    }
}

#[derive(Debug)]
struct Block {
    indices: Vec<usize>,
    /// Jz eigenvalue of each member.
    jz: Vec<f64>,
    /// Spectrum and eigenvectors of Jy restricted to the block.
    jy_values: Vec<f64>,
    jy_vectors: DMatrix<C64>,
}

/// Cached block decomposition of one `su(2)` subalgebra `{C_ij, C_ji}`.
#[derive(Debug)]
pub struct Su2Subgroup {
    i: usize,
    j: usize,
    blocks: Vec<Block>,
}

impl Su2Subgroup {
    pub(crate) fn build(space: &Arc<IrrepSpace>, i: usize, j: usize) -> Self {
        let k = 6 - i - j;
        let lambda = space.lambda();
        let raise = generator_sparse(space, i, j).expect("valid modes");
        let lower = generator_sparse(space, j, i).expect("valid modes");
        let jy_full = crate::irrep::SparseOperator::sum(&[
            (C64::new(0.0, -0.5), &raise),
            (C64::new(0.0, 0.5), &lower),
        ])
        .expect("same space");

        let mut membership = vec![(0usize, 0usize); space.dimension()];
        let mut blocks: Vec<Block> = (0..=lambda)
            .map(|_| Block {
                indices: Vec::new(),
                jz: Vec::new(),
                jy_values: Vec::new(),
                jy_vectors: DMatrix::zeros(0, 0),
            })
            .collect();
        for (idx, &s) in space.basis().iter().enumerate() {
            let b = s.occupation(k) as usize;
            membership[idx] = (b, blocks[b].indices.len());
            blocks[b].indices.push(idx);
            blocks[b].jz.push(0.5 * (s.occupation(i) as f64 - s.occupation(j) as f64));
        }
        let mut local: Vec<DMatrix<C64>> = blocks
            .iter()
            .map(|b| DMatrix::zeros(b.indices.len(), b.indices.len()))
            .collect();
        for &(r, c, v) in jy_full.triplets() {
            let (br, lr) = membership[r];
            let (bc, lc) = membership[c];
            debug_assert_eq!(br, bc);
            local[br][(lr, lc)] += v;
        }
        for (block, jy) in blocks.iter_mut().zip(local) {
            let eig = jy.symmetric_eigen();
            block.jy_values = eig.eigenvalues.iter().copied().collect();
            block.jy_vectors = eig.eigenvectors;
        }
        Self { i, j, blocks }
    }
}

/// `R_ij(η, θ, φ)` in block form.
#[derive(Debug, Clone)]
pub struct Su2Rotation {
    space: Arc<IrrepSpace>,
    group: Arc<Su2Subgroup>,
    eta: f64,
    theta: f64,
    phi: f64,
}

/// `R_ij(η, θ, φ) = exp(−iη Jz) exp(−iθ Jy) exp(−iφ Jz)` for `i ≠ j`.
pub fn su2_rotation(
    space: &Arc<IrrepSpace>,
    i: usize,
    j: usize,
    eta: f64,
    theta: f64,
    phi: f64,
) -> Result<Su2Rotation> {
    if !(1..=3).contains(&i) || !(1..=3).contains(&j) {
        return Err(invalid(format!("mode indices ({i}, {j}) outside 1..=3")));
    }
    if i == j {
        return Err(invalid("su2_rotation needs two distinct modes"));
    }
    Ok(su2_rotation_unchecked(space, i, j, eta, theta, phi))
}

fn su2_rotation_unchecked(space: &Arc<IrrepSpace>, i: usize, j: usize, eta: f64, theta: f64, phi: f64) -> Su2Rotation {
    let group = space.subgroup(i, j);
    // Jz and Jy of the reversed pair are negated.
    let s = if group.i == i && group.j == j { 1.0 } else { -1.0 };
    Su2Rotation {
        space: space.clone(),
        group,
        eta: s * eta,
        theta: s * theta,
        phi: s * phi,
    }
}

impl Su2Rotation {
    pub fn space(&self) -> &Arc<IrrepSpace> {
        &self.space
    }

    fn block_matrix(&self, b: &Block, adjoint: bool) -> DMatrix<C64> {
        let sign = if adjoint { 1.0 } else { -1.0 };
        let n = b.indices.len();
        let u = &b.jy_vectors;
        let mut scaled = u.clone();
        for (c, &mu) in b.jy_values.iter().enumerate() {
            let z = C64::from_polar(1.0, sign * self.theta * mu);
            scaled.column_mut(c).iter_mut().for_each(|x| *x *= z);
        }
        let mut m = scaled * u.adjoint();
        // outer Jz phases
        let (left, right) = if adjoint { (self.phi, self.eta) } else { (self.eta, self.phi) };
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] *= C64::from_polar(1.0, sign * (left * b.jz[r] + right * b.jz[c]));
            }
        }
        m
    }

    fn apply_impl(&self, v: &DVector<C64>, adjoint: bool) -> DVector<C64> {
        let sign = if adjoint { 1.0 } else { -1.0 };
        let (first, last) = if adjoint { (self.eta, self.phi) } else { (self.phi, self.eta) };
        let mut out = DVector::zeros(v.len());
        for b in &self.group.blocks {
            let n = b.indices.len();
            let x = DVector::from_iterator(
                n,
                b.indices
                    .iter()
                    .zip(&b.jz)
                    .map(|(&k, &m)| v[k] * C64::from_polar(1.0, sign * first * m)),
            );
            let mut y = b.jy_vectors.ad_mul(&x);
            for (yk, &mu) in y.iter_mut().zip(&b.jy_values) {
                *yk *= C64::from_polar(1.0, sign * self.theta * mu);
            }
            let z = &b.jy_vectors * y;
            for ((&k, &m), zk) in b.indices.iter().zip(&b.jz).zip(z.iter()) {
                out[k] = zk * C64::from_polar(1.0, sign * last * m);
            }
        }
        out
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        self.apply_impl(v, false)
    }

    pub fn apply_adjoint(&self, v: &DVector<C64>) -> DVector<C64> {
        self.apply_impl(v, true)
    }

    /// `R · m` for a dense `m`.
    pub fn left_multiply(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for b in &self.group.blocks {
            let r = self.block_matrix(b, false);
            let rows = m.select_rows(&b.indices);
            let prod = r * rows;
            for (local, &k) in b.indices.iter().enumerate() {
                out.row_mut(k).copy_from(&prod.row(local));
            }
        }
        out
    }

    /// `m · R` for a dense `m`.
    pub fn right_multiply(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for b in &self.group.blocks {
            let r = self.block_matrix(b, false);
            let cols = m.select_columns(&b.indices);
            let prod = cols * r;
            for (local, &k) in b.indices.iter().enumerate() {
                out.column_mut(k).copy_from(&prod.column(local));
            }
        }
        out
    }

    pub(crate) fn to_dense_matrix(&self) -> DMatrix<C64> {
        let n = self.space.dimension();
        let mut m = DMatrix::zeros(n, n);
        for b in &self.group.blocks {
            let r = self.block_matrix(b, false);
            for (lr, &gr) in b.indices.iter().enumerate() {
                for (lc, &gc) in b.indices.iter().enumerate() {
                    m[(gr, gc)] = r[(lr, lc)];
                }
            }
        }
        m
    }

    pub fn to_dense(&self) -> LinearOperator {
        LinearOperator::from_matrix_unchecked(self.space.clone(), self.to_dense_matrix())
    }
}

/// `D(ω) = R23(α1, β1, −α1) R12(α2, β2, −α2)`.
#[derive(Debug, Clone)]
pub struct Displacement {
    omega: CosetPoint,
    r23: Su2Rotation,
    r12: Su2Rotation,
}

pub fn displacement(space: &Arc<IrrepSpace>, omega: CosetPoint) -> Displacement {
    Displacement {
        omega,
        r23: su2_rotation_unchecked(space, 2, 3, omega.alpha1, omega.beta1, -omega.alpha1),
        r12: su2_rotation_unchecked(space, 1, 2, omega.alpha2, omega.beta2, -omega.alpha2),
    }
}

impl Displacement {
    pub fn omega(&self) -> CosetPoint {
        self.omega
    }

    pub fn space(&self) -> &Arc<IrrepSpace> {
        self.r12.space()
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        self.r23.apply(&self.r12.apply(v))
    }

    pub fn apply_adjoint(&self, v: &DVector<C64>) -> DVector<C64> {
        self.r12.apply_adjoint(&self.r23.apply_adjoint(v))
    }

    pub fn apply_to_state(&self, s: &StateVector) -> StateVector {
        StateVector::from_unitary_image(s.space().clone(), self.apply(s.amplitudes()))
    }

    pub fn to_dense_matrix(&self) -> DMatrix<C64> {
        self.r23.left_multiply(&self.r12.to_dense_matrix())
    }

    pub fn to_dense(&self) -> LinearOperator {
        LinearOperator::from_matrix_unchecked(self.space().clone(), self.to_dense_matrix())
    }

    /// `m · D` for a dense `m`.
    pub fn right_multiply(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        self.r12.right_multiply(&self.r23.right_multiply(m))
    }

    /// `D X D†`.
    pub fn conjugate(&self, x: &LinearOperator) -> LinearOperator {
        let d = self.to_dense_matrix();
        let m = &d * x.matrix() * d.adjoint();
        LinearOperator::from_matrix_unchecked(self.space().clone(), m)
    }
}

/// `R_ij(η, θ, φ)` in the defining (λ = 1) representation.
fn qutrit_rotation(i: usize, j: usize, eta: f64, theta: f64, phi: f64) -> Matrix3<C64> {
    let (s, c) = (0.5 * theta).sin_cos();
    let mut r = Matrix3::identity();
    let (a, b) = (i - 1, j - 1);
    r[(a, a)] = C64::from_polar(c, -0.5 * (eta + phi));
    r[(a, b)] = C64::from_polar(-s, -0.5 * (eta - phi));
    r[(b, a)] = C64::from_polar(s, 0.5 * (eta - phi));
    r[(b, b)] = C64::from_polar(c, 0.5 * (eta + phi));
    r
}

/// `D(ω)` in the defining (λ = 1) representation; its first column is the
/// single-qutrit state `(c1, c2, c3)`.
pub fn qutrit_displacement(omega: CosetPoint) -> Matrix3<C64> {
    qutrit_rotation(2, 3, omega.alpha1, omega.beta1, -omega.alpha1) * qutrit_rotation(1, 2, omega.alpha2, omega.beta2, -omega.alpha2)
}

/// Coset label of `g · D(ω)` for `g` given in the defining representation.
pub fn act_on_coset(g: &Matrix3<C64>, omega: CosetPoint) -> CosetPoint {
    let c = omega.qutrit_amplitudes();
    let v = g * Vector3::new(c[0], c[1], c[2]);
    CosetPoint::from_qutrit([v[0], v[1], v[2]])
}

/// `|ω⟩ = D(ω)|λ00⟩`.
pub fn coherent_state(space: &Arc<IrrepSpace>, omega: CosetPoint) -> StateVector {
    displacement(space, omega).apply_to_state(&StateVector::highest_weight(space))
}

pub(crate) fn ln_factorials(n: u32) -> Vec<f64> {
    let mut t = vec![0.0; n as usize + 1];
    for k in 1..=n as usize {
        t[k] = t[k - 1] + (k as f64).ln();
    }
    t
}

/// Coherent state as the symmetric product of `λ` identical qutrits:
/// amplitude `√(λ!/(n1! n2! n3!)) c1^n1 c2^n2 c3^n3`.
pub fn coherent_state_closed_form(space: &Arc<IrrepSpace>, omega: CosetPoint) -> StateVector {
    let c = omega.qutrit_amplitudes();
    let lf = ln_factorials(space.lambda());
    let amps = space.basis().iter().map(|s| {
        let ln_multinomial = lf[space.lambda() as usize] - lf[s.n1 as usize] - lf[s.n2 as usize] - lf[s.n3 as usize];
        let p = c[0].powi(s.n1 as i32) * c[1].powi(s.n2 as i32) * c[2].powi(s.n3 as i32);
        p * (0.5 * ln_multinomial).exp()
    });
    let v = DVector::from_iterator(space.dimension(), amps);
    StateVector::from_unitary_image(space.clone(), v)
}

/// `(⟨C23⟩, ⟨C32⟩, ⟨C12⟩, ⟨C21⟩, ⟨C13⟩, ⟨C31⟩, ⟨h1⟩, ⟨h2⟩)`.
pub fn mean_vector(state: &StateVector) -> [C64; 8] {
    let space = state.space();
    let psi = state.amplitudes();
    let ev = |i: usize, j: usize| psi.dotc(&generator_sparse(space, i, j).expect("valid modes").apply(psi));
    let h = |which| psi.dotc(&crate::irrep::cartan_sparse(space, which).apply(psi));
    [
        ev(2, 3),
        ev(3, 2),
        ev(1, 2),
        ev(2, 1),
        ev(1, 3),
        ev(3, 1),
        h(Cartan::H1),
        h(Cartan::H2),
    ]
}
