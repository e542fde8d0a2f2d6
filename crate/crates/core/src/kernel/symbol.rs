//! Symbols of operators and states.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::quadrature::QuadratureGrid;
use super::WignerKernel;
use crate::error::{invalid, Error, Result};
use crate::group::{displacement, qutrit_displacement, CosetPoint};
use crate::irrep::{generator_sparse, IrrepSpace, LinearOperator, SparseOperator, StateVector};
use crate::special::legendre_all;
use crate::C64;

fn check_space(kernel: &WignerKernel, space: &IrrepSpace) -> Result<()> {
    if kernel.space().as_ref() != space {
        return Err(invalid(format!(
            "operator lives in lambda = {}, kernel in lambda = {}",
            space.lambda(),
            kernel.lambda()
        )));
    }
    Ok(())
}

/// `W_X(Ω) = tr(w(Ω) X) = Σ_n w0(n) (D† X D)_nn`.
pub fn symbol(kernel: &WignerKernel, x: &LinearOperator, omega: CosetPoint) -> Result<C64> {
    check_space(kernel, x.space())?;
    let d = displacement(kernel.space(), omega);
    let xd = d.right_multiply(x.matrix());
    let dd = d.to_dense_matrix();
    Ok(kernel
        .w0_diagonal()
        .enumerate()
        .map(|(n, w)| dd.column(n).dotc(&xd.column(n)) * w)
        .sum())
}

/// `W_ψ(Ω) = Σ_n w0(n) |(D(Ω)† ψ)_n|²`.
pub fn wigner_of_state(kernel: &WignerKernel, state: &StateVector, omega: CosetPoint) -> Result<f64> {
    check_space(kernel, state.space())?;
    let phi = displacement(kernel.space(), omega).apply_adjoint(state.amplitudes());
    Ok(kernel.w0_diagonal().zip(phi.iter()).map(|(w, z)| w * z.norm_sqr()).sum())
}

/// Wigner function of `|λ00⟩` as a function of `x = cos β̄2`:
/// `Σ_k C(λ,k) p^k q^(λ−k) w0(k)` with `p = (1+x)/2`, `q = (1−x)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HighestWeightProfile {
    /// `C(λ,k) w0(k)`.
    weighted: Vec<f64>,
}

impl HighestWeightProfile {
    pub fn new(kernel: &WignerKernel) -> Self {
        let lambda = kernel.lambda() as usize;
        let mut binom = 1.0f64;
        let mut weighted = Vec::with_capacity(lambda + 1);
        for (k, &w) in kernel.w0_by_n1().iter().enumerate() {
            weighted.push(binom * w);
            binom *= (lambda - k) as f64 / (k + 1) as f64;
        }
        Self { weighted }
    }

    pub fn lambda(&self) -> usize {
        self.weighted.len() - 1
    }

    /// Value at `x = cos β̄2`, clamped into `[−1, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(-1.0, 1.0);
        let p = 0.5 * (1.0 + x);
        let q = 0.5 * (1.0 - x);
        let l = self.lambda() as i32;
        if p <= q {
            let r = p / q;
            let mut acc = 0.0;
            for &b in self.weighted.iter().rev() {
                acc = acc * r + b;
            }
            acc * q.powi(l)
        } else {
            let r = q / p;
            let mut acc = 0.0;
            for &b in &self.weighted {
                acc = acc * r + b;
            }
            acc * p.powi(l)
        }
    }

    pub fn peak(&self) -> f64 {
        self.eval(1.0)
    }
}

/// Highest-weight Wigner function at `β̄2`, evaluated through the kernel at
/// `Ω = (0, 0, 0, β̄2)`.
pub fn wigner_highest_weight(kernel: &WignerKernel, beta2_bar: f64) -> Result<f64> {
    let omega = CosetPoint::new(0.0, 0.0, 0.0, beta2_bar)?;
    wigner_of_state(kernel, &StateVector::highest_weight(kernel.space()), omega)
}

/// `A = 4λ²/((λ+1)(λ+2))`.
pub fn gaussian_amplitude(lambda: u32) -> f64 {
    let l = lambda as f64;
    4.0 * l * l / ((l + 1.0) * (l + 2.0))
}

/// `A e^{λ(cos β̄2 − 1)}`.
pub fn approx_wigner(lambda: u32, beta2_bar: f64) -> f64 {
    gaussian_amplitude(lambda) * (lambda as f64 * (beta2_bar.cos() - 1.0)).exp()
}

/// Coefficients `C̃_σ` of the highest-weight profile in the basis
/// `g_σ(x) = (P_{σ+1}(x) − P_σ(x))/(x − 1)`, σ = 0..λ, with `g_σ(1) = σ + 1`,
/// and the maximum fit residual on the sample points.
pub fn legendre_structure_fit(kernel: &WignerKernel) -> Result<(Vec<f64>, f64)> {
    let profile = HighestWeightProfile::new(kernel);
    let n = kernel.lambda() as usize + 1;
    let samples = 4 * n + 8;
    let xs: Vec<f64> = (0..samples)
        .map(|k| (std::f64::consts::PI * (k as f64 + 0.5) / samples as f64).cos())
        .collect();
    let basis_at = |x: f64| -> Vec<f64> {
        let p = legendre_all(n, x);
        (0..n)
            .map(|s| if (x - 1.0).abs() < 1e-12 { s as f64 + 1.0 } else { (p[s + 1] - p[s]) / (x - 1.0) })
            .collect()
    };
    let a = DMatrix::from_fn(samples, n, |r, c| basis_at(xs[r])[c]);
    let b = DVector::from_iterator(samples, xs.iter().map(|&x| profile.eval(x)));
    let svd = a.clone().svd(true, true);
    let coeffs = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::Numerical(format!("legendre fit: {e}")))?;
    let residual = (a * &coeffs - b).amax();
    Ok((coeffs.iter().copied().collect(), residual))
}

/// Polynomial of degree at most two in the generators:
/// `c0 + Σ L_ab C_ab + Σ q C_ab C_cd`, mode indices 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorPolynomial {
    pub constant: C64,
    pub linear: Matrix3<C64>,
    pub quadratic: Vec<([usize; 4], C64)>,
}

impl GeneratorPolynomial {
    pub fn zero() -> Self {
        Self {
            constant: C64::new(0.0, 0.0),
            linear: Matrix3::zeros(),
            quadratic: Vec::new(),
        }
    }

    pub fn constant(c: C64) -> Self {
        Self {
            constant: c,
            ..Self::zero()
        }
    }

    /// `C_ij` with 1-based mode labels.
    pub fn generator(i: usize, j: usize) -> Result<Self> {
        if !(1..=3).contains(&i) || !(1..=3).contains(&j) {
            return Err(invalid(format!("mode indices ({i}, {j}) outside 1..=3")));
        }
        let mut p = Self::zero();
        p.linear[(i - 1, j - 1)] = C64::new(1.0, 0.0);
        Ok(p)
    }

    /// Operator with the given linear coefficients.
    pub fn linear(m: Matrix3<C64>) -> Self {
        Self {
            linear: m,
            ..Self::zero()
        }
    }

    pub fn is_linear(&self) -> bool {
        self.quadratic.is_empty()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            constant: self.constant * s,
            linear: self.linear * s,
            quadratic: self.quadratic.iter().map(|&(k, v)| (k, v * s)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut quadratic = self.quadratic.clone();
        quadratic.extend_from_slice(&other.quadratic);
        Self {
            constant: self.constant + other.constant,
            linear: self.linear + other.linear,
            quadratic,
        }
    }

    /// Product of two polynomials of degree at most one.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if !self.is_linear() || !other.is_linear() {
            return Err(invalid("product is only defined for polynomials of degree at most one"));
        }
        let mut quadratic = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                let x = self.linear[(a, b)];
                if x == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..3 {
                    for d in 0..3 {
                        let y = other.linear[(c, d)];
                        if y != C64::new(0.0, 0.0) {
                            quadratic.push(([a, b, c, d], x * y));
                        }
                    }
                }
            }
        }
        Ok(Self {
            constant: self.constant * other.constant,
            linear: self.linear * other.constant + other.linear * self.constant,
            quadratic,
        })
    }

    /// `(AB + BA)/2`.
    pub fn symmetrized_product(&self, other: &Self) -> Result<Self> {
        Ok(self.product(other)?.add(&other.product(self)?).scale(C64::new(0.5, 0.0)))
    }

    pub fn to_sparse(&self, space: &Arc<IrrepSpace>) -> SparseOperator {
        let g: Vec<Vec<SparseOperator>> = (1..=3)
            .map(|i| (1..=3).map(|j| generator_sparse(space, i, j).expect("valid modes")).collect())
            .collect();
        let identity = SparseOperator::from_triplets(
            space.clone(),
            (0..space.dimension()).map(|k| (k, k, C64::new(1.0, 0.0))).collect(),
        );
        let mut products = Vec::new();
        for &([a, b, c, d], v) in &self.quadratic {
            products.push((v, g[a][b].compose(&g[c][d]).expect("same space")));
        }
        let mut terms: Vec<(C64, &SparseOperator)> = vec![(self.constant, &identity)];
        for a in 0..3 {
            for b in 0..3 {
                terms.push((self.linear[(a, b)], &g[a][b]));
            }
        }
        terms.extend(products.iter().map(|(v, op)| (*v, op)));
        SparseOperator::sum(&terms).expect("same space")
    }

    pub fn to_operator(&self, space: &Arc<IrrepSpace>) -> LinearOperator {
        self.to_sparse(space).to_dense()
    }
}

/// Kernel moments `tr(w0 C_ab)` and `tr(w0 C_ab C_cd)`. With the defining
/// representation `U` of `D(Ω)`, `D† C_ij D = Σ conj(U_ia) U_jb C_ab`, so the
/// symbol of any generator polynomial follows from these tables.
#[derive(Debug, Clone)]
pub struct GeneratorSymbolTable {
    first: [[C64; 3]; 3],
    second: [[[[C64; 3]; 3]; 3]; 3],
}

impl GeneratorSymbolTable {
    pub fn new(kernel: &WignerKernel) -> Self {
        let space = kernel.space();
        let w0: Vec<f64> = kernel.w0_diagonal().collect();
        let g: Vec<Vec<SparseOperator>> = (1..=3)
            .map(|i| (1..=3).map(|j| generator_sparse(space, i, j).expect("valid modes")).collect())
            .collect();
        let weighted_trace = |op: &SparseOperator| -> C64 {
            op.triplets()
                .iter()
                .filter(|t| t.0 == t.1)
                .map(|&(r, _, v)| v * w0[r])
                .sum()
        };
        let zero = C64::new(0.0, 0.0);
        let mut first = [[zero; 3]; 3];
        let mut second = [[[[zero; 3]; 3]; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                first[a][b] = weighted_trace(&g[a][b]);
                for c in 0..3 {
                    for d in 0..3 {
                        second[a][b][c][d] = weighted_trace(&g[a][b].compose(&g[c][d]).expect("same space"));
                    }
                }
            }
        }
        Self { first, second }
    }

    /// Symbol of `p` at the point whose displacement has defining
    /// representation `u`.
    pub fn symbol_at(&self, p: &GeneratorPolynomial, u: &Matrix3<C64>) -> C64 {
        // g[i][j][a][b] = conj(U_ia) U_jb
        let mut g = [[[[C64::new(0.0, 0.0); 3]; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for a in 0..3 {
                    for b in 0..3 {
                        g[i][j][a][b] = u[(i, a)].conj() * u[(j, b)];
                    }
                }
            }
        }
        let mut acc = p.constant;
        for i in 0..3 {
            for j in 0..3 {
                let l = p.linear[(i, j)];
                if l == C64::new(0.0, 0.0) {
                    continue;
                }
                let mut s = C64::new(0.0, 0.0);
                for a in 0..3 {
                    for b in 0..3 {
                        s += g[i][j][a][b] * self.first[a][b];
                    }
                }
                acc += l * s;
            }
        }
        for &([i, j, k, l], v) in &p.quadratic {
            let mut s = C64::new(0.0, 0.0);
            for a in 0..3 {
                for b in 0..3 {
                    let gij = g[i][j][a][b];
                    for c in 0..3 {
                        for d in 0..3 {
                            let t = self.second[a][b][c][d];
                            if t != C64::new(0.0, 0.0) {
                                s += gij * g[k][l][c][d] * t;
                            }
                        }
                    }
                }
            }
            acc += v * s;
        }
        acc
    }

    pub fn symbol(&self, p: &GeneratorPolynomial, omega: CosetPoint) -> C64 {
        self.symbol_at(p, &qutrit_displacement(omega))
    }
}

/// Monomials `c_i c_k`, `i ≤ k`, of the single-qutrit amplitudes.
fn monomials(c: &[C64; 3]) -> [C64; 6] {
    [c[0] * c[0], c[0] * c[1], c[0] * c[2], c[1] * c[1], c[1] * c[2], c[2] * c[2]]
}

/// Real symbol of the form `m(c)† A m(c)`, `A` hermitian 6×6, with `m` the
/// quadratic monomials of the qutrit amplitudes `c(Ω)`. Every symbol of a
/// hermitian generator polynomial of degree at most two has this form.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSymbol {
    form: [[C64; 6]; 6],
}

const QUADRATIC_FIT_SAMPLES: usize = 96;

fn quadratic_features(c: &[C64; 3]) -> [f64; 36] {
    let m = monomials(c);
    let mut f = [0.0; 36];
    let mut k = 0;
    for i in 0..6 {
        f[k] = m[i].norm_sqr();
        k += 1;
    }
    for i in 0..6 {
        for j in (i + 1)..6 {
            let z = m[i].conj() * m[j];
            f[k] = 2.0 * z.re;
            f[k + 1] = -2.0 * z.im;
            k += 2;
        }
    }
    f
}

impl QuadraticSymbol {
    /// Least-squares fit of `f` on seeded random coset points. Fails when
    /// the residual shows `f` is not of the quadratic form.
    pub fn fit<F>(f: F, seed: u64) -> Result<Self>
    where
        F: Fn(CosetPoint) -> f64,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<CosetPoint> = (0..QUADRATIC_FIT_SAMPLES)
            .map(|_| CosetPoint {
                alpha1: rng.gen_range(0.0..std::f64::consts::TAU),
                beta1: rng.gen_range(-1.0f64..1.0).acos(),
                alpha2: rng.gen_range(0.0..std::f64::consts::TAU),
                beta2: rng.gen_range(-1.0f64..1.0).acos(),
            })
            .collect();
        let a = DMatrix::from_fn(QUADRATIC_FIT_SAMPLES, 36, |r, c| quadratic_features(&pts[r].qutrit_amplitudes())[c]);
        let b = DVector::from_iterator(QUADRATIC_FIT_SAMPLES, pts.iter().map(|&p| f(p)));
        let x = a
            .clone()
            .svd(true, true)
            .solve(&b, 1e-13)
            .map_err(|e| Error::Numerical(format!("quadratic symbol fit: {e}")))?;
        let residual = (&a * &x - &b).amax();
        if residual > 1e-9 * b.amax().max(1.0) {
            return Err(Error::Numerical(format!("symbol is not quadratic: fit residual {residual:e}")));
        }
        let zero = C64::new(0.0, 0.0);
        let mut form = [[zero; 6]; 6];
        let mut k = 0;
        for (i, row) in form.iter_mut().enumerate() {
            row[i] = C64::new(x[k], 0.0);
            k += 1;
        }
        for i in 0..6 {
            for j in (i + 1)..6 {
                let z = C64::new(x[k], x[k + 1]);
                form[i][j] = z;
                form[j][i] = z.conj();
                k += 2;
            }
        }
        Ok(Self { form })
    }

    /// Fit of the symbol of `D(ω0) p D(ω0)†`.
    pub fn of_displaced(table: &GeneratorSymbolTable, p: &GeneratorPolynomial, frame: CosetPoint, seed: u64) -> Result<Self> {
        let u0_adj = qutrit_displacement(frame).adjoint();
        Self::fit(|w| table.symbol_at(p, &(u0_adj * qutrit_displacement(w))).re, seed)
    }

    pub fn eval_amplitudes(&self, c: &[C64; 3]) -> f64 {
        let m = monomials(c);
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..6 {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..6 {
                row += self.form[i][j] * m[j];
            }
            acc += m[i].conj() * row;
        }
        acc.re
    }

    pub fn eval(&self, omega: CosetPoint) -> f64 {
        self.eval_amplitudes(&omega.qutrit_amplitudes())
    }
}

/// Relative traciality errors
/// `|tr(XY) − P ∫ W_X W_Y dΩ| / (‖X‖_F ‖Y‖_F)` for several pairs, with
/// `P = (λ+1)(λ+2)/(8π²)`. The kernel matrix is built once per node.
pub fn traciality_checks(kernel: &WignerKernel, grid: &QuadratureGrid, pairs: &[(LinearOperator, LinearOperator)]) -> Result<Vec<f64>> {
    for (x, y) in pairs {
        check_space(kernel, x.space())?;
        check_space(kernel, y.space())?;
        if !x.is_hermitian() || !y.is_hermitian() {
            return Err(invalid("traciality check requires hermitian operators"));
        }
    }
    let transposed: Vec<(DMatrix<C64>, DMatrix<C64>)> = pairs.iter().map(|(x, y)| (x.matrix().transpose(), y.matrix().transpose())).collect();
    let nodes: Vec<(CosetPoint, f64)> = grid.nodes().collect();
    let chunk = 256;
    let partial: Vec<Vec<f64>> = nodes
        .par_chunks(chunk)
        .map(|block| {
            let mut acc = vec![0.0; pairs.len()];
            for &(p, w) in block {
                let k = kernel.kernel_at(p);
                let km = k.matrix();
                let sym = |xt: &DMatrix<C64>| -> f64 { km.iter().zip(xt.iter()).map(|(a, b)| a * b).sum::<C64>().re };
                for (slot, (x, y)) in acc.iter_mut().zip(&transposed) {
                    *slot += w * sym(x) * sym(y);
                }
            }
            acc
        })
        .collect();
    let pref = kernel.prefactor();
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(i, (x, y))| {
            let integral: f64 = partial.iter().map(|v| v[i]).sum();
            let exact = x.matrix().iter().zip(y.matrix().transpose().iter()).map(|(a, b)| a * b).sum::<C64>().re;
            (exact - pref * integral).abs() / (x.norm() * y.norm())
        })
        .collect())
}

pub fn traciality_check(kernel: &WignerKernel, grid: &QuadratureGrid, x: &LinearOperator, y: &LinearOperator) -> Result<f64> {
    Ok(traciality_checks(kernel, grid, &[(x.clone(), y.clone())])?[0])
}
