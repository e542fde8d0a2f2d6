//! Phase-space kernel `w(Ω) = D(Ω) w0 D(Ω)†` on the coset, symbols
//! `W_X(Ω) = tr(w(Ω) X)` and Wigner functions.

mod quadrature;
mod symbol;
mod tensors;

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

pub use quadrature::{build_quadrature, Axis, QuadratureGrid, DEFAULT_ALPHA_NODES, DEFAULT_BETA_NODES, MIN_NODES};
pub use symbol::{
    approx_wigner, gaussian_amplitude, legendre_structure_fit, symbol, traciality_check, traciality_checks,
    wigner_highest_weight, wigner_of_state, GeneratorPolynomial, GeneratorSymbolTable, HighestWeightProfile,
    QuadraticSymbol,
};
pub use tensors::{build_invariant_tensors, TensorBasis};

use crate::error::Result;
use crate::group::{displacement, CosetPoint};
use crate::irrep::{IrrepSpace, LinearOperator};
use crate::C64;

/// `√(2(σ+1)³ / ((λ+1)(λ+2)))`.
pub fn symbol_coefficient(lambda: u32, sigma: usize) -> f64 {
    let s = sigma as f64 + 1.0;
    let l = lambda as f64;
    (2.0 * s * s * s / ((l + 1.0) * (l + 2.0))).sqrt()
}

/// Prefactor `(λ+1)(λ+2)/(8π²)` turning `∫ W_X W_Y dΩ` into `tr(XY)`.
pub fn phase_space_prefactor(lambda: u32) -> f64 {
    let l = lambda as f64;
    (l + 1.0) * (l + 2.0) / (8.0 * PI * PI)
}

#[derive(Debug, Clone)]
pub struct WignerKernel {
    tensors: TensorBasis,
    coefficients: Vec<f64>,
    /// Diagonal of `w0`, indexed by `n1`.
    w0: Vec<f64>,
}

pub fn build_kernel(tensors: TensorBasis) -> WignerKernel {
    let lambda = tensors.lambda();
    let coefficients: Vec<f64> = (0..tensors.len()).map(|s| symbol_coefficient(lambda, s)).collect();
    let w0 = (0..=lambda as usize)
        .map(|m| (0..tensors.len()).map(|s| coefficients[s] * tensors.profile(s)[m]).sum())
        .collect();
    WignerKernel {
        tensors,
        coefficients,
        w0,
    }
}

impl WignerKernel {
    /// Tensors and kernel for one irrep.
    pub fn new(lambda: u32) -> Result<Self> {
        Ok(build_kernel(build_invariant_tensors(lambda)?))
    }

    pub fn space(&self) -> &Arc<IrrepSpace> {
        self.tensors.space()
    }

    pub fn lambda(&self) -> u32 {
        self.tensors.lambda()
    }

    pub fn tensors(&self) -> &TensorBasis {
        &self.tensors
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn w0_by_n1(&self) -> &[f64] {
        &self.w0
    }

    /// Diagonal entry of `w0` for each basis state.
    pub(crate) fn w0_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        self.space().basis().iter().map(|s| self.w0[s.n1 as usize])
    }

    pub fn w0(&self) -> LinearOperator {
        let d: Vec<C64> = self.w0_diagonal().map(|x| C64::new(x, 0.0)).collect();
        let n = d.len();
        LinearOperator::new(self.space().clone(), DMatrix::from_fn(n, n, |r, c| if r == c { d[r] } else { C64::new(0.0, 0.0) }))
            .expect("finite diagonal")
    }

    /// `w(Ω) = D(Ω) w0 D(Ω)†`.
    pub fn kernel_at(&self, omega: CosetPoint) -> LinearOperator {
        let d = displacement(self.space(), omega).to_dense_matrix();
        let mut scaled = d.clone();
        for (c, w) in self.w0_diagonal().enumerate() {
            scaled.column_mut(c).iter_mut().for_each(|z| *z *= w);
        }
        let m = scaled * d.adjoint();
        LinearOperator::from_matrix_unchecked(self.space().clone(), m)
    }

    pub fn prefactor(&self) -> f64 {
        phase_space_prefactor(self.lambda())
    }
}
