//! Invariant diagonal tensors `T_σ`, σ = 0..λ.
//!
//! The operators that commute with `h1`, `h2`, `C23` and `C32` are the
//! diagonal ones whose entries depend on `n1` only. The restricted adjoint
//! Casimir `X ↦ Σ_ij [C_ij, [C_ji, X]]` maps this space to itself and its
//! eigenvectors, orthonormal in `tr(XY)`, are the tensors.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::irrep::{generator_sparse, IrrepSpace, LinearOperator, SparseOperator};
use crate::C64;

const OFF_DIAGONAL_TOL: f64 = 1e-9;
const DEGENERACY_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct TensorBasis {
    space: Arc<IrrepSpace>,
    casimir: Vec<f64>,
    /// `profiles[σ][n1]`.
    profiles: Vec<Vec<f64>>,
}

/// Number of basis states with a given `n1`.
pub(crate) fn multiplicity(lambda: u32, n1: u32) -> usize {
    (lambda - n1 + 1) as usize
}

fn diagonal_operator(space: &Arc<IrrepSpace>, by_n1: &[f64]) -> SparseOperator {
    let triplets = space
        .basis()
        .iter()
        .enumerate()
        .map(|(k, s)| (k, k, C64::new(by_n1[s.n1 as usize], 0.0)))
        .collect();
    SparseOperator::from_triplets(space.clone(), triplets)
}

fn commutator(a: &SparseOperator, b: &SparseOperator) -> SparseOperator {
    let ab = a.compose(b).expect("same space");
    let ba = b.compose(a).expect("same space");
    SparseOperator::sum(&[(C64::new(1.0, 0.0), &ab), (C64::new(-1.0, 0.0), &ba)]).expect("same space")
}

pub fn build_invariant_tensors(lambda: u32) -> Result<TensorBasis> {
    let space = IrrepSpace::new(lambda)?;
    let n = lambda as usize + 1;
    let gens: Vec<Vec<SparseOperator>> = (1..=3)
        .map(|i| (1..=3).map(|j| generator_sparse(&space, i, j).expect("valid modes")).collect())
        .collect();

    // Column m: the Casimir applied to the indicator of n1 = m.
    let mut raw = DMatrix::<f64>::zeros(n, n);
    for m in 0..n {
        let mut indicator = vec![0.0; n];
        indicator[m] = 1.0;
        let x = diagonal_operator(&space, &indicator);
        let mut image = vec![C64::new(0.0, 0.0); space.dimension()];
        for i in 0..3 {
            for j in 0..3 {
                let inner = commutator(&gens[j][i], &x);
                for &(r, c, v) in commutator(&gens[i][j], &inner).triplets() {
                    if r == c {
                        image[r] += v;
                    } else if v.norm() > OFF_DIAGONAL_TOL {
                        return Err(Error::ConstructionFailure(format!(
                            "adjoint Casimir leaves the diagonal subspace at ({r}, {c})"
                        )));
                    }
                }
            }
        }
        let mut seen = vec![None; n];
        for (k, s) in space.basis().iter().enumerate() {
            let v = image[k];
            if v.im.abs() > OFF_DIAGONAL_TOL {
                return Err(Error::ConstructionFailure("complex Casimir image".into()));
            }
            match seen[s.n1 as usize] {
                None => seen[s.n1 as usize] = Some(v.re),
                Some(prev) if (prev - v.re).abs() > OFF_DIAGONAL_TOL => {
                    return Err(Error::ConstructionFailure(format!(
                        "Casimir image is not a function of n1 at {s}"
                    )))
                }
                _ => {}
            }
        }
        for (row, v) in seen.into_iter().enumerate() {
            raw[(row, m)] = v.unwrap_or(0.0);
        }
    }

    // Orthonormal coordinates: indicator of n1 = m scaled by 1/√mult(m).
    let root: Vec<f64> = (0..n).map(|m| (multiplicity(lambda, m as u32) as f64).sqrt()).collect();
    let sym = DMatrix::from_fn(n, n, |r, c| root[r] * raw[(r, c)] / root[c]);
    let sym = 0.5 * (&sym + sym.transpose());
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let casimir: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    for w in casimir.windows(2) {
        if w[1] - w[0] < DEGENERACY_TOL {
            return Err(Error::ConstructionFailure(format!(
                "degenerate adjoint Casimir eigenvalues {} and {}",
                w[0], w[1]
            )));
        }
    }
    let profiles = order
        .iter()
        .map(|&k| {
            let u: DVector<f64> = eig.eigenvectors.column(k).into_owned();
            let mut f: Vec<f64> = (0..n).map(|m| u[m] / root[m]).collect();
            if f[lambda as usize] < 0.0 {
                f.iter_mut().for_each(|x| *x = -*x);
            }
            f
        })
        .collect();
    Ok(TensorBasis {
        space,
        casimir,
        profiles,
    })
}

impl TensorBasis {
    pub fn space(&self) -> &Arc<IrrepSpace> {
        &self.space
    }

    pub fn lambda(&self) -> u32 {
        self.space.lambda()
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Adjoint Casimir eigenvalue of `T_σ`.
    pub fn casimir(&self, sigma: usize) -> f64 {
        self.casimir[sigma]
    }

    /// `T_σ` entries indexed by `n1`.
    pub fn profile(&self, sigma: usize) -> &[f64] {
        &self.profiles[sigma]
    }

    pub fn operator(&self, sigma: usize) -> LinearOperator {
        diagonal_operator(&self.space, &self.profiles[sigma]).to_dense()
    }

    /// `tr(T_σ T_τ)`.
    pub fn overlap(&self, sigma: usize, tau: usize) -> f64 {
        let lambda = self.lambda();
        (0..=lambda)
            .map(|m| multiplicity(lambda, m) as f64 * self.profiles[sigma][m as usize] * self.profiles[tau][m as usize])
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irrep::{cartan, Cartan};

    #[test]
    fn casimir_spectrum_and_count() {
        for lambda in [1, 4, 9] {
            let t = build_invariant_tensors(lambda).unwrap();
            assert_eq!(t.len(), lambda as usize + 1);
            for s in 0..t.len() {
                let expect = 2.0 * s as f64 * (s as f64 + 2.0);
                assert!((t.casimir(s) - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn orthonormal_up_to_twenty() {
        for lambda in [2, 7, 20] {
            let t = build_invariant_tensors(lambda).unwrap();
            for a in 0..t.len() {
                assert!(t.profile(a)[lambda as usize] > 0.0);
                for b in 0..t.len() {
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!((t.overlap(a, b) - expect).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn lowest_tensors() {
        let t = build_invariant_tensors(4).unwrap();
        let hw = t.operator(0).matrix()[(0, 0)].re;
        assert!((hw - 1.0 / 15f64.sqrt()).abs() < 1e-12);
        let t = build_invariant_tensors(1).unwrap();
        let h1 = cartan(t.space(), Cartan::H1).scale(C64::new(1.0 / 6f64.sqrt(), 0.0));
        assert!(t.operator(1).max_abs_diff(&h1) < 1e-12);
    }
}
