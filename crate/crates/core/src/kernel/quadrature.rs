//! Tensor-product quadrature on the coset for the measure
//! `dΩ = dα1 dα2 sinβ1 dβ1 ((1 − cosβ2)/4) sinβ2 dβ2`, total volume `4π²`.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::group::CosetPoint;
use crate::special::gauss_legendre;

/// Nodes and weights along one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Axis {
    /// Uniform nodes on `[0, 2π)`.
    pub fn periodic(n: usize) -> Self {
        Self {
            nodes: (0..n).map(|k| TAU * k as f64 / n as f64).collect(),
            weights: vec![TAU / n as f64; n],
        }
    }

    /// Polar angle with measure `sinβ dβ`: Gauss–Legendre in `cosβ`.
    pub fn polar(n: usize) -> Self {
        let (u, w) = gauss_legendre(n);
        Self {
            nodes: u.iter().rev().map(|x| x.clamp(-1.0, 1.0).acos()).collect(),
            weights: w.into_iter().rev().collect(),
        }
    }

    /// Polar angle with measure `((1 − cosβ)/4) sinβ dβ`.
    pub fn weighted_polar(n: usize) -> Self {
        let (u, w) = gauss_legendre(n);
        Self {
            nodes: u.iter().rev().map(|x| x.clamp(-1.0, 1.0).acos()).collect(),
            weights: u.iter().zip(&w).rev().map(|(x, v)| v * 0.25 * (1.0 - x)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    pub alpha1: Axis,
    pub beta1: Axis,
    pub alpha2: Axis,
    pub beta2: Axis,
}

/// Minimum number of nodes per axis.
pub const MIN_NODES: usize = 4;

pub const DEFAULT_ALPHA_NODES: usize = 32;
pub const DEFAULT_BETA_NODES: usize = 48;

/// `n_alpha` uniform nodes in each azimuth and `n_beta` Gauss nodes in each
/// polar angle.
pub fn build_quadrature(n_alpha: usize, n_beta: usize) -> Result<QuadratureGrid> {
    QuadratureGrid::with_resolution([n_alpha, n_beta, n_alpha, n_beta])
}

impl QuadratureGrid {
    /// Resolutions in the order `(α1, β1, α2, β2)`.
    pub fn with_resolution(n: [usize; 4]) -> Result<Self> {
        if n.iter().any(|&k| k < MIN_NODES) {
            return Err(invalid(format!("quadrature needs at least {MIN_NODES} nodes per axis, got {n:?}")));
        }
        Ok(Self {
            alpha1: Axis::periodic(n[0]),
            beta1: Axis::polar(n[1]),
            alpha2: Axis::periodic(n[2]),
            beta2: Axis::weighted_polar(n[3]),
        })
    }

    pub fn resolution(&self) -> [usize; 4] {
        [self.alpha1.len(), self.beta1.len(), self.alpha2.len(), self.beta2.len()]
    }

    pub fn len(&self) -> usize {
        self.resolution().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total_weight(&self) -> f64 {
        self.alpha1.total() * self.beta1.total() * self.alpha2.total() * self.beta2.total()
    }

    /// Same grid with every resolution doubled.
    pub fn refined(&self) -> Self {
        let n = self.resolution();
        Self::with_resolution([2 * n[0], 2 * n[1], 2 * n[2], 2 * n[3]]).expect("larger than before")
    }

    /// All nodes with their weights, `α1` slowest and `β2` fastest.
    pub fn nodes(&self) -> impl Iterator<Item = (CosetPoint, f64)> + '_ {
        self.alpha1.nodes.iter().zip(&self.alpha1.weights).flat_map(move |(&a1, &w1)| {
            self.beta1.nodes.iter().zip(&self.beta1.weights).flat_map(move |(&b1, &w2)| {
                self.alpha2.nodes.iter().zip(&self.alpha2.weights).flat_map(move |(&a2, &w3)| {
                    self.beta2.nodes.iter().zip(&self.beta2.weights).map(move |(&b2, &w4)| {
                        (
                            CosetPoint {
                                alpha1: a1,
                                beta1: b1,
                                alpha2: a2,
                                beta2: b2,
                            },
                            w1 * w2 * w3 * w4,
                        )
                    })
                })
            })
        })
    }

    /// `Σ w f(Ω)`. Partial sums are combined in a fixed order, so the result
    /// does not depend on the thread count.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(CosetPoint) -> f64 + Sync,
    {
        let partial: Vec<f64> = (0..self.alpha1.len() * self.beta1.len())
            .into_par_iter()
            .map(|outer| {
                let (i, j) = (outer / self.beta1.len(), outer % self.beta1.len());
                let (a1, b1) = (self.alpha1.nodes[i], self.beta1.nodes[j]);
                let w12 = self.alpha1.weights[i] * self.beta1.weights[j];
                let mut acc = 0.0;
                for (&a2, &w3) in self.alpha2.nodes.iter().zip(&self.alpha2.weights) {
                    for (&b2, &w4) in self.beta2.nodes.iter().zip(&self.beta2.weights) {
                        let p = CosetPoint {
                            alpha1: a1,
                            beta1: b1,
                            alpha2: a2,
                            beta2: b2,
                        };
                        acc += w3 * w4 * f(p);
                    }
                }
                w12 * acc
            })
            .collect();
        partial.iter().sum()
    }

    /// Integrates on this grid and its refinements until two successive
    /// values agree within `rel_tol`. Returns the last value and whether
    /// that happened within `max_refinements` doublings.
    pub fn integrate_converged<F>(&self, f: F, rel_tol: f64, max_refinements: usize) -> (f64, bool)
    where
        F: Fn(CosetPoint) -> f64 + Sync,
    {
        let mut grid = self.clone();
        let mut value = grid.integrate(&f);
        for _ in 0..max_refinements {
            grid = grid.refined();
            let next = grid.integrate(&f);
            let close = (next - value).abs() <= rel_tol * next.abs().max(f64::MIN_POSITIVE);
            value = next;
            if close {
                return (value, true);
            }
        }
        (value, false)
    }
}
