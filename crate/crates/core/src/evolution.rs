//! Exact evolution under `H = h1² − ((2λ+3)/5) h1`, squeezing curves and the
//! λ-scaling of the squeezing minimum.

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::group::{coherent_state, CosetPoint};
use crate::irrep::{cartan_weight, Cartan, IrrepSpace, LinearOperator, StateVector};
use crate::squeezing::{minimize_variance_with, Direction, KFamily, SearchOptions, SqueezingResult};
use crate::C64;

/// `H` is diagonal in the weight basis; its eigenvalue depends on `n1` only.
#[derive(Debug, Clone)]
pub struct DiagonalHamiltonian {
    space: Arc<IrrepSpace>,
    eigenvalues: Vec<f64>,
}

/// `E(h) = h² − ((2λ+3)/5) h` with `h = 3n1 − λ`.
pub fn energy(lambda: u32, n1: u32) -> f64 {
    let h = 3.0 * n1 as f64 - lambda as f64;
    h * h - (2.0 * lambda as f64 + 3.0) / 5.0 * h
}

pub fn hamiltonian(space: &Arc<IrrepSpace>) -> DiagonalHamiltonian {
    let l = space.lambda();
    let eigenvalues = space
        .basis()
        .iter()
        .map(|&s| {
            let h = cartan_weight(Cartan::H1, s);
            h * h - (2.0 * l as f64 + 3.0) / 5.0 * h
        })
        .collect();
    DiagonalHamiltonian {
        space: space.clone(),
        eigenvalues,
    }
}

impl DiagonalHamiltonian {
    pub fn space(&self) -> &Arc<IrrepSpace> {
        &self.space
    }

    /// Eigenvalue for each basis state, in basis order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn to_operator(&self) -> LinearOperator {
        let d = DVector::from_iterator(self.eigenvalues.len(), self.eigenvalues.iter().map(|&e| C64::new(e, 0.0)));
        LinearOperator::new(self.space.clone(), nalgebra::DMatrix::from_diagonal(&d)).expect("finite diagonal")
    }

    /// `e^{−iHt} ψ`.
    pub fn evolve(&self, state: &StateVector, t: f64) -> Result<StateVector> {
        if !t.is_finite() {
            return Err(invalid("evolution time must be finite"));
        }
        if state.space().as_ref() != self.space.as_ref() {
            return Err(invalid("state and Hamiltonian live in different irreps"));
        }
        let amps = DVector::from_iterator(
            self.eigenvalues.len(),
            state
                .amplitudes()
                .iter()
                .zip(&self.eigenvalues)
                .map(|(z, &e)| z * C64::from_polar(1.0, -e * t)),
        );
        Ok(StateVector::from_unitary_image(self.space.clone(), amps))
    }
}

pub fn evolve(state: &StateVector, h: &DiagonalHamiltonian, t: f64) -> Result<StateVector> {
    h.evolve(state, t)
}

/// Center `(0, 0, 0, arccos(−1/5))` of the initial coherent state.
pub fn initial_point() -> CosetPoint {
    CosetPoint::polar(crate::initial_polar_angle())
}

pub fn initial_state(space: &Arc<IrrepSpace>) -> StateVector {
    coherent_state(space, initial_point())
}

/// Time window `[0, 0.05 (20/λ)^{9/11}]` that keeps the squeezing dip centered.
pub fn default_window(lambda: u32) -> f64 {
    0.05 * (20.0 / lambda as f64).powf(9.0 / 11.0)
}

pub const DEFAULT_STEPS: usize = 150;

#[derive(Debug, Clone)]
pub struct SqueezingCurve {
    pub lambda: u32,
    pub times: Vec<f64>,
    pub min_variances: Vec<f64>,
    pub best_directions: Vec<Direction>,
    /// Per-sample flag set when the direction search did not converge.
    pub degraded: Vec<bool>,
}

impl SqueezingCurve {
    pub(crate) fn from_results(lambda: u32, results: Vec<SqueezingResult>) -> Self {
        Self {
            lambda,
            times: results.iter().map(|r| r.time).collect(),
            min_variances: results.iter().map(|r| r.min_variance).collect(),
            best_directions: results.iter().map(|r| r.best_direction).collect(),
            degraded: results.iter().map(|r| !r.converged).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn any_degraded(&self) -> bool {
        self.degraded.iter().any(|&d| d)
    }

    pub fn find_minimum(&self) -> Result<(f64, f64)> {
        find_minimum(&self.times, &self.min_variances)
    }
}

/// `n_steps + 1` uniform samples on `[0, t_max]`.
pub fn time_grid(t_max: f64, n_steps: usize) -> Result<Vec<f64>> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(invalid(format!("t_max = {t_max} must be positive")));
    }
    if n_steps == 0 {
        return Err(invalid("need at least one time step"));
    }
    Ok((0..=n_steps).map(|i| t_max * i as f64 / n_steps as f64).collect())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CurveOptions {
    pub search: SearchOptions,
    /// Seed each time sample's search with the previous best direction.
    /// Forces sequential evaluation.
    pub warm_start: bool,
}

/// Least variance of `K⊥` (tangent frame at the initial center) along the
/// exact evolution of the initial coherent state.
pub fn squeezing_curve(lambda: u32, t_max: f64, n_steps: usize, opts: &CurveOptions) -> Result<SqueezingCurve> {
    let times = time_grid(t_max, n_steps)?;
    squeezing_curve_at(lambda, &times, opts)
}

pub fn squeezing_curve_at(lambda: u32, times: &[f64], opts: &CurveOptions) -> Result<SqueezingCurve> {
    let space = IrrepSpace::new(lambda)?;
    let h = hamiltonian(&space);
    let psi0 = initial_state(&space);
    let family = KFamily::new(&space);
    let omega = initial_point();
    let at = |t: f64, search: &SearchOptions| -> Result<SqueezingResult> {
        let psi = h.evolve(&psi0, t)?;
        let mut r = minimize_variance_with(&family, &psi, omega, search)?;
        r.time = t;
        Ok(r)
    };
    let results: Vec<SqueezingResult> = if opts.warm_start {
        let mut out = Vec::with_capacity(times.len());
        let mut search = opts.search;
        for &t in times {
            let r = at(t, &search)?;
            search.warm_start = Some(r.best_direction);
            out.push(r);
        }
        out
    } else {
        times.par_iter().map(|&t| at(t, &opts.search)).collect::<Result<_>>()?
    };
    Ok(SqueezingCurve::from_results(lambda, results))
}

/// Vertex of the parabola through the discrete minimum and its neighbours.
pub fn find_minimum(times: &[f64], values: &[f64]) -> Result<(f64, f64)> {
    if times.len() != values.len() || times.len() < 3 {
        return Err(invalid("minimum search needs at least three matching samples"));
    }
    let (k, &vk) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    if k == 0 || k == values.len() - 1 {
        return Err(Error::NoMinimum);
    }
    let (x0, x1, x2) = (times[k - 1], times[k], times[k + 1]);
    let (y0, y1, y2) = (values[k - 1], vk, values[k + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curvature = (d12 - d01) / (x2 - x0);
    if !(curvature > 0.0) {
        return Err(Error::NoMinimum);
    }
    // the interpolant is y1 + s·(x − x1) + c·(x − x1)²
    let slope_at_x1 = d01 + curvature * (x1 - x0);
    let t = x1 - slope_at_x1 / (2.0 * curvature);
    let v = y1 + slope_at_x1 * (t - x1) + curvature * (t - x1) * (t - x1);
    Ok((t, v))
}

/// Least-squares slope and intercept of `ln y` against `ln x`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(invalid("power-law fit needs at least two points"));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(invalid("power-law fit needs positive data"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("power-law fit needs distinct abscissae"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub lambda: u32,
    pub t_min: f64,
    pub v_min: f64,
    /// `v_min / λ`.
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct ScalingStudy {
    pub rows: Vec<ScalingRow>,
    /// Power of λ in `t_min`.
    pub exponent_t: f64,
    /// Power of λ in `v_min / λ`.
    pub exponent_v: f64,
}

pub const DEFAULT_LAMBDAS: [u32; 7] = [10, 14, 20, 28, 40, 57, 80];

pub fn scaling_row(lambda: u32, n_steps: usize, opts: &CurveOptions) -> Result<ScalingRow> {
    let curve = squeezing_curve(lambda, default_window(lambda), n_steps, opts)?;
    let (t_min, v_min) = curve.find_minimum()?;
    Ok(ScalingRow {
        lambda,
        t_min,
        v_min,
        ratio: v_min / lambda as f64,
    })
}

/// Fits `t_min ∝ λ^a` and `v_min/λ ∝ λ^b` over the given irreps, each
/// scanned on its default window.
pub fn scaling_study(lambdas: &[u32], n_steps: usize, opts: &CurveOptions) -> Result<ScalingStudy> {
    let mut distinct = lambdas.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 || distinct.len() != lambdas.len() {
        return Err(invalid("scaling study needs at least two distinct lambda values"));
    }
    if lambdas.contains(&0) {
        return Err(invalid("lambda must be positive"));
    }
    let outcomes: Vec<Result<ScalingRow>> = lambdas.par_iter().map(|&l| scaling_row(l, n_steps, opts)).collect();
    let mut rows = Vec::with_capacity(lambdas.len());
    for (outcome, &lambda) in outcomes.into_iter().zip(lambdas) {
        match outcome {
            Ok(r) => rows.push(r),
            Err(e) => {
                return Err(Error::Scaling {
                    lambda,
                    partial: rows,
                    source: Box::new(e),
                })
            }
        }
    }
    let ls: Vec<f64> = rows.iter().map(|r| r.lambda as f64).collect();
    let (exponent_t, _) = fit_power_law(&ls, &rows.iter().map(|r| r.t_min).collect::<Vec<_>>())?;
    let (exponent_v, _) = fit_power_law(&ls, &rows.iter().map(|r| r.ratio).collect::<Vec<_>>())?;
    Ok(ScalingStudy {
        rows,
        exponent_t,
        exponent_v,
    })
}
