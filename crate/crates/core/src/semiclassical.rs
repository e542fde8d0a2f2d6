//! Classical transport of the Wigner function: every `β2` layer is rigidly
//! shifted in `α2` with speed `(9/5)√((λ−1)(λ+4))(1 + 5 cosβ2)`. Phase-space
//! moments of the transported function give the semiclassical squeezing curve.

use std::f64::consts::{PI, TAU};
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::evolution::{hamiltonian, initial_point, initial_state, SqueezingCurve};
use crate::group::{wrap_angle, CosetPoint};
use crate::kernel::{
    approx_wigner, symbol, wigner_of_state, GeneratorPolynomial, GeneratorSymbolTable, HighestWeightProfile, QuadraticSymbol,
    QuadratureGrid, WignerKernel,
};
use crate::squeezing::{minimize_form, SearchOptions, SqueezingResult, VarianceForm};
use crate::C64;

/// `ε = 1/(2√(λ(λ+3)))`.
pub fn epsilon(lambda: u32) -> f64 {
    let l = lambda as f64;
    1.0 / (2.0 * (l * (l + 3.0)).sqrt())
}

/// Finite-difference step for angle derivatives.
pub const ANGLE_STEP: f64 = 1e-5;
/// Finite-difference step for time derivatives.
pub const TIME_STEP: f64 = 1e-6;
/// Polar angles closer than this to 0 or π are coordinate singularities.
pub const SINGULAR_MARGIN: f64 = 1e-3;

fn check_regular(omega: CosetPoint) -> Result<()> {
    for (name, b) in [("beta1", omega.beta1), ("beta2", omega.beta2)] {
        if !(SINGULAR_MARGIN..=PI - SINGULAR_MARGIN).contains(&b) {
            return Err(Error::SingularPoint { coordinate: name, value: b });
        }
    }
    Ok(())
}

fn shifted(omega: CosetPoint, axis: usize, h: f64) -> CosetPoint {
    let mut p = omega;
    match axis {
        0 => p.alpha1 += h,
        1 => p.beta1 += h,
        2 => p.alpha2 += h,
        _ => p.beta2 += h,
    }
    p
}

/// Central-difference gradient in `(α1, β1, α2, β2)`.
fn gradient<F: Fn(CosetPoint) -> f64>(f: &F, omega: CosetPoint) -> [f64; 4] {
    let mut g = [0.0; 4];
    for (axis, slot) in g.iter_mut().enumerate() {
        *slot = (f(shifted(omega, axis, ANGLE_STEP)) - f(shifted(omega, axis, -ANGLE_STEP))) / (2.0 * ANGLE_STEP);
    }
    g
}

/// Poisson bracket on the coset:
/// `4/(sinβ1 sin²(β2/2)) (f_α1 g_β1 − g_α1 f_β1)
///  − 2 tan(β1/2)/sin²(β2/2) (f_α2 g_β1 − g_α2 f_β1)
///  + 4/sinβ2 (f_α2 g_β2 − g_α2 f_β2)`.
pub fn poisson_bracket<F, G>(f: F, g: G, omega: CosetPoint) -> Result<f64>
where
    F: Fn(CosetPoint) -> f64,
    G: Fn(CosetPoint) -> f64,
{
    check_regular(omega)?;
    let df = gradient(&f, omega);
    let dg = gradient(&g, omega);
    let s2 = (0.5 * omega.beta2).sin().powi(2);
    let t1 = 4.0 / (omega.beta1.sin() * s2) * (df[0] * dg[1] - dg[0] * df[1]);
    let t2 = -2.0 * (0.5 * omega.beta1).tan() / s2 * (df[2] * dg[1] - dg[2] * df[1]);
    let t3 = 4.0 / omega.beta2.sin() * (df[2] * dg[3] - dg[2] * df[3]);
    Ok(t1 + t2 + t3)
}

/// `cos β̄2` of the coset point `ω⁻¹Ω` for the center `ω = (0, 0, 0, B2)`.
pub fn cos_beta_bar(omega: CosetPoint, b2: f64) -> f64 {
    let (sb2, cb2) = (0.5 * b2).sin_cos();
    let (s2, c2) = (0.5 * omega.beta2).sin_cos();
    let c1 = (0.5 * omega.beta1).cos();
    -1.0 + 2.0 * cb2 * cb2 * c2 * c2 + 2.0 * c1 * c1 * sb2 * sb2 * s2 * s2 + omega.alpha2.cos() * c1 * omega.beta2.sin() * b2.sin()
}

/// `α2 ↦ α2 + v(β2) t` with `v(β2) = (9/5)√((λ−1)(λ+4))(1 + 5 cosβ2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalFlow {
    pub lambda: u32,
    /// Polar angle of the initial center, `arccos(−1/5)`.
    pub b2: f64,
    scale: f64,
}

impl ClassicalFlow {
    pub fn new(lambda: u32) -> Result<Self> {
        if lambda == 0 {
            return Err(invalid("lambda must be positive"));
        }
        let l = lambda as f64;
        Ok(Self {
            lambda,
            b2: crate::initial_polar_angle(),
            scale: 1.8 * ((l - 1.0) * (l + 4.0)).sqrt(),
        })
    }

    pub fn slope(&self, beta2: f64) -> f64 {
        self.scale * (1.0 + 5.0 * beta2.cos())
    }

    pub fn evolve(&self, omega: CosetPoint, t: f64) -> CosetPoint {
        CosetPoint {
            alpha2: wrap_angle(omega.alpha2 + self.slope(omega.beta2) * t, TAU),
            ..omega
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    /// Highest-weight profile from the kernel.
    ExactKernel,
    /// `A e^{λ(cos β̄2 − 1)}`.
    GaussianApprox,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::ExactKernel => "exact",
            Backend::GaussianApprox => "gauss",
        }
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Backend::ExactKernel),
            "gauss" => Ok(Backend::GaussianApprox),
            other => Err(invalid(format!("unknown backend '{other}' (expected exact or gauss)"))),
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Wigner function of the initial coherent state carried by the flow.
#[derive(Debug, Clone)]
pub struct TransportedWigner {
    backend: Backend,
    flow: ClassicalFlow,
    profile: Option<HighestWeightProfile>,
}

impl TransportedWigner {
    pub fn new(backend: Backend, kernel: &WignerKernel) -> Result<Self> {
        Ok(Self {
            backend,
            flow: ClassicalFlow::new(kernel.lambda())?,
            profile: match backend {
                Backend::ExactKernel => Some(HighestWeightProfile::new(kernel)),
                Backend::GaussianApprox => None,
            },
        })
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn flow(&self) -> &ClassicalFlow {
        &self.flow
    }

    pub fn lambda(&self) -> u32 {
        self.flow.lambda
    }

    /// Profile value at `x = cos β̄2`.
    pub fn profile_at(&self, x: f64) -> f64 {
        match &self.profile {
            Some(p) => p.eval(x),
            None => approx_wigner(self.flow.lambda, x.clamp(-1.0, 1.0).acos()),
        }
    }

    pub fn eval(&self, omega: CosetPoint, t: f64) -> f64 {
        self.profile_at(cos_beta_bar(self.flow.evolve(omega, t), self.flow.b2))
    }
}

pub fn transported_wigner(w: &TransportedWigner, omega: CosetPoint, t: f64) -> f64 {
    w.eval(omega, t)
}

/// Outcome of [`flow_consistency_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConsistency {
    /// `max |∂W/∂t − v ∂W/∂α2|` over the nodes, relative to `max |∂W/∂t|`.
    pub residual: f64,
    /// `max | |ε{W, W_H}| − |∂W/∂t| |` relative to `max |∂W/∂t|`, with
    /// `W_H` the kernel symbol of the Hamiltonian.
    pub bracket_residual: f64,
    /// `+1` when `ε{W, W_H}` has the sign of `∂W/∂t`, `−1` when opposite.
    pub bracket_sign: f64,
}

fn hamiltonian_polynomial(lambda: u32) -> GeneratorPolynomial {
    let h1 = GeneratorPolynomial::linear(Matrix3::from_diagonal(&Vector3::new(2.0, -1.0, -1.0).map(|x| C64::new(x, 0.0))));
    let k = (2.0 * lambda as f64 + 3.0) / 5.0;
    h1.product(&h1).expect("linear").add(&h1.scale(C64::new(-k, 0.0)))
}

/// Symbol of `H` as a quadratic form in the qutrit amplitudes.
pub fn hamiltonian_symbol(kernel: &WignerKernel) -> Result<QuadraticSymbol> {
    let table = GeneratorSymbolTable::new(kernel);
    QuadraticSymbol::of_displaced(&table, &hamiltonian_polynomial(kernel.lambda()), CosetPoint::origin(), 17)
}

/// Compares the time derivative of the transported exact Wigner function
/// with the flow and with `ε {W, W_H}` at the nodes of `grid` away from
/// coordinate singularities.
pub fn flow_consistency_check(kernel: &WignerKernel, grid: &QuadratureGrid) -> Result<FlowConsistency> {
    let w = TransportedWigner::new(Backend::ExactKernel, kernel)?;
    let wh = hamiltonian_symbol(kernel)?;
    let eps = epsilon(kernel.lambda());
    let nodes: Vec<CosetPoint> = grid.nodes().map(|(p, _)| p).filter(|p| check_regular(*p).is_ok()).collect();
    if nodes.is_empty() {
        return Err(invalid("grid has no regular nodes"));
    }
    let rows: Vec<(f64, f64, f64)> = nodes
        .par_iter()
        .map(|&p| {
            let dt = (w.eval(p, TIME_STEP) - w.eval(p, -TIME_STEP)) / (2.0 * TIME_STEP);
            let f = |q: CosetPoint| w.eval(q, 0.0);
            let da2 = (f(shifted(p, 2, ANGLE_STEP)) - f(shifted(p, 2, -ANGLE_STEP))) / (2.0 * ANGLE_STEP);
            let flow = w.flow().slope(p.beta2) * da2;
            let bracket = eps * poisson_bracket(f, |q| wh.eval(q), p).expect("regular node");
            (dt, flow, bracket)
        })
        .collect();
    let scale = rows.iter().map(|r| r.0.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let residual = rows.iter().map(|r| (r.0 - r.1).abs()).fold(0.0, f64::max) / scale;
    let bracket_residual = rows.iter().map(|r| (r.0.abs() - r.2.abs()).abs()).fold(0.0, f64::max) / scale;
    let alignment: f64 = rows.iter().map(|r| r.0 * r.2).sum();
    Ok(FlowConsistency {
        residual,
        bracket_residual,
        bracket_sign: alignment.signum(),
    })
}

/// A phase-space moment and whether doubling the grid resolution changed
/// it by no more than [`MOMENT_TOLERANCE`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moment {
    pub value: f64,
    pub converged: bool,
}

pub const MOMENT_TOLERANCE: f64 = 1e-3;

/// `(λ+1)(λ+2)/(8π²) Σ w W(Ω, t) W_X(Ω)` with the symbol of `X` taken from
/// the kernel at every node. The refined grid decides the convergence flag.
pub fn semiclassical_moment(
    kernel: &WignerKernel,
    transported: &TransportedWigner,
    x: &crate::irrep::LinearOperator,
    t: f64,
    grid: &QuadratureGrid,
) -> Result<Moment> {
    if x.space().as_ref() != kernel.space().as_ref() {
        return Err(invalid("operator and kernel live in different irreps"));
    }
    let integrand = |p: CosetPoint| transported.eval(p, t) * symbol(kernel, x, p).map(|z| z.re).unwrap_or(f64::NAN);
    let pref = kernel.prefactor();
    let coarse = pref * grid.integrate(integrand);
    let fine = pref * grid.refined().integrate(integrand);
    if !fine.is_finite() {
        return Err(Error::Numerical("non-finite phase-space moment".into()));
    }
    Ok(Moment {
        value: fine,
        converged: (fine - coarse).abs() <= MOMENT_TOLERANCE * fine.abs().max(1e-12),
    })
}

/// Symbols integrated over `α1` on the nodes `(β1, α2, β2)` of a grid. The
/// transported Wigner function does not depend on `α1`, so moments reduce
/// to three-dimensional sums.
#[derive(Debug, Clone)]
pub struct SymbolField {
    grid: QuadratureGrid,
    n_symbols: usize,
    /// `values[node * n_symbols + s]`, node index `(β1, α2, β2)` with `β2`
    /// fastest.
    values: Vec<f64>,
}

impl SymbolField {
    pub fn new(grid: &QuadratureGrid, symbols: &[QuadraticSymbol]) -> Self {
        let n = symbols.len();
        let (nb1, na2, nb2) = (grid.beta1.len(), grid.alpha2.len(), grid.beta2.len());
        let values: Vec<f64> = (0..nb1 * na2 * nb2)
            .into_par_iter()
            .flat_map_iter(|node| {
                let (j, rest) = (node / (na2 * nb2), node % (na2 * nb2));
                let (i, k) = (rest / nb2, rest % nb2);
                let mut acc = vec![0.0; n];
                for (&a1, &w1) in grid.alpha1.nodes.iter().zip(&grid.alpha1.weights) {
                    let c = CosetPoint {
                        alpha1: a1,
                        beta1: grid.beta1.nodes[j],
                        alpha2: grid.alpha2.nodes[i],
                        beta2: grid.beta2.nodes[k],
                    }
                    .qutrit_amplitudes();
                    for (slot, s) in acc.iter_mut().zip(symbols) {
                        *slot += w1 * s.eval_amplitudes(&c);
                    }
                }
                acc
            })
            .collect();
        Self {
            grid: grid.clone(),
            n_symbols: n,
            values,
        }
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    /// `(λ+1)(λ+2)/(8π²) ∫ W(Ω, t) dΩ` and the moments of every symbol.
    pub fn moments(&self, transported: &TransportedWigner, t: f64, prefactor: f64) -> (f64, Vec<f64>) {
        let g = &self.grid;
        let (nb1, na2, nb2) = (g.beta1.len(), g.alpha2.len(), g.beta2.len());
        let alpha1_total = g.alpha1.total();
        let n = self.n_symbols;
        let partial: Vec<(f64, Vec<f64>)> = (0..nb1)
            .into_par_iter()
            .map(|j| {
                let mut norm = 0.0;
                let mut acc = vec![0.0; n];
                for i in 0..na2 {
                    for k in 0..nb2 {
                        let p = CosetPoint {
                            alpha1: 0.0,
                            beta1: g.beta1.nodes[j],
                            alpha2: g.alpha2.nodes[i],
                            beta2: g.beta2.nodes[k],
                        };
                        let w = g.beta1.weights[j] * g.alpha2.weights[i] * g.beta2.weights[k] * transported.eval(p, t);
                        norm += w * alpha1_total;
                        let base = ((j * na2 + i) * nb2 + k) * n;
                        for (slot, v) in acc.iter_mut().zip(&self.values[base..base + n]) {
                            *slot += w * v;
                        }
                    }
                }
                (norm, acc)
            })
            .collect();
        let mut norm = 0.0;
        let mut acc = vec![0.0; n];
        for (nrm, a) in partial {
            norm += nrm;
            for (s, v) in acc.iter_mut().zip(a) {
                *s += v;
            }
        }
        (prefactor * norm, acc.into_iter().map(|v| prefactor * v).collect())
    }
}

/// The four components of the observable family as generator polynomials.
pub fn k_component_polynomials() -> [GeneratorPolynomial; 4] {
    let g = |i, j| GeneratorPolynomial::generator(i, j).expect("valid modes");
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [
        g(1, 3).add(&g(3, 1)),
        g(1, 3).scale(-i).add(&g(3, 1).scale(i)),
        g(1, 2).add(&g(2, 1)).scale(-one),
        g(1, 2).scale(-i).add(&g(2, 1).scale(i)),
    ]
}

/// Symbols of `K⊥_k` and of `(K⊥_k K⊥_l + K⊥_l K⊥_k)/2`, `k ≤ l`, in the
/// tangent frame at `frame`.
pub fn k_perp_symbols(kernel: &WignerKernel, frame: CosetPoint) -> Result<Vec<QuadraticSymbol>> {
    let table = GeneratorSymbolTable::new(kernel);
    let comps = k_component_polynomials();
    let mut polys: Vec<GeneratorPolynomial> = comps.to_vec();
    for k in 0..4 {
        for l in k..4 {
            polys.push(comps[k].symmetrized_product(&comps[l])?);
        }
    }
    polys
        .par_iter()
        .enumerate()
        .map(|(s, p)| QuadraticSymbol::of_displaced(&table, p, frame, 1000 + s as u64))
        .collect()
}

fn variance_form_from_moments(m: &[f64]) -> VarianceForm {
    let mean = Vector4::new(m[0], m[1], m[2], m[3]);
    let mut second = Matrix4::zeros();
    let mut idx = 4;
    for k in 0..4 {
        for l in k..4 {
            second[(k, l)] = m[idx];
            second[(l, k)] = m[idx];
            idx += 1;
        }
    }
    VarianceForm::from_moments(second, mean)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiclassicalOptions {
    /// Resolution `(α1, β1, α2, β2)` of the phase-space grid. Four `α1`
    /// nodes or more integrate the quadratic symbols exactly.
    pub resolution: [usize; 4],
    pub search: SearchOptions,
}

impl SemiclassicalOptions {
    /// Resolution with `n` Gauss nodes per polar angle and `4n/3` uniform
    /// nodes in `α2`.
    pub fn with_grid(n: usize) -> Self {
        Self {
            resolution: [8, n, (4 * n).div_ceil(3), n],
            search: SearchOptions::default(),
        }
    }

    /// Resolution that keeps the transported peak resolved for `λ`.
    pub fn for_lambda(lambda: u32) -> Self {
        Self::with_grid(24.max((1.6 * lambda as f64).ceil() as usize))
    }
}

#[derive(Debug, Clone)]
pub struct SemiclassicalCurve {
    pub backend: Backend,
    pub curve: SqueezingCurve,
    /// `(λ+1)(λ+2)/(8π²) ∫ W(Ω, t) dΩ` per sample.
    pub normalization: Vec<f64>,
}

/// Least phase-space variance of `K⊥` along the classical transport.
pub fn semiclassical_squeezing_curve(
    backend: Backend,
    lambda: u32,
    times: &[f64],
    opts: &SemiclassicalOptions,
) -> Result<SemiclassicalCurve> {
    let kernel = WignerKernel::new(lambda)?;
    semiclassical_curve_with_kernel(&kernel, backend, times, opts)
}

pub fn semiclassical_curve_with_kernel(
    kernel: &WignerKernel,
    backend: Backend,
    times: &[f64],
    opts: &SemiclassicalOptions,
) -> Result<SemiclassicalCurve> {
    if times.is_empty() || times.iter().any(|t| !t.is_finite()) {
        return Err(invalid("time samples must be finite and non-empty"));
    }
    let grid = QuadratureGrid::with_resolution(opts.resolution)?;
    let transported = TransportedWigner::new(backend, kernel)?;
    let symbols = k_perp_symbols(kernel, initial_point())?;
    let field = SymbolField::new(&grid, &symbols);
    let pref = kernel.prefactor();
    let lambda = kernel.lambda();
    let samples: Vec<(SqueezingResult, f64)> = times
        .par_iter()
        .map(|&t| {
            let (norm, m) = field.moments(&transported, t, pref);
            let form = variance_form_from_moments(&m);
            let (best_direction, min_variance, converged) = minimize_form(&form, &opts.search)?;
            Ok((
                SqueezingResult {
                    time: t,
                    best_direction,
                    min_variance,
                    threshold: lambda as f64,
                    converged,
                },
                norm,
            ))
        })
        .collect::<Result<_>>()?;
    let normalization = samples.iter().map(|s| s.1).collect();
    let curve = SqueezingCurve::from_results(lambda, samples.into_iter().map(|s| s.0).collect());
    Ok(SemiclassicalCurve {
        backend,
        curve,
        normalization,
    })
}

/// Which evolution a Wigner slice shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceEvolution {
    /// Kernel symbol of the exactly evolved state.
    Quantum,
    /// Classically transported initial Wigner function.
    Classical(Backend),
}

impl SliceEvolution {
    pub fn name(&self) -> &'static str {
        match self {
            SliceEvolution::Quantum => "quantum",
            SliceEvolution::Classical(_) => "classical",
        }
    }
}

/// One slice sample at `α1 = β1 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicePoint {
    pub alpha2: f64,
    pub beta2: f64,
    pub value: f64,
}

/// Slice nodes: `n` uniform values of `α2` in `[0, 2π)` times `n` uniform
/// values of `β2` in `[0, π]`, `α2` slowest.
pub fn slice_nodes(n: usize) -> Result<Vec<(f64, f64)>> {
    if n < 2 {
        return Err(invalid("a slice needs at least two points per axis"));
    }
    Ok((0..n)
        .flat_map(|i| (0..n).map(move |k| (TAU * i as f64 / n as f64, PI * k as f64 / (n - 1) as f64)))
        .collect())
}

/// Wigner function of the evolved initial state on the `α1 = β1 = 0` slice.
pub fn wigner_slice(kernel: &Arc<WignerKernel>, evolution: SliceEvolution, t: f64, n: usize) -> Result<Vec<SlicePoint>> {
    if !t.is_finite() {
        return Err(invalid("slice time must be finite"));
    }
    let nodes = slice_nodes(n)?;
    let values: Vec<f64> = match evolution {
        SliceEvolution::Quantum => {
            let space = kernel.space();
            let psi = hamiltonian(space).evolve(&initial_state(space), t)?;
            nodes
                .par_iter()
                .map(|&(a2, b2)| wigner_of_state(kernel, &psi, CosetPoint { alpha1: 0.0, beta1: 0.0, alpha2: a2, beta2: b2 }))
                .collect::<Result<_>>()?
        }
        SliceEvolution::Classical(backend) => {
            let w = TransportedWigner::new(backend, kernel)?;
            nodes
                .par_iter()
                .map(|&(a2, b2)| w.eval(CosetPoint { alpha1: 0.0, beta1: 0.0, alpha2: a2, beta2: b2 }, t))
                .collect()
        }
    };
    Ok(nodes
        .into_iter()
        .zip(values)
        .map(|((alpha2, beta2), value)| SlicePoint { alpha2, beta2, value })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::coherent_state;
    use crate::irrep::LinearOperator;
    use crate::kernel::build_quadrature;
    use crate::squeezing::KFamily;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn regular_point(rng: &mut impl Rng) -> CosetPoint {
        CosetPoint::new(rng.gen_range(0.0..TAU), rng.gen_range(0.2..PI - 0.2), rng.gen_range(0.0..TAU), rng.gen_range(0.2..PI - 0.2)).unwrap()
    }

    #[test]
    fn epsilon_values() {
        assert!((epsilon(20) - 1.0 / (2.0 * 460f64.sqrt())).abs() < 1e-15);
        assert!((epsilon(1) - 0.25).abs() < 1e-15);
        assert!((epsilon(100_000) * 200_000.0 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn bracket_examples() {
        let p = CosetPoint::new(0.3, 1.0, 2.0, 1.3).unwrap();
        let v = poisson_bracket(|q| q.alpha2, |q| q.beta2.cos(), p).unwrap();
        assert!((v + 4.0).abs() < 1e-8);
        let f = |q: CosetPoint| q.alpha1.sin() * q.beta2.cos() + q.beta1 * q.alpha2;
        assert!(poisson_bracket(f, f, p).unwrap().abs() < 1e-12);
        let g = |q: CosetPoint| (q.alpha2 - q.beta1).cos() + q.beta2 * q.alpha1;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let p = regular_point(&mut rng);
            let a = poisson_bracket(f, g, p).unwrap();
            let b = poisson_bracket(g, f, p).unwrap();
            assert!((a + b).abs() < 1e-6);
        }
        let singular = CosetPoint::new(0.0, 0.0005, 0.0, 1.0).unwrap();
        assert!(matches!(poisson_bracket(f, g, singular), Err(Error::SingularPoint { .. })));
    }

    #[test]
    fn cos_beta_bar_geometry() {
        let b2 = crate::initial_polar_angle();
        assert!((cos_beta_bar(CosetPoint::polar(b2), b2) - 1.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let center = CosetPoint::polar(b2).qutrit_amplitudes();
        for _ in 0..10_000 {
            let p = CosetPoint::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..PI), rng.gen_range(0.0..TAU), rng.gen_range(0.0..PI)).unwrap();
            let x = cos_beta_bar(p, b2);
            assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&x));
            assert!((cos_beta_bar(p, 0.0) - p.beta2.cos()).abs() < 1e-12);
            // 2|⟨center|Ω⟩|² − 1 for single qutrits
            let c = p.qutrit_amplitudes();
            let overlap: C64 = center.iter().zip(&c).map(|(a, b)| a.conj() * b).sum();
            assert!((x - (2.0 * overlap.norm_sqr() - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn flow_is_stationary_at_the_center() {
        let f = ClassicalFlow::new(20).unwrap();
        assert!(f.slope(f.b2).abs() < 1e-12);
        let k = WignerKernel::new(20).unwrap();
        let w = TransportedWigner::new(Backend::ExactKernel, &k).unwrap();
        let center = CosetPoint::polar(f.b2);
        for t in [0.01, 0.03, 0.05] {
            assert!((w.eval(center, t) - w.eval(center, 0.0)).abs() < 1e-8);
        }
    }

    #[test]
    fn initial_wigner_matches_kernel() {
        let k = WignerKernel::new(8).unwrap();
        let w = TransportedWigner::new(Backend::ExactKernel, &k).unwrap();
        let st = coherent_state(k.space(), initial_point());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = regular_point(&mut rng);
            assert!((w.eval(p, 0.0) - wigner_of_state(&k, &st, p).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn backend_parsing() {
        assert_eq!("exact".parse::<Backend>().unwrap(), Backend::ExactKernel);
        assert_eq!("gauss".parse::<Backend>().unwrap(), Backend::GaussianApprox);
        assert!("other".parse::<Backend>().is_err());
    }

    #[test]
    fn hamiltonian_symbol_shape() {
        // fit against {1, cosβ2, cos2β2}; coefficient ratio 4:5
        let k = WignerKernel::new(20).unwrap();
        let wh = hamiltonian_symbol(&k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<CosetPoint> = (0..40).map(|_| regular_point(&mut rng)).collect();
        let a = nalgebra::DMatrix::from_fn(pts.len(), 3, |r, c| match c {
            0 => 1.0,
            1 => pts[r].beta2.cos(),
            _ => (2.0 * pts[r].beta2).cos(),
        });
        let b = nalgebra::DVector::from_iterator(pts.len(), pts.iter().map(|&p| wh.eval(p)));
        let x = a.clone().svd(true, true).solve(&b, 1e-14).unwrap();
        assert!((&a * &x - &b).amax() < 1e-8 * b.amax());
        assert!((x[1] / x[2] - 0.8).abs() < 1e-6);
        let expect = 9.0 / 40.0 * (19.0f64 * 20.0 * 23.0 * 24.0).sqrt() * 5.0;
        assert!((x[2] - expect).abs() < 1e-6 * expect);
        // ε (4/sinβ2) ∂W_H/∂β2 = −v(β2)
        let f = ClassicalFlow::new(20).unwrap();
        for &p in &pts[..5] {
            let d = (wh.eval(shifted(p, 3, ANGLE_STEP)) - wh.eval(shifted(p, 3, -ANGLE_STEP))) / (2.0 * ANGLE_STEP);
            let v = epsilon(20) * 4.0 / p.beta2.sin() * d;
            assert!((v + f.slope(p.beta2)).abs() < 1e-8 * f.slope(0.0));
        }
    }

    #[test]
    fn flow_consistency_small_lambda() {
        let k = WignerKernel::new(10).unwrap();
        let grid = build_quadrature(4, 6).unwrap();
        let c = flow_consistency_check(&k, &grid).unwrap();
        assert!(c.residual < 1e-4, "{c:?}");
        assert!(c.bracket_residual < 1e-4, "{c:?}");
        assert_eq!(c.bracket_sign, -1.0);
    }

    #[test]
    fn generic_moment_of_identity() {
        let k = WignerKernel::new(3).unwrap();
        let w = TransportedWigner::new(Backend::ExactKernel, &k).unwrap();
        let grid = build_quadrature(8, 8).unwrap();
        let m = semiclassical_moment(&k, &w, &LinearOperator::identity(k.space()), 0.05, &grid).unwrap();
        assert!((m.value - 1.0).abs() < 1e-6, "{m:?}");
    }

    #[test]
    fn h1_moment_matches_expectation() {
        let k = WignerKernel::new(6).unwrap();
        let w = TransportedWigner::new(Backend::ExactKernel, &k).unwrap();
        let h1 = crate::irrep::cartan(k.space(), crate::irrep::Cartan::H1);
        let m = semiclassical_moment(&k, &w, &h1, 0.0, &build_quadrature(8, 8).unwrap()).unwrap();
        let exact = crate::irrep::expectation(&coherent_state(k.space(), initial_point()), &h1).unwrap().re;
        assert!(m.converged);
        assert!((m.value - exact).abs() < 1e-8 * exact.abs().max(1.0), "{} vs {exact}", m.value);
    }

    #[test]
    fn gaussian_backend_deviates_more() {
        let lambda = 10;
        let k = WignerKernel::new(lambda).unwrap();
        let times = crate::evolution::time_grid(crate::evolution::default_window(lambda), 40).unwrap();
        let opts = SemiclassicalOptions::for_lambda(lambda);
        let quantum = crate::evolution::squeezing_curve_at(lambda, &times, &Default::default()).unwrap();
        let (_, vq) = quantum.find_minimum().unwrap();
        let depth = |b| {
            let c = semiclassical_curve_with_kernel(&k, b, &times, &opts).unwrap().curve;
            c.min_variances.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        let (exact, gauss) = (depth(Backend::ExactKernel), depth(Backend::GaussianApprox));
        assert!(exact < lambda as f64 && gauss < lambda as f64);
        assert!((gauss - vq).abs() > (exact - vq).abs(), "quantum {vq}, exact {exact}, gauss {gauss}");
    }

    #[test]
    fn phase_space_variance_at_zero_time_is_threshold() {
        let k = WignerKernel::new(6).unwrap();
        let opts = SemiclassicalOptions::with_grid(24);
        let sc = semiclassical_curve_with_kernel(&k, Backend::ExactKernel, &[0.0], &opts).unwrap();
        assert!((sc.normalization[0] - 1.0).abs() < 1e-9);
        assert!((sc.curve.min_variances[0] - 6.0).abs() < 1e-6);
        // agrees with the exact quantum covariance
        let st = coherent_state(k.space(), initial_point());
        let form = KFamily::new(k.space()).variance_form(&st, initial_point());
        let symbols = k_perp_symbols(&k, initial_point()).unwrap();
        let grid = QuadratureGrid::with_resolution(opts.resolution).unwrap();
        let field = SymbolField::new(&grid, &symbols);
        let (_, m) = field.moments(&TransportedWigner::new(Backend::ExactKernel, &k).unwrap(), 0.0, k.prefactor());
        let sc_form = variance_form_from_moments(&m);
        assert!((sc_form.covariance() - form.covariance()).amax() < 1e-8);
    }

    #[test]
    fn slices_agree_at_zero_time() {
        let k = Arc::new(WignerKernel::new(8).unwrap());
        let q = wigner_slice(&k, SliceEvolution::Quantum, 0.0, 12).unwrap();
        let c = wigner_slice(&k, SliceEvolution::Classical(Backend::ExactKernel), 0.0, 12).unwrap();
        assert_eq!(q.len(), 144);
        for (a, b) in q.iter().zip(&c) {
            assert!((a.value - b.value).abs() < 1e-10);
        }
        assert!(slice_nodes(1).is_err());
    }
}
