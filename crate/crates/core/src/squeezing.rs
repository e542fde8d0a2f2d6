//! The isotropic observable family `K(α3, β3, χ)`, its displaced version
//! `K⊥ = D(ω) K D(ω)†`, and the search for the direction of least variance.
//!
//! `K = Σ_k a_k(α3, β3, χ) K_k` with the four fixed hermitian components
//! `C13 + C31`, `−i(C13 − C31)`, `−(C12 + C21)`, `−i(C12 − C21)` and a unit
//! coefficient vector `a ∈ S³`. The variance of `K⊥` in any state is therefore
//! the quadratic form `aᵀ Σ a` of a 4×4 covariance matrix `Σ`.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::{DVector, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::group::{coherent_state_closed_form, displacement, wrap_angle, CosetPoint};
use crate::irrep::{clamp_variance, generator_sparse, IrrepSpace, LinearOperator, SparseOperator, StateVector};
use crate::optimize::NelderMead;
use crate::C64;

/// Point `(α3, β3, χ)` of the observable family, with `β3 ∈ [0, π]`,
/// `α3 ∈ [0, 2π)` and `χ ∈ [0, 4π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub alpha3: f64,
    pub beta3: f64,
    pub chi: f64,
}

impl Direction {
    pub fn new(alpha3: f64, beta3: f64, chi: f64) -> Result<Self> {
        if !(alpha3.is_finite() && chi.is_finite()) {
            return Err(invalid("direction angles must be finite"));
        }
        if !(0.0..=PI).contains(&beta3) {
            return Err(invalid(format!("beta3 = {beta3} outside [0, pi]")));
        }
        Ok(Self {
            alpha3: wrap_angle(alpha3, TAU),
            beta3,
            chi: wrap_angle(chi, 2.0 * TAU),
        })
    }

    /// Canonical representative of arbitrary finite angles that yields the
    /// identical operator. Uses `(α, β, χ) ~ (α, β + 2π, χ + 2π)` and
    /// `(α, β, χ) ~ (α + π, 2π − β, χ + 2π)`.
    pub fn canonical(alpha3: f64, beta3: f64, chi: f64) -> Self {
        let (mut a, mut b, mut c) = (alpha3, beta3.rem_euclid(2.0 * TAU), chi);
        if b >= TAU {
            b -= TAU;
            c += TAU;
        }
        if b > PI {
            a += PI;
            b = TAU - b;
            c += TAU;
        }
        Self {
            alpha3: wrap_angle(a, TAU),
            beta3: b.clamp(0.0, PI),
            chi: wrap_angle(c, 2.0 * TAU),
        }
    }

    /// Unit coefficients of the four components.
    pub fn coefficients(&self) -> [f64; 4] {
        direction_coefficients(self.alpha3, self.beta3, self.chi)
    }
}

fn direction_coefficients(alpha3: f64, beta3: f64, chi: f64) -> [f64; 4] {
    let (sb, cb) = (0.5 * beta3).sin_cos();
    let (sc, cc) = (0.5 * chi).sin_cos();
    let (sa, ca) = (alpha3 - 0.5 * chi).sin_cos();
    [cb * cc, cb * sc, sb * ca, sb * sa]
}

/// The four components `K_k` as sparse operators.
pub fn k_components(space: &Arc<IrrepSpace>) -> [SparseOperator; 4] {
    let g = |i, j| generator_sparse(space, i, j).expect("valid modes");
    let (c13, c31, c12, c21) = (g(1, 3), g(3, 1), g(1, 2), g(2, 1));
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let sum = |terms: &[(C64, &SparseOperator)]| SparseOperator::sum(terms).expect("same space");
    [
        sum(&[(one, &c13), (one, &c31)]),
        sum(&[(-i, &c13), (i, &c31)]),
        sum(&[(-one, &c12), (-one, &c21)]),
        sum(&[(-i, &c12), (i, &c21)]),
    ]
}

/// Dense `K(α3, β3, χ)`.
pub fn k_operator(space: &Arc<IrrepSpace>, d: Direction) -> LinearOperator {
    KFamily::new(space).operator(d).to_dense()
}

/// Dense `K⊥ = D(ω) K D(ω)†`.
pub fn k_perp(space: &Arc<IrrepSpace>, omega: CosetPoint, d: Direction) -> LinearOperator {
    displacement(space, omega).conjugate(&k_operator(space, d))
}

/// Cached components of the family for one irrep.
#[derive(Debug, Clone)]
pub struct KFamily {
    space: Arc<IrrepSpace>,
    components: [SparseOperator; 4],
}

impl KFamily {
    pub fn new(space: &Arc<IrrepSpace>) -> Self {
        Self {
            space: space.clone(),
            components: k_components(space),
        }
    }

    pub fn space(&self) -> &Arc<IrrepSpace> {
        &self.space
    }

    pub fn components(&self) -> &[SparseOperator; 4] {
        &self.components
    }

    pub fn operator(&self, d: Direction) -> SparseOperator {
        let a = d.coefficients();
        let terms: Vec<(C64, &SparseOperator)> = a.iter().map(|&x| C64::new(x, 0.0)).zip(self.components.iter()).collect();
        SparseOperator::sum(&terms).expect("same space")
    }

    /// `Var(K⊥)` computed by applying `K` to `D(ω)†ψ` directly.
    pub fn direct_variance(&self, state: &StateVector, omega: CosetPoint, d: Direction) -> Result<f64> {
        let phi = displacement(&self.space, omega).apply_adjoint(state.amplitudes());
        let k_phi = self.operator(d).apply(&phi);
        crate::irrep::variance_from_image(&phi, &k_phi)
    }

    /// Covariance matrix of the four components of `K⊥` in `state`.
    pub fn variance_form(&self, state: &StateVector, omega: CosetPoint) -> VarianceForm {
        let phi = displacement(&self.space, omega).apply_adjoint(state.amplitudes());
        self.variance_form_of_vector(&phi)
    }

    pub(crate) fn variance_form_of_vector(&self, phi: &DVector<C64>) -> VarianceForm {
        let images: Vec<DVector<C64>> = self.components.iter().map(|k| k.apply(phi)).collect();
        let mut second = Matrix4::zeros();
        let mut mean = Vector4::zeros();
        for k in 0..4 {
            mean[k] = phi.dotc(&images[k]).re;
            for l in k..4 {
                let s = images[k].dotc(&images[l]).re;
                second[(k, l)] = s;
                second[(l, k)] = s;
            }
        }
        VarianceForm::from_moments(second, mean)
    }
}

/// `Var(a) = aᵀ (S − m mᵀ) a` for the symmetrized second moments `S` and
/// means `m` of the four components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceForm {
    covariance: Matrix4<f64>,
}

impl VarianceForm {
    pub fn from_moments(second: Matrix4<f64>, mean: Vector4<f64>) -> Self {
        let c = second - mean * mean.transpose();
        Self {
            covariance: 0.5 * (c + c.transpose()),
        }
    }

    pub fn covariance(&self) -> &Matrix4<f64> {
        &self.covariance
    }

    fn raw(&self, a: [f64; 4]) -> f64 {
        let v = Vector4::from(a);
        v.dot(&(self.covariance * v))
    }

    pub fn evaluate(&self, d: Direction) -> Result<f64> {
        clamp_variance(self.raw(d.coefficients()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Coarse grid resolution in `(α3, β3, χ)`.
    pub grid: [usize; 3],
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Skip the grid and refine from this direction.
    pub warm_start: Option<Direction>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            grid: [24, 12, 24],
            tolerance: 1e-8,
            max_iterations: 500,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingResult {
    pub time: f64,
    pub best_direction: Direction,
    pub min_variance: f64,
    /// Coherent-state variance `λ`.
    pub threshold: f64,
    /// False when the simplex refinement hit its iteration limit.
    pub converged: bool,
}

impl SqueezingResult {
    pub fn is_squeezed(&self) -> bool {
        self.min_variance < self.threshold
    }
}

/// Grid scan over `[0, 2π) × [0, π] × [0, 4π)` followed by Nelder–Mead.
/// Returns the best direction, its variance and the convergence flag.
pub fn minimize_form(form: &VarianceForm, opts: &SearchOptions) -> Result<(Direction, f64, bool)> {
    if opts.grid.contains(&0) {
        return Err(invalid("direction grid needs at least one point per axis"));
    }
    let f = |p: &[f64]| form.raw(direction_coefficients(p[0], p[1], p[2]));
    let (start, step) = match opts.warm_start {
        Some(d) => ([d.alpha3, d.beta3, d.chi], 0.1),
        None => {
            let [na, nb, nc] = opts.grid;
            let beta_step = if nb > 1 { PI / (nb - 1) as f64 } else { 0.0 };
            let mut best = ([0.0; 3], f64::INFINITY);
            for i in 0..na {
                let a = TAU * i as f64 / na as f64;
                for j in 0..nb {
                    let b = beta_step * j as f64;
                    for k in 0..nc {
                        let c = 2.0 * TAU * k as f64 / nc as f64;
                        let p = [a, b, c];
                        let v = f(&p);
                        if v < best.1 {
                            best = (p, v);
                        }
                    }
                }
            }
            (best.0, 0.5 * TAU / na as f64)
        }
    };
    let nm = NelderMead {
        tolerance: opts.tolerance,
        max_iterations: opts.max_iterations,
        initial_step: step,
    };
    let m = nm.minimize(f, &start);
    let d = Direction::canonical(m.point[0], m.point[1], m.point[2]);
    Ok((d, clamp_variance(m.value)?, m.converged))
}

/// Least variance of `K⊥` over all directions, for `state` and the tangent
/// frame at `omega`.
pub fn minimize_variance(state: &StateVector, omega: CosetPoint) -> Result<SqueezingResult> {
    minimize_variance_with(&KFamily::new(state.space()), state, omega, &SearchOptions::default())
}

pub fn minimize_variance_with(
    family: &KFamily,
    state: &StateVector,
    omega: CosetPoint,
    opts: &SearchOptions,
) -> Result<SqueezingResult> {
    let form = family.variance_form(state, omega);
    let (best_direction, min_variance, converged) = minimize_form(&form, opts)?;
    Ok(SqueezingResult {
        time: 0.0,
        best_direction,
        min_variance,
        threshold: state.space().lambda() as f64,
        converged,
    })
}

/// Uniform random direction over the canonical parameter box.
pub fn random_direction(rng: &mut impl Rng) -> Direction {
    Direction {
        alpha3: rng.gen_range(0.0..TAU),
        beta3: rng.gen_range(0.0..=PI),
        chi: rng.gen_range(0.0..2.0 * TAU),
    }
}

/// Variance of `K⊥` on `|ω⟩` for `n_samples` seeded random directions.
pub fn isotropy_samples(space: &Arc<IrrepSpace>, omega: CosetPoint, n_samples: usize, seed: u64) -> Result<Vec<(Direction, f64)>> {
    if n_samples == 0 {
        return Err(invalid("isotropy check needs at least one sample"));
    }
    let family = KFamily::new(space);
    let state = coherent_state_closed_form(space, omega);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples)
        .map(|_| {
            let d = random_direction(&mut rng);
            Ok((d, family.direct_variance(&state, omega, d)?))
        })
        .collect()
}

/// `max |Var_ω(K⊥) − λ|` over seeded random directions.
pub fn isotropy_check(space: &Arc<IrrepSpace>, omega: CosetPoint, n_samples: usize, seed: u64) -> Result<f64> {
    let lambda = space.lambda() as f64;
    Ok(isotropy_samples(space, omega, n_samples, seed)?
        .iter()
        .map(|(_, v)| (v - lambda).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::coherent_state;
    use crate::irrep::{enumerate_basis, generator, variance};
    use proptest::prelude::*;
    use rand::Rng;

    fn squeezed_state(space: &Arc<IrrepSpace>) -> (StateVector, CosetPoint) {
        // A non-coherent state: phases quadratic in n1 applied to a coherent state.
        let w = CosetPoint::polar(crate::initial_polar_angle());
        let st = coherent_state(space, w);
        let amps = DVector::from_iterator(
            space.dimension(),
            space
                .basis()
                .iter()
                .zip(st.amplitudes().iter())
                .map(|(s, z)| z * C64::from_polar(1.0, -0.2 * (s.n1 as f64).powi(2))),
        );
        (StateVector::new(space.clone(), amps).unwrap(), w)
    }

    #[test]
    fn special_directions() {
        let s = enumerate_basis(4).unwrap();
        let c13 = &generator(&s, 1, 3).unwrap() + &generator(&s, 3, 1).unwrap();
        assert!(k_operator(&s, Direction::new(0.0, 0.0, 0.0).unwrap()).max_abs_diff(&c13) < 1e-14);
        let c12 = &generator(&s, 1, 2).unwrap() + &generator(&s, 2, 1).unwrap();
        let k = k_operator(&s, Direction::new(0.0, PI, 0.0).unwrap());
        assert!((&k + &c12).max_abs() < 1e-14);
    }

    #[test]
    fn stabilizer_orbit_of_reference_observable() {
        let s = enumerate_basis(3).unwrap();
        let reference = &generator(&s, 1, 3).unwrap() + &generator(&s, 3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let t = crate::group::StabilizerElement::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..PI), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)).unwrap();
            let op = t.operator(&s);
            let moved = &(&op * &reference) * &op.adjoint();
            let k = |chi| k_operator(&s, Direction::canonical(t.alpha3, t.beta3, chi));
            let off = |x: &LinearOperator| x.max_abs_diff(&moved).min((x + &moved).max_abs());
            assert!(off(&k(t.chi())) < 1e-12);
            assert!(off(&k(6.0 * t.gamma1 + t.gamma2)) > 1e-3);
        }
    }

    #[test]
    fn k_is_hermitian() {
        let s = enumerate_basis(20).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let k = k_operator(&s, random_direction(&mut rng));
            assert!(k.max_abs_diff(&k.adjoint()) < 1e-12);
            assert!(k.is_hermitian());
        }
    }

    #[test]
    fn k_perp_at_origin_and_spectrum() {
        let s = enumerate_basis(3).unwrap();
        let d = Direction::new(1.0, 0.4, 2.0).unwrap();
        let k = k_operator(&s, d);
        assert!(k_perp(&s, CosetPoint::origin(), d).max_abs_diff(&k) < 1e-13);
        let kp = k_perp(&s, CosetPoint::new(0.3, 1.0, 2.0, 0.7).unwrap(), d);
        let mut a: Vec<f64> = k.matrix().clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        let mut b: Vec<f64> = kp.matrix().clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn isotropy_on_coherent_states() {
        for (lambda, w) in [(20, CosetPoint::polar(crate::initial_polar_angle())), (5, CosetPoint::origin())] {
            let s = enumerate_basis(lambda).unwrap();
            assert!(isotropy_check(&s, w, 100, 9).unwrap() < 1e-9);
        }
        let s = enumerate_basis(1).unwrap();
        assert!(isotropy_check(&s, CosetPoint::origin(), 1, 0).unwrap() < 1e-9);
        assert!(isotropy_check(&s, CosetPoint::origin(), 0, 0).is_err());
    }

    #[test]
    fn flat_landscape_on_coherent_state() {
        let s = enumerate_basis(10).unwrap();
        let w = CosetPoint::new(0.4, 1.3, 2.2, 0.9).unwrap();
        let form = KFamily::new(&s).variance_form(&coherent_state(&s, w), w);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v: Vec<f64> = (0..1000).map(|_| form.evaluate(random_direction(&mut rng)).unwrap()).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
        assert!(sd < 1e-8 * 10.0);
        let r = minimize_variance(&coherent_state(&s, w), w).unwrap();
        assert!((r.min_variance - 10.0).abs() < 1e-6);
    }

    #[test]
    fn form_agrees_with_dense_variance() {
        let s = enumerate_basis(6).unwrap();
        let (st, w) = squeezed_state(&s);
        let fam = KFamily::new(&s);
        let form = fam.variance_form(&st, w);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let d = random_direction(&mut rng);
            let dense = variance(&st, &k_perp(&s, w, d)).unwrap();
            assert!((form.evaluate(d).unwrap() - dense).abs() < 1e-10);
            assert!((fam.direct_variance(&st, w, d).unwrap() - dense).abs() < 1e-10);
        }
    }

    #[test]
    fn minimum_matches_smallest_covariance_eigenvalue() {
        // Oracle: dense K⊥ components, covariance matrix, smallest eigenvalue.
        let s = enumerate_basis(8).unwrap();
        let (st, w) = squeezed_state(&s);
        let basis = [
            Direction::new(0.0, 0.0, 0.0).unwrap(),
            Direction::new(0.0, 0.0, PI).unwrap(),
            Direction::new(0.0, PI, 0.0).unwrap(),
            Direction::new(PI / 2.0, PI, 0.0).unwrap(),
        ];
        let ops: Vec<LinearOperator> = basis.iter().map(|&d| k_perp(&s, w, d)).collect();
        let psi = st.amplitudes();
        let images: Vec<DVector<C64>> = ops.iter().map(|o| o.apply(psi)).collect();
        let cov = Matrix4::from_fn(|k, l| images[k].dotc(&images[l]).re - psi.dotc(&images[k]).re * psi.dotc(&images[l]).re);
        let oracle = cov.symmetric_eigen().eigenvalues.min();
        let r = minimize_variance(&st, w).unwrap();
        assert!(r.converged);
        assert!((r.min_variance - oracle).abs() < 1e-6, "{} vs {}", r.min_variance, oracle);
        assert!(r.is_squeezed());
    }

    #[test]
    fn refinement_never_exceeds_grid_value() {
        let s = enumerate_basis(5).unwrap();
        let (st, w) = squeezed_state(&s);
        let form = KFamily::new(&s).variance_form(&st, w);
        let coarse = SearchOptions {
            max_iterations: 0,
            ..Default::default()
        };
        let (_, grid_value, _) = minimize_form(&form, &coarse).unwrap();
        let (_, refined, _) = minimize_form(&form, &SearchOptions::default()).unwrap();
        assert!(refined <= grid_value);
    }

    #[test]
    fn canonical_keeps_operator() {
        let s = enumerate_basis(2).unwrap();
        let fam = KFamily::new(&s);
        for (a, b, c) in [(0.3, 4.0, 1.0), (-2.0, 7.5, -3.0), (1.0, -1.0, 20.0)] {
            let d = Direction::canonical(a, b, c);
            assert!((0.0..=PI).contains(&d.beta3));
            let raw = direction_coefficients(a, b, c);
            let canon = d.coefficients();
            for k in 0..4 {
                assert!((raw[k] - canon[k]).abs() < 1e-12);
            }
            let _ = fam.operator(d);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn sign_flip_preserves_variance(a in 0.0..TAU, b in 0.0..PI, c in 0.0..2.0 * TAU) {
            let s = enumerate_basis(4).unwrap();
            let (st, w) = squeezed_state(&s);
            let form = KFamily::new(&s).variance_form(&st, w);
            let v = form.raw(direction_coefficients(a, b, c));
            for (a2, b2, c2) in [(a, b, c + TAU), (a + PI, TAU - b, c), (a, b + TAU, c)] {
                let flipped = direction_coefficients(a2, b2, c2);
                let orig = direction_coefficients(a, b, c);
                for k in 0..4 {
                    prop_assert!((flipped[k] + orig[k]).abs() < 1e-12);
                }
                prop_assert!((form.raw(flipped) - v).abs() < 1e-10);
            }
        }
    }
}
