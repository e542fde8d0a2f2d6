//! Acceptance suite. Each criterion prints one PASS/FAIL line; the binary
//! exits non-zero when any criterion fails. Pass criterion numbers as
//! arguments to run a subset, e.g. `cargo test --test acceptance -- 4 7`.

use std::f64::consts::{PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Matrix3};
use qutrit_squeeze::evolution::{
    default_window, find_minimum, scaling_study, squeezing_curve, time_grid, CurveOptions, DEFAULT_LAMBDAS,
    DEFAULT_STEPS,
};
use qutrit_squeeze::group::{act_on_coset, coherent_state, coherent_state_closed_form, displacement, qutrit_displacement, CosetPoint, StabilizerElement};
use qutrit_squeeze::irrep::{cartan, commutator, generator, Cartan, IrrepSpace, LinearOperator};
use qutrit_squeeze::kernel::{
    build_invariant_tensors, build_quadrature, gaussian_amplitude, symbol, traciality_checks, wigner_of_state, HighestWeightProfile,
    WignerKernel,
};
use qutrit_squeeze::semiclassical::{
    flow_consistency_check, semiclassical_curve_with_kernel, wigner_slice, Backend, SemiclassicalOptions, SliceEvolution,
};
use qutrit_squeeze::squeezing::isotropy_samples;
use qutrit_squeeze::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one criterion: pass flag and a one-line summary.
type Outcome = (bool, String);

fn random_point(rng: &mut impl Rng) -> CosetPoint {
    CosetPoint::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..PI), rng.gen_range(0.0..TAU), rng.gen_range(0.0..PI)).unwrap()
}

fn random_hermitian(space: &Arc<IrrepSpace>, rng: &mut impl Rng) -> LinearOperator {
    let n = space.dimension();
    let m = DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    LinearOperator::new(space.clone(), (&m + m.adjoint()) * C64::new(0.5, 0.0)).unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for lambda in [1u32, 5, 10] {
        let s = IrrepSpace::new(lambda).unwrap();
        let c: Vec<Vec<LinearOperator>> = (1..=3).map(|i| (1..=3).map(|j| generator(&s, i, j).unwrap()).collect()).collect();
        let zero = LinearOperator::identity(&s).scale(C64::new(0.0, 0.0));
        for i in 0..3 {
            for j in 0..3 {
                // C_ij† = C_ji
                worst = worst.max(c[i][j].adjoint().max_abs_diff(&c[j][i]));
                for k in 0..3 {
                    for l in 0..3 {
                        // [C_ij, C_kl] = δ_jk C_il − δ_il C_kj
                        let mut rhs = zero.clone();
                        if j == k {
                            rhs = &rhs + &c[i][l];
                        }
                        if i == l {
                            rhs = &rhs - &c[k][j];
                        }
                        worst = worst.max(commutator(&c[i][j], &c[k][l]).unwrap().max_abs_diff(&rhs));
                    }
                }
            }
        }
        let l = lambda as f64;
        let h1 = &(&c[0][0].scale(C64::new(2.0, 0.0)) - &c[1][1]) - &c[2][2];
        worst = worst.max(h1.max_abs_diff(&cartan(&s, Cartan::H1)));
        worst = worst.max((&c[1][1] - &c[2][2]).max_abs_diff(&cartan(&s, Cartan::H2)));
        let number = &(&c[0][0] + &c[1][1]) + &c[2][2];
        worst = worst.max(number.max_abs_diff(&LinearOperator::identity(&s).scale(C64::new(l, 0.0))));
        let mut casimir = zero.clone();
        for i in 0..3 {
            for j in 0..3 {
                casimir = &casimir + &(&c[i][j] * &c[j][i]);
            }
        }
        worst = worst.max(casimir.max_abs_diff(&LinearOperator::identity(&s).scale(C64::new(l * (l + 2.0), 0.0))));
        // D† C_ij D = Σ conj(U_ia) U_jb C_ab
        for _ in 0..5 {
            let w = random_point(&mut rng);
            let d = displacement(&s, w).to_dense();
            let u = qutrit_displacement(w);
            for i in 0..3 {
                for j in 0..3 {
                    let lhs = &(&d.adjoint() * &c[i][j]) * &d;
                    let mut rhs = zero.clone();
                    for a in 0..3 {
                        for b in 0..3 {
                            rhs = &rhs + &c[a][b].scale(u[(i, a)].conj() * u[(j, b)]);
                        }
                    }
                    worst = worst.max(lhs.max_abs_diff(&rhs));
                }
            }
        }
    }
    (worst < 1e-12, format!("max elementwise error {worst:.2e} (tol 1e-12)"))
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for lambda in [1u32, 5, 20] {
        let s = IrrepSpace::new(lambda).unwrap();
        for _ in 0..200 {
            let w = random_point(&mut rng);
            worst = worst.max(coherent_state(&s, w).ray_distance(&coherent_state_closed_form(&s, w)));
        }
    }
    (worst < 1e-10, format!("max ray distance {worst:.2e} over 600 points (tol 1e-10)"))
}

fn criterion_3() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for lambda in [5u32, 20] {
        let s = IrrepSpace::new(lambda).unwrap();
        for trial in 0..5 {
            let w = random_point(&mut rng);
            for (_, v) in isotropy_samples(&s, w, 100, 1000 + trial).unwrap() {
                worst = worst.max((v - lambda as f64).abs());
            }
        }
    }
    (worst < 1e-9, format!("max |Var - lambda| {worst:.2e} (tol 1e-9)"))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let curve = in_pool(1, || squeezing_curve(20, default_window(20), DEFAULT_STEPS, &CurveOptions::default())).unwrap();
    let elapsed = start.elapsed();
    let v0 = curve.min_variances[0];
    let lowest = curve.min_variances.iter().cloned().fold(f64::INFINITY, f64::min);
    let minimum = curve.find_minimum();
    let starts = (v0 - 20.0).abs() < 1e-6;
    let dips = lowest < 20.0;
    let located = matches!(minimum, Ok((t, _)) if (t - 0.015).abs() <= 0.003);
    let fast = elapsed < Duration::from_secs(60);
    let (t, v) = minimum.unwrap_or((f64::NAN, f64::NAN));
    (
        starts && dips && located && fast,
        format!("v(0) = {v0:.9}, t_min = {t:.6}, v_min = {v:.6}, {:.2} s single-threaded", elapsed.as_secs_f64()),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let study = in_pool(8, || scaling_study(&DEFAULT_LAMBDAS, DEFAULT_STEPS, &CurveOptions::default()));
    let elapsed = start.elapsed();
    match study {
        Ok(s) => {
            let ok_t = (s.exponent_t + 9.0 / 11.0).abs() <= 0.15;
            let ok_v = (s.exponent_v + 1.0 / 3.0).abs() <= 0.10;
            let fast = elapsed < Duration::from_secs(20 * 60);
            (
                ok_t && ok_v && fast,
                format!(
                    "t_min exponent {:.4} (target -0.8182 ± 0.15), v_min/lambda exponent {:.4} (target -0.3333 ± 0.10), {:.1} s",
                    s.exponent_t,
                    s.exponent_v,
                    elapsed.as_secs_f64()
                ),
            )
        }
        Err(e) => (false, format!("scaling study failed: {e}")),
    }
}

fn criterion_6() -> Outcome {
    let lambda = 4;
    let k = WignerKernel::new(lambda).unwrap();
    let s = k.space().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let id = LinearOperator::identity(&s);
    let identity = (0..100)
        .map(|_| (symbol(&k, &id, random_point(&mut rng)).unwrap() - 1.0).norm())
        .fold(0.0, f64::max);

    let t = build_invariant_tensors(lambda).unwrap();
    let mut ortho: f64 = 0.0;
    for a in 0..t.len() {
        for b in 0..t.len() {
            let expect = if a == b { 1.0 } else { 0.0 };
            ortho = ortho.max((t.operator(a).compose(&t.operator(b)).unwrap().trace().re - expect).abs());
        }
    }

    let x = random_hermitian(&s, &mut rng);
    let mut covariance: f64 = 0.0;
    for _ in 0..50 {
        let r = random_point(&mut rng);
        let w = random_point(&mut rng);
        let a = symbol(&k, &displacement(&s, r).conjugate(&x), w).unwrap();
        let b = symbol(&k, &x, act_on_coset(&qutrit_displacement(r).adjoint(), w)).unwrap();
        covariance = covariance.max((a - b).norm());
    }

    let pairs: Vec<(LinearOperator, LinearOperator)> = (0..20).map(|_| (random_hermitian(&s, &mut rng), random_hermitian(&s, &mut rng))).collect();
    let grid = build_quadrature(18, 10).unwrap();
    let coarse = traciality_checks(&k, &grid, &pairs).unwrap().into_iter().fold(0.0, f64::max);
    let fine = traciality_checks(&k, &grid.refined(), &pairs).unwrap().into_iter().fold(0.0, f64::max);
    let traciality = coarse.max(fine);

    // U(2) invariance: depends on β2 only and is fixed by the stabilizer
    let hw = coherent_state(&s, CosetPoint::origin());
    let one = IrrepSpace::new(1).unwrap();
    let mut invariance: f64 = 0.0;
    for _ in 0..50 {
        let w = random_point(&mut rng);
        let base = wigner_of_state(&k, &hw, w).unwrap();
        let h = StabilizerElement::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..PI), rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU))
            .unwrap()
            .operator(&one);
        let h3 = Matrix3::from_fn(|r, c| h.matrix()[(r, c)]);
        invariance = invariance.max((wigner_of_state(&k, &hw, act_on_coset(&h3, w)).unwrap() - base).abs());
        let reslice = CosetPoint::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..PI), rng.gen_range(0.0..TAU), w.beta2).unwrap();
        invariance = invariance.max((wigner_of_state(&k, &hw, reslice).unwrap() - base).abs());
    }

    let ok = identity < 1e-10 && ortho < 1e-10 && covariance < 1e-8 && traciality < 1e-3 && invariance < 1e-8;
    (
        ok,
        format!(
            "identity {identity:.1e}, orthonormality {ortho:.1e}, covariance {covariance:.1e}, traciality {coarse:.1e}/{fine:.1e} (grid/refined), U(2) invariance {invariance:.1e}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let lambda = 20;
    let k = WignerKernel::new(lambda).unwrap();
    let profile = HighestWeightProfile::new(&k);
    let peak = profile.peak();
    let a = gaussian_amplitude(lambda);
    let mut worst: f64 = 0.0;
    let mut at = 0.0;
    for i in 0..=20_000 {
        let b = PI * i as f64 / 20_000.0;
        let w = profile.eval(b.cos());
        if w > 0.01 * peak {
            let g = a * (lambda as f64 * (b.cos() - 1.0)).exp();
            let rel = (w - g).abs() / w;
            if rel > worst {
                worst = rel;
                at = b;
            }
        }
    }
    (worst < 0.05, format!("max relative deviation {:.2}% at beta2 = {at:.4} (peak {peak:.4}, A = {a:.4}, tol 5%)", 100.0 * worst))
}

fn criterion_8() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let k20 = WignerKernel::new(20).unwrap();
    let flow = flow_consistency_check(&k20, &build_quadrature(6, 8).unwrap()).unwrap();
    ok &= flow.residual < 1e-4;
    notes.push(format!("flow residual {:.1e}", flow.residual));

    let mut depth_gap = Vec::new();
    for lambda in [10u32, 20, 40] {
        let quantum = squeezing_curve(lambda, default_window(lambda), DEFAULT_STEPS, &CurveOptions::default()).unwrap();
        let (tq, vq) = quantum.find_minimum().unwrap();
        let k = if lambda == 20 { k20.clone() } else { WignerKernel::new(lambda).unwrap() };
        let times = time_grid(default_window(lambda), DEFAULT_STEPS).unwrap();
        let sc = semiclassical_curve_with_kernel(&k, Backend::ExactKernel, &times, &SemiclassicalOptions::for_lambda(lambda)).unwrap();
        let drift = sc.normalization.iter().map(|n| (n - sc.normalization[0]).abs()).fold(0.0, f64::max);
        let v0 = sc.curve.min_variances[0];
        ok &= drift < 1e-6 && (v0 - lambda as f64).abs() < 0.01 * lambda as f64;
        match find_minimum(&sc.curve.times, &sc.curve.min_variances) {
            Ok((ts, vs)) => {
                let gap = (vs - vq).abs() / vq;
                if lambda == 20 {
                    ok &= gap <= 0.25 && (ts - tq).abs() / tq <= 0.5;
                }
                notes.push(format!(
                    "lambda {lambda}: v(0) {v0:.4}, norm drift {drift:.1e}, min {vs:.4} at {ts:.5} vs quantum {vq:.4} at {tq:.5}"
                ));
                depth_gap.push(gap);
            }
            Err(e) => {
                ok = false;
                notes.push(format!("lambda {lambda}: no semiclassical minimum ({e})"));
            }
        }
    }
    let monotone = depth_gap.len() == 3 && depth_gap.windows(2).all(|w| w[1] < w[0]);
    ok &= monotone;
    notes.push(format!(
        "depth gaps {}",
        depth_gap.iter().map(|g| format!("{:.1}%", 100.0 * g)).collect::<Vec<_>>().join(" > ")
    ));
    (ok, notes.join("; "))
}

fn criterion_9() -> Outcome {
    let k = Arc::new(WignerKernel::new(20).unwrap());
    let n = 48;
    let mut ok = true;
    let mut notes = Vec::new();
    for t in [0.008, 0.015] {
        let q = wigner_slice(&k, SliceEvolution::Quantum, t, n).unwrap();
        let c = wigner_slice(&k, SliceEvolution::Classical(Backend::ExactKernel), t, n).unwrap();
        let qmin = q.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
        let cmin = c.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
        ok &= qmin < 0.0 && cmin >= -1e-9;
        notes.push(format!("t = {t}: quantum min {qmin:.3e}, classical min {cmin:.3e}"));
    }
    (ok, notes.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let (ok, detail) = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        println!("criterion {id}: {} | {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
