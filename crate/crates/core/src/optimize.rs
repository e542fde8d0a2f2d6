//! Derivative-free local minimization.

/// Outcome of a Nelder–Mead run.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    /// Stop once the spread of simplex values falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Edge length of the initial simplex along every axis.
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 500,
            initial_step: 0.1,
        }
    }
}

impl NelderMead {
    /// Minimizes `f` from `start`. The best value never increases between
    /// iterations, so the result is no worse than `f(start)`.
    pub fn minimize<F>(&self, mut f: F, start: &[f64]) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let n = start.len();
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(start.to_vec());
        for k in 0..n {
            let mut p = start.to_vec();
            p[k] += self.initial_step;
            simplex.push(p);
        }
        let mut values: Vec<f64> = simplex.iter().map(|p| sanitize(f(p))).collect();

        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iterations {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            if (values[n] - values[0]).abs() <= self.tolerance * (1.0 + values[0].abs()) {
                converged = true;
                break;
            }
            iterations += 1;

            let centroid: Vec<f64> = (0..n)
                .map(|d| simplex[..n].iter().map(|p| p[d]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n])
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let reflected = along(1.0);
            let fr = sanitize(f(&reflected));
            if fr < values[0] {
                let expanded = along(2.0);
                let fe = sanitize(f(&expanded));
                if fe < fr {
                    simplex[n] = expanded;
                    values[n] = fe;
                } else {
                    simplex[n] = reflected;
                    values[n] = fr;
                }
                continue;
            }
            if fr < values[n - 1] {
                simplex[n] = reflected;
                values[n] = fr;
                continue;
            }
            let (contracted, fc) = if fr < values[n] {
                let p = along(0.5);
                let v = sanitize(f(&p));
                (p, v)
            } else {
                let p = along(-0.5);
                let v = sanitize(f(&p));
                (p, v)
            };
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
                continue;
            }
            let best = simplex[0].clone();
            for k in 1..=n {
                for d in 0..n {
                    simplex[k][d] = best[d] + 0.5 * (simplex[k][d] - best[d]);
                }
                values[k] = sanitize(f(&simplex[k]));
            }
        }

        let (k, _) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty simplex");
        Minimum {
            point: simplex[k].clone(),
            value: values[k],
            iterations,
            converged,
        }
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}
