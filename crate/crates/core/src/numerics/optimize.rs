//! Derivative-free simplex minimization (Nelder–Mead).
//!
//! Used for the Matérn likelihood search over log-parameters. Works from
//! dimension 1 upward; rejected candidates may return `f64::INFINITY`.

/// Standard Nelder–Mead with reflection, expansion, contraction and shrink.
#[derive(Debug, Clone)]
pub struct NelderMead {
    /// Absolute spread of function values at which the simplex is converged.
    pub ftol: f64,
    /// Maximum coordinate spread at which the simplex is converged.
    pub xtol: f64,
    pub max_iters: usize,
    /// Initial step added to each coordinate to build the starting simplex.
    pub init_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            ftol: 1e-9,
            xtol: 1e-9,
            max_iters: 400,
            init_step: 0.7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iters: usize,
    pub n_evals: usize,
    pub converged: bool,
}

impl NelderMead {
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> SimplexResult {
        let dim = x0.len();
        assert!(dim >= 1, "need at least one parameter");
        let mut n_evals = 0usize;
        let mut eval = |x: &[f64], n: &mut usize| {
            *n += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        let fx0 = eval(x0, &mut n_evals);
        simplex.push((x0.to_vec(), fx0));
        for i in 0..dim {
            let mut xi = x0.to_vec();
            xi[i] += self.init_step;
            let fi = eval(&xi, &mut n_evals);
            simplex.push((xi, fi));
        }

        let mut iters = 0;
        let mut converged = false;
        while iters < self.max_iters {
            iters += 1;
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let f_best = simplex[0].1;
            let f_worst = simplex[dim].1;
            let x_spread = (0..dim)
                .map(|i| {
                    let lo = simplex.iter().map(|(x, _)| x[i]).fold(f64::INFINITY, f64::min);
                    let hi = simplex
                        .iter()
                        .map(|(x, _)| x[i])
                        .fold(f64::NEG_INFINITY, f64::max);
                    hi - lo
                })
                .fold(0.0f64, f64::max);
            if (f_worst - f_best).abs() <= self.ftol * (1.0 + f_best.abs()) && x_spread <= self.xtol
            {
                converged = true;
                break;
            }

            // centroid of all but the worst
            let mut centroid = vec![0.0; dim];
            for (x, _) in simplex.iter().take(dim) {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / dim as f64;
                }
            }
            let worst = simplex[dim].clone();
            let reflect: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + (c - w))
                .collect();
            let f_reflect = eval(&reflect, &mut n_evals);

            if f_reflect < simplex[0].1 {
                let expand: Vec<f64> = centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| c + 2.0 * (c - w))
                    .collect();
                let f_expand = eval(&expand, &mut n_evals);
                simplex[dim] = if f_expand < f_reflect {
                    (expand, f_expand)
                } else {
                    (reflect, f_reflect)
                };
            } else if f_reflect < simplex[dim - 1].1 {
                simplex[dim] = (reflect, f_reflect);
            } else {
                let contract: Vec<f64> = if f_reflect < worst.1 {
                    centroid
                        .iter()
                        .zip(&reflect)
                        .map(|(c, r)| c + 0.5 * (r - c))
                        .collect()
                } else {
                    centroid
                        .iter()
                        .zip(&worst.0)
                        .map(|(c, w)| c + 0.5 * (w - c))
                        .collect()
                };
                let f_contract = eval(&contract, &mut n_evals);
                if f_contract < worst.1.min(f_reflect) {
                    simplex[dim] = (contract, f_contract);
                } else {
                    // shrink toward the best vertex
                    let best = simplex[0].0.clone();
                    for entry in simplex.iter_mut().skip(1) {
                        let x: Vec<f64> = best
                            .iter()
                            .zip(&entry.0)
                            .map(|(b, x)| b + 0.5 * (x - b))
                            .collect();
                        let fx = eval(&x, &mut n_evals);
                        *entry = (x, fx);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        SimplexResult {
            x: simplex[0].0.clone(),
            fx: simplex[0].1,
            iters,
            n_evals,
            converged,
        }
    }
}
