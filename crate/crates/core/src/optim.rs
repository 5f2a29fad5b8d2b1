//! Derivative-free minimization (Nelder-Mead) used by every calibration.
//!
//! Objectives may return `f64::INFINITY` (or NaN) for infeasible points; such
//! vertices are treated as worst and the simplex contracts away from them.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Converged when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// Converged when the simplex diameter falls below this.
    pub x_tol: f64,
    /// Initial simplex edge length per coordinate.
    pub step: f64,
    /// Number of restarts from the best vertex after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_evals: 2000, f_tol: 1e-10, x_tol: 1e-8, step: 0.25, restarts: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimize `f` starting from `x0`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let mut best_x = x0.to_vec();
    let mut best_v = sanitize(f(&best_x));
    let mut evals = 1;
    let mut converged = false;
    for round in 0..=opts.restarts {
        if evals >= opts.max_evals {
            break;
        }
        let step = if round == 0 { opts.step } else { opts.step * 0.5f64.powi(round as i32) };
        let (x, v, used, conv) =
            run_simplex(&mut f, &best_x, best_v, step, opts, opts.max_evals - evals);
        evals += used;
        let improved = v < best_v - opts.f_tol.max(1e-14 * best_v.abs());
        if v <= best_v {
            best_x = x;
            best_v = v;
        }
        converged = conv;
        if round > 0 && !improved {
            break;
        }
    }
    Minimum { x: best_x, value: best_v, evals, converged }
}

fn run_simplex<F>(
    f: &mut F,
    x0: &[f64],
    f0: f64,
    step: f64,
    opts: &NelderMeadOptions,
    budget: usize,
) -> (Vec<f64>, f64, usize, bool)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    values.push(f0);
    let mut evals = 0;
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        values.push(sanitize(f(&x)));
        simplex.push(x);
        evals += 1;
    }

    let mut converged = false;
    while evals < budget {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = (values[n] - values[0]).abs();
        let diameter = simplex[1..]
            .iter()
            .map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= opts.f_tol && diameter <= opts.x_tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for x in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let along = |coef: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n]).map(|(c, w)| c + coef * (c - w)).collect()
        };

        let xr = along(alpha);
        let fr = sanitize(f(&xr));
        evals += 1;
        if fr < values[0] {
            let xe = along(gamma);
            let fe = sanitize(f(&xe));
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(rho);
            let fc = sanitize(f(&xc));
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = sanitize(f(&xc));
            (xc, fc)
        };
        evals += 1;
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        for i in 1..=n {
            let shrunk: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, x)| b + sigma * (x - b))
                .collect();
            values[i] = sanitize(f(&shrunk));
            simplex[i] = shrunk;
            evals += 1;
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    (simplex[best].clone(), values[best], evals, converged)
}

/// Levenberg-Marquardt on a residual vector with central-difference
/// Jacobians. `residuals` returns `None` at infeasible points. Stops after
/// `max_evals` residual evaluations or when the step stalls.
pub fn levenberg_marquardt<F>(mut residuals: F, x0: &[f64], max_evals: usize) -> Minimum
where
    F: FnMut(&[f64]) -> Option<Vec<f64>>,
{
    let n = x0.len();
    let sq = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let mut x = x0.to_vec();
    let mut evals = 1;
    let Some(mut r) = residuals(&x) else {
        return Minimum { x, value: f64::INFINITY, evals, converged: false };
    };
    let mut cost = sq(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    'outer: while evals + 2 * n < max_evals {
        let m = r.len();
        let mut jac = vec![vec![0.0; n]; m];
        for j in 0..n {
            // central differences keep the Jacobian clean when residuals carry
            // quadrature noise
            let h = 1e-4 * x[j].abs().max(1.0);
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += h;
            xm[j] -= h;
            evals += 2;
            let (Some(rp), Some(rm)) = (residuals(&xp), residuals(&xm)) else { break 'outer };
            for i in 0..m {
                jac[i][j] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let mut jtj = vec![vec![0.0; n]; n];
        let mut jtr = vec![0.0; n];
        for i in 0..m {
            for a in 0..n {
                jtr[a] += jac[i][a] * r[i];
                for b in 0..n {
                    jtj[a][b] += jac[i][a] * jac[i][b];
                }
            }
        }
        loop {
            if evals >= max_evals {
                break 'outer;
            }
            let mut sys = jtj.clone();
            for a in 0..n {
                sys[a][a] += lambda * jtj[a][a].max(1e-12);
            }
            let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(step) = solve(sys, rhs) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            evals += 1;
            match residuals(&trial) {
                Some(rt) if sq(&rt) < cost => {
                    let gain = cost - sq(&rt);
                    x = trial;
                    r = rt;
                    cost = sq(&r);
                    lambda = (lambda / 3.0).max(1e-12);
                    if gain <= 1e-14 * cost.max(1e-300) || step.iter().all(|s| s.abs() < 1e-12) {
                        converged = true;
                        break 'outer;
                    }
                    break;
                }
                _ => {
                    lambda *= 4.0;
                    if lambda > 1e10 {
                        converged = true;
                        break 'outer;
                    }
                }
            }
        }
    }
    Minimum { x, value: cost, evals, converged }
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if !(a[p][c].abs() > 1e-300) {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for i in c + 1..n {
            let f = a[i][c] / a[c][c];
            for k in c..n {
                a[i][k] -= f * a[c][k];
            }
            b[i] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
