//! Quasi-Newton (BFGS) minimization with central finite-difference
//! gradients, for the outer parameter problem.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// How an evaluation is used; accepted points may update caller caches
/// (warm starts), probes must not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalKind {
    Accepted,
    Probe,
}

#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    /// Stop when the objective improves by less than `tol_rel * (1 + |f|)`.
    pub tol_rel: f64,
    /// Hard cap on objective evaluations (gradients included).
    pub max_evals: usize,
    /// Relative step for central differences: `h = fd_step * (1 + |x|)`.
    pub fd_step: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions { tol_rel: 1e-6, max_evals: 500, fd_step: 1e-4 }
    }
}

/// Largest per-component trial step in unconstrained space (log-scale
/// parameters move by at most a factor e^2 per line-search start).
const MAX_STEP: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub n_evals: usize,
    pub converged: bool,
}

struct Counted<'a> {
    func: &'a mut dyn FnMut(&[f64], EvalKind) -> Result<f64>,
    n_evals: usize,
}

impl<'a> Counted<'a> {
    fn eval(&mut self, x: &[f64], kind: EvalKind) -> Result<f64> {
        self.n_evals += 1;
        (self.func)(x, kind)
    }

    /// Re-tags an already-probed point as accepted; callers cache the last
    /// probe so this does not cost a fresh objective evaluation.
    fn notify_accept(&mut self, x: &[f64]) -> Result<f64> {
        (self.func)(x, EvalKind::Accepted)
    }
}

fn fd_gradient(c: &mut Counted<'_>, x: &[f64], f0: f64, step: f64) -> Result<Vec<f64>> {
    let n = x.len();
    let mut g = vec![0.0; n];
    for i in 0..n {
        let mut h = step * (1.0 + x[i].abs());
        let mut done = false;
        for _ in 0..4 {
            let mut up = x.to_vec();
            up[i] += h;
            let mut dn = x.to_vec();
            dn[i] -= h;
            let fu = c.eval(&up, EvalKind::Probe);
            let fd = c.eval(&dn, EvalKind::Probe);
            match (fu, fd) {
                (Ok(a), Ok(b)) if a.is_finite() && b.is_finite() => {
                    g[i] = (a - b) / (2.0 * h);
                    done = true;
                    break;
                }
                (Ok(a), _) if a.is_finite() => {
                    g[i] = (a - f0) / h;
                    done = true;
                    break;
                }
                (_, Ok(b)) if b.is_finite() => {
                    g[i] = (f0 - b) / h;
                    done = true;
                    break;
                }
                _ => h *= 0.1,
            }
        }
        if !done {
            return Err(Error::Numerical(format!(
                "objective not evaluable near component {i} for the gradient"
            )));
        }
    }
    Ok(g)
}

/// BFGS with backtracking line search. The objective may fail (or return
/// non-finite values) away from the feasible region; such trials are
/// treated as rejected steps.
pub fn minimize_bfgs(
    func: &mut dyn FnMut(&[f64], EvalKind) -> Result<f64>,
    x0: &[f64],
    opts: &OptimOptions,
) -> Result<OptimResult> {
    let n = x0.len();
    let mut c = Counted { func, n_evals: 0 };
    let f0 = c.eval(x0, EvalKind::Accepted)?;
    if !f0.is_finite() {
        return Err(Error::NonFinite("objective at the initial point".into()));
    }
    if n == 0 {
        return Ok(OptimResult { x: vec![], f: f0, iterations: 0, n_evals: 1, converged: true });
    }

    let mut x = x0.to_vec();
    let mut f = f0;
    let mut g = fd_gradient(&mut c, &x, f, opts.fd_step)?;
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;
    let mut converged = false;
    let mut small_steps = 0;

    while c.n_evals < opts.max_evals {
        iterations += 1;
        let gv = DVector::from_column_slice(&g);
        let mut p = -(&h_inv * &gv);
        let mut slope = p.dot(&gv);
        let mut steepest = false;
        if !(slope < 0.0) {
            // stale curvature; restart from steepest descent
            h_inv = DMatrix::identity(n, n);
            p = -gv.clone();
            slope = p.dot(&gv);
            steepest = true;
            if !(slope < 0.0) {
                converged = true; // zero gradient
                break;
            }
        }
        // cap the trial step so the line search starts from a sane scale
        let p_max = p.amax();
        if p_max > MAX_STEP {
            p *= MAX_STEP / p_max;
            slope = p.dot(&gv);
        }

        // backtracking line search
        let mut t = 1.0_f64;
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<f64> = (0..n).map(|i| x[i] + t * p[i]).collect();
            match c.eval(&trial, EvalKind::Probe) {
                Ok(ft) if ft.is_finite() && ft <= f + 1e-4 * t * slope => {
                    accepted = Some((trial, ft));
                    break;
                }
                _ => t *= 0.5,
            }
            if c.n_evals >= opts.max_evals {
                break;
            }
        }
        if accepted.is_none() && !steepest {
            // retry once along the raw gradient before concluding we are
            // at the numerical floor
            h_inv = DMatrix::identity(n, n);
            let mut t = 1.0_f64 / (1.0 + g.iter().map(|v| v * v).sum::<f64>().sqrt());
            for _ in 0..30 {
                let trial: Vec<f64> = (0..n).map(|i| x[i] - t * g[i]).collect();
                match c.eval(&trial, EvalKind::Probe) {
                    Ok(ft) if ft.is_finite() && ft < f => {
                        accepted = Some((trial, ft));
                        break;
                    }
                    _ => t *= 0.5,
                }
                if c.n_evals >= opts.max_evals {
                    break;
                }
            }
        }
        let Some((x_new, f_new)) = accepted else {
            // not even steepest descent improves: the numerical floor
            converged = true;
            break;
        };
        // register the accepted point (lets the caller refresh warm starts)
        let _ = c.notify_accept(&x_new)?;

        let improvement = f - f_new;
        if improvement <= opts.tol_rel * (1.0 + f.abs()) {
            small_steps += 1;
        } else {
            small_steps = 0;
        }

        let g_new = fd_gradient(&mut c, &x_new, f_new, opts.fd_step)?;
        let s = DVector::from_iterator(n, (0..n).map(|i| x_new[i] - x[i]));
        let yv = DVector::from_iterator(n, (0..n).map(|i| g_new[i] - g[i]));
        let sy = s.dot(&yv);
        if sy > 1e-10 * s.norm() * yv.norm() {
            // BFGS inverse update
            let rho = 1.0 / sy;
            let hy = &h_inv * &yv;
            let yhy = yv.dot(&hy);
            h_inv += (sy + yhy) * rho * rho * (&s * s.transpose())
                - rho * (&hy * s.transpose() + &s * hy.transpose());
        }
        x = x_new;
        f = f_new;
        g = g_new;
        if small_steps >= 2 {
            converged = true;
            break;
        }
    }

    Ok(OptimResult { x, f, iterations, n_evals: c.n_evals, converged })
}

/// Central finite-difference Hessian (for observed-information standard
/// errors). Uses `2 n (n + 1)` probe evaluations.
pub fn fd_hessian(
    func: &mut dyn FnMut(&[f64], EvalKind) -> Result<f64>,
    x: &[f64],
    fd_step: f64,
) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut c = Counted { func, n_evals: 0 };
    let f0 = c.eval(x, EvalKind::Probe)?;
    let steps: Vec<f64> = x.iter().map(|&v| fd_step * (1.0 + v.abs())).collect();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut up = x.to_vec();
        up[i] += steps[i];
        let mut dn = x.to_vec();
        dn[i] -= steps[i];
        let fu = c.eval(&up, EvalKind::Probe)?;
        let fd = c.eval(&dn, EvalKind::Probe)?;
        h[(i, i)] = (fu - 2.0 * f0 + fd) / (steps[i] * steps[i]);
    }
    for i in 0..n {
        for j in 0..i {
            let mut pp = x.to_vec();
            pp[i] += steps[i];
            pp[j] += steps[j];
            let mut pm = x.to_vec();
            pm[i] += steps[i];
            pm[j] -= steps[j];
            let mut mp = x.to_vec();
            mp[i] -= steps[i];
            mp[j] += steps[j];
            let mut mm = x.to_vec();
            mm[i] -= steps[i];
            mm[j] -= steps[j];
            let v = (c.eval(&pp, EvalKind::Probe)? - c.eval(&pm, EvalKind::Probe)?
                - c.eval(&mp, EvalKind::Probe)?
                + c.eval(&mm, EvalKind::Probe)?)
                / (4.0 * steps[i] * steps[j]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn minimizes_rosenbrock() {
        let mut f = |x: &[f64], _: EvalKind| -> Result<f64> {
            Ok((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2))
        };
        let res = minimize_bfgs(
            &mut f,
            &[-1.2, 1.0],
            &OptimOptions { tol_rel: 1e-12, max_evals: 2000, fd_step: 1e-5 },
        )
        .unwrap();
        assert!(res.converged);
        assert_relative_eq!(res.x[0], 1.0, epsilon = 1e-3);
        assert_relative_eq!(res.x[1], 1.0, epsilon = 1e-3);
    }

    #[test]
    fn quadratic_with_failing_region() {
        // objective undefined for x0 > 2; minimum at (1, -1)
        let mut f = |x: &[f64], _: EvalKind| -> Result<f64> {
            if x[0] > 2.0 {
                Err(Error::Numerical("outside".into()))
            } else {
                Ok((x[0] - 1.0).powi(2) + (x[1] + 1.0).powi(2))
            }
        };
        let res = minimize_bfgs(&mut f, &[0.0, 0.0], &OptimOptions::default()).unwrap();
        assert!(res.converged);
        assert_relative_eq!(res.x[0], 1.0, epsilon = 1e-4);
        assert_relative_eq!(res.x[1], -1.0, epsilon = 1e-4);
    }

    #[test]
    fn zero_dimensional_problem_returns_immediately() {
        let mut f = |_: &[f64], _: EvalKind| Ok(42.0);
        let res = minimize_bfgs(&mut f, &[], &OptimOptions::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.f, 42.0);
        assert_eq!(res.n_evals, 1);
    }

    #[test]
    fn fd_hessian_of_quadratic() {
        let a = [[3.0, 0.5], [0.5, 2.0]];
        let mut f = |x: &[f64], _: EvalKind| -> Result<f64> {
            Ok(0.5
                * (a[0][0] * x[0] * x[0]
                    + 2.0 * a[0][1] * x[0] * x[1]
                    + a[1][1] * x[1] * x[1]))
        };
        let h = fd_hessian(&mut f, &[0.3, -0.7], 1e-4).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(h[(i, j)], a[i][j], max_relative = 1e-5);
            }
        }
    }
}
