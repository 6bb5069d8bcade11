//! Small dense helpers shared by the softmax models.

/// Numerically stable in-place softmax.
pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

pub(crate) fn softmax<const K: usize>(z: [f64; K]) -> [f64; K] {
    let mut out = z;
    softmax_in_place(&mut out);
    out
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `a x = b` for a symmetric positive definite `a` (row-major, n×n)
/// by Cholesky factorisation. Returns `None` if `a` is not positive definite.
pub(crate) fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// Limited-memory BFGS minimiser with a backtracking Armijo line search.
///
/// `f` returns the objective and writes the gradient; iteration stops when the
/// gradient max-norm drops below `tol` or after `max_iter` iterations.
pub(crate) struct Lbfgs {
    pub memory: usize,
    pub max_iter: usize,
    pub tol: f64,
}

pub(crate) struct LbfgsOutcome {
    pub iterations: usize,
    pub converged: bool,
}

impl Lbfgs {
    pub fn minimize<F>(&self, x: &mut [f64], mut f: F) -> LbfgsOutcome
    where
        F: FnMut(&[f64], &mut [f64]) -> f64,
    {
        let n = x.len();
        let mut g = vec![0.0; n];
        let mut fx = f(x, &mut g);
        let mut s_hist: Vec<Vec<f64>> = Vec::new();
        let mut y_hist: Vec<Vec<f64>> = Vec::new();
        let mut rho_hist: Vec<f64> = Vec::new();
        let mut x_new = vec![0.0; n];
        let mut g_new = vec![0.0; n];

        for iter in 0..self.max_iter {
            let gn = max_abs(&g);
            if gn < self.tol {
                return LbfgsOutcome {
                    iterations: iter,
                    converged: true,
                };
            }
            // two-loop recursion
            let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
            let m = s_hist.len();
            let mut alpha = vec![0.0; m];
            for i in (0..m).rev() {
                alpha[i] = rho_hist[i] * dot(&s_hist[i], &d);
                for (dj, yj) in d.iter_mut().zip(&y_hist[i]) {
                    *dj -= alpha[i] * yj;
                }
            }
            if m > 0 {
                let gamma = dot(&s_hist[m - 1], &y_hist[m - 1]) / dot(&y_hist[m - 1], &y_hist[m - 1]);
                d.iter_mut().for_each(|v| *v *= gamma);
            } else {
                let scale = 1.0 / gn.max(1.0);
                d.iter_mut().for_each(|v| *v *= scale);
            }
            for i in 0..m {
                let beta = rho_hist[i] * dot(&y_hist[i], &d);
                for (dj, sj) in d.iter_mut().zip(&s_hist[i]) {
                    *dj += (alpha[i] - beta) * sj;
                }
            }
            let mut slope = dot(&g, &d);
            if slope >= 0.0 {
                // not a descent direction; fall back to steepest descent
                d = g.iter().map(|v| -v).collect();
                slope = dot(&g, &d);
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
            }

            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                for i in 0..n {
                    x_new[i] = x[i] + step * d[i];
                }
                let f_new = f(&x_new, &mut g_new);
                if f_new <= fx + 1e-4 * step * slope {
                    let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
                    let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
                    let sy = dot(&s, &y);
                    if sy > f64::EPSILON * dot(&y, &y) {
                        if s_hist.len() == self.memory {
                            s_hist.remove(0);
                            y_hist.remove(0);
                            rho_hist.remove(0);
                        }
                        s_hist.push(s);
                        y_hist.push(y);
                        rho_hist.push(1.0 / sy);
                    }
                    x.copy_from_slice(&x_new);
                    g.copy_from_slice(&g_new);
                    fx = f_new;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                return LbfgsOutcome {
                    iterations: iter,
                    converged: false,
                };
            }
        }
        LbfgsOutcome {
            iterations: self.max_iter,
            converged: max_abs(&g) < self.tol,
        }
    }
}
