//! Binary logistic regression by Newton-Raphson on the log-likelihood,
//! with Wald inference, McFadden's pseudo R-squared and AIC/BIC.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::special::{chi2_cdf, erfc, std_normal_cdf};

const MAX_ITER: usize = 50;
const GRAD_TOL: f64 = 1e-8;
const LL_REL_TOL: f64 = 1e-12;

/// Row-major design matrix. Callers are expected to place an intercept
/// column first; the fit itself does not add one.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Logit("design matrix has no rows".into()));
        }
        let k = rows[0].len();
        if k == 0 {
            return Err(Error::Logit("design matrix has no columns".into()));
        }
        let mut data = Vec::with_capacity(n * k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Logit(format!(
                    "row {i} has {} columns, expected {k}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(DesignMatrix { n, k, data })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.k
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }
}

/// Fitted logit model with Wald inference and information criteria.
#[derive(Debug, Clone, Serialize)]
pub struct LogitFit {
    /// Intercept first, then one entry per covariate column.
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub wald_z: Vec<f64>,
    pub p_values: Vec<f64>,
    pub log_likelihood: f64,
    pub null_log_likelihood: f64,
    pub mcfadden_r2: f64,
    pub aic: f64,
    pub bic: f64,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Likelihood-ratio test of the fitted model against the intercept-only
    /// model (secondary output; coefficient stars use Wald).
    pub lr_statistic: f64,
    pub lr_p: f64,
}

fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + exp(eta)) without overflow.
fn ln1p_exp(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn log_likelihood(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> f64 {
    let mut ll = 0.0;
    for i in 0..x.n_rows() {
        let eta: f64 = x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum();
        ll += y[i] * eta - ln1p_exp(eta);
    }
    ll
}

/// Maximum-likelihood logit fit.
///
/// `y` must be 0/1 coded. Convergence is declared when the largest score
/// component drops below 1e-8 or the relative log-likelihood change falls
/// below 1e-12, within 50 iterations. Standard errors come from the
/// inverse observed information at the optimum.
///
/// Quasi-complete separation (fitted probabilities saturating at the data,
/// diverging coefficients, or a near-singular information matrix) is
/// reported as an explicit error rather than returning garbage estimates.
pub fn fit_logit(x: &DesignMatrix, y: &[f64]) -> Result<LogitFit> {
    let n = x.n_rows();
    let k = x.n_cols();
    if y.len() != n {
        return Err(Error::Logit(format!(
            "y has {} entries for {n} design rows",
            y.len()
        )));
    }
    if n < k {
        return Err(Error::Logit(format!(
            "need at least as many rows ({n}) as coefficients ({k})"
        )));
    }
    let mut positives = 0usize;
    for (i, &v) in y.iter().enumerate() {
        if v != 0.0 && v != 1.0 {
            return Err(Error::Logit(format!("y[{i}] = {v} is not 0/1 coded")));
        }
        if v == 1.0 {
            positives += 1;
        }
    }
    if positives == 0 || positives == n {
        return Err(Error::Logit(
            "outcome is constant; the model is not identifiable".into(),
        ));
    }

    let mut beta = vec![0.0; k];
    let mut ll = log_likelihood(x, y, &beta);
    let mut converged = false;
    let mut iterations = 0;
    let mut probs = vec![0.0; n];

    for iter in 1..=MAX_ITER {
        iterations = iter;
        // Score and fitted probabilities at the current beta.
        let mut grad = vec![0.0; k];
        for i in 0..n {
            let row = x.row(i);
            let eta: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let p = logistic(eta);
            probs[i] = p;
            let r = y[i] - p;
            for (g, &v) in grad.iter_mut().zip(row) {
                *g += v * r;
            }
        }

        check_separation(y, &probs, &beta)?;

        let max_grad = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if max_grad < GRAD_TOL {
            converged = true;
            break;
        }

        // Observed information H = X' W X with W = p(1-p).
        let mut info = vec![0.0; k * k];
        for i in 0..n {
            let w = probs[i] * (1.0 - probs[i]);
            let row = x.row(i);
            for a in 0..k {
                let wa = w * row[a];
                for b in a..k {
                    info[a * k + b] += wa * row[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                info[a * k + b] = info[b * k + a];
            }
        }

        let step = solve(&info, &grad, k).ok_or_else(|| {
            Error::Separation("information matrix is numerically singular".into())
        })?;

        // Step-halving keeps the likelihood non-decreasing.
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let candidate: Vec<f64> = beta
                .iter()
                .zip(&step)
                .map(|(b, s)| b + scale * s)
                .collect();
            let cand_ll = log_likelihood(x, y, &candidate);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-13 {
                let rel_change = (cand_ll - ll).abs() / (ll.abs() + 1.0);
                beta = candidate;
                let prev = ll;
                ll = cand_ll;
                improved = cand_ll > prev;
                if rel_change < LL_REL_TOL {
                    converged = true;
                }
                break;
            }
            scale *= 0.5;
        }
        if converged {
            // Refresh probabilities at the final beta for the
            // separation check and information matrix below.
            for i in 0..n {
                let eta: f64 = x.row(i).iter().zip(&beta).map(|(a, b)| a * b).sum();
                probs[i] = logistic(eta);
            }
            check_separation(y, &probs, &beta)?;
            break;
        }
        if !improved {
            break;
        }
    }

    // Covariance from the inverse information at the optimum.
    let mut info = vec![0.0; k * k];
    for i in 0..n {
        let w = probs[i] * (1.0 - probs[i]);
        let row = x.row(i);
        for a in 0..k {
            let wa = w * row[a];
            for b in a..k {
                info[a * k + b] += wa * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            info[a * k + b] = info[b * k + a];
        }
    }
    let cov = invert(&info, k)
        .ok_or_else(|| Error::Separation("information matrix is numerically singular".into()))?;

    let std_errors: Vec<f64> = (0..k).map(|j| cov[j * k + j].max(0.0).sqrt()).collect();
    let wald_z: Vec<f64> = beta
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| if *se > 0.0 { b / se } else { f64::INFINITY })
        .collect();
    let p_values: Vec<f64> = wald_z
        .iter()
        .map(|z| erfc(z.abs() / std::f64::consts::SQRT_2))
        .collect();

    // Intercept-only null model: the MLE is the sample proportion.
    let p_bar = positives as f64 / n as f64;
    let null_ll = n as f64 * (p_bar * p_bar.ln() + (1.0 - p_bar) * (1.0 - p_bar).ln());

    let kf = k as f64;
    let nf = n as f64;
    let lr = (2.0 * (ll - null_ll)).max(0.0);
    let lr_p = if k > 1 {
        1.0 - chi2_cdf(lr, kf - 1.0)?
    } else {
        1.0
    };

    Ok(LogitFit {
        coefficients: beta,
        std_errors,
        wald_z,
        p_values,
        log_likelihood: ll,
        null_log_likelihood: null_ll,
        mcfadden_r2: (1.0 - ll / null_ll).max(0.0),
        aic: 2.0 * kf - 2.0 * ll,
        bic: kf * nf.ln() - 2.0 * ll,
        n,
        converged,
        iterations,
        lr_statistic: lr,
        lr_p,
    })
}

fn check_separation(y: &[f64], probs: &[f64], beta: &[f64]) -> Result<()> {
    let perfectly_fitted = y.iter().zip(probs).all(|(&yi, &pi)| {
        if yi == 1.0 {
            pi > 1.0 - 1e-10
        } else {
            pi < 1e-10
        }
    });
    if perfectly_fitted {
        return Err(Error::Separation(
            "fitted probabilities saturated at the observed outcomes".into(),
        ));
    }
    if beta.iter().any(|b| b.abs() > 1e4) {
        return Err(Error::Separation("coefficients diverging".into()));
    }
    Ok(())
}

/// Solve the k x k system A x = b by Gaussian elimination with partial
/// pivoting. Returns None when A is numerically singular.
fn solve(a: &[f64], b: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
    for col in 0..k {
        let pivot_row = (col..k)
            .max_by(|&r1, &r2| {
                m[r1 * k + col]
                    .abs()
                    .partial_cmp(&m[r2 * k + col].abs())
                    .unwrap()
            })
            .unwrap();
        if m[pivot_row * k + col].abs() < 1e-12 * scale {
            return None;
        }
        if pivot_row != col {
            for j in 0..k {
                m.swap(col * k + j, pivot_row * k + j);
            }
            rhs.swap(col, pivot_row);
        }
        let pivot = m[col * k + col];
        for row in (col + 1)..k {
            let factor = m[row * k + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..k {
                m[row * k + j] -= factor * m[col * k + j];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let mut acc = rhs[row];
        for j in (row + 1)..k {
            acc -= m[row * k + j] * x[j];
        }
        x[row] = acc / m[row * k + row];
    }
    Some(x)
}

/// Invert a k x k matrix by Gauss-Jordan with partial pivoting.
fn invert(a: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; k * k];
    for i in 0..k {
        inv[i * k + i] = 1.0;
    }
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
    for col in 0..k {
        let pivot_row = (col..k)
            .max_by(|&r1, &r2| {
                m[r1 * k + col]
                    .abs()
                    .partial_cmp(&m[r2 * k + col].abs())
                    .unwrap()
            })
            .unwrap();
        if m[pivot_row * k + col].abs() < 1e-12 * scale {
            return None;
        }
        if pivot_row != col {
            for j in 0..k {
                m.swap(col * k + j, pivot_row * k + j);
                inv.swap(col * k + j, pivot_row * k + j);
            }
        }
        let pivot = m[col * k + col];
        for j in 0..k {
            m[col * k + j] /= pivot;
            inv[col * k + j] /= pivot;
        }
        for row in 0..k {
            if row == col {
                continue;
            }
            let factor = m[row * k + col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..k {
                m[row * k + j] -= factor * m[col * k + j];
                inv[row * k + j] -= factor * inv[col * k + j];
            }
        }
    }
    Some(inv)
}

/// Wald two-sided p-value for a z statistic (shared with report code).
pub fn wald_p(z: f64) -> f64 {
    2.0 * (1.0 - std_normal_cdf(z.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn design_with_intercept(xs: &[Vec<f64>]) -> DesignMatrix {
        let rows: Vec<Vec<f64>> = xs
            .iter()
            .map(|r| {
                let mut row = vec![1.0];
                row.extend_from_slice(r);
                row
            })
            .collect();
        DesignMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn intercept_only_closed_form() {
        // 3 positives of 10: LL = 3 ln .3 + 7 ln .7 = -6.108643.
        let x = DesignMatrix::from_rows(vec![vec![1.0]; 10]).unwrap();
        let y: Vec<f64> = (0..10).map(|i| if i < 3 { 1.0 } else { 0.0 }).collect();
        let fit = fit_logit(&x, &y).unwrap();
        assert!(fit.converged);
        let expect = 3.0 * 0.3f64.ln() + 7.0 * 0.7f64.ln();
        assert!((fit.log_likelihood - expect).abs() < 1e-9);
        assert!((fit.null_log_likelihood - expect).abs() < 1e-12);
        assert!(fit.mcfadden_r2.abs() < 1e-9);
        // Fitted probability equals the sample proportion.
        assert!((logistic(fit.coefficients[0]) - 0.3).abs() < 1e-9);
    }

    #[test]
    fn recovers_known_coefficients() {
        // Simulation oracle: y generated from beta = (-1, 2); estimates must
        // land within 3 estimated standard errors.
        let mut rng = ChaCha8Rng::seed_from_u64(20_160_401);
        let n = 5000;
        let mut xs = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.random_range(-2.0..2.0);
            let p = logistic(-1.0 + 2.0 * x);
            y.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
            xs.push(vec![x]);
        }
        let fit = fit_logit(&design_with_intercept(&xs), &y).unwrap();
        assert!(fit.converged);
        assert!(
            (fit.coefficients[0] + 1.0).abs() < 3.0 * fit.std_errors[0],
            "intercept {} +/- {}",
            fit.coefficients[0],
            fit.std_errors[0]
        );
        assert!(
            (fit.coefficients[1] - 2.0).abs() < 3.0 * fit.std_errors[1],
            "slope {} +/- {}",
            fit.coefficients[1],
            fit.std_errors[1]
        );
        // Score equations hold at convergence and the intercept balances
        // the fitted mean.
        assert!(fit.mcfadden_r2 > 0.0 && fit.mcfadden_r2 < 1.0);
    }

    #[test]
    fn aic_bic_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.random_range(40..200);
            let mut xs = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let x: f64 = rng.random_range(-1.0..1.0);
                let z: f64 = rng.random_range(-1.0..1.0);
                let p = logistic(0.3 + 0.8 * x - 0.5 * z);
                y.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
                xs.push(vec![x, z]);
            }
            let Ok(fit) = fit_logit(&design_with_intercept(&xs), &y) else {
                continue;
            };
            let k = 3.0;
            let expected = k * ((n as f64).ln() - 2.0);
            assert!(
                ((fit.bic - fit.aic) - expected).abs() < 1e-9,
                "bic - aic identity"
            );
            assert!((fit.aic - (2.0 * k - 2.0 * fit.log_likelihood)).abs() < 1e-9);
        }
    }

    #[test]
    fn perfect_separation_is_an_error() {
        let xs: Vec<Vec<f64>> = vec![
            vec![-2.0],
            vec![-1.5],
            vec![-1.0],
            vec![-0.5],
            vec![0.5],
            vec![1.0],
            vec![1.5],
            vec![2.0],
        ];
        let y = vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let err = fit_logit(&design_with_intercept(&xs), &y).unwrap_err();
        assert!(matches!(err, Error::Separation(_)), "got {err:?}");
    }

    #[test]
    fn constant_outcome_is_an_error() {
        let x = DesignMatrix::from_rows(vec![vec![1.0]; 5]).unwrap();
        assert!(fit_logit(&x, &[1.0; 5]).is_err());
        assert!(fit_logit(&x, &[0.0; 5]).is_err());
    }

    #[test]
    fn collinear_columns_are_an_error() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let x = i as f64 / 10.0 - 1.0;
                vec![1.0, x, 2.0 * x]
            })
            .collect();
        let y: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
        let err = fit_logit(&DesignMatrix::from_rows(rows).unwrap(), &y).unwrap_err();
        assert!(matches!(err, Error::Separation(_)));
    }

    #[test]
    fn score_equations_hold_at_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 400;
        let mut rows = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.random_range(-1.0..1.0);
            let p = logistic(0.5 - 1.2 * x);
            y.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
            rows.push(vec![1.0, x]);
        }
        let x = DesignMatrix::from_rows(rows.clone()).unwrap();
        let fit = fit_logit(&x, &y).unwrap();
        assert!(fit.converged);
        // X'(y - p) ~ 0, and with an intercept mean(p) == mean(y).
        let mut score = vec![0.0f64; 2];
        let mut mean_p = 0.0;
        for (row, &yi) in rows.iter().zip(&y) {
            let eta = fit.coefficients[0] + fit.coefficients[1] * row[1];
            let p = logistic(eta);
            mean_p += p;
            score[0] += yi - p;
            score[1] += row[1] * (yi - p);
        }
        mean_p /= n as f64;
        let mean_y = y.iter().sum::<f64>() / n as f64;
        assert!(score[0].abs() < 1e-6 && score[1].abs() < 1e-6);
        assert!((mean_p - mean_y).abs() < 1e-8);
    }
}
