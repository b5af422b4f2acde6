//! Sample diagnostics: WMAE, running MSE against a reference, ESS.

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("no samples")]
    Empty,
    #[error("dimensions have different lengths")]
    Ragged,
    #[error("requested {requested} samples but only {available} are available")]
    TooFew { requested: usize, available: usize },
    #[error("reference has {reference} values, samples have {samples} dimensions")]
    Mismatch { reference: usize, samples: usize },
}

fn check(columns: &[Vec<f64>]) -> Result<usize, DiagnosticsError> {
    let n = columns.first().ok_or(DiagnosticsError::Empty)?.len();
    if columns.iter().any(|c| c.len() != n) {
        return Err(DiagnosticsError::Ragged);
    }
    if n == 0 {
        return Err(DiagnosticsError::Empty);
    }
    Ok(n)
}

/// `(1/N) max_d |Σ_{n≤N} x_d^(n)|` over per-dimension sample columns.
pub fn wmae(columns: &[Vec<f64>], n: usize) -> Result<f64, DiagnosticsError> {
    let available = check(columns)?;
    if n == 0 {
        return Err(DiagnosticsError::Empty);
    }
    if n > available {
        return Err(DiagnosticsError::TooFew { requested: n, available });
    }
    let worst = columns.iter().map(|c| c[..n].iter().sum::<f64>().abs()).fold(0.0, f64::max);
    Ok(worst / n as f64)
}

/// WMAE at each checkpoint.
pub fn wmae_curve(columns: &[Vec<f64>], checkpoints: &[usize]) -> Result<Vec<f64>, DiagnosticsError> {
    checkpoints.iter().map(|&n| wmae(columns, n)).collect()
}

/// Sorts each sample's values ascending, removing label symmetry.
pub fn canonical_order(columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, DiagnosticsError> {
    let n = check(columns)?;
    let mut out = vec![Vec::with_capacity(n); columns.len()];
    let mut row = vec![0.0; columns.len()];
    for i in 0..n {
        for (r, c) in row.iter_mut().zip(columns) {
            *r = c[i];
        }
        row.sort_by(f64::total_cmp);
        for (o, r) in out.iter_mut().zip(&row) {
            o.push(*r);
        }
    }
    Ok(out)
}

/// Mean over dimensions of the squared error of the running mean, for
/// each prefix length `1..=N`.
pub fn running_mse(columns: &[Vec<f64>], reference: &[f64]) -> Result<Vec<f64>, DiagnosticsError> {
    let n = check(columns)?;
    if reference.len() != columns.len() {
        return Err(DiagnosticsError::Mismatch { reference: reference.len(), samples: columns.len() });
    }
    let mut sums = vec![0.0; columns.len()];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut se = 0.0;
        for ((s, c), r) in sums.iter_mut().zip(columns).zip(reference) {
            *s += c[i];
            let e = *s / (i + 1) as f64 - r;
            se += e * e;
        }
        out.push(se / columns.len() as f64);
    }
    Ok(out)
}

/// Means over consecutive windows; a trailing partial window is dropped.
pub fn window_means(curve: &[f64], window: usize) -> Vec<f64> {
    if window == 0 {
        return Vec::new();
    }
    curve.chunks_exact(window).map(|w| w.iter().sum::<f64>() / window as f64).collect()
}

pub fn is_non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Effective sample size by Geyer's initial monotone sequence estimator.
pub fn ess(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return n as f64;
    }
    let acf = |lag: usize| xs[..n - lag].iter().zip(&xs[lag..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / (n as f64 * var);
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let mut pair = acf(2 * k) + acf(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        pair = pair.min(prev);
        tau += 2.0 * pair;
        prev = pair;
        k += 1;
    }
    n as f64 / tau.max(1.0 / n as f64)
}
