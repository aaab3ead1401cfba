//! Small statistics used when summarizing runs.

/// Trailing moving average; the first `window - 1` points average what is
/// available so far.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (k, v) in values.iter().enumerate() {
        sum += v;
        if k >= w {
            sum -= values[k - w];
        }
        out.push(sum / (k + 1).min(w) as f64);
    }
    out
}

/// Episodes needed for the smoothed curve to cover `fraction` of the way
/// from its first full-window value to its final value. `None` when the
/// curve does not improve or is shorter than one window.
pub fn episodes_to_fraction(values: &[f64], window: usize, fraction: f64) -> Option<usize> {
    let w = window.max(1);
    if values.len() < w {
        return None;
    }
    let s = smooth(values, w);
    let start = s[w - 1];
    let end = *s.last()?;
    if !(end > start) {
        return None;
    }
    let goal = start + fraction * (end - start);
    s.iter().enumerate().skip(w - 1).find(|(_, v)| **v >= goal).map(|(k, _)| k + 1)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Two-sided exact sign test on paired differences (zeros dropped).
/// Returns `(positives, negatives, p_value)`.
pub fn sign_test(diffs: &[f64]) -> (usize, usize, f64) {
    let pos = diffs.iter().filter(|d| **d > 0.0).count();
    let neg = diffs.iter().filter(|d| **d < 0.0).count();
    let n = pos + neg;
    if n == 0 {
        return (0, 0, 1.0);
    }
    let k = pos.min(neg);
    // P(X <= k) for X ~ Bin(n, 1/2), doubled and capped at one
    let mut term = 0.5f64.powi(n as i32);
    let mut tail = 0.0;
    for i in 0..=k {
        tail += term;
        term *= (n - i) as f64 / (i + 1) as f64;
    }
    (pos, neg, (2.0 * tail).min(1.0))
}
