//! Small statistics helpers for paired Monte-Carlo comparisons.

use statrs::distribution::{Binomial, DiscreteCDF};

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard error of the mean (sample standard deviation over sqrt(n)).
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    /// Pairs where the first sample is larger.
    pub wins: u64,
    /// Pairs where the second sample is larger.
    pub losses: u64,
    /// One-sided p-value of `wins` under a fair coin (ties discarded).
    pub p_value: f64,
}

/// One-sided paired sign test of "`a` tends to exceed `b`".
pub fn sign_test(a: &[f64], b: &[f64]) -> SignTest {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    let wins = a.iter().zip(b).filter(|(x, y)| x > y).count() as u64;
    let losses = a.iter().zip(b).filter(|(x, y)| x < y).count() as u64;
    let n = wins + losses;
    let p_value = if n == 0 || wins == 0 {
        1.0
    } else {
        // P(X >= wins) = 1 - P(X <= wins - 1)
        Binomial::new(0.5, n).expect("valid binomial").sf(wins - 1)
    };
    SignTest {
        wins,
        losses,
        p_value,
    }
}
