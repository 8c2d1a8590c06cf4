/// Shifted geometric mean `exp(mean(ln(x + shift))) − shift`.
///
/// Returns NaN for an empty slice. Every value must exceed `−shift`.
pub fn geomean(values: &[f64], shift: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let s: f64 = values
        .iter()
        .map(|&v| {
            debug_assert!(v > -shift, "geomean: value {v} not above -shift");
            (v + shift).ln()
        })
        .sum();
    (s / values.len() as f64).exp() - shift
}

/// Mean over instances of the per-instance population standard deviation
/// across seeds, relative to that instance's mean, in percent. Instances
/// with a zero mean contribute 0.
pub fn stdpct(per_instance: &[Vec<f64>]) -> f64 {
    if per_instance.is_empty() {
        return 0.0;
    }
    let total: f64 = per_instance
        .iter()
        .map(|runs| {
            if runs.is_empty() {
                return 0.0;
            }
            let n = runs.len() as f64;
            let mean = runs.iter().sum::<f64>() / n;
            if mean == 0.0 {
                return 0.0;
            }
            let var = runs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            var.sqrt() / mean.abs() * 100.0
        })
        .sum();
    total / per_instance.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geomean_closed_forms() {
        assert!((geomean(&[3.5; 4], 1.0) - 3.5).abs() < 1e-12);
        assert!((geomean(&[1.0, 4.0], 0.0) - 2.0).abs() < 1e-12);
        assert!((geomean(&[0.0, 3.0], 1.0) - 1.0).abs() < 1e-12);
        assert!(geomean(&[], 1.0).is_nan());
    }

    #[test]
    fn stdpct_closed_forms() {
        // mean 2, population std 1 → 50%
        assert!((stdpct(&[vec![1.0, 3.0]]) - 50.0).abs() < 1e-12);
        assert_eq!(stdpct(&[vec![5.0; 5]]), 0.0);
        assert!((stdpct(&[vec![1.0, 3.0], vec![2.0, 2.0]]) - 25.0).abs() < 1e-12);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
