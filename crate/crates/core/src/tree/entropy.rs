use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("probability {0} outside [0, 1]")]
pub struct ProbabilityOutOfRange(pub f64);

/// H(p) = −p·log2 p − (1−p)·log2(1−p), with 0·log2 0 = 0.
pub fn binary_entropy(p: f64) -> Result<f64, ProbabilityOutOfRange> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ProbabilityOutOfRange(p));
    }
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    Ok(term(p) + term(1.0 - p))
}

/// Binary entropy of a `k`-of-`n` split, evaluated from the counts.
///
/// Symmetric in `k ↔ n − k` to the last bit, so mirror-image splits score
/// identically and tie-breaking stays deterministic.
pub fn count_entropy(k: usize, n: usize) -> f64 {
    if n == 0 || k == 0 || k >= n {
        return 0.0;
    }
    let small = k.min(n - k) as f64;
    let large = (n - k.min(n - k)) as f64;
    let n = n as f64;
    let (p, q) = (small / n, large / n);
    -(p * p.log2()) - q * q.log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.25).unwrap() - 0.811278).abs() < 1e-6);
    }

    #[test]
    fn out_of_range() {
        assert!(binary_entropy(-0.01).is_err());
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn counts_agree_with_probability_form() {
        for n in 1..60usize {
            for k in 0..=n {
                let a = count_entropy(k, n);
                let b = binary_entropy(k as f64 / n as f64).unwrap();
                assert!((a - b).abs() < 1e-12, "{k}/{n}");
                assert_eq!(a.to_bits(), count_entropy(n - k, n).to_bits());
            }
        }
    }
}
