use crate::error::{Error, Result};

/// Percentile by linear interpolation between closest ranks.
///
/// With the values sorted ascending, `rank = p/100·(n−1)` and the result
/// interpolates between the two neighbouring order statistics, so `p = 0`
/// is the minimum and `p = 100` the maximum.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData("percentile of an empty list".into()));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::Domain(format!("percentile {p} outside [0, 100]")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("percentile input must be finite".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, p))
}

/// Nearest-rank percentile: the smallest value with at least `p` percent
/// of the list at or below it, i.e. the `⌈p/100·n⌉`-th order statistic
/// (1-based; `p = 0` gives the minimum).
///
/// Unlike [`percentile`] this always returns an observed value, and at most
/// `⌊(100−p)/100·n⌋` values lie strictly above it.
pub fn percentile_nearest_rank(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData("percentile of an empty list".into()));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::Domain(format!("percentile {p} outside [0, 100]")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("percentile input must be finite".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // p·n is exact for integral p, so the division rounds correctly
    let rank = (p * n as f64 / 100.0).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = p / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    if values.is_empty() {
        return 0.0;
    }
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton() {
        for p in [0.0, 13.0, 85.0, 100.0] {
            assert_eq!(percentile(&[7.0], p).unwrap(), 7.0);
        }
    }

    #[test]
    fn one_to_hundred_at_85() {
        // rank = 0.85 * 99 = 84.15 -> 85 + 0.15 * (86 - 85)
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((percentile(&v, 85.0).unwrap() - 85.15).abs() < 1e-12);
    }

    #[test]
    fn median_of_four() {
        assert_eq!(percentile(&[4.0, 1.0, 3.0, 2.0], 50.0).unwrap(), 2.5);
    }

    #[test]
    fn extremes() {
        let v = [5.0, -2.0, 9.0, 0.5];
        assert_eq!(percentile(&v, 0.0).unwrap(), -2.0);
        assert_eq!(percentile(&v, 100.0).unwrap(), 9.0);
    }

    #[test]
    fn nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile_nearest_rank(&v, 85.0).unwrap(), 85.0);
        assert_eq!(percentile_nearest_rank(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile_nearest_rank(&v, 100.0).unwrap(), 100.0);
        assert_eq!(percentile_nearest_rank(&[4.0, 1.0, 3.0, 2.0], 50.0).unwrap(), 2.0);
        assert_eq!(percentile_nearest_rank(&[7.0], 30.0).unwrap(), 7.0);
        // 1002 distinct values: 150 lie above the threshold, 150 <= 0.15 * 1002.
        let v: Vec<f64> = (0..1002).map(f64::from).collect();
        let t = percentile_nearest_rank(&v, 85.0).unwrap();
        assert_eq!(v.iter().filter(|&&x| x > t).count(), 150);
    }

    #[test]
    fn errors() {
        assert!(matches!(percentile(&[], 50.0), Err(Error::InsufficientData(_))));
        assert!(matches!(percentile(&[1.0], 100.5), Err(Error::Domain(_))));
        assert!(matches!(percentile(&[1.0], -1.0), Err(Error::Domain(_))));
    }
}
