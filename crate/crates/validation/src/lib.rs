//! Helpers for the full-scale reproduction checks in `tests/acceptance.rs`.

use fairdg::sweep::NormRow;

/// Labels of the rows whose fairness exceeds `threshold`, ascending.
pub fn above(rows: &[NormRow], threshold: f64) -> Vec<u8> {
    rows.iter()
        .filter(|r| r.fairness > threshold)
        .map(|r| r.norm.label())
        .collect()
}

/// A threshold in `[lo, hi]` whose high-fairness set satisfies `accept`.
///
/// `preferred` is tried first; otherwise candidates are `lo`, `hi` and the
/// midpoints between consecutive fairness values inside the interval, and
/// the one closest to `preferred` wins.
pub fn find_threshold<F>(rows: &[NormRow], preferred: f64, lo: f64, hi: f64, accept: F) -> Option<f64>
where
    F: Fn(&[u8]) -> bool,
{
    if accept(&above(rows, preferred)) {
        return Some(preferred);
    }
    let mut f: Vec<f64> = rows.iter().map(|r| r.fairness).collect();
    f.sort_by(f64::total_cmp);
    let mut candidates = vec![lo, hi];
    candidates.extend(
        f.windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .filter(|t| (lo..=hi).contains(t)),
    );
    candidates.sort_by(|a, b| (a - preferred).abs().total_cmp(&(b - preferred).abs()));
    candidates.into_iter().find(|&t| accept(&above(rows, t)))
}

/// Widest gap separating `target` (strictly above) from every other row,
/// as `(threshold, gap)`; `None` if the target is not the top of the ranking.
pub fn separating_gap(rows: &[NormRow], target: &[u8]) -> Option<(f64, f64)> {
    let inside = |r: &&NormRow| target.binary_search(&r.norm.label()).is_ok();
    let low_in = rows.iter().filter(inside).map(|r| r.fairness).fold(f64::INFINITY, f64::min);
    let high_out = rows
        .iter()
        .filter(|r| !inside(r))
        .map(|r| r.fairness)
        .fold(f64::NEG_INFINITY, f64::max);
    (low_in > high_out).then_some((0.5 * (low_in + high_out), low_in - high_out))
}

/// Signs of successive differences, zeros dropped.
fn signs(v: &[f64]) -> Vec<bool> {
    v.windows(2)
        .filter(|w| w[1] != w[0])
        .map(|w| w[1] > w[0])
        .collect()
}

/// Whether the sequence first rises and then falls, with exactly one sign
/// change in successive differences, after discarding at most one point.
pub fn rises_then_falls(v: &[f64]) -> bool {
    let ok = |s: Vec<bool>| {
        let changes = s.windows(2).filter(|w| w[0] != w[1]).count();
        changes == 1 && s.first() == Some(&true)
    };
    if ok(signs(v)) {
        return true;
    }
    (0..v.len()).any(|skip| {
        let rest: Vec<f64> = v
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != skip)
            .map(|(_, &x)| x)
            .collect();
        ok(signs(&rest))
    })
}

/// Index of the largest entry.
pub fn mode(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, &x)| if x > best.1 { (k, x) } else { best })
        .0
}

#[cfg(test)]
mod tests {
    use super::*;
    use fairdg::SocialNorm;

    fn rows(f: &[(u8, f64)]) -> Vec<NormRow> {
        f.iter()
            .map(|&(label, fairness)| NormRow {
                norm: SocialNorm::from_label(label),
                phi: [0.25; 4],
                strategy_fairness: [0.0; 4],
                fairness,
                high: false,
            })
            .collect()
    }

    #[test]
    fn threshold_search() {
        let r = rows(&[(1, 0.2), (2, 0.52), (3, 0.58), (4, 0.9)]);
        assert_eq!(find_threshold(&r, 0.55, 0.5, 0.6, |s| s == [3, 4]), Some(0.55));
        assert_eq!(find_threshold(&r, 0.55, 0.5, 0.6, |s| s == [2, 3, 4]), Some(0.5));
        assert_eq!(find_threshold(&r, 0.55, 0.5, 0.6, |s| s == [4]), Some(0.6));
        assert_eq!(find_threshold(&r, 0.55, 0.5, 0.6, |s| s == [1, 2, 3, 4]), None);
        assert_eq!(separating_gap(&r, &[3, 4]), Some((0.55, 0.58 - 0.52)));
        assert_eq!(separating_gap(&r, &[2, 4]), None);
    }

    #[test]
    fn unimodality() {
        assert!(rises_then_falls(&[0.1, 0.3, 0.5, 0.4, 0.2]));
        assert!(rises_then_falls(&[0.2, 0.1, 0.3, 0.5, 0.4]));
        assert!(rises_then_falls(&[0.1, 0.5, 0.5, 0.2]));
        assert!(!rises_then_falls(&[0.1, 0.2, 0.3]));
        assert!(!rises_then_falls(&[0.5, 0.4, 0.3]));
        assert!(!rises_then_falls(&[0.1, 0.5, 0.2, 0.6, 0.1, 0.7, 0.3]));
    }

    #[test]
    fn mode_picks_first_maximum() {
        assert_eq!(mode(&[0.1, 0.7, 0.7, 0.2]), 1);
    }
}
