use super::Histogram;

/// Local maxima of `values` with at least `min_prominence` topographic
/// prominence, thinned so that no two survivors are closer than
/// `min_separation` bins (taller peaks win). Returned in ascending order.
pub fn find_peaks_in(values: &[f64], min_prominence: f64, min_separation: usize) -> Vec<usize> {
    let n = values.len();
    let mut candidates = Vec::new();
    let mut i = 0;
    while i < n {
        // Collapse plateaus to their middle bin.
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        let left_lower = i == 0 || values[i - 1] < values[i];
        let right_lower = j + 1 == n || values[j + 1] < values[i];
        if left_lower && right_lower && values[i] > 0.0 && !(i == 0 && j + 1 == n) {
            candidates.push((i + j) / 2);
        }
        i = j + 1;
    }

    let prominence = |p: usize| {
        let h = values[p];
        let mut left_min = h;
        for k in (0..p).rev() {
            if values[k] > h {
                break;
            }
            left_min = left_min.min(values[k]);
        }
        let mut right_min = h;
        for &v in &values[p + 1..] {
            if v > h {
                break;
            }
            right_min = right_min.min(v);
        }
        h - left_min.max(right_min)
    };

    let mut kept: Vec<usize> = candidates.into_iter().filter(|&p| prominence(p) >= min_prominence).collect();
    kept.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut accepted: Vec<usize> = Vec::new();
    for p in kept {
        if accepted.iter().all(|&q| p.abs_diff(q) >= min_separation) {
            accepted.push(p);
        }
    }
    accepted.sort_unstable();
    accepted
}

/// [`find_peaks_in`] on raw histogram counts.
pub fn find_peaks(hist: &Histogram, min_prominence: f64, min_separation: usize) -> Vec<usize> {
    let values: Vec<f64> = hist.counts().iter().map(|&c| c as f64).collect();
    find_peaks_in(&values, min_prominence, min_separation)
}
