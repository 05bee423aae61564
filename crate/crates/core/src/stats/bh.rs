use crate::error::{Error, Result};

/// Benjamini-Hochberg step-up adjusted p-values, returned in input order.
pub fn bh_adjust(pvals: &[f64]) -> Result<Vec<f64>> {
    if let Some(&bad) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::PValueRange(bad));
    }
    let n = pvals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]));
    let mut adjusted = vec![0.0; n];
    let mut running = 1.0f64;
    for rank in (1..=n).rev() {
        let idx = order[rank - 1];
        running = running.min(pvals[idx] * (n as f64 / rank as f64));
        adjusted[idx] = running;
    }
    Ok(adjusted)
}
