use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure, Result};

/// Look-ahead used by [`compute_returns`] when the whole remaining episode
/// should count.
pub const UNBOUNDED: usize = usize::MAX;

/// Truncated discounted returns
/// `G_t = sum_{j < min(H, T - t)} gamma^j r_{t+j}`.
pub fn compute_returns(rewards: &[f64], gamma: f64, horizon: usize) -> Result<Vec<f64>> {
    ensure!(horizon >= 1, "look-ahead horizon must be at least 1");
    ensure!(
        (0.0..=1.0).contains(&gamma),
        "discount {gamma} outside [0, 1]"
    );
    let n = rewards.len();
    let mut out = vec![0.0; n];
    if horizon >= n {
        // Plain backward recursion covers the untruncated case.
        let mut acc = 0.0;
        for t in (0..n).rev() {
            acc = rewards[t] + gamma * acc;
            out[t] = acc;
        }
        return Ok(out);
    }
    for (t, o) in out.iter_mut().enumerate() {
        let end = (t + horizon).min(n);
        let mut g = 0.0;
        let mut disc = 1.0;
        for r in &rewards[t..end] {
            g += disc * r;
            disc *= gamma;
        }
        *o = g;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_sums() {
        assert_eq!(compute_returns(&[1.0, 1.0, 1.0], 1.0, 5).unwrap(), vec![3.0, 2.0, 1.0]);
        let r = [0.3, -1.0, 2.5, 0.0];
        assert_eq!(compute_returns(&r, 0.7, 1).unwrap(), r.to_vec());
        assert!(compute_returns(&r, 0.7, 0).is_err());
        assert!(compute_returns(&r, 1.5, 2).is_err());
        assert!(compute_returns(&[], 0.9, 3).unwrap().is_empty());
    }

    #[test]
    fn two_step_lookahead() {
        let g = compute_returns(&[1.0, 0.0, 1.0, 0.0, 1.0], 0.9, 2).unwrap();
        let expected = [1.0, 0.9, 1.0, 0.9, 1.0];
        for (a, b) in g.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
