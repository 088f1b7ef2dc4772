use alloc::vec::Vec;

/// An eventually periodic tail: `series[t] == series[t + period]` for every
/// `t >= start` inside the series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cycle {
    pub start: usize,
    pub period: usize,
}

impl Cycle {
    /// Step at which the cycle has been seen twice in full.
    pub fn detected_at(&self) -> usize {
        self.start + 2 * self.period
    }
}

/// Finds the earliest-confirmed cycle with period at most `max_period`.
///
/// A candidate must hold through the end of `series` and be seen at least
/// twice. Among candidates the one confirmed first wins, then the shorter
/// period. Returns `None` if no period qualifies.
pub fn find_cycle<T: PartialEq>(series: &[T], max_period: usize) -> Option<Cycle> {
    let n = series.len();
    let mut best: Option<Cycle> = None;
    for period in 1..=max_period.min(n / 2) {
        // Smallest start from which the tail is `period`-periodic.
        let mut start = 0;
        for t in (0..n - period).rev() {
            if series[t] != series[t + period] {
                start = t + 1;
                break;
            }
        }
        if n - start < 2 * period {
            continue;
        }
        let c = Cycle { start, period };
        let better = best.is_none_or(|b| {
            (c.detected_at(), c.period) < (b.detected_at(), b.period)
        });
        if better {
            best = Some(c);
        }
    }
    best
}

/// Whether one period of a binary cycle equals `pattern` up to rotation and
/// bit relabeling.
pub fn matches_pattern(cycle: &[u8], pattern: &[u8]) -> bool {
    if cycle.len() != pattern.len() || cycle.is_empty() {
        return false;
    }
    let n = cycle.len();
    let flipped: Vec<u8> = pattern.iter().map(|b| b ^ 1).collect();
    (0..n).any(|shift| {
        let rotated = (0..n).map(|i| cycle[(i + shift) % n]);
        rotated.clone().eq(pattern.iter().copied()) || rotated.eq(flipped.iter().copied())
    })
}
