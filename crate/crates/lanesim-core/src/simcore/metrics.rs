//! Travel-time metrics over a completion window.

use alloc::vec::Vec;
use core::fmt;

/// No trip completed inside the metrics window; distinct from an average of
/// zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptyWindow;

impl fmt::Display for EmptyWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "no trips completed within the metrics window")
    }
}

impl core::error::Error for EmptyWindow {}

/// Collects completed-trip travel times inside a closed time window.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsAccumulator {
    window_start_s: u32,
    window_end_s: u32,
    /// `(travel time, free-flow time)` of each in-window completion.
    completions: Vec<(u32, f64)>,
}

impl MetricsAccumulator {
    /// Window bounds are inclusive.
    pub fn new(window_start_s: u32, window_end_s: u32) -> MetricsAccumulator {
        MetricsAccumulator {
            window_start_s,
            window_end_s,
            completions: Vec::new(),
        }
    }

    /// Records a completion at `arrive_s`; ignored when outside the window.
    /// Travel time can never beat free flow.
    pub fn record(&mut self, arrive_s: u32, travel_time_s: u32, freeflow_s: f64) {
        debug_assert!(
            travel_time_s as f64 >= freeflow_s - 1e-9,
            "travel time {travel_time_s} below free-flow {freeflow_s}"
        );
        if arrive_s < self.window_start_s || arrive_s > self.window_end_s {
            return;
        }
        self.completions.push((travel_time_s, freeflow_s));
    }

    pub fn completed(&self) -> usize {
        self.completions.len()
    }

    /// Mean travel time over in-window completions.
    pub fn att(&self) -> Result<f64, EmptyWindow> {
        att(self.completions.iter().map(|&(tt, _)| tt))
    }

    /// Share of in-window completions whose travel time exceeds `threshold`
    /// times their free-flow time, as a percentage. Zero when nothing
    /// completed.
    pub fn dfft_share_above(&self, threshold: f64) -> f64 {
        if self.completions.is_empty() {
            return 0.0;
        }
        let over = self
            .completions
            .iter()
            .filter(|&&(tt, tf)| dfft(tt as f64, tf) > threshold)
            .count();
        over as f64 / self.completions.len() as f64 * 100.0
    }

    pub fn completions(&self) -> &[(u32, f64)] {
        &self.completions
    }
}

/// Arithmetic mean of travel times; fails on an empty set.
pub fn att<I>(travel_times_s: I) -> Result<f64, EmptyWindow>
where
    I: IntoIterator<Item = u32>,
{
    let mut sum = 0u64;
    let mut n = 0u64;
    for tt in travel_times_s {
        sum += tt as u64;
        n += 1;
    }
    if n == 0 {
        return Err(EmptyWindow);
    }
    Ok(sum as f64 / n as f64)
}

/// Deviation from free-flow travel time: `t_a / t_f`, always at least 1.
pub fn dfft(t_a: f64, t_f: f64) -> f64 {
    assert!(t_f > 0.0, "free-flow time must be positive");
    assert!(t_a >= t_f - 1e-9, "actual time below free-flow time");
    t_a / t_f
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn att_is_the_arithmetic_mean() {
        assert_eq!(att([100, 200, 300]), Ok(200.0));
        assert_eq!(att([42]), Ok(42.0));
        assert_eq!(att([]), Err(EmptyWindow));
    }

    #[test]
    fn window_excludes_out_of_range_completions() {
        let mut m = MetricsAccumulator::new(100, 200);
        m.record(150, 80, 40.0);
        m.record(250, 9999, 40.0);
        m.record(99, 9999, 40.0);
        assert_eq!(m.completed(), 1);
        assert_eq!(m.att(), Ok(80.0));
    }

    #[test]
    fn dfft_basics() {
        assert_eq!(dfft(100.0, 100.0), 1.0);
        assert_eq!(dfft(500.0, 100.0), 5.0);
    }

    #[test]
    #[should_panic]
    fn dfft_rejects_zero_freeflow() {
        dfft(1.0, 0.0);
    }

    #[test]
    #[should_panic]
    fn dfft_rejects_beating_freeflow() {
        dfft(50.0, 100.0);
    }

    #[test]
    fn dfft_share_counts_only_heavy_delays() {
        let mut m = MetricsAccumulator::new(0, 1000);
        m.record(10, 100, 50.0); // dfft 2
        m.record(20, 600, 50.0); // dfft 12
        m.record(30, 501, 50.0); // dfft 10.02
        assert!((m.dfft_share_above(10.0) - 2.0 / 3.0 * 100.0).abs() < 1e-9);
        let empty = MetricsAccumulator::new(0, 10);
        assert_eq!(empty.dfft_share_above(10.0), 0.0);
    }
}
