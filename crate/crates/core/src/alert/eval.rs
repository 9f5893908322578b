//! Per-rule condition state and evaluation.

use std::collections::VecDeque;

use super::rule::Condition;
use crate::kri::Direction;
use crate::telemetry::Timestamp;

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Least-squares slope of `values` against their index.
pub fn ls_slope(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = values.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, y) in values.iter().enumerate() {
        let dx = i as f64 - x_mean;
        num += dx * (y - y_mean);
        den += dx * dx;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Rolling history for one (sub-)condition.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConditionState {
    history: VecDeque<f64>,
    /// Last time each correlation leg held.
    held_a: Option<Timestamp>,
    held_b: Option<Timestamp>,
    leg_a: Option<Box<ConditionState>>,
    leg_b: Option<Box<ConditionState>>,
}

fn history_len(cond: &Condition) -> usize {
    match cond {
        Condition::StaticThreshold { .. } | Condition::Correlation { .. } => 0,
        Condition::MovingAverageBand { window_n, .. } | Condition::Anomaly { window_n, .. } => {
            *window_n
        }
        Condition::Trend { window_n, .. } => window_n - 1,
    }
}

impl ConditionState {
    /// Evaluates a non-correlation condition on `value` and records it.
    /// `None` means the history is still too short to decide.
    pub fn eval_value(&mut self, cond: &Condition, value: f64, risky: Direction) -> Option<bool> {
        let cap = history_len(cond);
        let ready = self.history.len() >= cap;
        let verdict = match cond {
            Condition::StaticThreshold { comparator, bound } => Some(comparator.holds(value, *bound)),
            Condition::MovingAverageBand { k, .. } if ready => {
                let (mean, std) = mean_std(self.history.make_contiguous());
                Some((value - mean).abs() > k * std)
            }
            // A zero-variance history makes any deviation infinitely anomalous.
            Condition::Anomaly { z_bound, .. } if ready => {
                let (mean, std) = mean_std(self.history.make_contiguous());
                Some((value - mean).abs() > z_bound * std)
            }
            Condition::Trend {
                slope_bound,
                direction,
                ..
            } if ready => {
                let mut window: Vec<f64> = self.history.iter().copied().collect();
                window.push(value);
                let slope = ls_slope(&window);
                Some(match direction.unwrap_or(risky) {
                    Direction::HighIsRisky => slope > *slope_bound,
                    Direction::LowIsRisky => slope < -*slope_bound,
                })
            }
            _ => None,
        };
        if cap > 0 {
            if self.history.len() == cap {
                self.history.pop_front();
            }
            self.history.push_back(value);
        }
        verdict
    }

    /// Feeds one leg of a correlation rule and reports whether both legs
    /// have held within `within_ms` of `ts`.
    #[allow(clippy::too_many_arguments)]
    pub fn eval_correlation(
        &mut self,
        a: &Condition,
        b: &Condition,
        within_ms: u64,
        leg_is_a: bool,
        ts: Timestamp,
        value: f64,
        risky: Direction,
    ) -> Option<bool> {
        let (cond, leg, held) = if leg_is_a {
            (a, &mut self.leg_a, &mut self.held_a)
        } else {
            (b, &mut self.leg_b, &mut self.held_b)
        };
        let state = leg.get_or_insert_with(Default::default);
        let verdict = state.eval_value(cond, value, risky);
        if verdict == Some(true) {
            *held = Some(ts);
        }
        let recent = |t: Option<Timestamp>| t.is_some_and(|t| ts - t <= within_ms as i64);
        match (verdict, recent(self.held_a) && recent(self.held_b)) {
            (_, true) => Some(true),
            (None, false) => None,
            (Some(_), false) => Some(false),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alert::Comparator;

    #[test]
    fn anomaly_after_flat_series() {
        let cond = Condition::Anomaly {
            window_n: 20,
            z_bound: 3.0,
        };
        let mut st = ConditionState::default();
        for _ in 0..30 {
            assert_ne!(st.eval_value(&cond, 10.0, Direction::HighIsRisky), Some(true));
        }
        assert_eq!(st.eval_value(&cond, 25.0, Direction::HighIsRisky), Some(true));
    }

    #[test]
    fn band_needs_full_window() {
        let cond = Condition::MovingAverageBand { window_n: 3, k: 2.0 };
        let mut st = ConditionState::default();
        assert_eq!(st.eval_value(&cond, 1.0, Direction::HighIsRisky), None);
        assert_eq!(st.eval_value(&cond, 2.0, Direction::HighIsRisky), None);
        assert_eq!(st.eval_value(&cond, 3.0, Direction::HighIsRisky), None);
        assert_eq!(st.eval_value(&cond, 2.0, Direction::HighIsRisky), Some(false));
        assert_eq!(st.eval_value(&cond, 50.0, Direction::HighIsRisky), Some(true));
    }

    #[test]
    fn trend_follows_risky_direction() {
        let cond = Condition::Trend {
            window_n: 4,
            slope_bound: 0.5,
            direction: None,
        };
        let mut up = ConditionState::default();
        let mut down = ConditionState::default();
        let mut last = (None, None);
        for v in [1.0, 2.0, 3.0, 4.0] {
            last = (
                up.eval_value(&cond, v, Direction::HighIsRisky),
                down.eval_value(&cond, v, Direction::LowIsRisky),
            );
        }
        assert_eq!(last, (Some(true), Some(false)));
        assert_eq!(ls_slope(&[3.0, 3.0, 3.0]), 0.0);
    }

    #[test]
    fn correlation_within_window() {
        let a = Condition::StaticThreshold {
            comparator: Comparator::Lt,
            bound: 100.0,
        };
        let b = Condition::StaticThreshold {
            comparator: Comparator::Lt,
            bound: 95.0,
        };
        let mut st = ConditionState::default();
        let five_min = 300_000;
        let r = Direction::HighIsRisky;
        assert_eq!(st.eval_correlation(&a, &b, five_min, true, 0, 80.0, r), Some(false));
        assert_eq!(
            st.eval_correlation(&a, &b, five_min, false, 120_000, 90.0, r),
            Some(true)
        );
        let mut late = ConditionState::default();
        late.eval_correlation(&a, &b, five_min, true, 0, 80.0, r);
        assert_eq!(
            late.eval_correlation(&a, &b, five_min, false, 400_000, 90.0, r),
            Some(false)
        );
    }

}
