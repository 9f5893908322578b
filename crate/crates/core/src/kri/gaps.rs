use super::{Availability, FillMethod, GapPolicy, KriSample};

/// Fills missing cadence points and `UNKNOWN` samples in a timestamp-ordered
/// series. A point is filled only while it lies within `max_staleness_ms`
/// of the last real value; beyond that it stays `UNKNOWN`. Linear
/// interpolation also needs a real value after the gap.
pub fn apply_gap_policy(series: &[KriSample], policy: GapPolicy, cadence_ms: u64) -> Vec<KriSample> {
    let Some(first) = series.first() else {
        return Vec::new();
    };
    let kri_id = first.kri_id.clone();
    let cadence = cadence_ms.max(1) as i64;

    // Expand to the full grid: originals plus placeholders for missing points.
    let mut grid: Vec<KriSample> = Vec::with_capacity(series.len());
    for (i, s) in series.iter().enumerate() {
        if i > 0 {
            let prev = series[i - 1].ts;
            let mut t = prev + cadence;
            while t < s.ts {
                grid.push(KriSample::unknown(kri_id.clone(), t));
                t += cadence;
            }
        }
        grid.push(s.clone());
    }

    let real: Vec<Option<f64>> = grid
        .iter()
        .map(|s| match s.availability {
            Availability::Fresh => s.value,
            _ => None,
        })
        .collect();
    let mut out = Vec::with_capacity(grid.len());
    let mut last: Option<(i64, f64)> = None;
    for (i, s) in grid.iter().enumerate() {
        if let Some(v) = real[i] {
            last = Some((s.ts, v));
            out.push(s.clone());
            continue;
        }
        if s.availability == Availability::Filled {
            out.push(s.clone());
            continue;
        }
        let fresh_enough = last.filter(|(t0, _)| (s.ts - t0) as u64 <= policy.max_staleness_ms);
        let filled = match (policy.method, fresh_enough) {
            (FillMethod::CarryForward, Some((_, v0))) => Some(v0),
            (FillMethod::LinearInterpolation, Some((t0, v0))) => grid[i + 1..]
                .iter()
                .zip(&real[i + 1..])
                .find_map(|(n, v)| v.map(|v1| (n.ts, v1)))
                .map(|(t1, v1)| v0 + (v1 - v0) * (s.ts - t0) as f64 / (t1 - t0) as f64),
            _ => None,
        };
        out.push(match filled {
            Some(v) => KriSample::filled(kri_id.clone(), s.ts, v, policy.method),
            None => KriSample::unknown(kri_id.clone(), s.ts),
        });
    }
    out
}
