//! Metrics CSV serialization, trailing-window smoothing, and the cross-seed
//! aggregate. Output bytes are a pure function of the input records, so a
//! repeated run reproduces files exactly.

use risshare::agents::StepMetrics;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("metrics file has no data rows")]
    EmptyInput,
    #[error("schema mismatch: expected header starting `{expected}`, found `{found}`")]
    SchemaMismatch { expected: String, found: String },
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One row of the metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub step: usize,
    pub episode: usize,
    pub reward_raw: f64,
    pub reward_smoothed: f64,
    pub sum_utility: f64,
    pub utility_per_vsp: Vec<f64>,
    pub qos_penalty: f64,
    pub sum_rate: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
}

/// Trailing moving average over the previous `window` values (shorter
/// prefix at the start).
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window > 0);
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for i in 0..values.len() {
        acc += values[i];
        if i >= window {
            acc -= values[i - window];
        }
        let n = (i + 1).min(window);
        out.push(acc / n as f64);
    }
    out
}

/// Attaches smoothed rewards to raw step metrics.
pub fn to_records(metrics: &[StepMetrics], window: usize) -> Vec<MetricsRecord> {
    let smoothed = smooth(&metrics.iter().map(|m| m.reward_raw).collect::<Vec<_>>(), window);
    metrics
        .iter()
        .zip(smoothed)
        .map(|(m, reward_smoothed)| MetricsRecord {
            step: m.step,
            episode: m.episode,
            reward_raw: m.reward_raw,
            reward_smoothed,
            sum_utility: m.sum_utility,
            utility_per_vsp: m.utility_per_vsp.clone(),
            qos_penalty: m.qos_penalty,
            sum_rate: m.sum_rate,
            critic_loss: m.critic_loss,
            actor_loss: m.actor_loss,
            alpha: m.alpha,
        })
        .collect()
}

pub fn header(num_vsps: usize) -> String {
    let mut cols = vec!["step".to_string(), "episode".to_string(), "reward_raw".to_string(), "reward_smoothed".to_string(), "sum_utility".to_string()];
    for v in 0..num_vsps {
        cols.push(format!("utility_v{v}"));
    }
    cols.extend(
        ["qos_penalty", "sum_rate", "critic_loss", "actor_loss", "alpha"].map(str::to_string),
    );
    cols.join(",")
}

pub fn to_csv(records: &[MetricsRecord]) -> String {
    let num_vsps = records.first().map_or(0, |r| r.utility_per_vsp.len());
    let mut out = String::new();
    out.push_str(&header(num_vsps));
    out.push('\n');
    for r in records {
        out.push_str(&format!("{},{},{},{},{}", r.step, r.episode, r.reward_raw, r.reward_smoothed, r.sum_utility));
        for u in &r.utility_per_vsp {
            out.push_str(&format!(",{u}"));
        }
        out.push_str(&format!(
            ",{},{},{},{},{}\n",
            r.qos_penalty, r.sum_rate, r.critic_loss, r.actor_loss, r.alpha
        ));
    }
    out
}

pub fn from_csv(text: &str) -> Result<Vec<MetricsRecord>, MetricsError> {
    let mut lines = text.lines();
    let head = lines.next().unwrap_or("");
    if !head.starts_with("step,episode,reward_raw,reward_smoothed,sum_utility") {
        return Err(MetricsError::SchemaMismatch {
            expected: "step,episode,reward_raw,reward_smoothed,sum_utility".into(),
            found: head.chars().take(60).collect(),
        });
    }
    let num_vsps = head.split(',').filter(|c| c.starts_with("utility_v")).count();
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let expected = 10 + num_vsps;
        if cols.len() != expected {
            return Err(MetricsError::MalformedRow {
                row: i + 2,
                reason: format!("expected {expected} columns, found {}", cols.len()),
            });
        }
        let parse_f = |idx: usize| -> Result<f64, MetricsError> {
            cols[idx].parse().map_err(|_| MetricsError::MalformedRow {
                row: i + 2,
                reason: format!("bad float `{}`", cols[idx]),
            })
        };
        let parse_u = |idx: usize| -> Result<usize, MetricsError> {
            cols[idx].parse().map_err(|_| MetricsError::MalformedRow {
                row: i + 2,
                reason: format!("bad integer `{}`", cols[idx]),
            })
        };
        let mut utility_per_vsp = Vec::with_capacity(num_vsps);
        for v in 0..num_vsps {
            utility_per_vsp.push(parse_f(5 + v)?);
        }
        records.push(MetricsRecord {
            step: parse_u(0)?,
            episode: parse_u(1)?,
            reward_raw: parse_f(2)?,
            reward_smoothed: parse_f(3)?,
            sum_utility: parse_f(4)?,
            utility_per_vsp,
            qos_penalty: parse_f(5 + num_vsps)?,
            sum_rate: parse_f(6 + num_vsps)?,
            critic_loss: parse_f(7 + num_vsps)?,
            actor_loss: parse_f(8 + num_vsps)?,
            alpha: parse_f(9 + num_vsps)?,
        });
    }
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(records)
}

fn median_of(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Per-step median across seeds, column by column.
pub fn aggregate_median(per_seed: &[Vec<MetricsRecord>]) -> Result<Vec<MetricsRecord>, MetricsError> {
    let first = per_seed.first().ok_or(MetricsError::EmptyInput)?;
    if first.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let rows = first.len();
    let num_vsps = first[0].utility_per_vsp.len();
    let mut out = Vec::with_capacity(rows);
    for i in 0..rows {
        let col = |f: &dyn Fn(&MetricsRecord) -> f64| -> f64 {
            median_of(per_seed.iter().map(|s| f(&s[i])).collect())
        };
        out.push(MetricsRecord {
            step: first[i].step,
            episode: first[i].episode,
            reward_raw: col(&|r| r.reward_raw),
            reward_smoothed: col(&|r| r.reward_smoothed),
            sum_utility: col(&|r| r.sum_utility),
            utility_per_vsp: (0..num_vsps)
                .map(|v| median_of(per_seed.iter().map(|s| s[i].utility_per_vsp[v]).collect()))
                .collect(),
            qos_penalty: col(&|r| r.qos_penalty),
            sum_rate: col(&|r| r.sum_rate),
            critic_loss: col(&|r| r.critic_loss),
            actor_loss: col(&|r| r.actor_loss),
            alpha: col(&|r| r.alpha),
        });
    }
    Ok(out)
}

/// Final smoothed reward of a run (last row).
pub fn final_smoothed(records: &[MetricsRecord]) -> Option<f64> {
    records.last().map(|r| r.reward_smoothed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(step: usize, reward: f64) -> MetricsRecord {
        MetricsRecord {
            step,
            episode: step / 10,
            reward_raw: reward,
            reward_smoothed: 0.0,
            sum_utility: reward,
            utility_per_vsp: vec![reward / 2.0, reward / 2.0],
            qos_penalty: 0.0,
            sum_rate: reward.abs(),
            critic_loss: 0.1,
            actor_loss: -0.2,
            alpha: 0.05,
        }
    }

    #[test]
    fn smoothing_matches_direct_recomputation() {
        let values: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).sin() * 3.0).collect();
        let window = 8;
        let got = smooth(&values, window);
        for t in 0..values.len() {
            let lo = t.saturating_sub(window - 1);
            let want: f64 = values[lo..=t].iter().sum::<f64>() / (t - lo + 1) as f64;
            assert!((got[t] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_roundtrip_bytes() {
        let records: Vec<MetricsRecord> = (1..=20)
            .map(|i| {
                let mut r = record(i, (i as f64).sin() * 17.3);
                r.reward_smoothed = r.reward_raw / 2.0;
                r
            })
            .collect();
        let text = to_csv(&records);
        let back = from_csv(&text).unwrap();
        assert_eq!(records, back);
        assert_eq!(text, to_csv(&back));
    }

    #[test]
    fn schema_mismatch_detected() {
        assert!(matches!(
            from_csv("foo,bar\n1,2\n"),
            Err(MetricsError::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn empty_input_detected() {
        let head = header(2);
        assert!(matches!(from_csv(&format!("{head}\n")), Err(MetricsError::EmptyInput)));
    }

    #[test]
    fn median_aggregate_odd_and_even() {
        let seeds: Vec<Vec<MetricsRecord>> = vec![
            vec![record(1, 1.0)],
            vec![record(1, 5.0)],
            vec![record(1, 3.0)],
        ];
        let agg = aggregate_median(&seeds).unwrap();
        assert_eq!(agg[0].reward_raw, 3.0);
        let seeds2: Vec<Vec<MetricsRecord>> = vec![vec![record(1, 1.0)], vec![record(1, 2.0)]];
        let agg2 = aggregate_median(&seeds2).unwrap();
        assert_eq!(agg2[0].reward_raw, 1.5);
    }
}
