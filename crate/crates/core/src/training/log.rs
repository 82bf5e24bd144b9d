//! Per-episode reward log.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRow {
    pub episode: usize,
    pub patient: usize,
    pub reward: f64,
    /// Actions were uniform random and no updates ran.
    pub warmup: bool,
    pub updates: u64,
    pub mean_critic_loss: f64,
    pub mean_actor_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RewardLog {
    pub rows: Vec<RewardRow>,
}

impl RewardLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.reward).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        if self.rows.is_empty() {
            out.write_record(["episode", "patient", "reward", "warmup", "updates", "mean_critic_loss", "mean_actor_loss"])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<RewardRow>, _>>()?;
        Ok(Self { rows })
    }
}

/// Trailing moving average; entry k averages rewards `k+1-window..=k`,
/// shorter at the start.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    for (k, x) in xs.iter().enumerate() {
        acc += x;
        if k >= window {
            acc -= xs[k - window];
        }
        out.push(acc / (k + 1).min(window) as f64);
    }
    out
}

/// Mean of the first and of the last `window` episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Improvement {
    pub initial: f64,
    pub last: f64,
}

impl Improvement {
    pub fn from_rewards(xs: &[f64], window: usize) -> Result<Self> {
        if window == 0 || xs.len() < window {
            return Err(Error::InvalidArgument(format!("need at least {window} episodes, have {}", xs.len())));
        }
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        Ok(Self { initial: mean(&xs[..window]), last: mean(&xs[xs.len() - window..]) })
    }

    /// `last ≥ initial + (factor − 1)·|initial|`; equal to `last ≥ factor·initial`
    /// for positive rewards and still meaningful when they are negative.
    pub fn meets(&self, factor: f64) -> bool {
        self.last >= self.initial + (factor - 1.0) * self.initial.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_values() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(moving_average(&xs, 2), vec![1.0, 1.5, 2.5, 3.5, 4.5]);
        assert_eq!(moving_average(&xs, 10), vec![1.0, 1.5, 2.0, 2.5, 3.0]);
    }

    #[test]
    fn improvement_rule() {
        let up: Vec<f64> = (0..40).map(|k| if k < 20 { 100.0 } else { 121.0 }).collect();
        assert!(Improvement::from_rewards(&up, 20).unwrap().meets(1.2));
        let flat = vec![100.0; 40];
        assert!(!Improvement::from_rewards(&flat, 20).unwrap().meets(1.2));
        let neg: Vec<f64> = (0..40).map(|k| if k < 20 { -100.0 } else { -79.0 }).collect();
        assert!(Improvement::from_rewards(&neg, 20).unwrap().meets(1.2));
        assert!(Improvement::from_rewards(&flat[..5], 20).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let log = RewardLog {
            rows: (0..3)
                .map(|e| RewardRow {
                    episode: e,
                    patient: e % 2,
                    reward: 10.5 * e as f64,
                    warmup: e == 0,
                    updates: 7 * e as u64,
                    mean_critic_loss: 0.25,
                    mean_actor_loss: -1.0,
                })
                .collect(),
        };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("episode,patient,reward,warmup,updates,mean_critic_loss,mean_actor_loss\n"));
        assert_eq!(RewardLog::read_csv(buf.as_slice()).unwrap(), log);

        let mut empty = Vec::new();
        RewardLog::default().write_csv(&mut empty).unwrap();
        assert_eq!(RewardLog::read_csv(empty.as_slice()).unwrap().len(), 0);
    }
}
