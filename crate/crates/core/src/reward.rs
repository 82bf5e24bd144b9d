//! Reward functions of the two agents.
//!
//! Basal agent, once per day on the 00:00–07:00 fasting window:
//!
//! ```text
//! r_band   = 10/n · #{ lo < BG < hi }                     (strict)
//! r_daily  = exp(r(105,115)/2) + exp(r(100,120)/2) + exp(r(70,180)/2)
//! r_episode = Σ_days r_daily
//! ```
//!
//! Bolus agent, every 15 minutes:
//!
//! ```text
//! r_action = 10 if a_{t-1} > 0 and meal_{t-1} > 0,
//!             0 if a_{t-1} <= 0 and meal_{t-1} <= 0,
//!            -2 otherwise
//! r_bg     = 0.1·exp(-|BG - 125|/100)   if 70 <= BG <= 180  (inclusive)
//!            -0.01·|BG - 125|            otherwise
//! r_episode = Σ_steps (r_bg + r_action)
//! ```

use crate::error::{Error, Result};

/// Fasting bands used by the basal reward, (lo, hi) mg/dL, exclusive.
pub const BASAL_BANDS: [(f64, f64); 3] = [(105.0, 115.0), (100.0, 120.0), (70.0, 180.0)];

pub const BOLUS_TARGET: f64 = 125.0;
pub const BOLUS_BOUNDS: (f64, f64) = (70.0, 180.0);

/// Inputs of one basal reward evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct BasalRewardInput {
    pub bg_buffer: Vec<f64>,
}

impl BasalRewardInput {
    pub fn n(&self) -> usize {
        self.bg_buffer.len()
    }
}

/// Inputs of one bolus reward evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BolusRewardInput {
    pub bg: f64,
    pub prev_meal: f64,
    pub prev_action: f64,
}

/// `10/n` times the number of samples strictly inside `(lo, hi)`.
pub fn band_fraction_reward(buffer: &[f64], lo: f64, hi: f64) -> Result<f64> {
    if buffer.is_empty() {
        return Err(Error::Empty("BG buffer"));
    }
    // strict on both sides
    let inside = buffer.iter().filter(|&&bg| bg > lo && bg < hi).count();
    Ok(10.0 / buffer.len() as f64 * inside as f64)
}

pub fn basal_daily_reward(buffer: &[f64]) -> Result<f64> {
    BASAL_BANDS.iter().map(|&(lo, hi)| band_fraction_reward(buffer, lo, hi).map(|r| (r / 2.0).exp())).sum()
}

pub fn basal_episode_reward(daily_rewards: &[f64]) -> f64 {
    daily_rewards.iter().sum()
}

pub fn bolus_action_reward(prev_action: f64, prev_meal: f64) -> f64 {
    if prev_action > 0.0 && prev_meal > 0.0 {
        10.0
    } else if prev_action <= 0.0 && prev_meal <= 0.0 {
        0.0
    } else {
        -2.0
    }
}

pub fn bolus_bg_reward(bg: f64) -> f64 {
    let dev = (bg - BOLUS_TARGET).abs();
    // inclusive bounds
    if bg >= BOLUS_BOUNDS.0 && bg <= BOLUS_BOUNDS.1 {
        0.1 * (-dev / 100.0).exp()
    } else {
        -0.01 * dev
    }
}

pub fn bolus_step_reward(step: &BolusRewardInput) -> f64 {
    bolus_bg_reward(step.bg) + bolus_action_reward(step.prev_action, step.prev_meal)
}

/// Sum over every 15-minute step of the episode.
pub fn bolus_episode_reward(steps: &[BolusRewardInput]) -> f64 {
    steps.iter().map(bolus_step_reward).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const E5: f64 = 148.413_159_102_576_6;

    fn step(bg: f64, prev_action: f64, prev_meal: f64) -> BolusRewardInput {
        BolusRewardInput { bg, prev_meal, prev_action }
    }

    #[test]
    fn band_counts() {
        assert_eq!(band_fraction_reward(&[110.0; 8], 105.0, 115.0).unwrap(), 10.0);
        assert_eq!(band_fraction_reward(&[200.0; 8], 105.0, 115.0).unwrap(), 0.0);
        let half: Vec<f64> = [110.0; 4].into_iter().chain([150.0; 4]).collect();
        assert_eq!(band_fraction_reward(&half, 105.0, 115.0).unwrap(), 5.0);
        assert!(band_fraction_reward(&[], 105.0, 115.0).is_err());
    }

    #[test]
    fn band_edges_are_exclusive() {
        assert_eq!(band_fraction_reward(&[105.0, 115.0], 105.0, 115.0).unwrap(), 0.0);
    }

    #[test]
    fn daily_reward_fixtures() {
        assert!((basal_daily_reward(&[110.0; 420]).unwrap() - 3.0 * E5).abs() < 1e-9);
        assert!((basal_daily_reward(&[110.0; 420]).unwrap() - 445.2395).abs() < 1e-4);
        assert!((basal_daily_reward(&[200.0; 420]).unwrap() - 3.0).abs() < 1e-12);
        let half: Vec<f64> = [110.0; 210].into_iter().chain([150.0; 210]).collect();
        let expected = 2.5f64.exp() * 2.0 + 5.0f64.exp();
        assert!((basal_daily_reward(&half).unwrap() - expected).abs() < 1e-9);
        assert!((expected - 172.778_147).abs() < 1e-6);
    }

    #[test]
    fn episode_sums() {
        let perfect = basal_daily_reward(&[110.0; 420]).unwrap();
        let week = basal_episode_reward(&[perfect; 7]);
        assert!((week - 3116.68).abs() < 0.01);
        assert_eq!(basal_episode_reward(&[]), 0.0);
        let days = [3.0, 100.0, 445.0, 12.5];
        let mut rev = days;
        rev.reverse();
        assert_eq!(basal_episode_reward(&days), basal_episode_reward(&rev));
    }

    #[test]
    fn action_branches() {
        assert_eq!(bolus_action_reward(4.0, 50.0), 10.0);
        assert_eq!(bolus_action_reward(0.0, 0.0), 0.0);
        assert_eq!(bolus_action_reward(4.0, 0.0), -2.0);
        assert_eq!(bolus_action_reward(0.0, 50.0), -2.0);
    }

    #[test]
    fn bg_fixtures() {
        assert!((bolus_bg_reward(125.0) - 0.1).abs() < 1e-15);
        assert!((bolus_bg_reward(250.0) + 1.25).abs() < 1e-12);
        assert!((bolus_bg_reward(70.0) - 0.1 * (-0.55f64).exp()).abs() < 1e-15);
        assert!((bolus_bg_reward(70.0) - 0.0576950).abs() < 1e-7);
    }

    #[test]
    fn bg_reward_jumps_at_the_bounds() {
        for edge in [70.0, 180.0] {
            let inside = bolus_bg_reward(edge);
            let outside = bolus_bg_reward(if edge < 100.0 { edge - 1e-9 } else { edge + 1e-9 });
            assert!(inside > 0.0 && outside < -0.5, "{edge}: {inside} {outside}");
        }
    }

    #[test]
    fn episode_fixtures() {
        assert!((bolus_episode_reward(&[step(125.0, 4.0, 50.0)]) - 10.1).abs() < 1e-12);
        let quiet = vec![step(125.0, 0.0, 0.0); 672];
        assert!((bolus_episode_reward(&quiet) - 67.2).abs() < 1e-9);
        assert_eq!(bolus_episode_reward(&[]), 0.0);
    }

    proptest! {
        #[test]
        fn band_reward_permutation_invariant(mut xs in prop::collection::vec(40.0..300.0f64, 1..100), seed in any::<u64>()) {
            let before = band_fraction_reward(&xs, 100.0, 120.0).unwrap();
            let n = xs.len();
            xs.rotate_left((seed as usize) % n);
            xs.reverse();
            prop_assert_eq!(before, band_fraction_reward(&xs, 100.0, 120.0).unwrap());
        }

        #[test]
        fn band_reward_monotone(mut xs in prop::collection::vec(40.0..300.0f64, 1..100), k in any::<usize>()) {
            let before = band_fraction_reward(&xs, 100.0, 120.0).unwrap();
            let idx = k % xs.len();
            xs[idx] = 110.0;
            prop_assert!(band_fraction_reward(&xs, 100.0, 120.0).unwrap() >= before);
        }

        #[test]
        fn daily_reward_bounds(xs in prop::collection::vec(40.0..300.0f64, 1..100)) {
            let r = basal_daily_reward(&xs).unwrap();
            prop_assert!((3.0 - 1e-12..=3.0 * E5 + 1e-9).contains(&r));
            let all_inner = xs.iter().all(|&x| x > 105.0 && x < 115.0);
            prop_assert_eq!((r - 3.0 * E5).abs() < 1e-9, all_inner);
        }

        #[test]
        fn bg_reward_shape(bg in 0.0..500.0f64) {
            let r = bolus_bg_reward(bg);
            prop_assert!(r <= 0.1);
            if !(70.0..=180.0).contains(&bg) {
                prop_assert!(r < -0.55 + 1e-12);
            }
        }

        #[test]
        fn action_reward_range(a in -5.0..5.0f64, m in -5.0..5.0f64) {
            let r = bolus_action_reward(a, m);
            prop_assert!(r == 10.0 || r == 0.0 || r == -2.0);
        }

        #[test]
        fn episode_reward_is_additive(
            a in prop::collection::vec((40.0..300.0f64, 0.0..5.0f64, 0.0..80.0f64), 0..50),
            b in prop::collection::vec((40.0..300.0f64, 0.0..5.0f64, 0.0..80.0f64), 0..50),
        ) {
            let conv = |v: &[(f64, f64, f64)]| v.iter().map(|&(g, x, m)| step(g, x, m)).collect::<Vec<_>>();
            let (sa, sb) = (conv(&a), conv(&b));
            let joined: Vec<_> = sa.iter().chain(sb.iter()).copied().collect();
            let lhs = bolus_episode_reward(&joined);
            let rhs = bolus_episode_reward(&sa) + bolus_episode_reward(&sb);
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
        }
    }
}
