//! Slice domain types and the loss / unfairness measures.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability clip applied before taking logs.
pub const LOG_LOSS_EPS: f64 = 1e-7;

/// One slice of the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceState {
    pub id: String,
    /// Number of training examples currently in the slice.
    pub size: u64,
    /// Cost of acquiring one more example for this slice.
    pub cost: f64,
    pub validation_size: u64,
}

impl SliceState {
    pub fn new(id: impl Into<String>, size: u64, cost: f64, validation_size: u64) -> Result<Self> {
        let id = id.into();
        if !(cost.is_finite() && cost > 0.0) {
            return Err(Error::invalid(format!("slice {id}: cost must be positive, got {cost}")));
        }
        if validation_size == 0 {
            return Err(Error::invalid(format!("slice {id}: validation_size must be >= 1")));
        }
        Ok(Self { id, size, cost, validation_size })
    }
}

/// Ordered, disjoint set of slices covering the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicePartition {
    slices: Vec<SliceState>,
}

impl SlicePartition {
    pub fn new(slices: Vec<SliceState>) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::invalid("a partition needs at least one slice"));
        }
        let mut seen = HashSet::new();
        for s in &slices {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::invalid(format!("duplicate slice id {}", s.id)));
            }
        }
        Ok(Self { slices })
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn slices(&self) -> &[SliceState] {
        &self.slices
    }

    pub fn ids(&self) -> Vec<String> {
        self.slices.iter().map(|s| s.id.clone()).collect()
    }

    pub fn sizes(&self) -> Vec<u64> {
        self.slices.iter().map(|s| s.size).collect()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.cost).collect()
    }

    pub fn validation_sizes(&self) -> Vec<u64> {
        self.slices.iter().map(|s| s.validation_size).collect()
    }

    /// Copy of the partition with sizes replaced.
    pub fn with_sizes(&self, sizes: &[u64]) -> Result<Self> {
        if sizes.len() != self.slices.len() {
            return Err(Error::invalid(format!("expected {} sizes, got {}", self.slices.len(), sizes.len())));
        }
        let slices = self.slices.iter().zip(sizes).map(|(s, &size)| SliceState { size, ..s.clone() }).collect();
        Ok(Self { slices })
    }
}

/// Loss and unfairness of one trained state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub per_slice_loss: Vec<f64>,
    pub overall_loss: f64,
    pub avg_eer: f64,
    pub max_eer: f64,
}

impl LossReport {
    /// Builds a report from per-slice validation losses. The overall loss is
    /// the loss on the union of validation sets, i.e. the validation-size
    /// weighted mean of the slice losses.
    pub fn from_slice_losses(per_slice_loss: Vec<f64>, validation_sizes: &[u64]) -> Result<Self> {
        if per_slice_loss.len() != validation_sizes.len() {
            return Err(Error::invalid("loss and validation size lists differ in length"));
        }
        let total: u64 = validation_sizes.iter().sum();
        if total == 0 {
            return Err(Error::invalid("validation sizes sum to zero"));
        }
        let overall_loss =
            per_slice_loss.iter().zip(validation_sizes).map(|(l, &v)| l * v as f64).sum::<f64>() / total as f64;
        let (avg_eer, max_eer) = unfairness(&per_slice_loss, overall_loss)?;
        Ok(Self { per_slice_loss, overall_loss, avg_eer, max_eer })
    }
}

/// Acquisition budget with running spend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    total: f64,
    spent: f64,
}

impl Budget {
    pub fn new(total: f64) -> Result<Self> {
        if !(total.is_finite() && total >= 0.0) {
            return Err(Error::invalid(format!("budget must be nonnegative, got {total}")));
        }
        Ok(Self { total, spent: 0.0 })
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn spent(&self) -> f64 {
        self.spent
    }

    pub fn remaining(&self) -> f64 {
        (self.total - self.spent).max(0.0)
    }

    pub fn can_afford(&self, amount: f64) -> bool {
        amount <= self.remaining() + 1e-9
    }

    pub fn spend(&mut self, amount: f64) -> Result<()> {
        if amount < 0.0 || !self.can_afford(amount) {
            return Err(Error::invalid(format!("cannot spend {amount}: only {} remaining", self.remaining())));
        }
        self.spent = (self.spent + amount).min(self.total);
        Ok(())
    }
}

/// Binary log loss with probabilities clipped to `[eps, 1 - eps]`.
pub fn log_loss(predicted: &[f64], labels: &[u8]) -> Result<f64> {
    if predicted.is_empty() || predicted.len() != labels.len() {
        return Err(Error::invalid(format!(
            "log_loss needs equal, nonzero lengths (got {} predictions, {} labels)",
            predicted.len(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (&p, &y) in predicted.iter().zip(labels) {
        if y > 1 {
            return Err(Error::invalid(format!("binary label must be 0 or 1, got {y}")));
        }
        let p = p.clamp(LOG_LOSS_EPS, 1.0 - LOG_LOSS_EPS);
        total += if y == 1 { -p.ln() } else { -(1.0 - p).ln() };
    }
    Ok(total / predicted.len() as f64)
}

/// Categorical log loss: mean of `-ln p[label]` over rows.
pub fn categorical_log_loss(predicted: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if predicted.is_empty() || predicted.len() != labels.len() {
        return Err(Error::invalid("categorical_log_loss needs equal, nonzero lengths"));
    }
    let mut total = 0.0;
    for (row, &y) in predicted.iter().zip(labels) {
        let p =
            *row.get(y).ok_or_else(|| Error::invalid(format!("label {y} out of range for {} classes", row.len())))?;
        total -= p.clamp(LOG_LOSS_EPS, 1.0 - LOG_LOSS_EPS).ln();
    }
    Ok(total / predicted.len() as f64)
}

/// Average and maximum absolute deviation of slice losses from the overall loss.
pub fn unfairness(per_slice_loss: &[f64], overall_loss: f64) -> Result<(f64, f64)> {
    if per_slice_loss.is_empty() {
        return Err(Error::invalid("unfairness needs at least one slice loss"));
    }
    let (sum, max) =
        per_slice_loss.iter().map(|l| (l - overall_loss).abs()).fold((0.0, 0.0_f64), |(s, m), d| (s + d, m.max(d)));
    Ok((sum / per_slice_loss.len() as f64, max))
}

/// Per-example costs proportional to average task time, normalized so the
/// fastest slice costs 1.0 and rounded to one decimal.
pub fn normalize_costs(avg_task_times: &[f64]) -> Result<Vec<f64>> {
    if avg_task_times.is_empty() {
        return Err(Error::invalid("normalize_costs needs at least one time"));
    }
    if let Some(t) = avg_task_times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::invalid(format!("task times must be positive, got {t}")));
    }
    let min = avg_task_times.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(avg_task_times.iter().map(|t| (t / min * 10.0).round() / 10.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn log_loss_uniform_prediction_is_ln2() {
        let l = log_loss(&[0.5, 0.5], &[0, 1]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn log_loss_perfect_prediction_is_near_zero() {
        let l = log_loss(&[1.0 - LOG_LOSS_EPS, LOG_LOSS_EPS], &[1, 0]).unwrap();
        assert!(l <= 1.1e-7, "{l}");
        // Exact 0/1 predictions get clipped rather than producing infinities.
        let l = log_loss(&[1.0, 0.0], &[1, 0]).unwrap();
        assert!(l.is_finite() && l <= 1.1e-7);
    }

    #[test]
    fn log_loss_matches_hand_sum() {
        // -ln 0.9, -ln 0.8, -ln 0.7 summed by hand.
        let terms = [0.105_360_515_657_826_28, 0.223_143_551_314_209_7, 0.356_674_943_938_732_45];
        let expected = terms.iter().sum::<f64>() / 3.0;
        let l = log_loss(&[0.9, 0.2, 0.7], &[1, 0, 1]).unwrap();
        assert!((l - expected).abs() < 1e-12, "{l} vs {expected}");
    }

    #[test]
    fn log_loss_rejects_bad_shapes() {
        assert!(matches!(log_loss(&[], &[]), Err(Error::InvalidArgument(_))));
        assert!(matches!(log_loss(&[0.5], &[0, 1]), Err(Error::InvalidArgument(_))));
        assert!(log_loss(&[0.5], &[2]).is_err());
    }

    #[test]
    fn categorical_reduces_to_binary() {
        let probs = [0.9, 0.2, 0.7];
        let labels = [1u8, 0, 1];
        let rows: Vec<Vec<f64>> = probs.iter().map(|&p| vec![1.0 - p, p]).collect();
        let cat = categorical_log_loss(&rows, &labels.map(|l| l as usize)).unwrap();
        let bin = log_loss(&probs, &labels).unwrap();
        assert!((cat - bin).abs() < 1e-12);
    }

    #[test]
    fn toy_example_unfairness() {
        assert_eq!(unfairness(&[5.0, 3.0], 4.0).unwrap().0, 1.0);
        let (avg, _) = unfairness(&[2.0, 3.0], 2.4).unwrap();
        assert!((avg - 0.5).abs() < 1e-12);
        assert_eq!(unfairness(&[0.3, 0.3, 0.3], 0.3).unwrap(), (0.0, 0.0));
        assert!(unfairness(&[], 1.0).is_err());
    }

    #[test]
    fn table_costs() {
        let times = [82.1, 81.9, 67.6, 79.3, 94.8, 77.5, 91.6, 104.6];
        let costs = normalize_costs(&times).unwrap();
        assert_eq!(costs, vec![1.2, 1.2, 1.0, 1.2, 1.4, 1.1, 1.4, 1.5]);
        assert_eq!(normalize_costs(&[10.0, 10.0, 10.0]).unwrap(), vec![1.0; 3]);
        assert_eq!(normalize_costs(&[67.6, 135.2]).unwrap(), vec![1.0, 2.0]);
        assert!(normalize_costs(&[1.0, 0.0]).is_err());
        assert!(normalize_costs(&[]).is_err());
    }

    #[test]
    fn report_uses_validation_weights() {
        let r = LossReport::from_slice_losses(vec![1.0, 4.0], &[300, 100]).unwrap();
        assert!((r.overall_loss - 1.75).abs() < 1e-12);
        let r = LossReport::from_slice_losses(vec![1.0, 4.0], &[500, 500]).unwrap();
        assert!((r.overall_loss - 2.5).abs() < 1e-12);
        assert!((r.avg_eer - 1.5).abs() < 1e-12);
    }

    #[test]
    fn partition_rejects_duplicates_and_empty() {
        let a = SliceState::new("a", 1, 1.0, 1).unwrap();
        assert!(SlicePartition::new(vec![a.clone(), a.clone()]).is_err());
        assert!(SlicePartition::new(vec![]).is_err());
        assert!(SliceState::new("x", 1, 0.0, 1).is_err());
        assert!(SliceState::new("x", 1, 1.0, 0).is_err());
    }

    #[test]
    fn budget_never_overspends() {
        let mut b = Budget::new(10.0).unwrap();
        b.spend(7.5).unwrap();
        assert!(b.spend(3.0).is_err());
        b.spend(2.5).unwrap();
        assert_eq!(b.remaining(), 0.0);
        assert!(Budget::new(-1.0).is_err());
    }

    proptest! {
        #[test]
        fn eer_ordering(losses in prop::collection::vec(0.0f64..5.0, 1..12), overall in 0.0f64..5.0) {
            let (avg, max) = unfairness(&losses, overall).unwrap();
            prop_assert!(avg >= 0.0);
            prop_assert!(max + 1e-15 >= avg);
        }

        #[test]
        fn single_slice_shift_moves_avg_by_delta_over_n(
            losses in prop::collection::vec(0.0f64..5.0, 1..12),
            overall in 0.0f64..5.0,
            idx in 0usize..12,
            delta in -2.0f64..2.0,
        ) {
            let idx = idx % losses.len();
            let (before, _) = unfairness(&losses, overall).unwrap();
            let mut shifted = losses.clone();
            shifted[idx] += delta;
            let (after, _) = unfairness(&shifted, overall).unwrap();
            let expected = ((shifted[idx] - overall).abs() - (losses[idx] - overall).abs())
                / losses.len() as f64;
            prop_assert!((after - before - expected).abs() < 1e-12);
            // When the deviation keeps its sign, the change is exactly |delta| / n.
            let dev = losses[idx] - overall;
            if dev != 0.0 && (dev + delta).signum() == dev.signum() {
                let signed = delta * dev.signum() / losses.len() as f64;
                prop_assert!((after - before - signed).abs() < 1e-12);
            }
        }

        #[test]
        fn log_loss_nonnegative(
            pairs in prop::collection::vec((0.0f64..=1.0, 0u8..=1), 1..20)
        ) {
            let (p, y): (Vec<f64>, Vec<u8>) = pairs.into_iter().unzip();
            prop_assert!(log_loss(&p, &y).unwrap() >= 0.0);
        }

        #[test]
        fn normalized_costs_have_unit_minimum(times in prop::collection::vec(0.1f64..500.0, 1..10)) {
            let c = normalize_costs(&times).unwrap();
            prop_assert!(c.contains(&1.0));
            prop_assert!(c.iter().all(|&x| x >= 1.0));
        }
    }
}
