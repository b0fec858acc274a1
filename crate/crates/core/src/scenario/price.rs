//! Exogenous price paths and the sell-pressure feedback.

use serde::{Deserialize, Serialize};

use super::config::FieldError;
use crate::units::Epoch;

/// USD price as a function of the epoch.
///
/// JSON examples: `{"constant": {"value": 2000}}`,
/// `{"geometric": {"start": 2000, "rate_per_epoch": -0.01}}`,
/// `{"series": {"values": [2000, 1900, 1500]}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PricePath {
    Constant { value: f64 },
    Linear { start: f64, slope_per_epoch: f64 },
    /// `start * (1 + rate_per_epoch)^t`.
    Geometric { start: f64, rate_per_epoch: f64 },
    /// `start` before `at_epoch`, `start * factor` from then on.
    Shock { start: f64, at_epoch: Epoch, factor: f64 },
    /// One value per epoch; the last value holds afterwards.
    Series { values: Vec<f64> },
}

impl PricePath {
    pub fn value_at(&self, epoch: Epoch) -> f64 {
        let v = match self {
            PricePath::Constant { value } => *value,
            PricePath::Linear { start, slope_per_epoch } => start + slope_per_epoch * epoch as f64,
            PricePath::Geometric { start, rate_per_epoch } => start * (1.0 + rate_per_epoch).powf(epoch as f64),
            PricePath::Shock { start, at_epoch, factor } => {
                if epoch >= *at_epoch {
                    start * factor
                } else {
                    *start
                }
            }
            PricePath::Series { values } => {
                values.get(epoch as usize).or(values.last()).copied().unwrap_or(0.0)
            }
        };
        v.max(0.0)
    }

    pub fn initial(&self) -> f64 {
        self.value_at(0)
    }

    /// Rescales the path so that it starts at `value`.
    pub fn set_initial(&mut self, value: f64) {
        match self {
            PricePath::Constant { value: v } => *v = value,
            PricePath::Linear { start, .. } | PricePath::Geometric { start, .. } | PricePath::Shock { start, .. } => {
                *start = value
            }
            PricePath::Series { values } => {
                let first = values.first().copied().unwrap_or(0.0);
                if first > 0.0 {
                    values.iter_mut().for_each(|v| *v *= value / first);
                } else {
                    *values = vec![value];
                }
            }
        }
    }

    pub(crate) fn check(&self, field: &str, errors: &mut Vec<FieldError>) {
        let finite_non_negative = |x: f64| x.is_finite() && x >= 0.0;
        let ok = match self {
            PricePath::Constant { value } => finite_non_negative(*value),
            PricePath::Linear { start, slope_per_epoch } => finite_non_negative(*start) && slope_per_epoch.is_finite(),
            PricePath::Geometric { start, rate_per_epoch } => {
                finite_non_negative(*start) && rate_per_epoch.is_finite() && *rate_per_epoch > -1.0
            }
            PricePath::Shock { start, factor, .. } => finite_non_negative(*start) && finite_non_negative(*factor),
            PricePath::Series { values } => !values.is_empty() && values.iter().all(|v| finite_non_negative(*v)),
        };
        if !ok {
            errors.push(FieldError::new(field, "price path must be finite and non-negative"));
        }
    }
}

/// Price after sell pressure: `path_value * (1 - lambda * net_sell_fraction)`,
/// floored at zero. The fraction is clamped to `[0, 1]`.
pub fn update_price(path_value: f64, net_sell_fraction: f64, lambda: f64) -> f64 {
    (path_value * (1.0 - lambda * net_sell_fraction.clamp(0.0, 1.0))).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths() {
        assert_eq!(PricePath::Constant { value: 5.0 }.value_at(99), 5.0);
        let lin = PricePath::Linear { start: 10.0, slope_per_epoch: -3.0 };
        assert_eq!(lin.value_at(2), 4.0);
        assert_eq!(lin.value_at(10), 0.0);
        let geo = PricePath::Geometric { start: 100.0, rate_per_epoch: -0.5 };
        assert_eq!(geo.value_at(2), 25.0);
        let shock = PricePath::Shock { start: 100.0, at_epoch: 3, factor: 0.4 };
        assert_eq!(shock.value_at(2), 100.0);
        assert_eq!(shock.value_at(3), 40.0);
        let series = PricePath::Series { values: vec![1.0, 2.0, 3.0] };
        assert_eq!(series.value_at(1), 2.0);
        assert_eq!(series.value_at(50), 3.0);
    }

    #[test]
    fn set_initial_rescales() {
        let mut s = PricePath::Series { values: vec![2.0, 4.0] };
        s.set_initial(1000.0);
        assert_eq!(s, PricePath::Series { values: vec![1000.0, 2000.0] });
        let mut g = PricePath::Geometric { start: 1.0, rate_per_epoch: 0.1 };
        g.set_initial(500.0);
        assert_eq!(g.initial(), 500.0);
    }

    #[test]
    fn update_price_examples() {
        assert_eq!(update_price(2000.0, 0.7, 0.0), 2000.0);
        assert!((update_price(2000.0, 0.5, 0.1) - 2000.0 * 0.95).abs() < 1e-12);
        assert_eq!(update_price(2000.0, 0.0, 0.3), 2000.0);
        assert_eq!(update_price(2000.0, 1.0, 1.0), 0.0);
    }
}
