use serde::{Deserialize, Serialize};

use super::TrialResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Erm,
    Rrm,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Erm, Method::Rrm];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Erm => "ERM",
            Method::Rrm => "RRM",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Order statistics of one method's metric over the non-excluded trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub excluded: usize,
}

/// Quantile with linear interpolation between order statistics of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile(&sorted, 0.5)
}

impl MethodSummary {
    pub fn from_trials(method: Method, trials: &[TrialResult]) -> Self {
        let mine = trials.iter().filter(|t| t.method == method);
        let mut values = Vec::new();
        let mut excluded = 0;
        for t in mine {
            if t.excluded {
                excluded += 1;
            } else {
                values.push(t.value);
            }
        }
        values.sort_by(f64::total_cmp);
        MethodSummary {
            method,
            mean: mean(&values),
            q25: quantile(&values, 0.25),
            q50: quantile(&values, 0.5),
            q75: quantile(&values, 0.75),
            min: values.first().copied().unwrap_or(f64::NAN),
            max: values.last().copied().unwrap_or(f64::NAN),
            count: values.len(),
            excluded,
        }
    }
}
