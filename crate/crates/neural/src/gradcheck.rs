//! Central finite-difference verification of analytic gradients.

use crate::config::EncoderConfig;
use crate::encoder::ModelInput;
use crate::error::Result;
use crate::objective::{loss, loss_and_grads, Objective};
use crate::params::EncoderParameters;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `tensor[row, col]` where the worst error occurred.
    pub worst: String,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, floor)`. The floor keeps entries whose true
/// gradient is zero from dividing rounding noise by zero.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compare every parameter entry's analytic gradient with
/// `(L(w + eps) - L(w - eps)) / 2 eps`.
pub fn check_gradients(
    config: &EncoderConfig,
    params: &EncoderParameters,
    input: &ModelInput,
    objective: Objective<'_>,
    eps: f64,
    floor: f64,
) -> Result<GradCheckReport> {
    let (_, grads) = loss_and_grads(config, params, input, objective)?;
    let analytic: Vec<(String, Vec<f64>, usize)> = grads
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.iter().copied().collect(), t.ncols()))
        .collect();
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: String::new(),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (tensor_idx, (name, values, cols)) in analytic.iter().enumerate() {
        for (k, &a) in values.iter().enumerate() {
            let (r, c) = (k / cols, k % cols);
            let mut eval = |delta: f64| -> Result<f64> {
                let mut idx = 0;
                probe.for_each_mut(|_, t| {
                    if idx == tensor_idx {
                        t[[r, c]] += delta;
                    }
                    idx += 1;
                });
                let l = loss(config, &probe, input, objective).map(|s| s.loss);
                let mut idx = 0;
                probe.for_each_mut(|_, t| {
                    if idx == tensor_idx {
                        t[[r, c]] -= delta;
                    }
                    idx += 1;
                });
                l
            };
            let numeric = (eval(eps)? - eval(-eps)?) / (2.0 * eps);
            let err = relative_error(a, numeric, floor);
            report.checked += 1;
            if err > report.max_relative_error || report.worst.is_empty() {
                report.max_relative_error = err;
                report.worst = format!("{name}[{r}, {c}]");
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
