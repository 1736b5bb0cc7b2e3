//! Loss evaluation and exact gradients for the three training objectives.

use rand::RngCore;

use crate::config::EncoderConfig;
use crate::encoder::{backward, forward, ModelInput};
use crate::error::{Error, Result};
use crate::heads::{cross_entropy_head, phs_loss, project, LossStats, PhsTargets};
use crate::params::{EncoderParameters, Matrix};

#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// Per-token tag ids; `None` is ignored.
    Tags(&'a [Option<u32>]),
    /// Original token ids at masked positions, `None` elsewhere.
    MaskedTokens(&'a [Option<u32>]),
    HeadingSlots(&'a PhsTargets),
}

/// Tag logits `[len x tag_count]` for one sequence.
pub fn label_logits(config: &EncoderConfig, params: &EncoderParameters, input: &ModelInput) -> Result<Matrix> {
    let pass = forward(config, params, input, None)?;
    project(&pass.hidden, &params.label_w, &params.label_b)
}

fn unmasked(targets: &[Option<u32>], input: &ModelInput) -> Result<Vec<Option<u32>>> {
    if targets.len() != input.len() {
        return Err(Error::Input(format!(
            "{} targets for {} positions",
            targets.len(),
            input.len()
        )));
    }
    Ok(targets
        .iter()
        .zip(&input.mask)
        .map(|(&t, &m)| if m { t } else { None })
        .collect())
}

/// Add `weight * d(loss)/d(params)` into `grads` and return the loss.
pub fn accumulate(
    config: &EncoderConfig,
    params: &EncoderParameters,
    input: &ModelInput,
    objective: Objective<'_>,
    weight: f64,
    grads: &mut EncoderParameters,
    dropout_rng: Option<&mut dyn RngCore>,
) -> Result<LossStats> {
    let pass = forward(config, params, input, dropout_rng)?;
    let (stats, mut d_hidden) = match objective {
        Objective::Tags(t) | Objective::MaskedTokens(t) => {
            let targets = unmasked(t, input)?;
            let (w, b, gw, gb) = match objective {
                Objective::Tags(_) => (&params.label_w, &params.label_b, &mut grads.label_w, &mut grads.label_b),
                _ => (&params.mlm_w, &params.mlm_b, &mut grads.mlm_w, &mut grads.mlm_b),
            };
            let (stats, g) = cross_entropy_head(&pass.hidden, w, b, &targets)?;
            gw.scaled_add(weight, &g.d_w);
            gb.scaled_add(weight, &g.d_b);
            (stats, g.d_hidden)
        }
        Objective::HeadingSlots(t) => phs_loss(&pass.hidden, t)?,
    };
    d_hidden.mapv_inplace(|v| v * weight);
    backward(config, params, input, &pass, &d_hidden, grads);
    Ok(stats)
}

/// Loss and its full gradient for a single sequence, without dropout.
pub fn loss_and_grads(
    config: &EncoderConfig,
    params: &EncoderParameters,
    input: &ModelInput,
    objective: Objective<'_>,
) -> Result<(LossStats, EncoderParameters)> {
    let mut grads = params.zeros_like();
    let stats = accumulate(config, params, input, objective, 1.0, &mut grads, None)?;
    Ok((stats, grads))
}

/// Forward-only loss, without dropout.
pub fn loss(
    config: &EncoderConfig,
    params: &EncoderParameters,
    input: &ModelInput,
    objective: Objective<'_>,
) -> Result<LossStats> {
    let pass = forward(config, params, input, None)?;
    match objective {
        Objective::Tags(t) => Ok(cross_entropy_head(&pass.hidden, &params.label_w, &params.label_b, &unmasked(t, input)?)?.0),
        Objective::MaskedTokens(t) => Ok(cross_entropy_head(&pass.hidden, &params.mlm_w, &params.mlm_b, &unmasked(t, input)?)?.0),
        Objective::HeadingSlots(t) => Ok(phs_loss(&pass.hidden, t)?.0),
    }
}
