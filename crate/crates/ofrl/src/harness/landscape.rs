//! Objective-landscape export over a 1-D action grid: the composed critic
//! value per trained offset critic, and the reward critic plus scaled
//! behavior log-density per KL coefficient.

use ndarray::Array2;

use crate::autodiff::Tape;
use crate::bc::BehaviorDensity;
use crate::critic::{CriticPair, QSelect};
use crate::error::{OfrlError, Result};
use crate::oracle::Grid1D;

/// What to put in the columns.
pub struct LandscapeInputs<'a> {
    pub behavior: &'a BehaviorDensity,
    /// Offset critics, one column each: `label -> O(a) + log mu(a)`.
    pub offset_critics: Vec<(String, &'a CriticPair)>,
    /// Plain reward critic evaluated as `R(a) + alpha log mu(a)`, one
    /// column per alpha.
    pub reward_critic: Option<&'a CriticPair>,
    pub alphas: Vec<f64>,
}

/// Evaluate every column on the grid and render a CSV with header
/// `action,log_mu,<columns...>`. All models must be 1-D in the action.
pub fn export_landscape(inputs: &LandscapeInputs<'_>, grid: &Grid1D) -> Result<String> {
    for (label, c) in &inputs.offset_critics {
        if c.action_dim != 1 {
            return Err(OfrlError::InvalidConfig(format!(
                "landscape needs a 1-D action space; '{label}' has dim {}",
                c.action_dim
            )));
        }
    }
    if let Some(c) = inputs.reward_critic {
        if c.action_dim != 1 {
            return Err(OfrlError::InvalidConfig(
                "landscape needs a 1-D action space for the reward critic".into(),
            ));
        }
    }

    let tape = Tape::new();
    let n = grid.count;
    let actions = Array2::from_shape_vec((1, n), grid.points())
        .expect("grid points");
    let a = tape.constant(crate::dist::clamp_actions(actions));
    // every model here is state-independent through a dummy zero state
    let state_dim = inputs
        .offset_critics
        .first()
        .map(|(_, c)| c.state_dim)
        .or(inputs.reward_critic.map(|c| c.state_dim))
        .unwrap_or(1);
    let s = tape.constant(Array2::zeros((state_dim, n)));

    let log_mu = {
        let b = inputs.behavior.on_tape(&tape);
        tape.value_owned(b.log_prob(&tape, s, a)?)
    };

    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for (label, critic) in &inputs.offset_critics {
        let ctx = critic.on_tape_frozen(&tape, Some(inputs.behavior));
        let q = ctx.q_value(&tape, s, a, QSelect::OnlineMin)?;
        let v = tape.value_owned(q);
        columns.push((label.clone(), (0..n).map(|j| v[[0, j]]).collect()));
    }
    if let Some(critic) = inputs.reward_critic {
        let ctx = critic.on_tape_frozen(&tape, None);
        let r = ctx.q_value(&tape, s, a, QSelect::OnlineMin)?;
        let rv = tape.value_owned(r);
        for &alpha in &inputs.alphas {
            let col: Vec<f64> = (0..n)
                .map(|j| rv[[0, j]] + alpha * log_mu[[0, j]])
                .collect();
            columns.push((format!("brac_alpha_{alpha}"), col));
        }
    }

    for (label, col) in &columns {
        if col.iter().any(|v| !v.is_finite()) {
            return Err(OfrlError::InvalidConfig(format!(
                "non-finite landscape value in column '{label}'"
            )));
        }
    }

    let mut out = String::from("action,log_mu");
    for (label, _) in &columns {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    for j in 0..n {
        out.push_str(&format!("{},{}", grid.point(j), log_mu[[0, j]]));
        for (_, col) in &columns {
            out.push_str(&format!(",{}", col[j]));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Column-wise argmax helper for landscape assertions and summaries:
/// returns the actions achieving the maximum within `tol` of it.
pub fn global_maxima(grid: &Grid1D, column: &[f64], tol: f64) -> Vec<f64> {
    let m = column.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    grid.points()
        .iter()
        .zip(column)
        .filter(|(_, &v)| v >= m - tol)
        .map(|(&a, _)| a)
        .collect()
}

/// Parse one labeled column back out of an exported landscape CSV.
pub fn parse_landscape_column(csv: &str, label: &str) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut lines = csv.lines();
    let header = lines.next()?;
    let col_idx = header.split(',').position(|h| h == label)?;
    let mut actions = Vec::new();
    let mut values = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        actions.push(fields.first()?.parse().ok()?);
        values.push(fields.get(col_idx)?.parse().ok()?);
    }
    Some((actions, values))
}
