//! Central finite-difference check of the joint loss gradient.

use treemend_core::teacher::StepDistributions;

use crate::model::{Forward, Model};
use crate::scalar::Scalar;
use crate::tape::Tape;
use crate::train::{teachers, Example};
use crate::NeuralError;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    /// Entries whose relative error is below the tolerance.
    pub within: usize,
    pub max_rel: f64,
    pub worst: String,
}

impl GradCheck {
    pub fn fraction(&self) -> f64 {
        self.within as f64 / self.checked.max(1) as f64
    }
}

/// Joint loss and its gradient at fixed teachers.
pub fn loss_and_grad<T: Scalar>(
    model: &Model<T>,
    ex: &Example,
    teach: Option<&[StepDistributions]>,
    grads: bool,
) -> Result<(f64, Vec<Option<Vec<T>>>), NeuralError> {
    let mut tape = Tape::new(&model.params.tensors);
    let mut f = Forward::new(&mut tape, model, None);
    let enc = f.encode(&ex.asg)?;
    let heads = f.decode(enc, &ex.inputs)?;
    let parts = f.joint_loss(heads, &ex.inputs, teach, 1.0);
    let total = f.total(parts);
    let value = f.tape.value(total).data[0].f64();
    let g = if grads { f.tape.backward(total) } else { Vec::new() };
    Ok((value, g))
}

/// Teachers from the students of `model`, held fixed during the check.
pub fn fixed_teachers(model: &Model<f64>, ex: &Example) -> Result<Vec<StepDistributions>, NeuralError> {
    let mut tape = Tape::new(&model.params.tensors);
    let mut f = Forward::new(&mut tape, model, None);
    let enc = f.encode(&ex.asg)?;
    let heads = f.decode(enc, &ex.inputs)?;
    Ok(teachers(&f.distributions(heads), &ex.verdicts))
}

/// Compare the analytic gradient of `analytic` (any precision) with central
/// differences of `reference` (f64, same values) on every parameter entry.
/// Relative error is `|a - n| / max(|a|, |n|, floor)`.
pub fn check<T: Scalar>(
    analytic: &Model<T>,
    reference: &Model<f64>,
    ex: &Example,
    distill: bool,
    step: f64,
    floor: f64,
    tol: f64,
) -> Result<GradCheck, NeuralError> {
    let teach = if distill { Some(fixed_teachers(reference, ex)?) } else { None };
    let teach_t = teach.as_deref();
    let (_, grads) = loss_and_grad(analytic, ex, teach_t, true)?;
    let mut probe = reference.clone();
    let mut out = GradCheck {
        checked: 0,
        within: 0,
        max_rel: 0.0,
        worst: String::new(),
    };
    for (p, g) in grads.iter().enumerate() {
        for k in 0..reference.params.tensors[p].data.len() {
            let a = g.as_ref().map_or(0.0, |g| g[k].f64());
            let orig = probe.params.tensors[p].data[k];
            probe.params.tensors[p].data[k] = orig + step;
            let (lp, _) = loss_and_grad(&probe, ex, teach_t, false)?;
            probe.params.tensors[p].data[k] = orig - step;
            let (lm, _) = loss_and_grad(&probe, ex, teach_t, false)?;
            probe.params.tensors[p].data[k] = orig;
            let n = (lp - lm) / (2.0 * step);
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(floor);
            out.checked += 1;
            if rel < tol {
                out.within += 1;
            }
            if rel > out.max_rel {
                out.max_rel = rel;
                out.worst = format!("{}[{k}]: analytic {a:e}, numeric {n:e}", reference.params.names[p]);
            }
        }
    }
    Ok(out)
}
