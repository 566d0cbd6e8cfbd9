//! Teacher distributions: the student distribution rewritten by rule
//! verdicts (must → 1, might → unchanged, invalid → 0) and renormalized.

use crate::error::ShapeError;
use crate::rules::{NodeVerdicts, SyntaxVerdicts, Verdict};

const FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Shaped {
    pub probs: Vec<f64>,
    /// Set when every entry was ruled out; `probs` is then the student.
    pub degenerate: bool,
}

/// Shape `dist` given a verdict per index.
pub fn shape_by_verdict(dist: &[f64], verdicts: &[Verdict]) -> Result<Shaped, ShapeError> {
    if dist.len() != verdicts.len() {
        return Err(ShapeError::NotPartition {
            len: dist.len(),
            detail: format!("{} verdicts", verdicts.len()),
        });
    }
    if verdicts.iter().all(|v| *v == Verdict::Might) {
        return Ok(Shaped {
            probs: dist.to_vec(),
            degenerate: false,
        });
    }
    let mut out: Vec<f64> = dist
        .iter()
        .zip(verdicts)
        .map(|(&p, v)| match v {
            Verdict::Must => 1.0,
            Verdict::Might => p,
            Verdict::Invalid => 0.0,
        })
        .collect();
    let total: f64 = out.iter().sum();
    let any_must = verdicts.contains(&Verdict::Must);
    if !any_must && total < FLOOR {
        return Ok(Shaped {
            probs: dist.to_vec(),
            degenerate: true,
        });
    }
    let z = total.max(FLOOR);
    for p in &mut out {
        *p /= z;
    }
    Ok(Shaped {
        probs: out,
        degenerate: false,
    })
}

/// Shape `dist` given the three index sets, which must partition its indices.
pub fn shape(dist: &[f64], must: &[usize], might: &[usize], invalid: &[usize]) -> Result<Shaped, ShapeError> {
    let n = dist.len();
    let mut verdicts: Vec<Option<Verdict>> = vec![None; n];
    for (set, v) in [(must, Verdict::Must), (might, Verdict::Might), (invalid, Verdict::Invalid)] {
        for &i in set {
            match verdicts.get_mut(i) {
                None => {
                    return Err(ShapeError::NotPartition {
                        len: n,
                        detail: format!("index {i} out of range"),
                    })
                }
                Some(Some(_)) => {
                    return Err(ShapeError::NotPartition {
                        len: n,
                        detail: format!("index {i} in two sets"),
                    })
                }
                Some(slot) => *slot = Some(v),
            }
        }
    }
    let verdicts: Vec<Verdict> = verdicts
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| ShapeError::NotPartition {
                len: n,
                detail: format!("index {i} in no set"),
            })
        })
        .collect::<Result<_, _>>()?;
    shape_by_verdict(dist, &verdicts)
}

/// Parent, edge and node distributions of one decoding step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistributions {
    pub parent: Vec<f64>,
    pub edge: Vec<f64>,
    pub node: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapedStep {
    pub teacher: StepDistributions,
    /// Degenerate flags for parent, edge, node.
    pub degenerate: [bool; 3],
}

/// Shape all three distributions of a step. Edge verdicts are those of
/// `selected_parent`.
pub fn shape_step(
    student: &StepDistributions,
    sv: &SyntaxVerdicts,
    nv: &NodeVerdicts,
    selected_parent: usize,
) -> Result<ShapedStep, ShapeError> {
    let p = shape_by_verdict(&student.parent, &sv.parents)?;
    let edge_verdicts = sv.edges.get(selected_parent).ok_or(ShapeError::NotPartition {
        len: sv.edges.len(),
        detail: format!("parent {selected_parent} not emitted"),
    })?;
    let e = shape_by_verdict(&student.edge, edge_verdicts)?;
    let n = shape_by_verdict(&student.node, &nv.verdicts)?;
    Ok(ShapedStep {
        degenerate: [p.degenerate, e.degenerate, n.degenerate],
        teacher: StepDistributions {
            parent: p.probs,
            edge: e.probs,
            node: n.probs,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_without_constraints() {
        let d = [0.1, 0.2, 0.7];
        let s = shape(&d, &[], &[0, 1, 2], &[]).unwrap();
        assert_eq!(s.probs, d.to_vec());
        assert!(!s.degenerate);
    }

    #[test]
    fn all_invalid_falls_back() {
        let d = [0.5, 0.5, 0.0];
        let s = shape(&d, &[], &[2], &[0, 1]).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.probs, d.to_vec());
    }

    #[test]
    fn partition_errors() {
        let d = [0.5, 0.5];
        assert!(shape(&d, &[0], &[0, 1], &[]).is_err());
        assert!(shape(&d, &[0], &[], &[]).is_err());
        assert!(shape(&d, &[0], &[1], &[2]).is_err());
    }
}
