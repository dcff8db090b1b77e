//! Copy-mechanism arithmetic: cross-attention copy distribution, vocabulary
//! masking and the generate/copy soft switch.

use serde::{Deserialize, Serialize};
use thiserror::Error;

const SIMPLEX_TOL: f64 = 1e-9;
const NLL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CopyMixError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("mask removes all probability mass from the vocabulary distribution")]
    DegenerateMask,
    #[error("invalid probability input: {0}")]
    InvalidProbability(String),
}

/// Projections and encoder states of one attention head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    /// `d_k × d_s`
    pub w_s: Vec<Vec<f64>>,
    /// `d_k × d_h`
    pub w_h: Vec<Vec<f64>>,
    /// `n_src × d_h`
    pub h: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionInputs {
    pub s_t: Vec<f64>,
    pub d_k: usize,
    pub heads: Vec<Head>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopyDistribution {
    /// Per-head softmax weights over source positions.
    pub alpha: Vec<Vec<f64>>,
    /// Mean of `alpha` over heads.
    pub p_copy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureInputs {
    pub p_vocab: Vec<f64>,
    /// Copy distribution already scattered into vocabulary space.
    pub p_copy: Vec<f64>,
    pub p_gen: f64,
    pub source_mask: Vec<bool>,
}

fn dim(msg: impl Into<String>) -> CopyMixError {
    CopyMixError::Dimension(msg.into())
}

fn matvec(m: &[Vec<f64>], v: &[f64], what: &str) -> Result<Vec<f64>, CopyMixError> {
    m.iter()
        .map(|row| {
            if row.len() != v.len() {
                return Err(dim(format!(
                    "{what}: row has {} columns, vector has {}",
                    row.len(),
                    v.len()
                )));
            }
            Ok(row.iter().zip(v).map(|(a, b)| a * b).sum())
        })
        .collect()
}

/// `e_i = (W_s s_t)ᵀ (W_h h_i) / √d_k` for one head.
pub fn head_scores(s_t: &[f64], head: &Head, d_k: usize) -> Result<Vec<f64>, CopyMixError> {
    if d_k == 0 {
        return Err(dim("d_k must be at least 1"));
    }
    if head.w_s.len() != d_k || head.w_h.len() != d_k {
        return Err(dim(format!(
            "projections have {} and {} rows, d_k is {d_k}",
            head.w_s.len(),
            head.w_h.len()
        )));
    }
    if head.h.is_empty() {
        return Err(dim("no source positions"));
    }
    let q = matvec(&head.w_s, s_t, "W_s")?;
    let scale = (d_k as f64).sqrt();
    head.h
        .iter()
        .map(|h_i| {
            let k = matvec(&head.w_h, h_i, "W_h")?;
            Ok(q.iter().zip(&k).map(|(a, b)| a * b).sum::<f64>() / scale)
        })
        .collect()
}

/// Softmax with max subtraction.
pub fn softmax(e: &[f64]) -> Vec<f64> {
    let m = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: Vec<f64> = e.iter().map(|x| (x - m).exp()).collect();
    let total: f64 = z.iter().sum();
    z.into_iter().map(|x| x / total).collect()
}

pub fn copy_distribution(inp: &AttentionInputs) -> Result<CopyDistribution, CopyMixError> {
    if inp.heads.is_empty() {
        return Err(dim("at least one head is required"));
    }
    let n_src = inp.heads[0].h.len();
    let mut alpha = Vec::with_capacity(inp.heads.len());
    for head in &inp.heads {
        if head.h.len() != n_src {
            return Err(dim("heads disagree on the number of source positions"));
        }
        alpha.push(softmax(&head_scores(&inp.s_t, head, inp.d_k)?));
    }
    let n_h = alpha.len() as f64;
    let p_copy = (0..n_src)
        .map(|i| alpha.iter().map(|a| a[i]).sum::<f64>() / n_h)
        .collect();
    Ok(CopyDistribution { alpha, p_copy })
}

/// Sums copy mass per vocabulary entry; repeated source tokens accumulate.
pub fn scatter(p_copy: &[f64], source_ids: &[usize], vocab_size: usize) -> Result<Vec<f64>, CopyMixError> {
    if p_copy.len() != source_ids.len() {
        return Err(dim(format!(
            "{} copy weights for {} source tokens",
            p_copy.len(),
            source_ids.len()
        )));
    }
    let mut out = vec![0.0; vocab_size];
    for (p, &id) in p_copy.iter().zip(source_ids) {
        *out.get_mut(id)
            .ok_or_else(|| dim(format!("token id {id} outside vocabulary of {vocab_size}")))? += p;
    }
    Ok(out)
}

fn check_simplex(name: &str, p: &[f64]) -> Result<(), CopyMixError> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(CopyMixError::InvalidProbability(format!(
            "{name} has a negative or non-finite entry"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(CopyMixError::InvalidProbability(format!("{name} sums to {total}")));
    }
    Ok(())
}

/// Masks `p_vocab` to the source vocabulary, renormalizes, then returns
/// `p_gen · P_vocab + (1 − p_gen) · P_copy`.
pub fn mix(inp: &MixtureInputs) -> Result<Vec<f64>, CopyMixError> {
    let v = inp.p_vocab.len();
    if inp.p_copy.len() != v || inp.source_mask.len() != v {
        return Err(dim(format!(
            "vocabulary {v}, copy {}, mask {}",
            inp.p_copy.len(),
            inp.source_mask.len()
        )));
    }
    check_simplex("P_vocab", &inp.p_vocab)?;
    check_simplex("P_copy", &inp.p_copy)?;
    if !(0.0..=1.0).contains(&inp.p_gen) {
        return Err(CopyMixError::InvalidProbability(format!("p_gen = {}", inp.p_gen)));
    }
    let masked: Vec<f64> = inp
        .p_vocab
        .iter()
        .zip(&inp.source_mask)
        .map(|(p, &keep)| if keep { *p } else { 0.0 })
        .collect();
    let mass: f64 = masked.iter().sum();
    if mass <= 0.0 {
        return Err(CopyMixError::DegenerateMask);
    }
    Ok(masked
        .iter()
        .zip(&inp.p_copy)
        .map(|(pv, pc)| inp.p_gen * (pv / mass) + (1.0 - inp.p_gen) * pc)
        .collect())
}

/// Mean over steps of `−log P_t(y_t)`, probabilities floored at 1e-12.
pub fn nll_loss(p_sequence: &[Vec<f64>], targets: &[usize]) -> Result<f64, CopyMixError> {
    if p_sequence.len() != targets.len() {
        return Err(dim(format!("{} steps, {} targets", p_sequence.len(), targets.len())));
    }
    if targets.is_empty() {
        return Err(dim("empty sequence"));
    }
    let mut total = 0.0;
    for (p, &y) in p_sequence.iter().zip(targets) {
        let py = *p
            .get(y)
            .ok_or_else(|| dim(format!("target {y} outside vocabulary of {}", p.len())))?;
        total -= py.max(NLL_FLOOR).ln();
    }
    Ok(total / targets.len() as f64)
}
