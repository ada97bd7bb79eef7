use rand::Rng;

use super::DecodeError;
use crate::tokenizer::TokenId;

pub fn apply_temperature(logits: &mut [f64], temperature: f64) {
    if temperature == 1.0 {
        return;
    }
    for l in logits {
        *l /= temperature;
    }
}

/// Penalizes every token with a positive count: positive logits are divided
/// by `penalty`, the others multiplied.
pub fn apply_repetition_penalty(logits: &mut [f64], counts: &[u32], penalty: f64) {
    if penalty == 1.0 {
        return;
    }
    for (l, &c) in logits.iter_mut().zip(counts) {
        if c > 0 {
            if *l > 0.0 {
                *l /= penalty;
            } else {
                *l *= penalty;
            }
        }
    }
}

/// Guided logits `cond + (s - 1)(cond - uncond)`, the same value as
/// `uncond + s(cond - uncond)`. A token impossible under the conditional
/// stays impossible; where only the unconditional branch rules a token out
/// the conditional logit is kept.
pub fn cfg_combine(cond: &[f64], uncond: &[f64], s: f64) -> Result<Vec<f64>, DecodeError> {
    if cond.len() != uncond.len() {
        return Err(DecodeError::LengthMismatch {
            cond: cond.len(),
            uncond: uncond.len(),
        });
    }
    Ok(cond
        .iter()
        .zip(uncond)
        .map(|(&c, &u)| {
            if c == u || !u.is_finite() || !c.is_finite() {
                c
            } else {
                c + (s - 1.0) * (c - u)
            }
        })
        .collect())
}

/// Softmax; `None` when every logit is `-inf`.
pub fn softmax(logits: &[f64]) -> Option<Vec<f64>> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return None;
    }
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    Some(exps.into_iter().map(|e| e / z).collect())
}

/// Token ids by probability, highest first, ties broken by lower id.
fn ranked(probs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    idx
}

/// Keeps the `k` most probable tokens, then the shortest prefix of those
/// (renormalized) whose mass reaches `p`, at least one token; renormalizes.
pub fn filter_top_k_top_p(probs: &[f64], k: usize, p: f64) -> Vec<f64> {
    let order = ranked(probs);
    let kept = &order[..k.min(order.len())];
    let mass_k: f64 = kept.iter().map(|&i| probs[i]).sum();
    let mut out = vec![0.0; probs.len()];
    if mass_k <= 0.0 {
        if let Some(&first) = kept.first() {
            out[first] = 1.0;
        }
        return out;
    }
    let mut cum = 0.0;
    let mut n = 0;
    for &i in kept {
        cum += probs[i] / mass_k;
        n += 1;
        if cum >= p - 1e-12 {
            break;
        }
    }
    let mass: f64 = kept[..n].iter().map(|&i| probs[i]).sum();
    for &i in &kept[..n] {
        out[i] = probs[i] / mass;
    }
    out
}

/// Highest-probability token, lowest id on ties.
pub fn argmax(probs: &[f64]) -> TokenId {
    ranked(probs)[0] as TokenId
}

/// Inverse-CDF draw over ids in ascending order.
pub fn sample(probs: &[f64], rng: &mut impl Rng) -> TokenId {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            cum += p;
            last = i;
            if u < cum {
                return i as TokenId;
            }
        }
    }
    last as TokenId
}
