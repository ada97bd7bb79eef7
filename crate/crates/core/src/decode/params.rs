use serde::{Deserialize, Serialize};

use super::DecodeError;

/// Decoding configuration. Defaults are the published inference settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingParams {
    pub top_k: usize,
    pub top_p: f64,
    pub temperature: f64,
    pub repetition_penalty: f64,
    pub cfg_scale: f64,
    /// Budget of flat tokens per score region.
    pub max_new_tokens: usize,
    pub seed: u64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            top_k: 50,
            top_p: 0.93,
            temperature: 1.0,
            repetition_penalty: 1.1,
            cfg_scale: 1.5,
            max_new_tokens: 3000,
            seed: 0,
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<(), DecodeError> {
        let bad = |m: String| Err(DecodeError::InvalidParams(m));
        if self.top_k < 1 {
            return bad("top_k must be at least 1".into());
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad(format!("top_p must be in (0, 1], got {}", self.top_p));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        if !(self.repetition_penalty >= 1.0 && self.repetition_penalty.is_finite()) {
            return bad(format!(
                "repetition_penalty must be at least 1, got {}",
                self.repetition_penalty
            ));
        }
        if !self.cfg_scale.is_finite() {
            return bad(format!("cfg_scale must be finite, got {}", self.cfg_scale));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let p = SamplingParams::default();
        assert_eq!(p.top_k, 50);
        assert_eq!(p.top_p, 0.93);
        assert_eq!(p.temperature, 1.0);
        assert_eq!(p.repetition_penalty, 1.1);
        assert_eq!(p.cfg_scale, 1.5);
        assert_eq!(p.max_new_tokens, 3000);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn invalid_values() {
        let base = SamplingParams::default();
        for p in [
            SamplingParams { top_k: 0, ..base.clone() },
            SamplingParams { top_p: 0.0, ..base.clone() },
            SamplingParams { top_p: 1.5, ..base.clone() },
            SamplingParams { temperature: 0.0, ..base.clone() },
            SamplingParams { repetition_penalty: 0.9, ..base.clone() },
            SamplingParams { cfg_scale: f64::NAN, ..base.clone() },
        ] {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }
}
