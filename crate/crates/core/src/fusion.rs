//! Weighted fusion of the text, image and contextual bias components into a
//! single score, plus severity banding.
//!
//! The fused score is `B = alpha*T + beta*I + gamma*C`, where the weights are
//! renormalized over the components that are actually present. A text-only
//! item therefore scores `B = T`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finding::BiasFinding;

/// Relative importance of the text, image and context components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.3,
            gamma: 0.2,
        }
    }
}

impl FusionWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma }
    }

    fn as_array(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    fn check_non_negative(&self) -> Result<()> {
        for w in self.as_array() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::DegenerateWeights(format!(
                    "weights must be finite and non-negative, got {self:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Scale weights so they sum to one.
pub fn normalize_weights(w: FusionWeights) -> Result<FusionWeights> {
    w.check_non_negative()?;
    let sum = w.alpha + w.beta + w.gamma;
    if sum <= 0.0 {
        return Err(Error::DegenerateWeights("all weights are zero".into()));
    }
    Ok(FusionWeights {
        alpha: w.alpha / sum,
        beta: w.beta / sum,
        gamma: w.gamma / sum,
    })
}

/// The three bias components. Absent components take no part in fusion.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BiasComponents {
    #[serde(rename = "text")]
    pub text_score: Option<f64>,
    #[serde(rename = "image")]
    pub image_score: Option<f64>,
    #[serde(rename = "context")]
    pub context_score: Option<f64>,
}

impl BiasComponents {
    pub fn text_only(t: f64) -> Self {
        Self {
            text_score: Some(t),
            ..Self::default()
        }
    }

    pub fn new(text: Option<f64>, image: Option<f64>, context: Option<f64>) -> Self {
        Self {
            text_score: text,
            image_score: image,
            context_score: context,
        }
    }

    fn as_array(&self) -> [Option<f64>; 3] {
        [self.text_score, self.image_score, self.context_score]
    }

    fn validate(&self) -> Result<()> {
        let present: Vec<f64> = self.as_array().into_iter().flatten().collect();
        if present.is_empty() {
            return Err(Error::EmptyComponents);
        }
        for v in present {
            check_unit(v)?;
        }
        Ok(())
    }
}

fn check_unit(value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::Range {
            value,
            min: 0.0,
            max: 1.0,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeverityBand {
    Minimal,
    Low,
    Moderate,
    High,
    Critical,
}

impl SeverityBand {
    pub fn as_str(&self) -> &'static str {
        match self {
            SeverityBand::Minimal => "minimal",
            SeverityBand::Low => "low",
            SeverityBand::Moderate => "moderate",
            SeverityBand::High => "high",
            SeverityBand::Critical => "critical",
        }
    }
}

impl fmt::Display for SeverityBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Five equal-width bands over [0, 1]; the top band includes 1.0.
pub fn band_of(value: f64) -> Result<SeverityBand> {
    check_unit(value)?;
    Ok(if value < 0.2 {
        SeverityBand::Minimal
    } else if value < 0.4 {
        SeverityBand::Low
    } else if value < 0.6 {
        SeverityBand::Moderate
    } else if value < 0.8 {
        SeverityBand::High
    } else {
        SeverityBand::Critical
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasScore {
    pub value: f64,
    pub band: SeverityBand,
}

/// Fuse the present components under `w`, renormalizing the weights over the
/// present components only.
pub fn fuse_scores(c: &BiasComponents, w: &FusionWeights) -> Result<BiasScore> {
    c.validate()?;
    w.check_non_negative()?;

    let mut weight_sum = 0.0;
    let mut weighted = 0.0;
    for (component, weight) in c.as_array().into_iter().zip(w.as_array()) {
        if let Some(v) = component {
            weight_sum += weight;
            weighted += weight * v;
        }
    }
    if weight_sum <= 0.0 {
        return Err(Error::DegenerateWeights(
            "every present component has zero weight".into(),
        ));
    }
    let value = (weighted / weight_sum).clamp(0.0, 1.0);
    Ok(BiasScore {
        value,
        band: band_of(value)?,
    })
}

/// Cross-modal reinforcement: Jaccard overlap of the bias categories found in
/// two modalities of the same item. Zero when either side has no findings.
pub fn contextual_score(findings_a: &[BiasFinding], findings_b: &[BiasFinding]) -> f64 {
    let a: BTreeSet<&str> = findings_a.iter().map(|f| f.category.as_str()).collect();
    let b: BTreeSet<&str> = findings_b.iter().map(|f| f.category.as_str()).collect();
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let shared = a.intersection(&b).count();
    let union = a.union(&b).count();
    shared as f64 / union as f64
}
