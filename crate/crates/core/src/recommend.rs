//! Mitigation suggestions for report findings.
//!
//! Every finding gets a rule-based suggestion. With a chat backend, each
//! finding also gets a model-written candidate. Candidates are ranked by
//! coverage minus verbosity: `targets - 0.001 * chars`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::backends::{ChatBackend, ChatMessage, UsageRecord};
use crate::error::Result;
use crate::finding::BiasFinding;
use crate::report::BiasReport;
use crate::risk::RiskAssessment;
use crate::text::ModelLayer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecommendationSource {
    Model,
    Rule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub id: String,
    pub text: String,
    pub target_finding_ids: BTreeSet<String>,
    pub source: RecommendationSource,
    pub rank_score: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Generated {
    pub recommendations: Vec<Recommendation>,
    pub usage: UsageRecord,
    pub warnings: Vec<String>,
}

pub fn rule_text(f: &BiasFinding) -> String {
    format!(
        "Consider rephrasing '{}', which may reflect {} bias. {}",
        f.excerpt, f.category, f.explanation
    )
    .trim_end()
    .to_string()
}

const SYSTEM_PROMPT: &str = "You help authors make content fairer. Given a flagged passage, reply with one concrete alternative wording or action that removes the biased implication while keeping the intent. Reply with the suggestion only.";

fn prompt_for(f: &BiasFinding, risk_context: Option<&RiskAssessment>) -> String {
    let mut prompt = format!(
        "Flagged passage ({}): \"{}\"\nCategory: {}\nWhy it was flagged: {}",
        f.modality, f.excerpt, f.category, f.explanation
    );
    if let Some(ctx) = risk_context {
        let risks: Vec<&str> = ctx.rows.iter().map(|r| r.risk.entry.title.as_str()).collect();
        if !risks.is_empty() {
            prompt.push_str(&format!("\nRelated AI risks: {}", risks.join("; ")));
        }
    }
    prompt
}

/// Produce unranked candidates for every finding in `report`.
pub fn generate(
    report: &BiasReport,
    backend: Option<&dyn ChatBackend>,
    risk_context: Option<&RiskAssessment>,
    model_layer: ModelLayer,
) -> Result<Generated> {
    let mut out = Generated::default();
    for f in &report.findings {
        out.recommendations.push(Recommendation {
            id: format!("rule-{}", f.id),
            text: rule_text(f),
            target_finding_ids: BTreeSet::from([f.id.clone()]),
            source: RecommendationSource::Rule,
            rank_score: 0.0,
        });
    }
    let backend = match (model_layer, backend) {
        (ModelLayer::Disabled, _) | (_, None) => return Ok(out),
        (_, Some(b)) => b,
    };
    for f in &report.findings {
        let reply = backend.chat(vec![
            ChatMessage::system(SYSTEM_PROMPT),
            ChatMessage::user(prompt_for(f, risk_context)),
        ]);
        match reply {
            Ok(exchange) => {
                out.usage = out.usage.merge(exchange.usage);
                let text = exchange.response_text.trim().to_string();
                if text.is_empty() {
                    continue;
                }
                out.recommendations.push(Recommendation {
                    id: format!("model-{}", f.id),
                    text,
                    target_finding_ids: BTreeSet::from([f.id.clone()]),
                    source: RecommendationSource::Model,
                    rank_score: 0.0,
                });
            }
            Err(e) if model_layer == ModelLayer::Optional => {
                out.warnings
                    .push(format!("model recommendations unavailable, using rules only: {e}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub fn rank_score(r: &Recommendation) -> f64 {
    r.target_finding_ids.len() as f64 - 0.001 * r.text.chars().count() as f64
}

/// Score and sort by descending `rank_score`, ties by ascending id.
pub fn rank(mut recs: Vec<Recommendation>) -> Vec<Recommendation> {
    for r in &mut recs {
        r.rank_score = rank_score(r);
    }
    recs.sort_by(|a, b| {
        b.rank_score
            .total_cmp(&a.rank_score)
            .then_with(|| a.id.cmp(&b.id))
    });
    recs
}
