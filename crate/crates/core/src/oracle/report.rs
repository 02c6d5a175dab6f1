//! Machine-readable verification records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ExactDistribution, Target};

/// One probability, with its exact form when known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawEntry {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
}

pub type Law = BTreeMap<u64, LawEntry>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub sampler: String,
    pub stream_id: String,
    pub conditional_law: Law,
    pub target_law: Law,
    pub exact_match: bool,
    pub pvalue: Option<f64>,
    pub tv: Option<f64>,
}

/// Conditional law of an exact distribution; exact strings when the success
/// mass has an exact reciprocal.
pub fn conditional_law(d: &ExactDistribution) -> Law {
    let inv = d.success().recip();
    let f = d.conditional_f64();
    d.index
        .iter()
        .map(|(&i, m)| (i, LawEntry { value: f[&i], exact: inv.as_ref().map(|r| (m * r).to_string()) }))
        .collect()
}

pub fn target_law(t: &Target) -> Law {
    let exact = t.distribution();
    t.probabilities()
        .into_iter()
        .map(|(i, value)| (i, LawEntry { value, exact: exact.as_ref().map(|d| d.mass(i).to_string()) }))
        .collect()
}

pub fn float_law(p: &BTreeMap<u64, f64>) -> Law {
    p.iter().map(|(&i, &value)| (i, LawEntry { value, exact: None })).collect()
}

/// Record for an exact enumeration.
pub fn exact_report(sampler: &str, stream_id: &str, law: &ExactDistribution, target: &Target) -> Report {
    let cond = conditional_law(law);
    let tgt = target_law(target);
    let cond_f: BTreeMap<u64, f64> = cond.iter().map(|(&i, e)| (i, e.value)).collect();
    let tgt_f: BTreeMap<u64, f64> = tgt.iter().map(|(&i, e)| (i, e.value)).collect();
    Report {
        sampler: sampler.to_string(),
        stream_id: stream_id.to_string(),
        exact_match: law.is_valid() && law.conditional_matches(target),
        tv: Some(super::total_variation(&cond_f, &tgt_f)),
        conditional_law: cond,
        target_law: tgt,
        pvalue: None,
    }
}
