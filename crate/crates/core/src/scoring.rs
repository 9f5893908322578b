//! Normalization of KRI values and weighted aggregation into a risk score.
//!
//! Both weighting modes reduce to one weighted sum taken in ascending
//! `kri_id` order. A category-based score is computed by flattening each
//! KRI's weight to `W_c · w_ci` first, so it is bitwise identical to the
//! KRI-based score over the flattened weights.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::kri::{Availability, KriRegistry, KriSample};
use crate::telemetry::Timestamp;

/// Tolerance on weight sums.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoringError {
    #[error("sample for `{0}` is UNKNOWN")]
    UnknownSample(String),
    #[error("weights do not match inputs: {0}")]
    WeightMismatch(String),
    #[error("`{0}` is not assigned to any category")]
    UnassignedKri(String),
    #[error("invalid norm for `{kri_id}`: {reason}")]
    InvalidNorm { kri_id: String, reason: String },
    #[error("every weighted KRI is UNKNOWN")]
    NoUsableInputs,
    #[error("invalid weights file: {0}")]
    Parse(String),
}

/// Linear map from a KRI value to `[0, 1]`: 0 at the healthy anchor, 1 at
/// the alert threshold. The sign of `threshold - healthy` encodes the
/// risky direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub kri_id: String,
    pub healthy_anchor: f64,
    pub alert_threshold: f64,
}

impl NormSpec {
    pub fn validate(&self) -> Result<(), ScoringError> {
        let bad = |reason: &str| ScoringError::InvalidNorm {
            kri_id: self.kri_id.clone(),
            reason: reason.into(),
        };
        if !(self.healthy_anchor.is_finite() && self.alert_threshold.is_finite()) {
            return Err(bad("anchors must be finite"));
        }
        if self.healthy_anchor == self.alert_threshold {
            return Err(bad("healthy_anchor equals alert_threshold"));
        }
        Ok(())
    }

    pub fn apply(&self, value: f64) -> f64 {
        ((value - self.healthy_anchor) / (self.alert_threshold - self.healthy_anchor)).clamp(0.0, 1.0)
    }
}

pub fn normalize(sample: &KriSample, spec: &NormSpec) -> Result<f64, ScoringError> {
    sample
        .usable_value()
        .map(|v| spec.apply(v))
        .ok_or_else(|| ScoringError::UnknownSample(sample.kri_id.clone()))
}

pub fn parse_norms(text: &str) -> Result<Vec<NormSpec>, ScoringError> {
    let norms: Vec<NormSpec> =
        serde_json::from_str(text).map_err(|e| ScoringError::Parse(e.to_string()))?;
    for n in &norms {
        n.validate()?;
    }
    Ok(norms)
}

const DEFAULT_NORMS: &str = include_str!("../../../config/norms.json");
const EQUAL_WEIGHTS: &str = include_str!("../../../config/equal_weights.json");
const FINANCIAL_INSTITUTION_WEIGHTS: &str =
    include_str!("../../../config/financial_institution.json");

pub fn default_norms() -> Vec<NormSpec> {
    parse_norms(DEFAULT_NORMS).expect("bundled norms are valid")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    KriBased,
    CategoryBased,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RiskWeights {
    KriBased {
        weights: BTreeMap<String, f64>,
    },
    CategoryBased {
        category_weights: BTreeMap<String, f64>,
        /// Category → KRI → weight within the category.
        template_weights: BTreeMap<String, BTreeMap<String, f64>>,
    },
}

fn check_sum(what: &str, weights: impl Iterator<Item = f64>) -> Result<(), ScoringError> {
    let mut sum = 0.0;
    for w in weights {
        if !(w.is_finite() && w >= 0.0) {
            return Err(ScoringError::WeightMismatch(format!("{what}: negative or non-finite weight")));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(ScoringError::WeightMismatch(format!("{what}: weights sum to {sum}")));
    }
    Ok(())
}

impl RiskWeights {
    pub fn from_json(text: &str) -> Result<Self, ScoringError> {
        let w: RiskWeights =
            serde_json::from_str(text).map_err(|e| ScoringError::Parse(e.to_string()))?;
        w.validate()?;
        Ok(w)
    }

    pub fn equal() -> Self {
        Self::from_json(EQUAL_WEIGHTS).expect("bundled weights are valid")
    }

    /// Financial and regulatory categories upweighted.
    pub fn financial_institution() -> Self {
        Self::from_json(FINANCIAL_INSTITUTION_WEIGHTS).expect("bundled weights are valid")
    }

    pub fn mode(&self) -> WeightMode {
        match self {
            RiskWeights::KriBased { .. } => WeightMode::KriBased,
            RiskWeights::CategoryBased { .. } => WeightMode::CategoryBased,
        }
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        match self {
            RiskWeights::KriBased { weights } => check_sum("kri weights", weights.values().copied()),
            RiskWeights::CategoryBased {
                category_weights,
                template_weights,
            } => {
                check_sum("category weights", category_weights.values().copied())?;
                if category_weights.keys().ne(template_weights.keys()) {
                    return Err(ScoringError::WeightMismatch(
                        "category weights and templates name different categories".into(),
                    ));
                }
                let mut seen = BTreeMap::new();
                for (cat, kris) in template_weights {
                    check_sum(&format!("category `{cat}`"), kris.values().copied())?;
                    for kri in kris.keys() {
                        if let Some(prev) = seen.insert(kri.as_str(), cat.as_str()) {
                            return Err(ScoringError::WeightMismatch(format!(
                                "`{kri}` appears in both `{prev}` and `{cat}`"
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// KRIs carrying weight, ascending.
    pub fn kri_ids(&self) -> Vec<String> {
        match self {
            RiskWeights::KriBased { weights } => weights.keys().cloned().collect(),
            RiskWeights::CategoryBased {
                template_weights, ..
            } => {
                let mut ids: Vec<String> =
                    template_weights.values().flat_map(|m| m.keys().cloned()).collect();
                ids.sort();
                ids
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub kri_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub normalized: f64,
    /// Weight after renormalization over available KRIs.
    pub weight: f64,
    pub contribution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputRef {
    pub kri_id: String,
    pub ts: Timestamp,
    pub availability: Availability,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskScore {
    pub ts: Timestamp,
    pub mode: WeightMode,
    pub total: f64,
    /// Per-category `Σ_i w_ci x_ci`, renormalized within the category when
    /// some of its KRIs are unavailable. Empty in KRI-based mode.
    pub categories: BTreeMap<String, f64>,
    pub contributions: Vec<Contribution>,
    /// Weighted KRIs left out because their sample was `UNKNOWN`.
    pub excluded: Vec<String>,
    #[serde(default)]
    pub inputs_used: Vec<InputRef>,
}

struct Entry<'a> {
    kri_id: &'a str,
    category: Option<&'a str>,
    value: Option<f64>,
    weight: f64,
}

/// The one summation both modes share. `entries` must be in ascending id order.
fn weighted_total(entries: &[Entry<'_>]) -> Result<(f64, Vec<Contribution>, Vec<String>), ScoringError> {
    let excluded: Vec<String> = entries
        .iter()
        .filter(|e| e.value.is_none())
        .map(|e| e.kri_id.to_string())
        .collect();
    let mut known_weight = 0.0;
    for e in entries.iter().filter(|e| e.value.is_some()) {
        known_weight += e.weight;
    }
    if entries.iter().all(|e| e.value.is_none()) || known_weight <= 0.0 {
        return Err(ScoringError::NoUsableInputs);
    }
    let scale = |w: f64| if excluded.is_empty() { w } else { w / known_weight };
    let mut total = 0.0;
    let mut contributions = Vec::with_capacity(entries.len());
    for e in entries {
        if let Some(x) = e.value {
            let w = scale(e.weight);
            let c = w * x;
            total += c;
            contributions.push(Contribution {
                kri_id: e.kri_id.to_string(),
                category: e.category.map(str::to_string),
                normalized: x,
                weight: w,
                contribution: c,
            });
        }
    }
    Ok((total.clamp(0.0, 1.0), contributions, excluded))
}

/// `R = Σ_i w_i x_i` over normalized values; `None` marks an UNKNOWN KRI.
pub fn score_kri_weighted(
    values: &BTreeMap<String, Option<f64>>,
    weights: &BTreeMap<String, f64>,
) -> Result<RiskScore, ScoringError> {
    if values.keys().ne(weights.keys()) {
        return Err(ScoringError::WeightMismatch(
            "weights must cover exactly the provided KRIs".into(),
        ));
    }
    let entries: Vec<Entry<'_>> = values
        .iter()
        .map(|(k, v)| Entry {
            kri_id: k,
            category: None,
            value: *v,
            weight: weights[k],
        })
        .collect();
    let (total, contributions, excluded) = weighted_total(&entries)?;
    Ok(RiskScore {
        ts: 0,
        mode: WeightMode::KriBased,
        total,
        categories: BTreeMap::new(),
        contributions,
        excluded,
        inputs_used: Vec::new(),
    })
}

/// `R = Σ_c W_c Σ_i w_ci x_ci`, evaluated as the flattened KRI-based sum.
pub fn score_category_weighted(
    values: &BTreeMap<String, Option<f64>>,
    template_weights: &BTreeMap<String, BTreeMap<String, f64>>,
    category_weights: &BTreeMap<String, f64>,
) -> Result<RiskScore, ScoringError> {
    let mut assignment: BTreeMap<&str, (&str, f64)> = BTreeMap::new();
    for (cat, kris) in template_weights {
        let big_w = *category_weights.get(cat).ok_or_else(|| {
            ScoringError::WeightMismatch(format!("no category weight for `{cat}`"))
        })?;
        for (kri, w) in kris {
            assignment.insert(kri, (cat, big_w * w));
        }
    }
    for kri in values.keys() {
        if !assignment.contains_key(kri.as_str()) {
            return Err(ScoringError::UnassignedKri(kri.clone()));
        }
    }
    if assignment.len() != values.len() {
        return Err(ScoringError::WeightMismatch(
            "template weights name KRIs without values".into(),
        ));
    }
    let entries: Vec<Entry<'_>> = values
        .iter()
        .map(|(k, v)| {
            let (cat, w) = assignment[k.as_str()];
            Entry {
                kri_id: k,
                category: Some(cat),
                value: *v,
                weight: w,
            }
        })
        .collect();
    let (total, contributions, excluded) = weighted_total(&entries)?;

    let mut categories = BTreeMap::new();
    for (cat, kris) in template_weights {
        let mut known = 0.0;
        let mut sum = 0.0;
        let mut any_missing = false;
        for (kri, w) in kris {
            match values.get(kri).copied().flatten() {
                Some(x) => {
                    known += w;
                    sum += w * x;
                }
                None => any_missing = true,
            }
        }
        if known > 0.0 {
            categories.insert(cat.clone(), if any_missing { sum / known } else { sum });
        }
    }
    Ok(RiskScore {
        ts: 0,
        mode: WeightMode::CategoryBased,
        total,
        categories,
        contributions,
        excluded,
        inputs_used: Vec::new(),
    })
}

/// Normalizes the latest samples and applies a weighting scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct Scorer {
    norms: BTreeMap<String, NormSpec>,
    weights: RiskWeights,
}

impl Scorer {
    pub fn new(norms: Vec<NormSpec>, weights: RiskWeights) -> Result<Self, ScoringError> {
        weights.validate()?;
        let norms: BTreeMap<String, NormSpec> =
            norms.into_iter().map(|n| (n.kri_id.clone(), n)).collect();
        for n in norms.values() {
            n.validate()?;
        }
        for kri in weights.kri_ids() {
            if !norms.contains_key(&kri) {
                return Err(ScoringError::InvalidNorm {
                    kri_id: kri,
                    reason: "weighted KRI has no norm".into(),
                });
            }
        }
        Ok(Self { norms, weights })
    }

    /// Also checks that category templates agree with the registry.
    pub fn with_registry(
        norms: Vec<NormSpec>,
        weights: RiskWeights,
        registry: &KriRegistry,
    ) -> Result<Self, ScoringError> {
        if let RiskWeights::CategoryBased {
            template_weights, ..
        } = &weights
        {
            for (cat, kris) in template_weights {
                for kri in kris.keys() {
                    match registry.get(kri) {
                        Some(d) if d.category.as_str() == cat => {}
                        _ => return Err(ScoringError::UnassignedKri(kri.clone())),
                    }
                }
            }
        }
        Self::new(norms, weights)
    }

    pub fn weights(&self) -> &RiskWeights {
        &self.weights
    }

    pub fn norms(&self) -> impl Iterator<Item = &NormSpec> {
        self.norms.values()
    }

    /// Scores the samples of one tick. Weighted KRIs without a usable
    /// sample are excluded and the remaining weights renormalized.
    pub fn score(&self, samples: &[KriSample], ts: Timestamp) -> Result<RiskScore, ScoringError> {
        let by_id: BTreeMap<&str, &KriSample> =
            samples.iter().map(|s| (s.kri_id.as_str(), s)).collect();
        let mut values = BTreeMap::new();
        let mut inputs = Vec::new();
        for kri in self.weights.kri_ids() {
            let sample = by_id.get(kri.as_str());
            let x = sample.and_then(|s| normalize(s, &self.norms[&kri]).ok());
            if let Some(s) = sample {
                inputs.push(InputRef {
                    kri_id: kri.clone(),
                    ts: s.ts,
                    availability: s.availability,
                });
            }
            values.insert(kri, x);
        }
        let mut score = match &self.weights {
            RiskWeights::KriBased { weights } => score_kri_weighted(&values, weights)?,
            RiskWeights::CategoryBased {
                category_weights,
                template_weights,
            } => score_category_weighted(&values, template_weights, category_weights)?,
        };
        score.ts = ts;
        score.inputs_used = inputs;
        Ok(score)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(h: f64, t: f64) -> NormSpec {
        NormSpec {
            kri_id: "x".into(),
            healthy_anchor: h,
            alert_threshold: t,
        }
    }

    fn vals(pairs: &[(&str, Option<f64>)]) -> BTreeMap<String, Option<f64>> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn ws(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(spec(0.0, 0.2).apply(0.1), 0.5);
        assert_eq!(spec(0.0, 0.2).apply(0.4), 1.0);
        assert_eq!(spec(100.0, 95.0).apply(97.5), 0.5);
        assert!(normalize(&KriSample::unknown("x", 0), &spec(0.0, 1.0)).is_err());
        assert!(spec(1.0, 1.0).validate().is_err());
    }

    #[test]
    fn kri_weighted_examples() {
        let s = score_kri_weighted(
            &vals(&[("a", Some(0.2)), ("b", Some(0.4))]),
            &ws(&[("a", 0.5), ("b", 0.5)]),
        )
        .unwrap();
        assert!((s.total - 0.3).abs() < 1e-15);
        let s = score_kri_weighted(
            &vals(&[("a", Some(0.7)), ("b", Some(0.7)), ("c", Some(0.7))]),
            &ws(&[("a", 0.25), ("b", 0.25), ("c", 0.5)]),
        )
        .unwrap();
        assert!((s.total - 0.7).abs() < 1e-15);
        assert!(matches!(
            score_kri_weighted(&vals(&[("a", Some(0.1))]), &ws(&[("b", 1.0)])),
            Err(ScoringError::WeightMismatch(_))
        ));
    }

    #[test]
    fn unknown_kris_are_renormalized_away() {
        let s = score_kri_weighted(
            &vals(&[("a", Some(1.0)), ("b", None), ("c", Some(0.0))]),
            &ws(&[("a", 0.25), ("b", 0.5), ("c", 0.25)]),
        )
        .unwrap();
        assert_eq!(s.total, 0.5);
        assert_eq!(s.excluded, vec!["b".to_string()]);
    }

    #[test]
    fn category_collapse_and_saturation() {
        let v = vals(&[("a", Some(0.2)), ("b", Some(0.4))]);
        let template: BTreeMap<String, BTreeMap<String, f64>> =
            [("only".to_string(), ws(&[("a", 0.5), ("b", 0.5)]))].into();
        let cw = ws(&[("only", 1.0)]);
        let cat = score_category_weighted(&v, &template, &cw).unwrap();
        let flat = score_kri_weighted(&v, &ws(&[("a", 0.5), ("b", 0.5)])).unwrap();
        assert_eq!(cat.total.to_bits(), flat.total.to_bits());

        let ones = vals(&[("a", Some(1.0)), ("b", Some(1.0))]);
        assert_eq!(score_category_weighted(&ones, &template, &cw).unwrap().total, 1.0);
        let extra = vals(&[("a", Some(1.0)), ("z", Some(1.0))]);
        assert!(matches!(
            score_category_weighted(&extra, &template, &cw),
            Err(ScoringError::UnassignedKri(_))
        ));
    }

    #[test]
    fn bundled_configs_are_consistent() {
        let reg = KriRegistry::default_registry();
        Scorer::with_registry(default_norms(), RiskWeights::equal(), &reg).unwrap();
        Scorer::with_registry(default_norms(), RiskWeights::financial_institution(), &reg).unwrap();
    }
}
