//! Five-variant ensemble and failure-class based selection.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::runner::RunClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VariantId {
    T1,
    T2,
    T3,
    T4,
    T5,
}

impl VariantId {
    pub const ALL: [VariantId; 5] = [VariantId::T1, VariantId::T2, VariantId::T3, VariantId::T4, VariantId::T5];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantId::T1 => "T1",
            VariantId::T2 => "T2",
            VariantId::T3 => "T3",
            VariantId::T4 => "T4",
            VariantId::T5 => "T5",
        }
    }

    pub fn spec(self) -> VariantSpec {
        build_variants()[self as usize]
    }
}

impl std::fmt::Display for VariantId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub id: VariantId,
    pub uses_planner: bool,
    pub uses_focal_loc: bool,
    pub uses_test_loc: bool,
    pub priority_rank: u8,
}

/// The five prompt configurations, in priority order.
pub fn build_variants() -> [VariantSpec; 5] {
    let v = |id, uses_planner, uses_focal_loc, uses_test_loc, priority_rank| VariantSpec {
        id,
        uses_planner,
        uses_focal_loc,
        uses_test_loc,
        priority_rank,
    };
    [
        v(VariantId::T1, true, true, true, 1),
        v(VariantId::T2, false, true, true, 2),
        v(VariantId::T3, false, false, true, 3),
        v(VariantId::T4, false, true, false, 4),
        v(VariantId::T5, false, false, false, 5),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateClass {
    Pass,
    AssertionFailure,
    OtherFailure,
    Error,
    FailedToGenerate,
}

impl CandidateClass {
    pub const ALL: [CandidateClass; 5] = [
        CandidateClass::Pass,
        CandidateClass::AssertionFailure,
        CandidateClass::OtherFailure,
        CandidateClass::Error,
        CandidateClass::FailedToGenerate,
    ];

    /// Position in the selection order; `None` for classes that are never selected.
    pub fn group(self) -> Option<u8> {
        match self {
            CandidateClass::AssertionFailure => Some(0),
            CandidateClass::OtherFailure => Some(1),
            CandidateClass::Error => Some(2),
            CandidateClass::Pass | CandidateClass::FailedToGenerate => None,
        }
    }
}

impl From<RunClass> for CandidateClass {
    fn from(c: RunClass) -> Self {
        match c {
            RunClass::Pass => CandidateClass::Pass,
            RunClass::AssertionFailure => CandidateClass::AssertionFailure,
            RunClass::OtherFailure => CandidateClass::OtherFailure,
            RunClass::Error => CandidateClass::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub variant: VariantId,
    pub class_on_old: CandidateClass,
    /// Relative path of the written patch; `None` when generation failed.
    pub patch_path: Option<String>,
    pub test_ids: Vec<String>,
    pub note: Option<String>,
}

/// Pick the candidate to keep: best failure group first, then lowest rank.
pub fn select(results: &[CandidateResult]) -> Option<VariantId> {
    results
        .iter()
        .filter_map(|r| r.class_on_old.group().map(|g| (g, r.variant.spec().priority_rank, r.variant)))
        .min()
        .map(|(_, _, id)| id)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub instance_id: String,
    pub candidates: Vec<CandidateResult>,
    pub selected: Option<VariantId>,
}

impl EnsembleResult {
    pub fn new(instance_id: &str, mut candidates: Vec<CandidateResult>) -> Self {
        candidates.sort_by_key(|c| c.variant);
        let selected = select(&candidates);
        EnsembleResult { instance_id: instance_id.to_string(), candidates, selected }
    }

    pub fn selected_candidate(&self) -> Option<&CandidateResult> {
        self.selected.and_then(|id| self.candidates.iter().find(|c| c.variant == id))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapRow {
    /// Variants in the region, e.g. `["T1", "T3"]`.
    pub variants: Vec<VariantId>,
    /// Instances solved by exactly these variants and no others.
    pub exclusive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSuccessReport {
    pub instances: usize,
    pub per_variant: BTreeMap<VariantId, usize>,
    /// Pairwise intersection sizes (a < b).
    pub pairwise: Vec<(VariantId, VariantId, usize)>,
    /// Every non-empty Venn region.
    pub regions: Vec<OverlapRow>,
    pub union: usize,
    pub pass_at_5: usize,
    pub pass_at_5_rate: f64,
}

/// Venn-style breakdown of which variants produce fail-to-pass tests.
/// `outcomes` maps instance id to the set of variants whose test was fail-to-pass.
pub fn variant_success_report(outcomes: &BTreeMap<String, BTreeSet<VariantId>>) -> VariantSuccessReport {
    let mut per_variant: BTreeMap<VariantId, usize> = VariantId::ALL.iter().map(|v| (*v, 0)).collect();
    let mut regions: BTreeMap<Vec<VariantId>, usize> = BTreeMap::new();
    for set in outcomes.values() {
        for v in set {
            *per_variant.entry(*v).or_default() += 1;
        }
        if !set.is_empty() {
            *regions.entry(set.iter().copied().collect()).or_default() += 1;
        }
    }
    let mut pairwise = Vec::new();
    for (i, a) in VariantId::ALL.iter().enumerate() {
        for b in &VariantId::ALL[i + 1..] {
            let n = outcomes.values().filter(|s| s.contains(a) && s.contains(b)).count();
            pairwise.push((*a, *b, n));
        }
    }
    let union = outcomes.values().filter(|s| !s.is_empty()).count();
    let instances = outcomes.len();
    VariantSuccessReport {
        instances,
        per_variant,
        pairwise,
        regions: regions.into_iter().map(|(variants, exclusive)| OverlapRow { variants, exclusive }).collect(),
        union,
        pass_at_5: union,
        pass_at_5_rate: if instances == 0 { 0.0 } else { union as f64 / instances as f64 },
    }
}

impl VariantSuccessReport {
    /// Instances solved only by `v`.
    pub fn exclusive_to(&self, v: VariantId) -> usize {
        self.regions.iter().find(|r| r.variants == [v]).map_or(0, |r| r.exclusive)
    }

    pub fn render(&self) -> String {
        let mut out = format!("instances: {}\n", self.instances);
        for (v, n) in &self.per_variant {
            out.push_str(&format!("{v}: {n} (exclusive {})\n", self.exclusive_to(*v)));
        }
        for (a, b, n) in &self.pairwise {
            out.push_str(&format!("{a}&{b}: {n}\n"));
        }
        out.push_str(&format!("pass@5: {} ({:.1}%)\n", self.pass_at_5, 100.0 * self.pass_at_5_rate));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use CandidateClass::*;

    fn results(classes: [CandidateClass; 5]) -> Vec<CandidateResult> {
        VariantId::ALL
            .iter()
            .zip(classes)
            .map(|(v, c)| CandidateResult { variant: *v, class_on_old: c, patch_path: None, test_ids: vec![], note: None })
            .collect()
    }

    #[test]
    fn variant_table() {
        let v = build_variants();
        assert!(v[0].uses_planner && v[0].uses_focal_loc && v[0].uses_test_loc);
        assert_eq!((v[2].uses_focal_loc, v[2].uses_test_loc, v[2].priority_rank), (false, true, 3));
        assert_eq!((v[4].uses_focal_loc, v[4].uses_test_loc, v[4].priority_rank), (false, false, 5));
        assert!(v[1..].iter().all(|s| !s.uses_planner));
    }

    #[test]
    fn selection_examples() {
        assert_eq!(select(&results([Pass, Error, AssertionFailure, AssertionFailure, OtherFailure])), Some(VariantId::T3));
        assert_eq!(select(&results([AssertionFailure, AssertionFailure, Error, Pass, Pass])), Some(VariantId::T1));
        assert_eq!(select(&results([Pass; 5])), None);
        assert_eq!(select(&results([FailedToGenerate, Pass, Pass, Error, FailedToGenerate])), Some(VariantId::T4));
    }

    #[test]
    fn two_set_overlap() {
        let mut o = BTreeMap::new();
        o.insert("a".to_string(), BTreeSet::from([VariantId::T1]));
        o.insert("b".to_string(), BTreeSet::from([VariantId::T1, VariantId::T2]));
        o.insert("c".to_string(), BTreeSet::from([VariantId::T2]));
        let r = variant_success_report(&o);
        assert_eq!((r.exclusive_to(VariantId::T1), r.exclusive_to(VariantId::T2)), (1, 1));
        assert_eq!(r.pairwise[0], (VariantId::T1, VariantId::T2, 1));
        assert_eq!(r.union, 3);
        let empty = variant_success_report(&BTreeMap::new());
        assert_eq!((empty.union, empty.pass_at_5), (0, 0));
    }
}
