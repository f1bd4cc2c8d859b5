use std::collections::{BTreeMap, BTreeSet};

use issuetest::diff::{apply_file_patch, parse_patch, unified_diff};
use issuetest::distance::{levenshtein, repair_name, similarity};
use issuetest::ensemble::{select, CandidateClass, CandidateResult, VariantId};
use issuetest::eval::{adequacy, tdd_score_instance, tdd_score_suite, Adequacy, ChangedLines};
use issuetest::planner::Action;
use proptest::prelude::*;

fn text() -> impl Strategy<Value = String> {
    (prop::collection::vec("[a-c ]{0,6}", 0..12), any::<bool>()).prop_map(|(lines, trailing)| {
        let mut t = lines.join("\n");
        if trailing && !t.is_empty() {
            t.push('\n');
        }
        t
    })
}

fn class() -> impl Strategy<Value = CandidateClass> {
    prop::sample::select(CandidateClass::ALL.to_vec())
}

fn line_map() -> impl Strategy<Value = BTreeMap<String, BTreeSet<usize>>> {
    prop::collection::btree_map("[ab]\\.py", prop::collection::btree_set(1usize..30, 0..8), 0..3)
}

proptest! {
    #[test]
    fn diff_round_trips(old in text(), new in text()) {
        prop_assume!(old != new);
        let d = unified_diff(Some(&old), &new, "m.py").unwrap();
        let p = parse_patch(&d).unwrap();
        prop_assert_eq!(p.files.len(), 1);
        prop_assert_eq!(apply_file_patch(Some(&old), &p.files[0]).unwrap(), Some(new.clone()));
        let lines = ChangedLines::from_patch(&p);
        let minus = d.lines().filter(|l| l.starts_with('-') && !l.starts_with("---")).count();
        let plus = d.lines().filter(|l| l.starts_with('+') && !l.starts_with("+++")).count();
        prop_assert_eq!(lines.deleted.values().map(BTreeSet::len).sum::<usize>(), minus);
        prop_assert_eq!(lines.added.values().map(BTreeSet::len).sum::<usize>(), plus);
    }

    #[test]
    fn new_file_diff_round_trips(new in text().prop_map(|t| if t.is_empty() { "x".to_string() } else { t })) {
        let p = parse_patch(&unified_diff(None, &new, "t.py").unwrap()).unwrap();
        prop_assert!(p.files[0].is_new_file());
        prop_assert_eq!(apply_file_patch(None, &p.files[0]).unwrap(), Some(new));
    }

    #[test]
    fn levenshtein_is_a_metric(a in "[a-d]{0,10}", b in "[a-d]{0,10}", c in "[a-d]{0,10}") {
        let (ab, ba) = (levenshtein(&a, &b), levenshtein(&b, &a));
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(levenshtein(&a, &a), 0);
        prop_assert!(ab <= levenshtein(&a, &c) + levenshtein(&c, &b));
        prop_assert!(ab >= a.len().abs_diff(b.len()) && ab <= a.len().max(b.len()));
    }

    #[test]
    fn similarity_is_bounded(g in "[a-c\n]{0,20}", tests in prop::collection::vec("[a-c\n]{0,20}", 0..4)) {
        let s = similarity(&g, &tests);
        prop_assert!((0.0..=1.0).contains(&s));
        let mut with_self = tests.clone();
        with_self.push(g.clone());
        prop_assert_eq!(similarity(&g, &with_self), 1.0);
        if tests.is_empty() {
            prop_assert_eq!(s, 0.0);
        }
    }

    #[test]
    fn repair_picks_a_pool_member(c in "[a-c/]{0,8}", pool in prop::collection::vec("[a-c/]{0,8}", 1..8)) {
        let r = repair_name(&c, pool.iter().map(String::as_str)).unwrap();
        prop_assert!(pool.contains(&r));
        if pool.contains(&c) {
            prop_assert_eq!(r, c);
        }
    }

    #[test]
    fn selection_prefers_the_best_group(classes in prop::collection::vec(class(), 5)) {
        let results: Vec<CandidateResult> = VariantId::ALL.iter().zip(&classes)
            .map(|(v, c)| CandidateResult { variant: *v, class_on_old: *c, patch_path: None, test_ids: vec![], note: None })
            .collect();
        let best = classes.iter().filter_map(|c| c.group()).min();
        match select(&results) {
            None => prop_assert!(best.is_none()),
            Some(v) => {
                let c = classes[VariantId::ALL.iter().position(|x| *x == v).unwrap()];
                prop_assert_eq!(c.group(), best);
                prop_assert!(c != CandidateClass::Pass && c != CandidateClass::FailedToGenerate);
            }
        }
    }

    #[test]
    fn scores_stay_in_range(d in line_map(), a in line_map(), co in line_map(), cn in line_map(), f2p in 0u8..=1) {
        let lines = ChangedLines { deleted: d, added: a };
        match adequacy(&co, &cn, &lines) {
            None => prop_assert_eq!(lines.total(), 0),
            Some(v) => {
                prop_assert!((0.0..=1.0).contains(&v));
                let s = tdd_score_instance(f2p, Adequacy::Value(v));
                prop_assert!(s <= f64::from(f2p) && s >= 0.0);
            }
        }
        prop_assert_eq!(tdd_score_instance(f2p, Adequacy::Undefined), f64::from(f2p));
    }

    #[test]
    fn suite_score_is_a_percentage(scores in prop::collection::vec(0.0f64..=1.0, 1..20)) {
        let s = tdd_score_suite(&scores).unwrap();
        prop_assert!((0.0..=100.0 + 1e-9).contains(&s));
    }

    #[test]
    fn action_lines_round_trip(kind in prop::sample::select(vec!["READ", "WRITE", "MODIFY"]),
                               file in "[a-z]{1,6}/[a-z_]{1,8}\\.py",
                               suite in prop::option::of("[A-Z][a-z]{1,6}"),
                               name in "test_[a-z_]{1,8}") {
        let line = match &suite {
            Some(s) => format!("{kind} {file}::{s}::{name}"),
            None => format!("{kind} {file}::{name}"),
        };
        let a = Action::parse_line(&line).unwrap();
        prop_assert_eq!(a.to_string(), line);
    }
}
