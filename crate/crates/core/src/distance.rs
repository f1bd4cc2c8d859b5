//! Character-level edit distance and the helpers built on it.

use crate::error::NameRepairError;

/// Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Pool member closest to `candidate`; ties go to the lexicographically smallest.
pub fn repair_name<'a, I>(candidate: &str, pool: I) -> Result<String, NameRepairError>
where
    I: IntoIterator<Item = &'a str>,
{
    pool.into_iter()
        .map(|p| (levenshtein(candidate, p), p))
        .min()
        .map(|(_, p)| p.to_string())
        .ok_or(NameRepairError::EmptyPool)
}

fn normalize(text: &str) -> String {
    text.lines().map(str::trim_end).collect::<Vec<_>>().join("\n")
}

/// Best `1 - dist / max(len)` score of `generated` against any repository test.
///
/// Lines are stripped of trailing whitespace first. An empty list scores 0.
pub fn similarity<S: AsRef<str>>(generated: &str, repo_tests: &[S]) -> f64 {
    let g = normalize(generated);
    let glen = g.chars().count();
    repo_tests
        .iter()
        .map(|t| {
            let t = normalize(t.as_ref());
            let longest = glen.max(t.chars().count());
            if longest == 0 {
                1.0
            } else {
                1.0 - levenshtein(&g, &t) as f64 / longest as f64
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances() {
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("tests/test_regresion.py", "tests/test_regression.py"), 1);
    }

    #[test]
    fn repair_examples() {
        assert_eq!(repair_name("abd", ["abc", "xyz"]).unwrap(), "abc");
        assert_eq!(repair_name("xyz", ["abc", "xyz"]).unwrap(), "xyz");
        assert_eq!(repair_name("aa", ["ac", "ab"]).unwrap(), "ab");
        assert!(matches!(repair_name("a", std::iter::empty()), Err(NameRepairError::EmptyPool)));
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(similarity("def test(): pass", &["def test(): pass"]), 1.0);
        assert!((similarity("abc", &["abd"]) - (1.0 - 1.0 / 3.0)).abs() < 1e-12);
        assert_eq!(similarity::<&str>("abc", &[]), 0.0);
        assert_eq!(similarity("x = 1   \n", &["x = 1\n"]), 1.0);
    }
}
