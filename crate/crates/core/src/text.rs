//! Edit distance, normalized similarity and the string normalizations used
//! before fuzzy matching.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Slack applied when comparing a similarity score against a threshold, so
/// that `1 - d/m >= t` and `d <= (1 - t) * m` agree despite rounding.
pub const THRESHOLD_EPSILON: f64 = 1e-9;

/// Default similarity threshold for author-name and title matching.
pub const DEFAULT_THRESHOLD: f64 = 0.8;

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

pub fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance if it is at most `limit`, computed on a diagonal band of
/// width `2 * limit + 1`.
pub fn levenshtein_within(a: &[char], b: &[char], limit: usize) -> Option<usize> {
    let (n, m) = (a.len(), b.len());
    if n.abs_diff(m) > limit {
        return None;
    }
    if n == 0 || m == 0 {
        return Some(n.max(m));
    }
    let inf = limit + 1;
    // row[j] holds D(i, j); cells outside the band stay at `inf`.
    let mut prev = vec![inf; m + 1];
    let mut cur = vec![inf; m + 1];
    for (j, cell) in prev.iter_mut().enumerate().take(limit.min(m) + 1) {
        *cell = j;
    }
    for i in 1..=n {
        let lo = i.saturating_sub(limit).max(1);
        let hi = (i + limit).min(m);
        // Only the cells bordering the band are read besides the band itself.
        cur[0] = if i <= limit { i } else { inf };
        if lo > 1 {
            cur[lo - 1] = inf;
        }
        if hi < m {
            cur[hi + 1] = inf;
        }
        let mut row_min = cur[0];
        for j in lo..=hi {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            let v = sub.min(prev[j] + 1).min(cur[j - 1] + 1).min(inf);
            cur[j] = v;
            row_min = row_min.min(v);
        }
        if row_min > limit {
            return None;
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[m];
    (d <= limit).then_some(d)
}

fn similarity_from(distance: usize, max_len: usize) -> f64 {
    if max_len == 0 {
        1.0
    } else {
        1.0 - distance as f64 / max_len as f64
    }
}

/// `1 - levenshtein(a, b) / max(|a|, |b|)`, with `similarity("", "") = 1`.
pub fn similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    similarity_chars(&a, &b)
}

pub fn similarity_chars(a: &[char], b: &[char]) -> f64 {
    similarity_from(levenshtein_chars(a, b), a.len().max(b.len()))
}

/// Similarity of `a` and `b` if it reaches `threshold`, using the banded
/// distance so that hopeless pairs are rejected early.
pub fn similarity_at_least(a: &[char], b: &[char], threshold: f64) -> Option<f64> {
    let max_len = a.len().max(b.len());
    let limit = max_edits(max_len, threshold);
    let d = levenshtein_within(a, b, limit)?;
    let s = similarity_from(d, max_len);
    meets_threshold(s, threshold).then_some(s)
}

/// Largest edit count that still satisfies `threshold` for strings whose
/// longer side has `max_len` characters.
pub fn max_edits(max_len: usize, threshold: f64) -> usize {
    let bound = (1.0 - threshold) * max_len as f64 + THRESHOLD_EPSILON * max_len.max(1) as f64;
    if bound <= 0.0 {
        0
    } else {
        libm::floor(bound) as usize
    }
}

pub fn meets_threshold(score: f64, threshold: f64) -> bool {
    score >= threshold - THRESHOLD_EPSILON
}

/// Collapse runs of whitespace to one space and trim the ends.
pub fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Matching key for noisy person names: lowercase, diacritics stripped,
/// whitespace collapsed.
pub fn normalize_person_name(s: &str) -> String {
    let stripped: String = s.nfd().filter(|c| !is_combining_mark(*c)).collect();
    collapse_whitespace(&stripped.to_lowercase())
}

/// Matching key for titles: lowercase, punctuation replaced by spaces,
/// whitespace collapsed.
pub fn normalize_title(s: &str) -> String {
    let spaced: String = s
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    collapse_whitespace(&spaced)
}
