//! Exhaustive search for the best fourth sentence of a small fixed poem.

use super::scoring;
use bipro::model::BlockModel;
use bipro::pingshui::{verify_poem, Poem, RhymeDictionary, VerifyOptions};

pub const VOCAB: &str = "东风月雪";
pub const TITLE: &str = "东风";
pub const FIXED: [&str; 3] = ["月月东东月", "东东月月东", "东东东月月"];

pub fn fixed() -> Vec<String> {
    FIXED.iter().map(|s| s.to_string()).collect()
}

/// Every valid fourth sentence over [`VOCAB`], the best one by its own masked
/// score, and the margin to the runner-up.
pub fn best_fourth(model: &dyn BlockModel, dict: &RhymeDictionary) -> (usize, String, f64, f64) {
    let chars: Vec<char> = VOCAB.chars().collect();
    let mut valid = 0;
    let mut scored: Vec<(String, f64)> = Vec::new();
    for code in 0..chars.len().pow(5) {
        let mut c = code;
        let mut s = String::new();
        for _ in 0..5 {
            s.push(chars[c % chars.len()]);
            c /= chars.len();
        }
        let mut rows = fixed();
        rows.push(s.clone());
        let verdict = verify_poem(&Poem::new(TITLE, None, rows.clone()), dict, &VerifyOptions::default()).unwrap();
        if !verdict.is_valid() {
            continue;
        }
        valid += 1;
        scored.push((s, scoring::sentence_part(model, scoring::PUNCTUATION, TITLE, &rows, 4)));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    let margin = scored.get(1).map_or(f64::INFINITY, |r| scored[0].1 - r.1);
    let (s, v) = scored.swap_remove(0);
    (valid, s, v, margin)
}
