use unicode_general_category::{get_general_category, GeneralCategory};

use crate::decimal::Fixed4;

fn is_separator(c: char) -> bool {
    use GeneralCategory::*;
    c.is_whitespace()
        || matches!(
            get_general_category(c),
            ConnectorPunctuation
                | DashPunctuation
                | OpenPunctuation
                | ClosePunctuation
                | InitialPunctuation
                | FinalPunctuation
                | OtherPunctuation
        )
}

/// Lowercased tokens split on Unicode whitespace and punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(is_separator)
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Levenshtein distance over arbitrary token sequences.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(x != y);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Normalized token edit distance kept as an exact ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RevisionDistance {
    pub edits: usize,
    pub max_len: usize,
}

impl RevisionDistance {
    pub fn between<T: PartialEq>(a: &[T], b: &[T]) -> Self {
        RevisionDistance {
            edits: edit_distance(a, b),
            max_len: a.len().max(b.len()),
        }
    }

    pub fn value(self) -> f64 {
        if self.max_len == 0 {
            0.0
        } else {
            self.edits as f64 / self.max_len as f64
        }
    }

    /// `value() >= theta`, decided in integer arithmetic.
    pub fn meets(self, theta: Fixed4) -> bool {
        let lhs = self.edits as i128 * Fixed4::SCALE as i128;
        let rhs = theta.ten_thousandths() as i128 * self.max_len as i128;
        lhs >= rhs
    }
}

/// Token-level Levenshtein distance normalized by the longer list; 0 when
/// both are empty.
pub fn semantic_revision_distance<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    RevisionDistance::between(a, b).value()
}
