//! The three framing categories assigned to each post.

use serde::{Deserialize, Serialize};

/// Framing category: Problem (1), Solution (2), or Other (3).
///
/// Numeric codes match the coding scheme used in the labeled data. The
/// ordinal index is meaningful only for weighted-kappa disagreement
/// weighting; the categories themselves are nominal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Category {
    Problem = 1,
    Solution = 2,
    Other = 3,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Problem, Category::Solution, Category::Other];

    /// Raw integer code (1, 2, or 3).
    pub fn code(self) -> u8 {
        self as u8
    }

    /// Zero-based index into per-class arrays.
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_code(code: i64) -> Option<Category> {
        match code {
            1 => Some(Category::Problem),
            2 => Some(Category::Solution),
            3 => Some(Category::Other),
            _ => None,
        }
    }

    pub fn from_index(index: usize) -> Option<Category> {
        Category::from_code(index as i64 + 1)
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Problem => "problem",
            Category::Solution => "solution",
            Category::Other => "other",
        }
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.code())
    }
}

impl TryFrom<u8> for Category {
    type Error = String;

    fn try_from(code: u8) -> Result<Self, Self::Error> {
        Category::from_code(code as i64).ok_or_else(|| format!("invalid category code {code}"))
    }
}

impl From<Category> for u8 {
    fn from(c: Category) -> u8 {
        c.code()
    }
}
