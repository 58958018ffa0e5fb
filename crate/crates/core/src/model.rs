use serde::{Deserialize, Serialize};

use crate::error::{EssError, Result};

/// The latent inclusion vector γ, stored as sorted 0-based column indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct ModelIndicator {
    included: Vec<usize>,
}

impl ModelIndicator {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validate and wrap. Indices must be strictly increasing and `< p`.
    pub fn new(included: Vec<usize>, p: usize) -> Result<Self> {
        if included.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EssError::config("model indices must be strictly increasing"));
        }
        if let Some(&last) = included.last() {
            if last >= p {
                return Err(EssError::config(format!("model index {last} out of range for p={p}")));
            }
        }
        Ok(ModelIndicator { included })
    }

    /// Sort and deduplicate arbitrary indices.
    pub fn from_unsorted(mut included: Vec<usize>) -> Self {
        included.sort_unstable();
        included.dedup();
        ModelIndicator { included }
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        ModelIndicator {
            included: mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect(),
        }
    }

    pub fn to_mask(&self, p: usize) -> Vec<bool> {
        let mut m = vec![false; p];
        for &j in &self.included {
            m[j] = true;
        }
        m
    }

    pub fn indices(&self) -> &[usize] {
        &self.included
    }

    pub fn size(&self) -> usize {
        self.included.len()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.included.binary_search(&j).is_ok()
    }

    /// Copy with index `j` toggled.
    pub fn flipped(&self, j: usize) -> Self {
        let mut v = self.included.clone();
        match v.binary_search(&j) {
            Ok(pos) => {
                v.remove(pos);
            }
            Err(pos) => v.insert(pos, j),
        }
        ModelIndicator { included: v }
    }

    pub fn with(&self, j: usize) -> Self {
        if self.contains(j) {
            self.clone()
        } else {
            self.flipped(j)
        }
    }

    pub fn without(&self, j: usize) -> Self {
        if self.contains(j) {
            self.flipped(j)
        } else {
            self.clone()
        }
    }

    /// 1-based, comma-joined, as written in output files.
    pub fn to_one_based_string(&self) -> String {
        self.included.iter().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join(",")
    }

    pub fn parse_one_based(s: &str, p: usize) -> Result<Self> {
        let mut v = Vec::new();
        for tok in s.split([',', ' ', ';']).filter(|t| !t.is_empty()) {
            let j: usize = tok
                .trim()
                .parse()
                .map_err(|_| EssError::config(format!("bad model index {tok:?}")))?;
            if j == 0 {
                return Err(EssError::config("model indices are 1-based"));
            }
            v.push(j - 1);
        }
        ModelIndicator::new(v, p)
    }
}
