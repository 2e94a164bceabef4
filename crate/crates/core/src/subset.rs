use std::fmt;

use crate::error::{Error, Result};

/// A nonempty set of landmark indices into `0..n`, stored strictly
/// increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LandmarkSubset {
    indices: Vec<usize>,
    n: usize,
}

impl LandmarkSubset {
    /// Sorts `indices` and validates them against the ambient order `n`.
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidSubset("subset is empty".into()));
        }
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidSubset(format!("index {} repeated", w[0])));
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::InvalidSubset(format!(
                    "index {last} out of range for order {n}"
                )));
            }
        }
        Ok(LandmarkSubset { indices, n })
    }

    /// Every index of `0..n`.
    pub fn full(n: usize) -> Self {
        LandmarkSubset {
            indices: (0..n).collect(),
            n,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn ambient_order(&self) -> usize {
        self.n
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == self.n
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// The indices not in the subset, increasing.
    pub fn complement(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n - self.indices.len());
        let mut it = self.indices.iter().peekable();
        for i in 0..self.n {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        out
    }
}

impl fmt::Display for LandmarkSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, idx) in self.indices.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{idx}")?;
        }
        write!(f, "}}")
    }
}
