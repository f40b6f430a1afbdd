use serde::{Deserialize, Serialize};

use super::error::{Error, Result};

/// Ordered list of labeled subsystems. The first label is the most
/// significant digit of the tensor-product index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemDims {
    systems: Vec<(String, usize)>,
}

impl SystemDims {
    pub fn new<S: Into<String>>(systems: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let systems: Vec<(String, usize)> = systems.into_iter().map(|(l, d)| (l.into(), d)).collect();
        for (i, (label, dim)) in systems.iter().enumerate() {
            if *dim == 0 {
                return Err(Error::ZeroDim(label.clone()));
            }
            if systems[..i].iter().any(|(l, _)| l == label) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { systems })
    }

    /// Single system.
    pub fn single(label: &str, dim: usize) -> Result<Self> {
        Self::new([(label, dim)])
    }

    /// The empty (one-dimensional) system list.
    pub fn trivial() -> Self {
        Self { systems: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.systems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.systems.is_empty()
    }

    pub fn total(&self) -> usize {
        self.systems.iter().map(|(_, d)| d).product()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.systems.iter().map(|(l, _)| l.as_str())
    }

    pub fn dims(&self) -> Vec<usize> {
        self.systems.iter().map(|(_, d)| *d).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.systems.iter().map(|(l, d)| (l.as_str(), *d))
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.systems.iter().position(|(l, _)| l == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.position(label).is_some()
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        self.position(label)
            .map(|i| self.systems[i].1)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Positions of `labels`, in the order given.
    pub fn positions(&self, labels: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::DuplicateLabel(l.to_string()));
            }
            out.push(self.position(l).ok_or_else(|| Error::UnknownLabel(l.to_string()))?);
        }
        Ok(out)
    }

    /// Subsystem list restricted to `labels`, keeping the original order.
    pub fn select(&self, labels: &[&str]) -> Result<Self> {
        self.positions(labels)?;
        Ok(Self {
            systems: self
                .systems
                .iter()
                .filter(|(l, _)| labels.contains(&l.as_str()))
                .cloned()
                .collect(),
        })
    }

    /// Subsystem list with the systems at `perm` (new order of old positions).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            systems: perm.iter().map(|&p| self.systems[p].clone()).collect(),
        }
    }

    /// Concatenation; fails if a label is shared.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if let Some((l, _)) = other.systems.iter().find(|(l, _)| self.contains(l)) {
            return Err(Error::DuplicateLabel(l.clone()));
        }
        let mut systems = self.systems.clone();
        systems.extend(other.systems.iter().cloned());
        Ok(Self { systems })
    }

    /// Same dimensions, new labels.
    pub fn relabeled(&self, labels: &[&str]) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::DimMismatch(format!(
                "relabel with {} labels on {} systems",
                labels.len(),
                self.len()
            )));
        }
        Self::new(labels.iter().zip(self.dims()).map(|(l, d)| (*l, d)))
    }

    /// Append `suffix` to every label.
    pub fn suffixed(&self, suffix: &str) -> Self {
        Self {
            systems: self.systems.iter().map(|(l, d)| (format!("{l}{suffix}"), *d)).collect(),
        }
    }

    pub fn as_pairs(&self) -> &[(String, usize)] {
        &self.systems
    }
}

impl std::fmt::Display for SystemDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.systems.iter().map(|(l, d)| format!("{l}:{d}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_zero() {
        assert!(matches!(
            SystemDims::new([("A", 2), ("A", 3)]),
            Err(Error::DuplicateLabel(_))
        ));
        assert!(matches!(SystemDims::new([("A", 0)]), Err(Error::ZeroDim(_))));
    }

    #[test]
    fn total_is_product() {
        let d = SystemDims::new([("A", 2), ("B", 3), ("C", 4)]).unwrap();
        assert_eq!(d.total(), 24);
        assert_eq!(SystemDims::trivial().total(), 1);
        assert_eq!(d.select(&["C", "A"]).unwrap().dims(), vec![2, 4]);
    }
}
