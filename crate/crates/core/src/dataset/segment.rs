use std::collections::BTreeSet;

use super::{InteractionRecord, Weighting};
use crate::error::{Error, Result};
use crate::simplex::argsort_descending;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segments {
    pub head: BTreeSet<usize>,
    pub tail: BTreeSet<usize>,
}

/// Global interaction mass per cluster.
pub fn cluster_masses(records: &[InteractionRecord], k: usize, weighting: Weighting) -> Vec<f64> {
    let mut mass = vec![0.0; k];
    for r in records {
        let w = match weighting {
            Weighting::Unit => 1.0,
            Weighting::Recorded => r.weight,
        };
        for &c in &r.clusters {
            if c < k {
                mass[c] += w;
            }
        }
    }
    mass
}

/// Head = smallest mass-descending prefix reaching `head_mass` of the total;
/// tail = remaining clusters with nonzero mass.
pub fn long_tail_segment(masses: &[f64], head_mass: f64) -> Result<Segments> {
    if !(head_mass > 0.0 && head_mass < 1.0) {
        return Err(Error::Config(format!(
            "head_mass {head_mass} outside (0, 1)"
        )));
    }
    let total: f64 = masses.iter().sum();
    if masses.is_empty() || total <= 0.0 {
        return Err(Error::EmptyCorpus);
    }
    let target = head_mass * total * (1.0 - 1e-12);
    let mut head = BTreeSet::new();
    let mut tail = BTreeSet::new();
    let mut acc = 0.0;
    for i in argsort_descending(masses) {
        if masses[i] <= 0.0 {
            continue;
        }
        if acc < target {
            head.insert(i);
            acc += masses[i];
        } else {
            tail.insert(i);
        }
    }
    Ok(Segments { head, tail })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn examples() {
        let s = long_tail_segment(&[0.5, 0.3, 0.1, 0.1], 0.8).unwrap();
        assert_eq!((s.head, s.tail), (set(&[0, 1]), set(&[2, 3])));
        let s = long_tail_segment(&[0.002, 0.995, 0.003], 0.99).unwrap();
        assert_eq!(s.head, set(&[1]));
        let s = long_tail_segment(&[1.0; 4], 0.5).unwrap();
        assert_eq!((s.head, s.tail), (set(&[0, 1]), set(&[2, 3])));
    }

    #[test]
    fn zero_mass_clusters_excluded() {
        let s = long_tail_segment(&[3.0, 0.0, 1.0], 0.5).unwrap();
        assert_eq!((s.head, s.tail), (set(&[0]), set(&[2])));
        assert!(matches!(
            long_tail_segment(&[0.0, 0.0], 0.5),
            Err(Error::EmptyCorpus)
        ));
        assert!(matches!(
            long_tail_segment(&[], 0.5),
            Err(Error::EmptyCorpus)
        ));
    }
}
