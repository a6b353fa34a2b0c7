use super::{proxy_label, InteractionRecord, Skipped, Weighting};
use crate::error::{Error, Result};
use crate::simplex::ClusterSpace;

/// Rows are periods, columns are clusters; each row is a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionMatrix {
    pub rows: Vec<Vec<f64>>,
    /// Users contributing to each period.
    pub users_per_period: Vec<usize>,
    pub skipped: Vec<Skipped>,
}

/// Splits each user's span into `periods` equal bins, computes the per-bin
/// proxy distribution, and averages bins across users.
pub fn group_evolution(
    users: &[(String, Vec<InteractionRecord>)],
    periods: usize,
    weighting: Weighting,
    space: &ClusterSpace,
) -> Result<EvolutionMatrix> {
    if periods == 0 {
        return Err(Error::Config("periods must be >= 1".into()));
    }
    let k = space.len();
    let mut sums = vec![vec![0.0; k]; periods];
    let mut counts = vec![0usize; periods];
    let mut skipped = Vec::new();
    for (user, records) in users {
        let (Some(first), Some(last)) = (
            records.iter().map(|r| r.timestamp).min(),
            records.iter().map(|r| r.timestamp).max(),
        ) else {
            continue;
        };
        let span = last - first;
        if records.len() < periods || span <= 0 {
            skipped.push(Skipped {
                user_id: user.clone(),
                reason: format!(
                    "{} interaction(s) over {span}s cannot fill {periods} periods",
                    records.len()
                ),
            });
            continue;
        }
        let mut bins: Vec<Vec<&InteractionRecord>> = vec![Vec::new(); periods];
        for r in records {
            let pos = (r.timestamp - first) as f64 / span as f64 * periods as f64;
            bins[(pos as usize).min(periods - 1)].push(r);
        }
        for (p, bin) in bins.iter().enumerate() {
            if bin.is_empty() {
                continue;
            }
            let Ok(d) = proxy_label(bin.iter().copied(), weighting, space) else {
                continue;
            };
            for (s, v) in sums[p].iter_mut().zip(d.probs()) {
                *s += v;
            }
            counts[p] += 1;
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::InsufficientHistory(format!(
            "no user spans {periods} periods ({} skipped)",
            skipped.len()
        )));
    }
    let rows = sums
        .into_iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.into_iter().map(|v| v / total).collect()
            } else {
                row
            }
        })
        .collect();
    Ok(EvolutionMatrix {
        rows,
        users_per_period: counts,
        skipped,
    })
}
