//! Side-by-side tables of convergence histories.

use std::fmt::Write as _;

use crate::adapt::{AdaptiveHistory, Quantity};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    /// Record index in the reference history.
    pub k: usize,
    pub n_dof: usize,
    /// Per history: `(N, q)` of the record with the nearest DOF count.
    pub entries: Vec<Option<(usize, f64)>>,
    /// `q_other / q_reference` for every history after the first.
    pub efficiency: Vec<Option<f64>>,
}

/// Aligns every history against the first one by nearest DOF count (in
/// log scale) and reports the ratio of the selected quantity.
pub fn compare(histories: &[&AdaptiveHistory], quantity: Quantity) -> Result<Vec<CompareRow>> {
    if histories.len() < 2 {
        return Err(Error::InvalidArgument("compare needs at least two histories".into()));
    }
    let reference = histories[0];
    let mut rows = Vec::with_capacity(reference.len());
    for rec in &reference.records {
        let q0 = quantity.of(rec);
        let mut entries = vec![q0.map(|q| (rec.n_dof, q))];
        let mut efficiency = Vec::new();
        for h in &histories[1..] {
            let near = nearest(h, rec.n_dof, quantity);
            efficiency.push(match (q0, near) {
                (Some(a), Some((_, b))) if a > 0.0 => Some(b / a),
                _ => None,
            });
            entries.push(near);
        }
        rows.push(CompareRow {
            k: rec.k,
            n_dof: rec.n_dof,
            entries,
            efficiency,
        });
    }
    Ok(rows)
}

/// `(N, q)` of the record in `h` whose DOF count is closest to `n`.
pub fn nearest(h: &AdaptiveHistory, n: usize, quantity: Quantity) -> Option<(usize, f64)> {
    h.records
        .iter()
        .filter_map(|r| quantity.of(r).map(|q| (r.n_dof, q)))
        .min_by(|a, b| {
            let da = ((a.0 as f64) / n as f64).ln().abs();
            let db = ((b.0 as f64) / n as f64).ln().abs();
            da.total_cmp(&db)
        })
}

pub fn format_table(rows: &[CompareRow], names: &[&str]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:>4} {:>9}", "k", "N");
    for name in names {
        let _ = write!(s, " {:>10} {:>12}", format!("N[{name}]"), name);
    }
    for name in names.iter().skip(1) {
        let _ = write!(s, " {:>10}", format!("eff[{name}]"));
    }
    s.push('\n');
    for row in rows {
        let _ = write!(s, "{:>4} {:>9}", row.k, row.n_dof);
        for e in &row.entries {
            match e {
                Some((n, q)) => {
                    let _ = write!(s, " {n:>10} {q:>12.4e}");
                }
                None => {
                    let _ = write!(s, " {:>10} {:>12}", "-", "-");
                }
            }
        }
        for e in &row.efficiency {
            match e {
                Some(v) => {
                    let _ = write!(s, " {v:>10.4}");
                }
                None => {
                    let _ = write!(s, " {:>10}", "-");
                }
            }
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapt::IterationRecord;

    fn hist(points: &[(usize, f64)]) -> AdaptiveHistory {
        let mut h = AdaptiveHistory::default();
        for (k, &(n, q)) in points.iter().enumerate() {
            h.push(IterationRecord {
                k,
                n_elem: 2 * n,
                n_dof: n,
                eta: q,
                eta_y: q,
                eta_p: 0.0,
                osc: 0.0,
                err_u: None,
                err_y: None,
                err_p: None,
                grading: 0.0,
                marked: 0,
                ratio_err: None,
                ratio_eta: None,
                seconds: 0.0,
            })
            .unwrap();
        }
        h
    }

    #[test]
    fn identical_histories_are_equally_efficient() {
        let h = hist(&[(10, 1.0), (40, 0.25), (160, 0.0625)]);
        let rows = compare(&[&h, &h], Quantity::Eta).unwrap();
        assert!(rows.iter().all(|r| r.efficiency == vec![Some(1.0)]));
        assert!(format_table(&rows, &["a", "b"]).lines().count() == 4);
    }

    #[test]
    fn nearest_alignment() {
        let a = hist(&[(100, 1.0), (1000, 0.1)]);
        let b = hist(&[(90, 2.0), (400, 1.0), (1300, 0.3)]);
        let rows = compare(&[&a, &b], Quantity::Eta).unwrap();
        assert_eq!(rows[0].entries[1], Some((90, 2.0)));
        assert_eq!(rows[1].entries[1], Some((1300, 0.3)));
        assert!((rows[1].efficiency[0].unwrap() - 3.0).abs() < 1e-12);
        assert!(compare(&[&a], Quantity::Eta).is_err());
    }
}
