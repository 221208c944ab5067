//! Plain-text accuracy tables.

use std::fmt::Write as _;

use fedpandemic::evaluation::{AccuracyRow, SweepPoint};

/// One configuration's accuracies at the reported epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub config: SweepPoint,
    /// `(seed, accuracy)` in seed order.
    pub per_seed: Vec<(u64, f64)>,
}

impl TableRow {
    pub fn mean(&self) -> f64 {
        self.per_seed.iter().map(|(_, a)| a).sum::<f64>() / self.per_seed.len() as f64
    }
}

/// Groups `rows` by configuration at `epoch` (default: the largest epoch
/// present), keeping the order in which configurations first appear.
pub fn accuracy_table(rows: &[AccuracyRow], epoch: Option<usize>) -> (usize, Vec<TableRow>) {
    let epoch = epoch.unwrap_or_else(|| rows.iter().map(|r| r.global_epoch).max().unwrap_or(0));
    let mut table: Vec<TableRow> = Vec::new();
    for r in rows.iter().filter(|r| r.global_epoch == epoch) {
        match table.iter_mut().find(|t| t.config.same_config(&r.point)) {
            Some(t) => t.per_seed.push((r.point.seed, r.accuracy)),
            None => table.push(TableRow {
                config: SweepPoint { seed: 0, ..r.point },
                per_seed: vec![(r.point.seed, r.accuracy)],
            }),
        }
    }
    for t in &mut table {
        t.per_seed.sort_by_key(|&(s, _)| s);
    }
    (epoch, table)
}

pub fn render(epoch: usize, table: &[TableRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "accuracy at global epoch {epoch}");
    let _ = writeln!(out, "| simulation | mechanism | noise_level | epsilon | seeds | mean accuracy | per seed |");
    let _ = writeln!(out, "|---|---|---|---|---|---|---|");
    for t in table {
        let eps = t.config.epsilon.map(|e| e.to_string()).unwrap_or_else(|| "-".into());
        let seeds: Vec<String> = t.per_seed.iter().map(|(s, a)| format!("{s}:{a}")).collect();
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {:.4} | {} |",
            t.config.simulation,
            t.config.mechanism,
            t.config.noise_level,
            eps,
            t.per_seed.len(),
            t.mean(),
            seeds.join(" ")
        );
    }
    out
}
