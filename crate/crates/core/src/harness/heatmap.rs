use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::Action;
use crate::planner::PolicyRow;

/// Actions of one `(e, delta_tx, r)` slice: `grid[b][delta_rx - delta_tx]`
/// with codes 0 = idle, 1 = new update, 2 = retransmission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeatmapSlice {
    pub e: usize,
    pub delta_tx: usize,
    pub r: usize,
    pub delta_max: usize,
    pub grid: Vec<Vec<u8>>,
}

pub fn action_code(a: Action) -> u8 {
    match a {
        Action::Idle => 0,
        Action::NewUpdate => 1,
        Action::Retransmit => 2,
    }
}

impl HeatmapSlice {
    pub fn file_name(&self) -> String {
        format!("heatmap_e{}_dtx{}_r{}.csv", self.e, self.delta_tx, self.r)
    }

    /// `b` down the rows, one column per receiver AoI.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["b".to_string()];
        header.extend((self.delta_tx..=self.delta_max).map(|d| format!("delta_rx={d}")));
        w.write_record(&header)?;
        for (b, row) in self.grid.iter().enumerate() {
            let mut rec = vec![b.to_string()];
            rec.extend(row.iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Partially filled action grid of one slice.
type Grid = Vec<Vec<Option<u8>>>;

/// Rearranges a solved-policy table into one grid per `(e, delta_tx, r)`
/// slice, in lexicographic slice order. Every state of the grid must be
/// present exactly once.
pub fn export_policy_heatmap(rows: &[PolicyRow]) -> Result<Vec<HeatmapSlice>> {
    let missing = |msg: String| Error::InvalidConfig(format!("policy table is incomplete: {msg}"));
    if rows.is_empty() {
        return Err(missing("no rows".into()));
    }
    let b_max = rows.iter().map(|r| r.state.b).max().unwrap_or(0);
    let delta_max = rows.iter().map(|r| r.state.delta_rx).max().unwrap_or(0);
    let mut slices: BTreeMap<(usize, usize, usize), Grid> = BTreeMap::new();
    for row in rows {
        let s = row.state;
        let grid = slices
            .entry((s.e, s.delta_tx, s.r))
            .or_insert_with(|| vec![vec![None; delta_max - s.delta_tx + 1]; b_max + 1]);
        let cell = &mut grid[s.b][s.delta_rx - s.delta_tx];
        if cell.is_some() {
            return Err(Error::InvalidConfig(format!("state {s} appears twice")));
        }
        *cell = Some(action_code(row.action));
    }
    slices
        .into_iter()
        .map(|((e, delta_tx, r), grid)| {
            let grid = grid
                .into_iter()
                .enumerate()
                .map(|(b, row)| {
                    row.into_iter()
                        .enumerate()
                        .map(|(k, c)| {
                            c.ok_or_else(|| {
                                missing(format!(
                                    "no row for e={e} b={b} delta_rx={} delta_tx={delta_tx} r={r}",
                                    delta_tx + k
                                ))
                            })
                        })
                        .collect::<Result<Vec<u8>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(HeatmapSlice {
                e,
                delta_tx,
                r,
                delta_max,
                grid,
            })
        })
        .collect()
}

/// Writes every slice into `dir` and returns the file paths.
pub fn write_heatmaps(dir: &Path, slices: &[HeatmapSlice]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    slices
        .iter()
        .map(|s| {
            let path = dir.join(s.file_name());
            s.write_csv(std::fs::File::create(&path)?)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemState;

    fn rows(b_max: usize, delta_max: usize, f: impl Fn(&SystemState) -> Action) -> Vec<PolicyRow> {
        let mut out = Vec::new();
        for b in 0..=b_max {
            for drx in 1..=delta_max {
                for dtx in 1..=drx {
                    let state = SystemState::new(0, b, drx, dtx, 0);
                    out.push(PolicyRow {
                        state,
                        action: f(&state),
                        h: 0.0,
                        q: [Some(0.0), None, None],
                    });
                }
            }
        }
        out
    }

    #[test]
    fn idle_policy_gives_zero_grids() {
        let slices = export_policy_heatmap(&rows(2, 5, |_| Action::Idle)).unwrap();
        assert_eq!(slices.len(), 5);
        for s in &slices {
            assert_eq!(s.grid.len(), 3);
            assert_eq!(s.grid[0].len(), 5 - s.delta_tx + 1);
            assert!(s.grid.iter().flatten().all(|&c| c == 0));
        }
    }

    #[test]
    fn cells_land_in_place() {
        let f = |s: &SystemState| {
            if s.b >= 2 && s.delta_rx >= 4 {
                Action::NewUpdate
            } else {
                Action::Idle
            }
        };
        let slices = export_policy_heatmap(&rows(2, 5, f)).unwrap();
        let first = &slices[0];
        assert_eq!(first.delta_tx, 1);
        assert_eq!(first.grid[2], vec![0, 0, 0, 1, 1]);
        let mut buf = Vec::new();
        first.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("b,delta_rx=1,delta_rx=2,delta_rx=3,delta_rx=4,delta_rx=5\n0,0,0,0,0,0\n"));
    }

    #[test]
    fn gaps_are_errors() {
        let mut r = rows(1, 3, |_| Action::Idle);
        r.remove(2);
        assert!(export_policy_heatmap(&r).is_err());
    }
}
