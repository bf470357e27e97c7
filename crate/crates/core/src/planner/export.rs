use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::model::{Action, SystemState};

use super::kernel::Mdp;
use super::rvi::Solution;

pub const POLICY_CSV_HEADER: [&str; 10] = [
    "e", "b", "delta_rx", "delta_tx", "r", "action", "h", "Q_i", "Q_n", "Q_x",
];

/// One line of the solved-policy CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRow {
    pub state: SystemState,
    pub action: Action,
    pub h: f64,
    /// `None` for infeasible actions (empty cells).
    pub q: [Option<f64>; 3],
}

/// Writes `e,b,delta_rx,delta_tx,r,action,h,Q_i,Q_n,Q_x`, one row per state.
pub fn write_policy_csv<W: Write>(out: W, mdp: &Mdp, solution: &Solution) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(POLICY_CSV_HEADER).map_err(csv_io)?;
    for (i, s) in mdp.space().states().iter().enumerate() {
        let q = &solution.values.q[i];
        let cell = |a: Action| {
            let v = q[a.index()];
            if v.is_finite() {
                format!("{v}")
            } else {
                String::new()
            }
        };
        w.write_record([
            s.e.to_string(),
            s.b.to_string(),
            s.delta_rx.to_string(),
            s.delta_tx.to_string(),
            s.r.to_string(),
            solution.policy.action(i).symbol().to_string(),
            format!("{}", solution.values.h[i]),
            cell(Action::Idle),
            cell(Action::NewUpdate),
            cell(Action::Retransmit),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Reads a policy CSV written by [`write_policy_csv`]. Errors carry the
/// 1-based line number of the offending row.
pub fn read_policy_csv<R: Read>(input: R) -> Result<Vec<PolicyRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(line),
            msg: e.to_string(),
        })?;
        if i == 0 {
            if rec.iter().ne(POLICY_CSV_HEADER.iter().copied()) {
                return Err(Error::Parse {
                    line,
                    msg: format!("unexpected header, expected {}", POLICY_CSV_HEADER.join(",")),
                });
            }
            continue;
        }
        let bad = |msg: String| Error::Parse { line, msg };
        if rec.len() != POLICY_CSV_HEADER.len() {
            return Err(bad(format!("expected 10 fields, found {}", rec.len())));
        }
        let int = |k: usize| {
            rec[k]
                .trim()
                .parse::<usize>()
                .map_err(|_| bad(format!("field {} is not an integer: {:?}", POLICY_CSV_HEADER[k], &rec[k])))
        };
        let float = |k: usize| {
            rec[k]
                .trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("field {} is not a number: {:?}", POLICY_CSV_HEADER[k], &rec[k])))
        };
        let opt = |k: usize| {
            if rec[k].trim().is_empty() {
                Ok(None)
            } else {
                float(k).map(Some)
            }
        };
        let state = SystemState::new(int(0)?, int(1)?, int(2)?, int(3)?, int(4)?);
        let action = Action::from_symbol(rec[5].trim())
            .ok_or_else(|| bad(format!("unknown action {:?}", &rec[5])))?;
        rows.push(PolicyRow {
            state,
            action,
            h: float(6)?,
            q: [opt(7)?, opt(8)?, opt(9)?],
        });
    }
    Ok(rows)
}
