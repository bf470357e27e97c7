use std::io::{Read, Write};

use rand::RngCore;

use super::{coerce, Policy};
use crate::error::{Error, Result};
use crate::model::{Action, ActionSet, EnvConfig, SystemState};

/// Single threshold (no preemption of an undecoded packet) or separate
/// thresholds for new updates and retransmissions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Single,
    Double,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Single => "single",
            Variant::Double => "double",
        }
    }
}

/// Shape of a threshold table: one slot per `(e, b, delta_tx, r)` and the
/// energy costs that decide which slots are pinned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThresholdLayout {
    pub num_e: usize,
    pub b_max: usize,
    pub delta_max: usize,
    pub r_max: usize,
    pub e_s: usize,
    pub e_tx: usize,
}

impl ThresholdLayout {
    pub fn new(cfg: &EnvConfig) -> Self {
        Self {
            num_e: cfg.num_eh_states(),
            b_max: cfg.b_max(),
            delta_max: cfg.delta_max(),
            r_max: cfg.r_max(),
            e_s: cfg.e_s(),
            e_tx: cfg.e_tx(),
        }
    }

    pub fn len(&self) -> usize {
        self.num_e * (self.b_max + 1) * self.delta_max * (self.r_max + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Threshold value meaning "never transmit".
    pub fn never(&self) -> usize {
        self.delta_max + 1
    }

    pub fn slot(&self, e: usize, b: usize, delta_tx: usize, r: usize) -> usize {
        debug_assert!(e < self.num_e && b <= self.b_max && delta_tx >= 1 && delta_tx <= self.delta_max && r <= self.r_max);
        ((e * (self.b_max + 1) + b) * self.delta_max + (delta_tx - 1)) * (self.r_max + 1) + r
    }

    pub fn slot_of(&self, s: &SystemState) -> usize {
        self.slot(s.e, s.b, s.delta_tx, s.r)
    }

    /// `(e, b, delta_tx, r)` of a slot.
    pub fn coords(&self, slot: usize) -> (usize, usize, usize, usize) {
        let r = slot % (self.r_max + 1);
        let rest = slot / (self.r_max + 1);
        let dtx = rest % self.delta_max + 1;
        let rest = rest / self.delta_max;
        let b = rest % (self.b_max + 1);
        let e = rest / (self.b_max + 1);
        (e, b, dtx, r)
    }

    pub fn new_update_feasible(&self, b: usize) -> bool {
        b >= self.e_s + self.e_tx
    }

    pub fn retransmit_feasible(&self, b: usize, r: usize) -> bool {
        r >= 1 && b >= self.e_tx
    }

    pub fn feasible(&self, s: &SystemState) -> ActionSet {
        let mut set = ActionSet::empty();
        set.insert(Action::Idle);
        if self.new_update_feasible(s.b) {
            set.insert(Action::NewUpdate);
        }
        if self.retransmit_feasible(s.b, s.r) {
            set.insert(Action::Retransmit);
        }
        set
    }

    /// Whether the single-variant threshold of `slot` is pinned to "never":
    /// the transmit action (`n` at `r = 0`, `x` otherwise) is unaffordable.
    pub fn single_pinned(&self, slot: usize) -> bool {
        let (_, b, _, r) = self.coords(slot);
        if r == 0 {
            !self.new_update_feasible(b)
        } else {
            !self.retransmit_feasible(b, r)
        }
    }

    /// Whether `T_n` of `slot` is a free parameter in the double variant.
    pub fn double_n_free(&self, slot: usize) -> bool {
        let (_, b, _, _) = self.coords(slot);
        self.new_update_feasible(b)
    }

    /// Whether `T_x` of `slot` is a free parameter in the double variant.
    pub fn double_x_free(&self, slot: usize) -> bool {
        let (_, b, _, r) = self.coords(slot);
        self.retransmit_feasible(b, r)
    }
}

/// Integer thresholds per `(e, b, delta_tx, r)`.
///
/// The single variant stores its threshold in both columns. In the double
/// variant `T_n <= T_x`, `T_x` is pinned to "never" when a retransmission is
/// impossible, and `T_n` is tied to `T_x` when a fresh update is unaffordable
/// (the `n` band is empty).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdTable {
    layout: ThresholdLayout,
    variant: Variant,
    t_n: Vec<usize>,
    t_x: Vec<usize>,
}

impl ThresholdTable {
    /// Single-threshold table; `f` gives the threshold of each slot. Values
    /// are clamped to `[1, delta_max + 1]` and pinned slots are overwritten.
    pub fn single(layout: ThresholdLayout, mut f: impl FnMut(usize, usize, usize, usize) -> usize) -> Self {
        let t: Vec<usize> = (0..layout.len())
            .map(|slot| {
                if layout.single_pinned(slot) {
                    layout.never()
                } else {
                    let (e, b, dtx, r) = layout.coords(slot);
                    f(e, b, dtx, r).clamp(1, layout.never())
                }
            })
            .collect();
        Self {
            layout,
            variant: Variant::Single,
            t_n: t.clone(),
            t_x: t,
        }
    }

    /// Double-threshold table; `f` gives `(T_n, T_x)` per slot.
    pub fn double(
        layout: ThresholdLayout,
        mut f: impl FnMut(usize, usize, usize, usize) -> (usize, usize),
    ) -> Self {
        let mut t_n = Vec::with_capacity(layout.len());
        let mut t_x = Vec::with_capacity(layout.len());
        for slot in 0..layout.len() {
            let (e, b, dtx, r) = layout.coords(slot);
            let (n, x) = f(e, b, dtx, r);
            let (n, x) = project_double(&layout, slot, n as f64, x as f64);
            t_n.push(n as usize);
            t_x.push(x as usize);
        }
        Self {
            layout,
            variant: Variant::Double,
            t_n,
            t_x,
        }
    }

    pub fn layout(&self) -> &ThresholdLayout {
        &self.layout
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn thresholds(&self, s: &SystemState) -> (usize, usize) {
        let slot = self.layout.slot_of(s);
        (self.t_n[slot], self.t_x[slot])
    }

    pub fn t_n(&self) -> &[usize] {
        &self.t_n
    }

    pub fn t_x(&self) -> &[usize] {
        &self.t_x
    }

    pub fn action(&self, s: &SystemState) -> Action {
        match self.variant {
            Variant::Single => single_threshold_action(s, self),
            Variant::Double => double_threshold_action(s, self),
        }
    }

    /// Writes `e,b,delta_tx,r,T_n,T_x`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["e", "b", "delta_tx", "r", "T_n", "T_x"]).map_err(io)?;
        for slot in 0..self.layout.len() {
            let (e, b, dtx, r) = self.layout.coords(slot);
            w.write_record([e, b, dtx, r, self.t_n[slot], self.t_x[slot]].map(|v| v.to_string()))
                .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`write_csv`](Self::write_csv). The variant
    /// is single when every row has `T_n = T_x`.
    pub fn read_csv<R: Read>(layout: ThresholdLayout, input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(input);
        let mut t_n = vec![layout.never(); layout.len()];
        let mut t_x = vec![layout.never(); layout.len()];
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
            let vals: Vec<usize> = rec
                .iter()
                .map(|f| f.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    line,
                    msg: e.to_string(),
                })?;
            if vals.len() != 6 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected 6 fields, found {}", vals.len()),
                });
            }
            let (e, b, dtx, r) = (vals[0], vals[1], vals[2], vals[3]);
            if e >= layout.num_e || b > layout.b_max || dtx == 0 || dtx > layout.delta_max || r > layout.r_max {
                return Err(Error::Parse {
                    line,
                    msg: "slot outside the configured dimensions".into(),
                });
            }
            let slot = layout.slot(e, b, dtx, r);
            t_n[slot] = vals[4];
            t_x[slot] = vals[5];
        }
        if t_n == t_x {
            Ok(Self::single(layout, |e, b, dtx, r| t_n[layout.slot(e, b, dtx, r)]))
        } else {
            Ok(Self::double(layout, |e, b, dtx, r| {
                let slot = layout.slot(e, b, dtx, r);
                (t_n[slot], t_x[slot])
            }))
        }
    }
}

/// Clamps a `(T_n, T_x)` pair into `[1, delta_max + 1]`, applies the pinning
/// rules and enforces `T_n <= T_x`.
pub(crate) fn project_double(layout: &ThresholdLayout, slot: usize, n: f64, x: f64) -> (f64, f64) {
    let never = layout.never() as f64;
    let x = if layout.double_x_free(slot) {
        x.clamp(1.0, never)
    } else {
        never
    };
    let n = if layout.double_n_free(slot) {
        n.clamp(1.0, never).min(x)
    } else {
        x
    };
    (n, x)
}

/// `i` below `T_n`, `n` in `[T_n, T_x)`, `x` from `T_x` on; infeasible
/// choices degrade along `x -> n -> i`.
pub fn double_threshold_action(s: &SystemState, t: &ThresholdTable) -> Action {
    let (t_n, t_x) = t.thresholds(s);
    let preferred = if s.delta_rx < t_n {
        Action::Idle
    } else if s.delta_rx < t_x {
        Action::NewUpdate
    } else {
        Action::Retransmit
    };
    coerce(preferred, t.layout.feasible(s))
}

/// `i` below `T`; above it a fresh update when there is nothing pending,
/// otherwise a retransmission.
pub fn single_threshold_action(s: &SystemState, t: &ThresholdTable) -> Action {
    let (threshold, _) = t.thresholds(s);
    let preferred = if s.delta_rx < threshold {
        Action::Idle
    } else if s.r == 0 {
        Action::NewUpdate
    } else {
        Action::Retransmit
    };
    coerce(preferred, t.layout.feasible(s))
}

impl Policy for ThresholdTable {
    fn act(&self, s: &SystemState, _cfg: &EnvConfig, _rng: &mut dyn RngCore) -> Action {
        self.action(s)
    }

    fn name(&self) -> &str {
        match self.variant {
            Variant::Single => "single-threshold",
            Variant::Double => "double-threshold",
        }
    }
}
