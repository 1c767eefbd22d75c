//! Per-sample records of the oscillator observables.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::observables::{renormalize, to_db, QuadratureMoments};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSeriesRow {
    pub t: f64,
    pub var_x1: f64,
    pub var_x2: f64,
    pub cov: f64,
    pub var_x1_db: f64,
    pub var_x1_renorm_db: f64,
    pub purity: f64,
    /// Qubit excited-state probability; only recorded by protocol runs.
    pub p_e: Option<f64>,
}

impl TimeSeriesRow {
    pub fn new(t: f64, moments: &QuadratureMoments, purity: f64, n_th: f64, p_e: Option<f64>) -> Result<Self> {
        Ok(TimeSeriesRow {
            t,
            var_x1: moments.var_x1,
            var_x2: moments.var_x2,
            cov: moments.cov,
            var_x1_db: to_db(moments.var_x1)?,
            var_x1_renorm_db: to_db(renormalize(moments.var_x1, n_th))?,
            purity,
            p_e,
        })
    }
}

/// Time-ordered observable record with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    rows: Vec<TimeSeriesRow>,
}

impl TimeSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: TimeSeriesRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if !(row.t > last.t) {
                return Err(Error::NonIncreasingTime {
                    prev: last.t,
                    next: row.t,
                });
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[TimeSeriesRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TimeSeriesRow> {
        self.rows.last()
    }

    pub fn var_x1(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.var_x1).collect()
    }

    /// True when any row carries a qubit probability.
    pub fn has_p_e(&self) -> bool {
        self.rows.iter().any(|r| r.p_e.is_some())
    }
}
