use std::io::Write;

use serde::Serialize;

use super::{error_band, mu_sigma, threshold_h};
use crate::Result;

/// One CSV row of the tabulation mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TabulationRow {
    pub lambda: f64,
    pub h: f64,
    pub m: usize,
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
    pub eps_minus: Option<f64>,
    pub eps_plus: Option<f64>,
    pub be_bound: Option<f64>,
}

/// Rows for every `(r, m)` pair at fixed `lambda` and `eta`. Cells outside the
/// Gaussian phase or without a root are left empty.
pub fn tabulate(lambda: f64, rs: &[f64], ms: &[usize], eta: f64) -> Result<Vec<TabulationRow>> {
    let mut rows = Vec::with_capacity(rs.len() * ms.len());
    for &r in rs {
        for &m in ms {
            let h = threshold_h(m, r)?;
            let stats = mu_sigma(lambda, h, m)?;
            let band = error_band(lambda, m, r, eta).ok();
            rows.push(TabulationRow {
                lambda,
                h,
                m,
                r,
                mu: stats.mu,
                sigma: stats.sigma,
                eps_minus: band.and_then(|b| b.eps_minus),
                eps_plus: band.and_then(|b| b.eps_plus),
                be_bound: band.and_then(|b| b.be_bound),
            });
        }
    }
    Ok(rows)
}

pub fn write_tabulation_csv<W: Write>(rows: &[TabulationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}
