//! Scaled DCT-II.
//!
//! `v[i] = c[i] * sqrt(d'/m) * sum_j u[j] * cos(pi * i * (2j + 1) / (2m))`
//! with `c[0] = 1` and `c[i] = sqrt(2)` otherwise (zero-based indices). This
//! is `sqrt(d')` times the orthonormal DCT-II, so `|v|^2 = d' * |u|^2`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustdct::{DctPlanner, TransformType2And3};

use crate::{Error, Result};

type Plan = Arc<dyn TransformType2And3<f64>>;

fn plan(len: usize) -> Plan {
    static PLANS: OnceLock<Mutex<HashMap<usize, Plan>>> = OnceLock::new();
    let plans = PLANS.get_or_init(Default::default);
    let mut plans = plans.lock().unwrap_or_else(|e| e.into_inner());
    plans
        .entry(len)
        .or_insert_with(|| DctPlanner::new().plan_dct2(len))
        .clone()
}

/// In-place scaled DCT-II of `buf`; `scale_dim` plays the role of `d'`.
pub(crate) fn dct2_in_place(buf: &mut [f64], scale_dim: usize) {
    let m = buf.len();
    if m == 0 {
        return;
    }
    // rustdct computes the unnormalized sum.
    plan(m).process_dct2(buf);
    let base = (scale_dim as f64 / m as f64).sqrt();
    buf[0] *= base;
    let rest = base * std::f64::consts::SQRT_2;
    for v in &mut buf[1..] {
        *v *= rest;
    }
}

/// Scaled DCT-II of `u`, `O(m log m)`.
pub fn dct2(u: &[f64], scale_dim: usize) -> Result<Vec<f64>> {
    if u.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = u.to_vec();
    dct2_in_place(&mut out, scale_dim);
    Ok(out)
}
