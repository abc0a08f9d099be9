//! Zone and network totals recorded along a run.

use crate::grid::integrate;
use crate::stepper::NetworkState;

/// One row of the observables time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableRecord {
    pub t: f64,
    pub m_p1: f64,
    pub m_n1: f64,
    pub m_p2: f64,
    pub m_n2: f64,
    /// `M_P1 + M_P2`.
    pub m_p: f64,
    pub m_n: f64,
    /// Total population `M_P + M_N`.
    pub v: f64,
    /// Smallest cell value over all four densities.
    pub min_val: f64,
    /// Size of the step that reached `t` (0 for the initial record).
    pub dt_used: f64,
}

pub fn record(state: &NetworkState, dt_used: f64) -> ObservableRecord {
    let m_p1 = integrate(&state.zone1().stressed);
    let m_n1 = integrate(&state.zone1().unstressed);
    let m_p2 = integrate(&state.zone2().stressed);
    let m_n2 = integrate(&state.zone2().unstressed);
    let min_val = state
        .fields()
        .iter()
        .map(|f| f.min())
        .fold(f64::INFINITY, f64::min);
    ObservableRecord {
        t: state.t,
        m_p1,
        m_n1,
        m_p2,
        m_n2,
        m_p: m_p1 + m_p2,
        m_n: m_n1 + m_n2,
        v: m_p1 + m_n1 + m_p2 + m_n2,
        min_val,
        dt_used,
    }
}
