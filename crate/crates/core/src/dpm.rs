//! Derivative-propagation along a single trajectory: the position, the
//! spatial-derivative stacks of the log-amplitude C and the phase S, and the
//! log-Jacobian are integrated together as one ODE system, truncated at a
//! configurable order.

use serde::{Deserialize, Serialize};

use crate::model::{binomial, PhysicalConstants, PotentialModel, WavepacketSpec};
use crate::{Error, Result};

/// Any state component beyond this magnitude marks the trajectory as
/// diverged.
pub const OVERFLOW_LIMIT: f64 = 1e12;

/// One trajectory's full state: position, C- and S-derivative stacks
/// (index n holds the n-th spatial derivative), and the log of the
/// volume-element Jacobian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub t: f64,
    pub x: f64,
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    pub ln_jacobian: f64,
}

impl TrajectoryState {
    fn c_at(&self, n: usize) -> f64 {
        self.c.get(n).copied().unwrap_or(0.0)
    }

    fn s_at(&self, n: usize) -> f64 {
        self.s.get(n).copied().unwrap_or(0.0)
    }

    fn max_abs(&self) -> f64 {
        self.c
            .iter()
            .chain(self.s.iter())
            .chain([&self.x, &self.ln_jacobian])
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    fn add_scaled(&mut self, other: &TrajectoryState, factor: f64) {
        self.t += factor * other.t;
        self.x += factor * other.x;
        self.ln_jacobian += factor * other.ln_jacobian;
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            *a += factor * b;
        }
        for (a, b) in self.s.iter_mut().zip(&other.s) {
            *a += factor * b;
        }
    }
}

/// Truncation order, damping, and integrator step for the hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    /// Truncation order; derivatives above it are closed to zero.
    pub n_order: usize,
    /// Damping rate applied to the highest orders; 0 disables damping.
    pub lambda: f64,
    /// How many of the highest derivative orders receive damping.
    pub damp_top_orders: usize,
    /// Damping switches for the C and S stacks separately.
    pub damp_c: bool,
    pub damp_s: bool,
    pub dt: f64,
    pub t_final: f64,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            n_order: 4,
            lambda: 0.0,
            damp_top_orders: 2,
            damp_c: true,
            damp_s: true,
            dt: 1e-3,
            t_final: 20.0 * std::f64::consts::PI,
        }
    }
}

/// Time-ordered snapshots of one trajectory. `frozen_at` is set when the
/// state overflowed; later snapshots repeat the last valid state so the
/// ensemble keeps a shared time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub states: Vec<TrajectoryState>,
    pub frozen_at: Option<f64>,
}

/// Right-hand side of the truncated hierarchy.
///
/// Every derivative index above `n_order` is treated as zero. The n = 0 row
/// of the C-equation reduces to dC⁰/dt = -S²/2m; the log-Jacobian follows
/// d(lnJ)/dt = S²/m.
pub fn hierarchy_rhs(
    state: &TrajectoryState,
    model: &PotentialModel,
    consts: &PhysicalConstants,
    config: &HierarchyConfig,
) -> Result<TrajectoryState> {
    if state.max_abs() > OVERFLOW_LIMIT {
        return Err(Error::Overflow { t: state.t, limit: OVERFLOW_LIMIT });
    }
    let m = consts.mass;
    let hbar2 = consts.hbar * consts.hbar;
    let n_top = config.n_order;
    let s1 = state.s_at(1);

    let mut dc = vec![0.0; n_top + 1];
    let mut ds = vec![0.0; n_top + 1];
    for n in 0..=n_top {
        let mut cross = 0.0;
        let mut ss = 0.0;
        let mut cc = 0.0;
        for j in 0..=n {
            let b = binomial(n, j);
            cross += b * state.s_at(n + 1 - j) * state.c_at(j + 1);
            ss += b * state.s_at(j + 1) * state.s_at(n + 1 - j);
            cc += b * state.c_at(j + 1) * state.c_at(n + 1 - j);
        }
        dc[n] = -(state.s_at(n + 2) + 2.0 * cross) / (2.0 * m) + s1 * state.c_at(n + 1) / m;
        ds[n] = -ss / (2.0 * m) + hbar2 / (2.0 * m) * (state.c_at(n + 2) + cc)
            - model.value_deriv(state.x, n)
            + s1 * state.s_at(n + 1) / m;
    }
    if config.lambda > 0.0 && config.damp_top_orders > 0 {
        let lowest = (n_top + 1).saturating_sub(config.damp_top_orders);
        for n in lowest..=n_top {
            if config.damp_c {
                dc[n] -= config.lambda * state.c_at(n);
            }
            if config.damp_s {
                ds[n] -= config.lambda * state.s_at(n);
            }
        }
    }
    Ok(TrajectoryState {
        t: 1.0,
        x: s1 / m,
        c: dc,
        s: ds,
        ln_jacobian: state.s_at(2) / m,
    })
}

fn rk4_step(
    state: &TrajectoryState,
    model: &PotentialModel,
    consts: &PhysicalConstants,
    config: &HierarchyConfig,
) -> Result<TrajectoryState> {
    let dt = config.dt;
    let k1 = hierarchy_rhs(state, model, consts, config)?;
    let mut mid = state.clone();
    mid.add_scaled(&k1, dt / 2.0);
    let k2 = hierarchy_rhs(&mid, model, consts, config)?;
    let mut mid = state.clone();
    mid.add_scaled(&k2, dt / 2.0);
    let k3 = hierarchy_rhs(&mid, model, consts, config)?;
    let mut end = state.clone();
    end.add_scaled(&k3, dt);
    let k4 = hierarchy_rhs(&end, model, consts, config)?;

    let mut next = state.clone();
    next.add_scaled(&k1, dt / 6.0);
    next.add_scaled(&k2, dt / 3.0);
    next.add_scaled(&k3, dt / 3.0);
    next.add_scaled(&k4, dt / 6.0);
    if next.max_abs() > OVERFLOW_LIMIT {
        return Err(Error::Overflow { t: next.t, limit: OVERFLOW_LIMIT });
    }
    Ok(next)
}

/// Propagate one trajectory from `x_init` with classic fixed-step RK4,
/// snapshotting every `output_stride` steps (the initial and final states are
/// always recorded).
///
/// A diverged trajectory is frozen at its last valid state rather than
/// aborted; the freeze time is recorded on the result.
pub fn integrate_trajectory(
    x_init: f64,
    spec: &WavepacketSpec,
    model: &PotentialModel,
    consts: &PhysicalConstants,
    config: &HierarchyConfig,
    output_stride: usize,
) -> Result<TrajectoryRecord> {
    let (c, s) = spec.initial_cumulants(x_init, config.n_order)?;
    let state = TrajectoryState { t: 0.0, x: x_init, c, s, ln_jacobian: 0.0 };
    integrate_from_state(state, model, consts, config, output_stride)
}

/// Same stepping as [`integrate_trajectory`] but from an explicit initial
/// state (used when the packet is premultiplied by an operator amplitude).
pub fn integrate_from_state(
    mut state: TrajectoryState,
    model: &PotentialModel,
    consts: &PhysicalConstants,
    config: &HierarchyConfig,
    output_stride: usize,
) -> Result<TrajectoryRecord> {
    let stride = output_stride.max(1);
    let n_steps = (config.t_final / config.dt).round() as usize;

    let mut states = Vec::with_capacity(n_steps / stride + 2);
    states.push(state.clone());
    let mut frozen_at = None;
    for step in 1..=n_steps {
        if frozen_at.is_none() {
            match rk4_step(&state, model, consts, config) {
                Ok(next) => state = next,
                Err(Error::Overflow { .. }) => frozen_at = Some(state.t),
                Err(e) => return Err(e),
            }
        }
        // keep the clock running for frozen trajectories
        state.t = step as f64 * config.dt;
        if step % stride == 0 || step == n_steps {
            states.push(state.clone());
        }
    }
    Ok(TrajectoryRecord { states, frozen_at })
}

/// Q = -ħ²(C² + (C¹)²)/2m evaluated from the state's derivative stack.
pub fn quantum_potential(state: &TrajectoryState, consts: &PhysicalConstants) -> f64 {
    let c1 = state.c_at(1);
    -consts.hbar * consts.hbar / (2.0 * consts.mass) * (state.c_at(2) + c1 * c1)
}

/// Continuity demands lnJ(t) = -2(C⁰(t) - C⁰(0)); returns the worst
/// violation over the record. The two sides are integrated independently, so
/// this is a genuine consistency check on the run.
pub fn jacobian_consistency(record: &TrajectoryRecord) -> f64 {
    let c0_init = record.states[0].c[0];
    record
        .states
        .iter()
        .map(|s| (s.ln_jacobian + 2.0 * (s.c[0] - c0_init)).abs())
        .fold(0.0f64, f64::max)
}

/// Scan an ensemble for trajectory crossings: an inversion in the sort order
/// of positions at any shared snapshot time. Returns the first time an
/// inversion appears and the total count of inverted adjacent pairs.
pub fn detect_crossings(records: &[TrajectoryRecord]) -> Result<(Option<f64>, usize)> {
    let first = &records[0];
    for rec in &records[1..] {
        if rec.states.len() != first.states.len()
            || rec
                .states
                .iter()
                .zip(&first.states)
                .any(|(a, b)| (a.t - b.t).abs() > 1e-12)
        {
            return Err(Error::MismatchedTimeGrids);
        }
    }
    for pair in records.windows(2) {
        let (a, b) = (pair[0].states[0].x, pair[1].states[0].x);
        if b <= a {
            return Err(Error::DegenerateInitialPoints { x: b });
        }
    }
    let mut first_crossing = None;
    let mut count = 0;
    for k in 0..first.states.len() {
        let mut inverted_here = false;
        for pair in records.windows(2) {
            if pair[1].states[k].x <= pair[0].states[k].x {
                count += 1;
                inverted_here = true;
            }
        }
        if inverted_here && first_crossing.is_none() {
            first_crossing = Some(first.states[k].t);
        }
    }
    Ok((first_crossing, count))
}

/// CSV with columns t, x, lnJ, C0..Cn, S0..Sn.
pub fn write_record_csv<W: std::io::Write>(record: &TrajectoryRecord, out: &mut W) -> Result<()> {
    let n_top = record.states[0].c.len() - 1;
    let mut header = String::from("t,x,lnJ");
    for n in 0..=n_top {
        header.push_str(&format!(",C{n}"));
    }
    for n in 0..=n_top {
        header.push_str(&format!(",S{n}"));
    }
    writeln!(out, "{header}")?;
    for st in &record.states {
        let mut line = format!("{},{},{}", st.t, st.x, st.ln_jacobian);
        for v in st.c.iter().chain(st.s.iter()) {
            line.push_str(&format!(",{v}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
