//! Trajectory-free quantum mechanics on a fixed grid: split-operator
//! propagation for exact correlation functions and sinc-DVR diagonalization
//! for bound-state energies. Everything the trajectory side produces is
//! checked against this module.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::ivr::CorrelationSeries;
use crate::model::{PhysicalConstants, PotentialModel, WavepacketSpec};
use crate::{Error, Result};

const EDGE_DENSITY_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    /// Power of two, at least 64.
    pub n_grid: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { x_min: -10.0, x_max: 10.0, n_grid: 512 }
    }
}

impl GridSpec {
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_grid as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_grid).map(|i| self.x_min + i as f64 * dx).collect()
    }
}

/// Bound-state energies (ascending) and the matching grid eigenfunctions,
/// orthonormal under the Δx-weighted dot product.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub energies: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// Symmetric-split propagation of the spec's Gaussian packet, accumulating
/// the overlap with the initial state every `stride` steps.
pub fn split_operator_propagate(
    model: &PotentialModel,
    spec: &WavepacketSpec,
    grid: &GridSpec,
    consts: &PhysicalConstants,
    dt: f64,
    t_final: f64,
    stride: usize,
) -> Result<CorrelationSeries> {
    let psi0: Vec<Complex64> = grid.points().iter().map(|&x| spec.wavefunction_value(x)).collect();
    split_operator_from_state(&psi0, model, grid, consts, dt, t_final, stride)
}

/// Split-operator propagation from an arbitrary grid state; the correlation
/// is the overlap with the initial state itself.
pub fn split_operator_from_state(
    psi0: &[Complex64],
    model: &PotentialModel,
    grid: &GridSpec,
    consts: &PhysicalConstants,
    dt: f64,
    t_final: f64,
    stride: usize,
) -> Result<CorrelationSeries> {
    let dx = grid.dx();
    let (times, snapshots) =
        split_operator_snapshots(psi0, model, grid, consts, dt, t_final, stride)?;
    let values = snapshots
        .iter()
        .map(|psi| psi0.iter().zip(psi).map(|(a, b)| a.conj() * b).sum::<Complex64>() * dx)
        .collect();
    Ok(CorrelationSeries { times, values })
}

/// Split-operator propagation recording the full wavefunction every `stride`
/// steps (snapshot 0 is the initial state).
pub fn split_operator_snapshots(
    psi0: &[Complex64],
    model: &PotentialModel,
    grid: &GridSpec,
    consts: &PhysicalConstants,
    dt: f64,
    t_final: f64,
    stride: usize,
) -> Result<(Vec<f64>, Vec<Vec<Complex64>>)> {
    let n = grid.n_grid;
    let dx = grid.dx();
    check_edges(psi0)?;

    let points = grid.points();
    let half_potential: Vec<Complex64> = points
        .iter()
        .map(|&x| {
            Complex64::new(0.0, -model.value_deriv(x, 0) * dt / (2.0 * consts.hbar)).exp()
        })
        .collect();
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * dx);
    let kinetic: Vec<Complex64> = (0..n)
        .map(|i| {
            let k = if i < n / 2 { i as f64 } else { i as f64 - n as f64 } * dk;
            Complex64::new(0.0, -consts.hbar * k * k * dt / (2.0 * consts.mass)).exp()
        })
        .collect();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let fft_norm = 1.0 / n as f64;

    let stride = stride.max(1);
    let n_steps = (t_final / dt).round() as usize;
    let mut psi = psi0.to_vec();

    let mut times = vec![0.0];
    let mut snapshots = vec![psi.clone()];
    for step in 1..=n_steps {
        for (p, u) in psi.iter_mut().zip(&half_potential) {
            *p *= u;
        }
        fft.process(&mut psi);
        for (p, u) in psi.iter_mut().zip(&kinetic) {
            *p *= u;
        }
        ifft.process(&mut psi);
        for p in psi.iter_mut() {
            *p *= fft_norm;
        }
        for (p, u) in psi.iter_mut().zip(&half_potential) {
            *p *= u;
        }
        check_edges(&psi)?;
        if step % stride == 0 || step == n_steps {
            times.push(step as f64 * dt);
            snapshots.push(psi.clone());
        }
    }
    Ok((times, snapshots))
}

fn check_edges(psi: &[Complex64]) -> Result<()> {
    let density = psi[0].norm_sqr().max(psi[psi.len() - 1].norm_sqr());
    if density > EDGE_DENSITY_LIMIT {
        return Err(Error::EdgeLeakage { density, limit: EDGE_DENSITY_LIMIT });
    }
    Ok(())
}

/// Diagonalize the sinc-DVR Hamiltonian and return the lowest `n_states`
/// levels. Kinetic matrix: π²/3 on the diagonal, (-1)^{i-j}·2/(i-j)² off it,
/// all times ħ²/(2mΔx²); the potential sits on the diagonal.
pub fn dvr_eigensolve(
    model: &PotentialModel,
    grid: &GridSpec,
    consts: &PhysicalConstants,
    n_states: usize,
) -> Result<EigenResult> {
    let n = grid.n_grid;
    let dx = grid.dx();
    let points = grid.points();
    let kinetic_scale = consts.hbar * consts.hbar / (2.0 * consts.mass * dx * dx);
    let mut h = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = kinetic_scale * std::f64::consts::PI.powi(2) / 3.0
            + model.value_deriv(points[i], 0);
        for j in 0..i {
            let d = (i - j) as f64;
            let sign = if (i - j) % 2 == 0 { 1.0 } else { -1.0 };
            let t = kinetic_scale * sign * 2.0 / (d * d);
            h[(i, j)] = t;
            h[(j, i)] = t;
        }
    }
    let eig = h.try_symmetric_eigen(1e-13, 0).ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let n_states = n_states.min(n);
    let energies: Vec<f64> = order[..n_states].iter().map(|&j| eig.eigenvalues[j]).collect();
    // rescale so states are orthonormal under the Δx-weighted dot product
    let states: Vec<Vec<f64>> = order[..n_states]
        .iter()
        .map(|&j| eig.eigenvectors.column(j).iter().map(|v| v / dx.sqrt()).collect())
        .collect();
    Ok(EigenResult { energies, states })
}

/// Squared overlaps |⟨n|ψ₀⟩|² of the packet with each eigenstate.
pub fn projection_coefficients(
    spec: &WavepacketSpec,
    eig: &EigenResult,
    grid: &GridSpec,
) -> Vec<f64> {
    let dx = grid.dx();
    let points = grid.points();
    eig.states
        .iter()
        .map(|state| {
            let overlap: Complex64 = state
                .iter()
                .zip(&points)
                .map(|(&phi, &x)| phi * spec.wavefunction_value(x))
                .sum::<Complex64>()
                * dx;
            overlap.norm_sqr()
        })
        .collect()
}

/// Closed-form overlap for the coherent packet in the unit-frequency well
/// with its -1 energy offset: c(t) = exp(|α|²(e^{-it}-1))·e^{-it/2}·e^{+it}
/// with |α|² = β x₀²/2.
pub fn analytic_harmonic_autocorrelation(t: f64, spec: &WavepacketSpec) -> Complex64 {
    let alpha_sq = 0.5 * spec.beta * spec.x0 * spec.x0;
    let rotation = Complex64::new(0.0, -t).exp();
    (alpha_sq * (rotation - 1.0)).exp() * Complex64::new(0.0, 0.5 * t).exp()
}

pub fn write_eigenvalues_csv<W: std::io::Write>(eig: &EigenResult, out: &mut W) -> Result<()> {
    writeln!(out, "index,energy")?;
    for (i, e) in eig.energies.iter().enumerate() {
        writeln!(out, "{i},{e}")?;
    }
    Ok(())
}
