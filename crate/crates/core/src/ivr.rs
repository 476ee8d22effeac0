//! Initial-point sampling and assembly of correlation functions from
//! trajectory ensembles.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dpm::{integrate_trajectory, HierarchyConfig, TrajectoryRecord};
use crate::model::{OperatorSpec, PhysicalConstants, PotentialModel, WavepacketSpec};
use crate::{Error, Result};

/// Launch points and quadrature weights for an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingScheme {
    #[default]
    Uniform,
    GaussHermite,
}

/// Which weight factor enters the correlation sum. `Jacobian` carries
/// J^{1/2} = e^{lnJ/2}; `InverseDensity` carries e^{-2C⁰(t)} instead. The
/// two disagree in general and the grid solver arbitrates (the Jacobian form
/// is the one that matches it).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationForm {
    #[default]
    Jacobian,
    InverseDensity,
}

/// Complex correlation values on a uniform time grid starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl CorrelationSeries {
    /// Constant time spacing, or an error if the grid is not uniform.
    pub fn uniform_dt(&self) -> Result<f64> {
        if self.times.len() < 2 {
            return Err(Error::NonUniformTimeGrid);
        }
        let dt = self.times[1] - self.times[0];
        for w in self.times.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
                return Err(Error::NonUniformTimeGrid);
            }
        }
        Ok(dt)
    }

    /// Constant spacing plus the length of the uniformly spaced prefix. The
    /// integrator always records the exact final time, which generally falls
    /// off the output stride; that single trailing sample is excluded here.
    /// Any other irregularity is an error.
    pub fn uniform_part(&self) -> Result<(f64, usize)> {
        let n = self.times.len();
        if n < 2 {
            return Err(Error::NonUniformTimeGrid);
        }
        let dt = self.times[1] - self.times[0];
        let tol = 1e-9 * dt.max(1.0);
        for (i, w) in self.times.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > tol {
                if i == n - 2 {
                    return Ok((dt, n - 1));
                }
                return Err(Error::NonUniformTimeGrid);
            }
        }
        Ok((dt, n))
    }

    /// CSV with columns t, re_c, im_c, abs_c.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "t,re_c,im_c,abs_c")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(out, "{},{},{},{}", t, v.re, v.im, v.norm())?;
        }
        Ok(())
    }
}

/// A propagated ensemble: one trajectory record per quadrature point, all on
/// a shared snapshot grid.
#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub grid: QuadratureGrid,
    pub records: Vec<TrajectoryRecord>,
    pub config: HierarchyConfig,
}

impl EnsembleRun {
    pub fn frozen_count(&self) -> usize {
        self.records.iter().filter(|r| r.frozen_at.is_some()).count()
    }
}

/// Choose launch points covering the initial density down to
/// `density_cutoff` of its peak.
///
/// The uniform scheme spaces points evenly with trapezoidal weights; the
/// Gauss-Hermite scheme places the nodes of the quadrature matched to the
/// Gaussian density.
pub fn sample_initial_points(
    spec: &WavepacketSpec,
    n_points: usize,
    scheme: SamplingScheme,
    density_cutoff: f64,
) -> Result<QuadratureGrid> {
    if n_points < 2 {
        return Err(Error::TooFewPoints { n_points });
    }
    if !(density_cutoff > 0.0 && density_cutoff < 1.0) {
        return Err(Error::BadCutoff { cutoff: density_cutoff });
    }
    // ρ(x0 ± L) = cutoff · ρ(x0) for the Gaussian density e^{-g (x-x0)²}
    let g = -2.0 * (spec.log_amplitude(spec.x0 + 1.0) - spec.log_amplitude(spec.x0));
    match scheme {
        SamplingScheme::Uniform => {
            let half_width = (-density_cutoff.ln() / g).sqrt();
            let dx = 2.0 * half_width / (n_points - 1) as f64;
            let points: Vec<f64> = (0..n_points)
                .map(|i| spec.x0 - half_width + i as f64 * dx)
                .collect();
            let weights: Vec<f64> = (0..n_points)
                .map(|i| if i == 0 || i == n_points - 1 { 0.5 * dx } else { dx })
                .collect();
            Ok(QuadratureGrid { points, weights })
        }
        SamplingScheme::GaussHermite => {
            let (nodes, gauss_weights) = gauss_hermite(n_points);
            let scale = g.sqrt();
            let points = nodes.iter().map(|&xi| spec.x0 + xi / scale).collect();
            let weights = nodes
                .iter()
                .zip(&gauss_weights)
                .map(|(&xi, &a)| a * (xi * xi).exp() / scale)
                .collect();
            Ok(QuadratureGrid { points, weights })
        }
    }
}

/// Nodes and weights for ∫ f(ξ) e^{-ξ²} dξ via the Golub-Welsch
/// diagonalization of the Jacobi matrix.
fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = nalgebra::DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let v0 = eig.eigenvectors[(0, j)];
            (eig.eigenvalues[j], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Integrate one trajectory per grid point. Trajectories are independent and
/// run in parallel; results are collected in grid order so the ensemble is
/// deterministic regardless of scheduling.
pub fn propagate_ensemble(
    grid: QuadratureGrid,
    spec: &WavepacketSpec,
    model: &PotentialModel,
    consts: &PhysicalConstants,
    config: &HierarchyConfig,
    output_stride: usize,
) -> Result<EnsembleRun> {
    let records: Vec<TrajectoryRecord> = grid
        .points
        .par_iter()
        .map(|&x| integrate_trajectory(x, spec, model, consts, config, output_stride))
        .collect::<Result<_>>()?;
    Ok(EnsembleRun { grid, records, config: config.clone() })
}

/// Wavefunction overlap c(t) = Σ_j w_j · W_j(t) · e^{iS⁰_j(t)/ħ} ·
/// ψ₀*(x_j(t)) · ψ₀(x_j(0)) assembled over the ensemble, with W the weight
/// factor selected by `form`. Frozen trajectories keep contributing their
/// last valid snapshot.
pub fn autocorrelation(
    run: &EnsembleRun,
    spec: &WavepacketSpec,
    consts: &PhysicalConstants,
    form: CorrelationForm,
) -> Result<CorrelationSeries> {
    check_run(run)?;
    let n_snapshots = run.records[0].states.len();
    let times: Vec<f64> = run.records[0].states.iter().map(|s| s.t).collect();
    let mut values = Vec::with_capacity(n_snapshots);
    for k in 0..n_snapshots {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, rec) in run.records.iter().enumerate() {
            let st = &rec.states[k];
            let weight = match form {
                CorrelationForm::Jacobian => (0.5 * st.ln_jacobian).exp(),
                CorrelationForm::InverseDensity => (-2.0 * st.c[0]).exp(),
            };
            let phase = Complex64::new(0.0, st.s[0] / consts.hbar).exp();
            acc += run.grid.weights[j]
                * weight
                * phase
                * spec.wavefunction_value(st.x).conj()
                * spec.wavefunction_value(rec.states[0].x);
        }
        values.push(acc);
    }
    Ok(CorrelationSeries { times, values })
}

/// Single-time operator correlation ⟨ψ(t)|Â|ψ_A(t)⟩ where the ψ_A ensemble
/// was launched from the cumulants of a(x)·ψ₀.
///
/// ψ(t) is reconstructed as a smooth field by monotone cubic interpolation of
/// (C⁰, S⁰) over the plain ensemble's sorted endpoints; ψ_A at each of its
/// own endpoints is synthesized directly from that trajectory's stacks.
/// Endpoints outside the plain ensemble's hull are refused rather than
/// extrapolated.
pub fn operator_correlation(
    run_a: &EnsembleRun,
    run_plain: &EnsembleRun,
    op: &OperatorSpec,
    consts: &PhysicalConstants,
) -> Result<CorrelationSeries> {
    check_run(run_a)?;
    check_run(run_plain)?;
    if run_a.records[0].states.len() != run_plain.records[0].states.len() {
        return Err(Error::MismatchedTimeGrids);
    }
    let n_snapshots = run_plain.records[0].states.len();
    let times: Vec<f64> = run_plain.records[0].states.iter().map(|s| s.t).collect();
    let mut values = Vec::with_capacity(n_snapshots);
    for k in 0..n_snapshots {
        // field samples (x, C⁰, S⁰) over the plain ensemble, sorted in x
        let mut samples: Vec<(f64, f64, f64)> = run_plain
            .records
            .iter()
            .map(|r| {
                let st = &r.states[k];
                (st.x, st.c[0], st.s[0])
            })
            .collect();
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
        for w in xs.windows(2) {
            if w[1] - w[0] < 1e-12 {
                return Err(Error::DegenerateInitialPoints { x: w[0] });
            }
        }
        let c_field = MonotoneCubic::fit(&xs, &samples.iter().map(|s| s.1).collect::<Vec<_>>());
        let s_field = MonotoneCubic::fit(&xs, &samples.iter().map(|s| s.2).collect::<Vec<_>>());
        let (lo, hi) = (xs[0], *xs.last().unwrap());

        let mut acc = Complex64::new(0.0, 0.0);
        let mut sign = 0.0f64;
        for (j, rec) in run_a.records.iter().enumerate() {
            let st = &rec.states[k];
            let y = st.x;
            if y < lo || y > hi {
                return Err(Error::EndpointOutOfRange { x: y, lo, hi });
            }
            let amp = op.amplitude(y);
            if amp == 0.0 {
                return Err(Error::EvaluationAtNode { x: y });
            }
            if sign == 0.0 {
                sign = amp.signum();
            } else if amp.signum() != sign {
                return Err(Error::NodeCrossing { t: times[k] });
            }
            let psi_conj =
                Complex64::new(c_field.eval(y), -s_field.eval(y) / consts.hbar).exp();
            let psi_a = Complex64::new(st.c[0], st.s[0] / consts.hbar).exp();
            acc += run_a.grid.weights[j] * st.ln_jacobian.exp() * amp * psi_conj * psi_a;
        }
        values.push(acc);
    }
    Ok(CorrelationSeries { times, values })
}

fn check_run(run: &EnsembleRun) -> Result<()> {
    if run.grid.points.len() != run.records.len() {
        return Err(Error::GridRecordMismatch {
            n_grid: run.grid.points.len(),
            n_records: run.records.len(),
        });
    }
    let first = &run.records[0];
    for rec in &run.records[1..] {
        if rec.states.len() != first.states.len() {
            return Err(Error::MismatchedTimeGrids);
        }
    }
    Ok(())
}

/// Monotone piecewise-cubic interpolant (Fritsch-Carlson slope limiting).
struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    fn fit(xs: &[f64], ys: &[f64]) -> Self {
        let n = xs.len();
        let deltas: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = deltas[0];
        slopes[n - 1] = deltas[n - 2];
        for i in 1..n - 1 {
            if deltas[i - 1] * deltas[i] <= 0.0 {
                slopes[i] = 0.0;
            } else {
                // weighted harmonic mean keeps the interpolant monotone
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let w0 = 2.0 * h1 + h0;
                let w1 = h1 + 2.0 * h0;
                slopes[i] = (w0 + w1) / (w0 / deltas[i - 1] + w1 / deltas[i]);
            }
        }
        Self { xs: xs.to_vec(), ys: ys.to_vec(), slopes }
    }

    fn eval(&self, x: f64) -> f64 {
        let i = match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => return self.ys[i],
            Err(0) => 0,
            Err(i) if i >= self.xs.len() => self.xs.len() - 2,
            Err(i) => i - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.ys[i]
            + h10 * h * self.slopes[i]
            + h01 * self.ys[i + 1]
            + h11 * h * self.slopes[i + 1]
    }
}
