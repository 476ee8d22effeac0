//! Physical constants, potential models with analytic derivatives of every
//! order, the Gaussian initial wavepacket, and multiplicative operators.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// ħ and the particle mass, in atomic units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

/// One-dimensional potentials with closed-form spatial derivatives at every
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialModel {
    /// k x²/2 + offset
    Harmonic { k: f64, offset: f64 },
    /// k x²/2 + a4 x⁴ + offset
    QuarticPerturbed { k: f64, a4: f64, offset: f64 },
    /// -depth · exp(-x²/(2 width²))
    InvertedGaussian { depth: f64, width: f64 },
    /// Σ cᵢ xⁱ
    Polynomial { coefficients: Vec<f64> },
}

impl PotentialModel {
    /// dⁿV/dxⁿ at `x`. Total over all n ≥ 0; high orders of polynomial
    /// variants vanish identically.
    pub fn value_deriv(&self, x: f64, n: usize) -> f64 {
        match self {
            Self::Harmonic { k, offset } => {
                polynomial_deriv(&[*offset, 0.0, k / 2.0], x, n)
            }
            Self::QuarticPerturbed { k, a4, offset } => {
                polynomial_deriv(&[*offset, 0.0, k / 2.0, 0.0, *a4], x, n)
            }
            Self::InvertedGaussian { depth, width } => {
                // dⁿ/duⁿ e^{-u²/2} = (-1)ⁿ Heₙ(u) e^{-u²/2}, u = x/width
                let u = x / width;
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                -depth * sign * hermite_recurrence(n, u) * (-0.5 * u * u).exp()
                    / width.powi(n as i32)
            }
            Self::Polynomial { coefficients } => polynomial_deriv(coefficients, x, n),
        }
    }
}

/// dⁿ/dxⁿ of Σ cᵢ xⁱ evaluated by factorial shift of the coefficient list.
pub fn polynomial_deriv(coefficients: &[f64], x: f64, n: usize) -> f64 {
    let mut acc = 0.0;
    for (i, &c) in coefficients.iter().enumerate().skip(n) {
        // falling factorial i·(i-1)···(i-n+1)
        let mut f = 1.0;
        for j in 0..n {
            f *= (i - j) as f64;
        }
        acc += c * f * x.powi((i - n) as i32);
    }
    acc
}

/// Probabilists' Hermite polynomial Heₙ(x) via the three-term recurrence
/// He₀ = 1, He₁ = x, Heₙ₊₁ = x Heₙ - n Heₙ₋₁.
pub fn hermite_recurrence(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = x;
    for k in 1..n {
        let next = x * cur - (k as f64) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Which literal form of the initial log-amplitude to use. `Normalized` is
/// the default and yields a unit-norm packet whose projection weights on the
/// matched harmonic well are Poissonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeConvention {
    #[default]
    Normalized,
    /// Carry the full βd² exponent instead of βd²/2, giving a narrower
    /// (squeezed) packet for the same β.
    FullBeta,
}

/// Gaussian initial wavepacket ψ(x) = exp(C(x) + iS(x)/ħ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavepacketSpec {
    /// Inverse-length² width parameter.
    pub beta: f64,
    /// Packet center.
    pub x0: f64,
    /// Uniform initial phase; all spatial derivatives of S vanish.
    pub phase0: f64,
    pub convention: AmplitudeConvention,
}

impl WavepacketSpec {
    pub fn new(beta: f64, x0: f64) -> Self {
        Self { beta, x0, phase0: 0.0, convention: AmplitudeConvention::Normalized }
    }

    /// Log-amplitude C(x) under the active convention.
    pub fn log_amplitude(&self, x: f64) -> f64 {
        let d = x - self.x0;
        let quad = match self.convention {
            AmplitudeConvention::Normalized => 0.5 * self.beta * d * d,
            AmplitudeConvention::FullBeta => self.beta * d * d,
        };
        0.25 * (self.beta / std::f64::consts::PI).ln() - quad
    }

    /// Initial C- and S-derivative stacks of length `n_order + 1`.
    ///
    /// C⁰ is the log-amplitude itself, C¹ and C² its first two derivatives,
    /// everything above is zero; S carries only the uniform phase.
    pub fn initial_cumulants(&self, x: f64, n_order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if n_order < 2 {
            return Err(Error::OrderTooSmall { n_order });
        }
        let scale = match self.convention {
            AmplitudeConvention::Normalized => 1.0,
            AmplitudeConvention::FullBeta => 2.0,
        };
        let mut c = vec![0.0; n_order + 1];
        c[0] = self.log_amplitude(x);
        c[1] = -scale * self.beta * (x - self.x0);
        c[2] = -scale * self.beta;
        let mut s = vec![0.0; n_order + 1];
        s[0] = self.phase0;
        Ok((c, s))
    }

    /// ψ(x) = exp(C(x) + iS(x)/ħ) with ħ = 1 for the uniform phase.
    pub fn wavefunction_value(&self, x: f64) -> Complex64 {
        (Complex64::new(self.log_amplitude(x), self.phase0)).exp()
    }

    /// Probability density e^{2C(x)}.
    pub fn density(&self, x: f64) -> f64 {
        (2.0 * self.log_amplitude(x)).exp()
    }
}

/// Multiplicative (diagonal) operators a(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    Identity,
    /// a(x) = exp(-gamma (x - x1)²)
    GaussianWindow { gamma: f64, x1: f64 },
    /// a(x) = Σ cᵢ xⁱ
    PolynomialMultiplier { coefficients: Vec<f64> },
}

const NODE_TOLERANCE: f64 = 1e-12;

impl OperatorSpec {
    pub fn amplitude(&self, x: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::GaussianWindow { gamma, x1 } => (-gamma * (x - x1) * (x - x1)).exp(),
            Self::PolynomialMultiplier { coefficients } => {
                polynomial_deriv(coefficients, x, 0)
            }
        }
    }

    /// dⁿ(ln a)/dxⁿ at `x`. Fails when a(x) sits on a node.
    pub fn log_deriv(&self, x: f64, n: usize) -> Result<f64> {
        match self {
            Self::Identity => Ok(0.0),
            Self::GaussianWindow { gamma, x1 } => {
                let d = x - x1;
                Ok(match n {
                    0 => -gamma * d * d,
                    1 => -2.0 * gamma * d,
                    2 => -2.0 * gamma,
                    _ => 0.0,
                })
            }
            Self::PolynomialMultiplier { coefficients } => {
                let p0 = polynomial_deriv(coefficients, x, 0);
                if p0.abs() < NODE_TOLERANCE {
                    return Err(Error::EvaluationAtNode { x });
                }
                if n == 0 {
                    return Ok(p0.ln());
                }
                // Invert the Leibniz expansion of p·(ln p)' order by order:
                // p^(k+1) = Σ_{j≤k} C(k,j) p^(k-j) L^(j+1).
                let mut log_derivs = vec![0.0; n];
                log_derivs[0] = polynomial_deriv(coefficients, x, 1) / p0;
                for k in 1..n {
                    let mut acc = polynomial_deriv(coefficients, x, k + 1);
                    for j in 0..k {
                        acc -= binomial(k, j)
                            * polynomial_deriv(coefficients, x, k - j)
                            * log_derivs[j];
                    }
                    log_derivs[k] = acc / p0;
                }
                Ok(log_derivs[n - 1])
            }
        }
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut acc = 1.0;
    for j in 0..k.min(n - k) {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_potentials() -> [PotentialModel; 3] {
        [
            PotentialModel::Harmonic { k: 1.0, offset: -1.0 },
            PotentialModel::QuarticPerturbed { k: 1.0, a4: 0.01, offset: -1.0 },
            PotentialModel::InvertedGaussian { depth: 1.0, width: 1.0 },
        ]
    }

    #[test]
    fn harmonic_values_and_derivatives() {
        let v = PotentialModel::Harmonic { k: 1.0, offset: -1.0 };
        assert_eq!(v.value_deriv(0.0, 0), -1.0);
        assert_eq!(v.value_deriv(3.7, 2), 1.0);
        assert_eq!(v.value_deriv(3.7, 3), 0.0);
    }

    #[test]
    fn quartic_value() {
        let v = PotentialModel::QuarticPerturbed { k: 1.0, a4: 0.01, offset: -1.0 };
        assert_relative_eq!(v.value_deriv(1.0, 0), -0.49, max_relative = 1e-12);
    }

    #[test]
    fn gaussian_second_derivative_matches_finite_difference() {
        let v = PotentialModel::InvertedGaussian { depth: 1.0, width: 1.0 };
        let h = 1e-4;
        let fd = (v.value_deriv(h, 0) - 2.0 * v.value_deriv(0.0, 0) + v.value_deriv(-h, 0))
            / (h * h);
        assert_relative_eq!(v.value_deriv(0.0, 2), 1.0, epsilon = 1e-12);
        assert_relative_eq!(v.value_deriv(0.0, 2), fd, epsilon = 1e-6);
    }

    /// n-fold central difference of the bare potential, O(h²).
    fn nfold_central(model: &PotentialModel, x: f64, n: usize, h: f64) -> f64 {
        let stencils: [&[(f64, f64)]; 4] = [
            &[(1.0, 0.5), (-1.0, -0.5)],
            &[(1.0, 1.0), (0.0, -2.0), (-1.0, 1.0)],
            &[(2.0, 0.5), (1.0, -1.0), (-1.0, 1.0), (-2.0, -0.5)],
            &[(2.0, 1.0), (1.0, -4.0), (0.0, 6.0), (-1.0, -4.0), (-2.0, 1.0)],
        ];
        stencils[n - 1]
            .iter()
            .map(|&(k, c)| c * model.value_deriv(x + k * h, 0))
            .sum::<f64>()
            / h.powi(n as i32)
    }

    #[test]
    fn derivatives_agree_with_central_differences() {
        // Two Richardson levels push the O(h²) stencil error below 1e-5.
        let h = 0.2;
        for model in reference_potentials() {
            for n in 1..=4usize {
                for i in -10..=10 {
                    let x = i as f64 * 0.5;
                    let exact = model.value_deriv(x, n);
                    let d0 = nfold_central(&model, x, n, h);
                    let d1 = nfold_central(&model, x, n, h / 2.0);
                    let d2 = nfold_central(&model, x, n, h / 4.0);
                    let r0 = (4.0 * d1 - d0) / 3.0;
                    let r1 = (4.0 * d2 - d1) / 3.0;
                    let fd = (16.0 * r1 - r0) / 15.0;
                    let scale = exact.abs().max(1.0);
                    assert!(
                        (exact - fd).abs() / scale < 1e-5,
                        "{model:?} n={n} x={x}: exact {exact} vs fd {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn curvature_at_minimum_is_one_for_all_reference_potentials() {
        for model in reference_potentials() {
            assert_relative_eq!(model.value_deriv(0.0, 2), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hermite_base_cases_and_cubic() {
        assert_eq!(hermite_recurrence(0, -3.2), 1.0);
        assert_eq!(hermite_recurrence(1, 2.5), 2.5);
        // He₃(x) = x³ - 3x
        assert_eq!(hermite_recurrence(3, 2.0), 2.0);
    }

    #[test]
    fn hermite_satisfies_its_differential_equation() {
        // Heₙ″ - x Heₙ′ + n Heₙ = 0, derivatives via Heₙ′ = n Heₙ₋₁.
        for n in 2..=12usize {
            for i in 0..20 {
                let x = -3.0 + 6.0 * i as f64 / 19.0;
                let he = hermite_recurrence(n, x);
                let d1 = n as f64 * hermite_recurrence(n - 1, x);
                let d2 = (n * (n - 1)) as f64 * hermite_recurrence(n - 2, x);
                assert!((d2 - x * d1 + n as f64 * he).abs() < 1e-9, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn initial_cumulants_at_center() {
        let spec = WavepacketSpec::new(1.0, 1.0);
        let (c, s) = spec.initial_cumulants(1.0, 4).unwrap();
        assert_relative_eq!(c[0], 0.25 * (1.0 / std::f64::consts::PI).ln(), epsilon = 1e-12);
        assert_relative_eq!(c[0], -0.286182, epsilon = 1e-6);
        assert_eq!(c[1], 0.0);
        assert_eq!(c[2], -1.0);
        assert_eq!(c[3], 0.0);
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn initial_cumulants_reject_low_order() {
        let spec = WavepacketSpec::new(1.0, 1.0);
        assert!(matches!(
            spec.initial_cumulants(0.0, 1),
            Err(Error::OrderTooSmall { n_order: 1 })
        ));
    }

    #[test]
    fn wavepacket_normalizes_and_peaks_correctly() {
        let spec = WavepacketSpec::new(1.0, 1.0);
        // trapezoid over [-9, 11]
        let n = 20_000;
        let (a, b) = (-9.0, 11.0);
        let dx = (b - a) / n as f64;
        let norm: f64 = (0..=n)
            .map(|i| {
                let x = a + i as f64 * dx;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * spec.wavefunction_value(x).norm_sqr()
            })
            .sum::<f64>()
            * dx;
        assert_relative_eq!(norm, 1.0, epsilon = 1e-10);
        assert_relative_eq!(
            spec.wavefunction_value(1.0).norm_sqr(),
            (1.0 / std::f64::consts::PI).sqrt(),
            epsilon = 1e-12
        );
        assert_eq!(spec.wavefunction_value(0.3).im, 0.0);
    }

    #[test]
    fn cumulants_reproduce_wavefunction_magnitude() {
        let spec = WavepacketSpec::new(1.0, 1.0);
        for i in 0..50 {
            let x = -3.0 + 8.0 * i as f64 / 49.0;
            let (c, _) = spec.initial_cumulants(x, 2).unwrap();
            assert!((c[0].exp() - spec.wavefunction_value(x).norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn full_beta_convention_squeezes_the_packet() {
        let mut spec = WavepacketSpec::new(1.0, 1.0);
        spec.convention = AmplitudeConvention::FullBeta;
        let (c, _) = spec.initial_cumulants(0.0, 2).unwrap();
        assert_eq!(c[2], -2.0);
        assert_eq!(c[1], 2.0);
    }

    #[test]
    fn operator_log_derivs() {
        assert_eq!(OperatorSpec::Identity.log_deriv(1.7, 5).unwrap(), 0.0);
        let win = OperatorSpec::GaussianWindow { gamma: 0.5, x1: 0.0 };
        assert_relative_eq!(win.log_deriv(2.0, 1).unwrap(), -2.0, epsilon = 1e-12);
        assert_relative_eq!(win.log_deriv(-4.1, 2).unwrap(), -1.0, epsilon = 1e-12);
        assert_eq!(win.log_deriv(3.0, 3).unwrap(), 0.0);
    }

    #[test]
    fn polynomial_log_derivs_match_quadratic_closed_form() {
        // a(x) = (1 + x)² has ln a = 2 ln(1+x), dⁿ: 2·(-1)^{n-1}(n-1)!/(1+x)ⁿ
        let op = OperatorSpec::PolynomialMultiplier { coefficients: vec![1.0, 2.0, 1.0] };
        let x = 0.5f64;
        for n in 1..=4usize {
            let mut fact = 1.0;
            for j in 1..n {
                fact *= j as f64;
            }
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            let exact = 2.0 * sign * fact / (1.0 + x).powi(n as i32);
            assert_relative_eq!(op.log_deriv(x, n).unwrap(), exact, epsilon = 1e-9);
        }
    }

    #[test]
    fn polynomial_log_deriv_rejects_node() {
        let op = OperatorSpec::PolynomialMultiplier { coefficients: vec![0.0, 1.0] };
        assert!(matches!(op.log_deriv(0.0, 1), Err(Error::EvaluationAtNode { .. })));
    }
}
