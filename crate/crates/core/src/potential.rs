//! Nonlinear potentials entering the bulk term of every energy family.
//!
//! Two shipped kinds: the quartic double well `(1 - z^2)^2` (phase
//! transitions) and the truncated quadratic `min{z^2, 1}` (free
//! discontinuities). A user polynomial covers everything else; it goes
//! through the same finite scan in [`Potential::validate`], which is a
//! sampling check and not a proof of the well hypotheses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the validation scan.
pub const SCAN_LIMIT: f64 = 10.0;
/// Step of the validation scan.
pub const SCAN_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Potential {
    /// `scale * (1 - z^2)^2`.
    QuarticDoubleWell { scale: f64 },
    /// `scale * min{z^2, 1}`.
    TruncatedQuadratic { scale: f64 },
    /// `sum_i coeffs[i] * z^i`.
    Polynomial { coeffs: Vec<f64> },
}

impl Default for Potential {
    fn default() -> Self {
        Potential::quartic()
    }
}

impl Potential {
    pub fn quartic() -> Self {
        Potential::QuarticDoubleWell { scale: 1.0 }
    }

    pub fn truncated_quadratic() -> Self {
        Potential::TruncatedQuadratic { scale: 1.0 }
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Potential::Polynomial { coeffs }
    }

    /// Returns a copy multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            Potential::QuarticDoubleWell { scale } => Potential::QuarticDoubleWell {
                scale: scale * factor,
            },
            Potential::TruncatedQuadratic { scale } => Potential::TruncatedQuadratic {
                scale: scale * factor,
            },
            Potential::Polynomial { coeffs } => Potential::Polynomial {
                coeffs: coeffs.iter().map(|c| c * factor).collect(),
            },
        }
    }

    /// Name used in configs and tables.
    pub fn name(&self) -> &'static str {
        match self {
            Potential::QuarticDoubleWell { .. } => "quartic",
            Potential::TruncatedQuadratic { .. } => "truncated-quadratic",
            Potential::Polynomial { .. } => "polynomial",
        }
    }

    /// True for kinds that are meant to have wells at `±1`.
    pub fn is_double_well_kind(&self) -> bool {
        !matches!(self, Potential::TruncatedQuadratic { .. })
    }

    /// `W(z)`, rejecting non-finite input.
    pub fn eval(&self, z: f64) -> Result<f64> {
        check_finite(z)?;
        Ok(self.value(z))
    }

    /// `W'(z)`, rejecting non-finite input.
    pub fn eval_derivative(&self, z: f64) -> Result<f64> {
        check_finite(z)?;
        Ok(self.slope(z))
    }

    /// Unchecked `W(z)` for inner loops.
    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        match self {
            Potential::QuarticDoubleWell { scale } => {
                let t = 1.0 - z * z;
                scale * t * t
            }
            Potential::TruncatedQuadratic { scale } => scale * (z * z).min(1.0),
            Potential::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c),
        }
    }

    /// Unchecked `W'(z)`. The truncated quadratic uses 0 at the kink `|z| = 1`.
    #[inline]
    pub fn slope(&self, z: f64) -> f64 {
        match self {
            Potential::QuarticDoubleWell { scale } => -4.0 * scale * z * (1.0 - z * z),
            Potential::TruncatedQuadratic { scale } => {
                if z.abs() < 1.0 {
                    2.0 * scale * z
                } else {
                    0.0
                }
            }
            Potential::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, c)| acc * z + i as f64 * c),
        }
    }

    /// `(W''(-1), W''(1))`.
    pub fn well_curvature(&self) -> Result<(f64, f64)> {
        match self {
            Potential::QuarticDoubleWell { scale } => Ok((8.0 * scale, 8.0 * scale)),
            Potential::TruncatedQuadratic { .. } => Err(Error::Unsupported(
                "truncated quadratic has its well at 0, not at ±1".into(),
            )),
            Potential::Polynomial { coeffs } => {
                let second = |z: f64| {
                    coeffs
                        .iter()
                        .enumerate()
                        .skip(2)
                        .map(|(i, c)| (i * (i - 1)) as f64 * c * z.powi(i as i32 - 2))
                        .sum::<f64>()
                };
                Ok((second(-1.0), second(1.0)))
            }
        }
    }

    /// Scans `[-SCAN_LIMIT, SCAN_LIMIT]` and reports each well hypothesis.
    pub fn validate(&self) -> ValidationReport {
        let n = (2.0 * SCAN_LIMIT / SCAN_STEP).round() as usize;
        let scan: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let z = -SCAN_LIMIT + i as f64 * SCAN_STEP;
                (z, self.value(z))
            })
            .collect();

        let mut checks = Vec::with_capacity(5);

        let (z_min, w_min) = scan
            .iter()
            .copied()
            .fold((f64::NAN, f64::INFINITY), |best, p| if p.1 < best.1 { p } else { best });
        checks.push(HypothesisCheck {
            name: "nonnegative".into(),
            passed: w_min >= 0.0,
            witness: format!("min W = {w_min:e} at z = {z_min}"),
        });

        let w_left = self.value(-1.0);
        let w_right = self.value(1.0);
        checks.push(HypothesisCheck {
            name: "wells at ±1".into(),
            passed: w_left.abs() <= 1e-12 && w_right.abs() <= 1e-12,
            witness: format!("W(-1) = {w_left:e}, W(1) = {w_right:e}"),
        });

        let off_well = scan
            .iter()
            .copied()
            .filter(|(z, _)| (z.abs() - 1.0).abs() > 1e-9)
            .fold((f64::NAN, f64::INFINITY), |best, p| if p.1 < best.1 { p } else { best });
        checks.push(HypothesisCheck {
            name: "zero set is {-1, 1}".into(),
            passed: off_well.1 > 0.0,
            witness: format!("min W off the wells = {:e} at z = {}", off_well.1, off_well.0),
        });

        let d = SCAN_STEP;
        let curv = |z: f64| (self.value(z + d) - 2.0 * self.value(z) + self.value(z - d)) / (d * d);
        let (c_left, c_right) = (curv(-1.0), curv(1.0));
        checks.push(HypothesisCheck {
            name: "positive curvature at wells".into(),
            passed: c_left > 0.0 && c_right > 0.0,
            witness: format!("second difference quotients {c_left:.6}, {c_right:.6}"),
        });

        let far = scan
            .iter()
            .copied()
            .filter(|(z, _)| z.abs() >= 2.0)
            .fold((f64::NAN, f64::INFINITY), |best, p| if p.1 < best.1 { p } else { best });
        checks.push(HypothesisCheck {
            name: "positive at infinity".into(),
            passed: far.1 > 0.0,
            witness: format!("min W over 2 <= |z| <= {SCAN_LIMIT} = {:e} at z = {}", far.1, far.0),
        });

        let mut notes = Vec::new();
        if !self.is_double_well_kind() {
            notes.push("free-discontinuity potential: well at 0, not a double well".to_string());
        }
        if matches!(self, Potential::Polynomial { .. }) {
            notes.push("user-supplied potential: finite scan only, not a proof".to_string());
        }

        ValidationReport {
            potential: self.name().to_string(),
            checks,
            notes,
        }
    }
}

fn check_finite(z: f64) -> Result<()> {
    if z.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("potential argument {z} is not finite")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    pub witness: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub potential: String,
    pub checks: Vec<HypothesisCheck>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn nonnegative(&self) -> bool {
        self.check("nonnegative").is_some_and(|c| c.passed)
    }

    /// All hypotheses hold, so the potential is an admissible double well.
    pub fn is_double_well(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quartic_values() {
        let w = Potential::quartic();
        assert_eq!(w.eval(0.0).unwrap(), 1.0);
        assert_eq!(w.eval(1.0).unwrap(), 0.0);
        assert_eq!(w.eval(-1.0).unwrap(), 0.0);
        assert_eq!(w.eval_derivative(0.0).unwrap(), 0.0);
        assert_eq!(w.eval_derivative(1.0).unwrap(), 0.0);
    }

    #[test]
    fn truncated_values() {
        let w = Potential::truncated_quadratic();
        assert_eq!(w.eval(2.0).unwrap(), 1.0);
        assert_eq!(w.eval_derivative(0.5).unwrap(), 1.0);
        assert_eq!(w.eval_derivative(1.0).unwrap(), 0.0);
        assert_eq!(w.eval_derivative(-1.0).unwrap(), 0.0);
        assert_eq!(w.eval_derivative(3.0).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_is_domain_error() {
        let w = Potential::quartic();
        assert!(matches!(w.eval(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(w.eval_derivative(f64::INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn curvature() {
        assert_eq!(Potential::quartic().well_curvature().unwrap(), (8.0, 8.0));
        assert_eq!(Potential::quartic().scaled(2.0).well_curvature().unwrap(), (16.0, 16.0));
        assert!(matches!(
            Potential::truncated_quadratic().well_curvature(),
            Err(Error::Unsupported(_))
        ));
        let (l, r) = Potential::polynomial(vec![1.0, 0.0, -2.0, 0.0, 1.0])
            .well_curvature()
            .unwrap();
        assert!((l - 8.0).abs() < 1e-12 && (r - 8.0).abs() < 1e-12);
    }

    #[test]
    fn validation_reports() {
        assert!(Potential::quartic().validate().is_double_well());

        let shifted = Potential::polynomial(vec![0.9, 0.0, -2.0, 0.0, 1.0]).validate();
        assert!(!shifted.nonnegative());

        let trunc = Potential::truncated_quadratic().validate();
        assert!(trunc.nonnegative());
        assert!(!trunc.check("wells at ±1").unwrap().passed);
        assert!(!trunc.is_double_well());
        assert!(trunc.notes.iter().any(|n| n.contains("free-discontinuity")));
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let step = 1e-6;
        for w in [
            Potential::quartic(),
            Potential::truncated_quadratic(),
            Potential::polynomial(vec![0.3, -1.0, 0.5, 2.0]),
        ] {
            let mut tested = 0;
            while tested < 100 {
                let z: f64 = rng.gen_range(-3.0..3.0);
                if matches!(w, Potential::TruncatedQuadratic { .. }) && (z.abs() - 1.0).abs() < 1e-3 {
                    continue;
                }
                let fd = (w.value(z + step) - w.value(z - step)) / (2.0 * step);
                let exact = w.slope(z);
                let rel = (fd - exact).abs() / exact.abs().max(1.0);
                assert!(rel < 1e-5, "{} at {z}: fd {fd} vs {exact}", w.name());
                tested += 1;
            }
        }
    }

    #[test]
    fn quartic_symmetry_is_exact() {
        let w = Potential::quartic();
        for i in 0..1000 {
            let z = -5.0 + i as f64 * 0.01;
            assert_eq!(w.value(z), w.value(-z));
        }
    }
}
