//! Region energies, boundary speeds and the Bhattacharyya contrast measure.
//!
//! The region term of a two-phase partition is `-sum log p(y, eta_hat)` over
//! each region, with `eta_hat` re-estimated from the region itself. Moving one
//! pixel from the outer to the inner region changes the total by minus the
//! speed returned here; the level-set engine uses that speed directly.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::expfam::{Estimator, ExpFamily, Family, RegionEstimate};
use crate::grid::{Mask, ScalarField};

/// The evolution law: which region functional drives the contour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpeedLaw {
    /// `-log`-likelihood with ML estimates for the given family.
    MlLogLikelihood(Family),
    /// Rayleigh `-log`-likelihood with the moments estimator.
    MomentsRayleigh,
    /// Piecewise-constant two-phase baseline.
    ChanVese,
}

impl SpeedLaw {
    /// Moments-estimator law. Only the Rayleigh family has one.
    pub fn moments(family: Family) -> Result<Self> {
        match family {
            Family::Rayleigh => Ok(SpeedLaw::MomentsRayleigh),
            other => Err(Error::Parameter {
                family: other.name(),
                reason: "the moments speed law is defined for rayleigh only".into(),
            }),
        }
    }

    pub fn family(&self) -> Option<Family> {
        match self {
            SpeedLaw::MlLogLikelihood(f) => Some(*f),
            SpeedLaw::MomentsRayleigh => Some(Family::Rayleigh),
            SpeedLaw::ChanVese => None,
        }
    }

    pub fn estimator(&self) -> Option<Estimator> {
        match self {
            SpeedLaw::MlLogLikelihood(_) => Some(Estimator::Ml),
            SpeedLaw::MomentsRayleigh => Some(Estimator::MomentsRayleigh),
            SpeedLaw::ChanVese => None,
        }
    }

    /// Stable identifier used in CSV output.
    pub fn name(&self) -> &'static str {
        match self {
            SpeedLaw::MlLogLikelihood(Family::Gaussian) => "gaussian_ml",
            SpeedLaw::MlLogLikelihood(Family::Poisson) => "poisson_ml",
            SpeedLaw::MlLogLikelihood(Family::Rayleigh) => "rayleigh_ml",
            SpeedLaw::MomentsRayleigh => "rayleigh_moments",
            SpeedLaw::ChanVese => "chanvese",
        }
    }

    pub fn parse(s: &str) -> Option<SpeedLaw> {
        match s.trim() {
            "gaussian_ml" => Some(SpeedLaw::MlLogLikelihood(Family::Gaussian)),
            "poisson_ml" => Some(SpeedLaw::MlLogLikelihood(Family::Poisson)),
            "rayleigh_ml" => Some(SpeedLaw::MlLogLikelihood(Family::Rayleigh)),
            "rayleigh_moments" => Some(SpeedLaw::MomentsRayleigh),
            "chanvese" => Some(SpeedLaw::ChanVese),
            _ => None,
        }
    }

    /// The four functionals compared in the benchmark protocol.
    pub fn benchmark_set() -> [SpeedLaw; 4] {
        [
            SpeedLaw::ChanVese,
            SpeedLaw::MlLogLikelihood(Family::Gaussian),
            SpeedLaw::MlLogLikelihood(Family::Rayleigh),
            SpeedLaw::MlLogLikelihood(Family::Poisson),
        ]
    }
}

impl fmt::Display for SpeedLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Energy of a two-region partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    /// Inner then outer region term.
    pub region_terms: [f64; 2],
    /// Contour length estimate.
    pub boundary_term: f64,
    pub lambda: f64,
    pub total: f64,
}

impl EnergyReport {
    pub fn new(region_terms: [f64; 2], boundary_term: f64, lambda: f64) -> Self {
        EnergyReport {
            region_terms,
            boundary_term,
            lambda,
            total: region_terms[0] + region_terms[1] + lambda * boundary_term,
        }
    }
}

/// `-sum log p(y(x), eta_hat)` over the masked pixels.
pub fn region_neg_loglik<F: ExpFamily + ?Sized>(
    field: &ScalarField,
    mask: &Mask,
    family: &F,
    estimate: &RegionEstimate,
) -> Result<f64> {
    if !field.same_shape(mask) {
        return Err(Error::Shape("field and mask differ in size".into()));
    }
    let mut acc = 0.0;
    for (&y, &m) in field.iter().zip(mask.iter()) {
        if m {
            acc -= family.log_pdf(y, &estimate.eta_hat)?;
        }
    }
    Ok(acc)
}

/// Two-region descent speed under ML estimation:
/// `log p(y, eta_in) - log p(y, eta_out)`.
pub fn speed_ml<F: ExpFamily + ?Sized>(
    y: f64,
    eta_in: &[f64],
    eta_out: &[f64],
    family: &F,
) -> Result<f64> {
    Ok(family.log_pdf(y, eta_in)? - family.log_pdf(y, eta_out)?)
}

/// Additive term `A(y, Omega)` that the moments estimator contributes to the
/// Rayleigh boundary integrand:
///
/// `A = (2 - (pi/2) * mean(y^2) / mean(y)^2) * (1 - y / mean(y))`.
///
/// The integrand for the moments law is `log p(y, theta_mo) + A`.
pub fn rayleigh_moment_correction(y: f64, mean_y: f64, mean_y2: f64) -> Result<f64> {
    if !(mean_y > 0.0) {
        return Err(Error::DegenerateRegion(format!(
            "moment correction needs a positive region mean, got {mean_y}"
        )));
    }
    let ratio = mean_y2 / (mean_y * mean_y);
    Ok((2.0 - 0.5 * PI * ratio) * (1.0 - y / mean_y))
}

/// Boundary integrand of one region under the Rayleigh moments estimator.
pub fn moments_integrand(y: f64, region: &RegionEstimate) -> Result<f64> {
    let s = &region.stats;
    if s.count == 0 {
        return Err(Error::DegenerateRegion("empty region".into()));
    }
    let lp = crate::expfam::Rayleigh.log_pdf(y, &region.eta_hat)?;
    Ok(lp + rayleigh_moment_correction(y, s.mean_y(), s.mean_y2())?)
}

/// Two-region descent speed under the Rayleigh moments estimator.
pub fn speed_moments_rayleigh(
    y: f64,
    inner: &RegionEstimate,
    outer: &RegionEstimate,
) -> Result<f64> {
    Ok(moments_integrand(y, inner)? - moments_integrand(y, outer)?)
}

/// Piecewise-constant two-phase speed `(y - c_out)^2 - (y - c_in)^2`.
pub fn speed_chan_vese(y: f64, c_in: f64, c_out: f64) -> f64 {
    (y - c_out) * (y - c_out) - (y - c_in) * (y - c_in)
}

/// Bhattacharyya distance `-log int sqrt(p_f p_o)` in closed form.
pub fn bhattacharyya(family: Family, eta_f: &[f64], eta_o: &[f64]) -> Result<f64> {
    family.check_eta(eta_f)?;
    family.check_eta(eta_o)?;
    let f = family.conventional_from_natural(eta_f)?;
    let o = family.conventional_from_natural(eta_o)?;
    let d = match family {
        Family::Poisson => {
            let diff = f[0].sqrt() - o[0].sqrt();
            0.5 * diff * diff
        }
        Family::Rayleigh => {
            let (tf, to) = (f[0], o[0]);
            ((tf * tf + to * to) / (2.0 * tf * to)).ln()
        }
        Family::Gaussian => {
            let (mf, vf, mo, vo) = (f[0], f[1], o[0], o[1]);
            let s = vf + vo;
            (mf - mo) * (mf - mo) / (4.0 * s) + 0.5 * (s / (2.0 * (vf * vo).sqrt())).ln()
        }
    };
    Ok(d.max(0.0))
}

/// Bhattacharyya distance by direct numerical integration (summation for
/// Poisson). Independent of the closed forms above.
pub fn bhattacharyya_numeric(family: Family, eta_f: &[f64], eta_o: &[f64]) -> Result<f64> {
    family.check_eta(eta_f)?;
    family.check_eta(eta_o)?;
    let f = family.conventional_from_natural(eta_f)?;
    let o = family.conventional_from_natural(eta_o)?;
    let root = |y: f64| -> f64 {
        match (family.log_pdf(y, eta_f), family.log_pdf(y, eta_o)) {
            (Ok(a), Ok(b)) => (0.5 * (a + b)).exp(),
            _ => 0.0,
        }
    };
    let coefficient = match family {
        Family::Poisson => {
            let top = f[0].max(o[0]);
            let upper = (top + 20.0 * top.sqrt() + 30.0).ceil() as u64;
            (0..=upper).map(|y| root(y as f64)).sum::<f64>()
        }
        Family::Rayleigh => {
            let upper = 40.0 * f[0].max(o[0]);
            simpson(root, 0.0, upper, 40_000)
        }
        Family::Gaussian => {
            let sd = f[1].max(o[1]).sqrt();
            let lo = f[0].min(o[0]) - 14.0 * sd;
            let hi = f[0].max(o[0]) + 14.0 * sd;
            simpson(root, lo, hi, 40_000)
        }
    };
    if !(coefficient > 0.0) {
        return Err(Error::Calibration(format!(
            "bhattacharyya coefficient underflowed for {family}"
        )));
    }
    Ok(-coefficient.ln())
}

/// Composite Simpson rule with `n` (even) panels. The integrand may be
/// undefined at the left endpoint; a zero value is used there.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expfam::{ParamVec, Poisson, Rayleigh, RegionStats};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn region_neg_loglik_values() {
        let field = ScalarField::filled(5, 2, 1.0);
        let mask = Mask::filled(5, 2, true);
        let stats = RegionStats::from_values(&Rayleigh, field.as_slice()).unwrap();
        let est = RegionEstimate::fit(Family::Rayleigh, stats, Estimator::Ml, None).unwrap();
        // Fitted theta is 1/sqrt(2) here; evaluate with theta = 1 explicitly.
        let fixed = RegionEstimate {
            eta_hat: ParamVec::scalar(-0.5),
            ..est
        };
        let e = region_neg_loglik(&field, &mask, &Rayleigh, &fixed).unwrap();
        assert!(close(e, 5.0, 1e-12));

        let field = ScalarField::filled(1, 1, 3.0);
        let mask = Mask::filled(1, 1, true);
        let stats = RegionStats::from_values(&Poisson, &[3.0]).unwrap();
        let est = RegionEstimate::fit(Family::Poisson, stats, Estimator::Ml, None).unwrap();
        let e = region_neg_loglik(&field, &mask, &Poisson, &est).unwrap();
        let expect = -((-3.0f64).exp() * 27.0 / 6.0).ln();
        assert!(close(e, expect, 1e-12));
        assert!(close(e, 1.4959, 1e-4));
    }

    #[test]
    fn region_neg_loglik_ignores_unmasked_and_checks_support() {
        let field = ScalarField::from_vec(2, 1, vec![1.0, -1.0]).unwrap();
        let mut mask = Mask::filled(2, 1, false);
        mask[(0, 0)] = true;
        let est = RegionEstimate {
            stats: RegionStats::new(1),
            eta_hat: ParamVec::scalar(-0.5),
            estimator: Estimator::Ml,
        };
        assert!(region_neg_loglik(&field, &mask, &Rayleigh, &est).is_ok());
        mask[(1, 0)] = true;
        assert!(matches!(
            region_neg_loglik(&field, &mask, &Rayleigh, &est),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn speed_ml_values() {
        let a = [16f64.ln()];
        let b = [9f64.ln()];
        let s = speed_ml(16.0, &a, &b, &Poisson).unwrap();
        assert!(close(s, -7.0 + 16.0 * (16.0f64 / 9.0).ln(), 1e-12));
        assert!(close(s, 2.2058, 1e-4));
        assert_eq!(speed_ml(16.0, &a, &a, &Poisson).unwrap(), 0.0);

        let t1 = [-0.5];
        let t2 = [-0.125];
        let s = speed_ml(1.0, &t1, &t2, &Rayleigh).unwrap();
        assert!(close(s, -0.5 + 4f64.ln() + 0.125, 1e-12));
        assert!(close(s, 1.0113, 1e-4));
        assert_eq!(s, -speed_ml(1.0, &t2, &t1, &Rayleigh).unwrap());
    }

    #[test]
    fn moment_correction_values() {
        assert_eq!(rayleigh_moment_correction(1.7, 1.7, 5.0).unwrap(), 0.0);
        // exact Rayleigh moment ratio: the correction vanishes
        let a = rayleigh_moment_correction(3.0, 1.0, 4.0 / PI).unwrap();
        assert!(close(a, 0.0, 1e-14));
        let a = rayleigh_moment_correction(2.0, 1.0, 1.0).unwrap();
        assert!(close(a, -(2.0 - PI / 2.0), 1e-14));
        assert!(close(a, -0.4292, 1e-4));
        assert!(rayleigh_moment_correction(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn chan_vese_values() {
        assert_eq!(speed_chan_vese(0.5, 1.0, 0.0), 0.0);
        assert_eq!(speed_chan_vese(1.0, 1.0, 0.0), 1.0);
        assert_eq!(speed_chan_vese(3.0, 2.0, 1.0), 3.0);
        assert_eq!(speed_chan_vese(3.0, 2.0, 1.0), -speed_chan_vese(3.0, 1.0, 2.0));
    }

    #[test]
    fn bhattacharyya_values() {
        let d = bhattacharyya(Family::Poisson, &[16f64.ln()], &[9f64.ln()]).unwrap();
        assert!(close(d, 0.5, 1e-12));
        let d = bhattacharyya(Family::Rayleigh, &[-0.125], &[-0.5]).unwrap();
        assert!(close(d, (1.25f64).ln(), 1e-12));
        let eta = Family::Gaussian.natural_from_conventional(&[1.0, 2.0]).unwrap();
        assert_eq!(bhattacharyya(Family::Gaussian, &eta, &eta).unwrap(), 0.0);
        assert!(bhattacharyya(Family::Rayleigh, &[0.1], &[-0.5]).is_err());
    }

    #[test]
    fn bhattacharyya_numeric_reference() {
        let d = bhattacharyya_numeric(Family::Poisson, &[16f64.ln()], &[9f64.ln()]).unwrap();
        assert!(close(d, 0.5, 1e-9));
        let d = bhattacharyya_numeric(Family::Rayleigh, &[-0.125], &[-0.5]).unwrap();
        assert!(close(d, (1.25f64).ln(), 1e-9));
    }

    #[test]
    fn moments_law_only_for_rayleigh() {
        assert_eq!(SpeedLaw::moments(Family::Rayleigh).unwrap(), SpeedLaw::MomentsRayleigh);
        assert!(SpeedLaw::moments(Family::Poisson).is_err());
        assert!(SpeedLaw::moments(Family::Gaussian).is_err());
        for law in SpeedLaw::benchmark_set() {
            assert_eq!(SpeedLaw::parse(law.name()), Some(law));
        }
    }

    #[test]
    fn energy_report_total() {
        let r = EnergyReport::new([1.5, 2.25], 10.0, 0.5);
        assert_eq!(r.total, 1.5 + 2.25 + 0.5 * 10.0);
    }
}
