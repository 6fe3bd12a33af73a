//! The frequency converter viewed as a beam splitter between two colors.
//!
//! A red photon at detuning `W` and a telecom photon at detuning `W` form one
//! coupled mode pair whose transition probability is
//! `eta(W) = eta0 * S(W - delta)`, with `S` a unit-peak profile of the
//! configured intensity FWHM. The peak value `eta0` follows the pump power
//! through `eta = sin^2((pi/2) sqrt(P / P_max))`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectra::{FrequencyGrid, SpectralModel};

pub const DEFAULT_CONVERSION_BANDWIDTH_HZ: f64 = 110e9;
pub const DEFAULT_P_MAX_W: f64 = 149.0;
pub const DEFAULT_ENHANCEMENT: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProfileKind {
    /// Single-pass quasi-phase-matched efficiency, `sinc^2`.
    #[default]
    Sinc2,
    Gaussian,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterModel<T> {
    /// Peak transition probability.
    pub eta0: T,
    /// FWHM of `eta(W)` in Hz.
    pub bandwidth: T,
    pub profile: ProfileKind,
    /// Offset of the profile center from zero detuning, Hz.
    pub pump_detuning: T,
}

impl<T: Scalar> ConverterModel<T> {
    pub fn new(eta0: T, bandwidth: T, profile: ProfileKind) -> Result<Self> {
        let model = Self {
            eta0,
            bandwidth,
            profile,
            pump_detuning: T::zero(),
        };
        model.validate()?;
        Ok(model)
    }

    /// Frequency-independent converter.
    pub fn flat(eta0: T) -> Result<Self> {
        Self::new(eta0, T::infinity(), ProfileKind::Flat)
    }

    pub fn with_pump_detuning(mut self, delta: T) -> Self {
        self.pump_detuning = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 >= T::zero() && self.eta0 <= T::one()) {
            return Err(Error::config(format!(
                "peak transition probability {} outside [0, 1]",
                self.eta0
            )));
        }
        if self.profile != ProfileKind::Flat && !(self.bandwidth > T::zero() && self.bandwidth.is_finite()) {
            return Err(Error::config(format!(
                "conversion bandwidth {} must be positive",
                self.bandwidth
            )));
        }
        if !self.pump_detuning.is_finite() {
            return Err(Error::config("pump detuning must be finite"));
        }
        Ok(())
    }

    fn unit_profile(&self, nu: T) -> T {
        match self.profile {
            ProfileKind::Flat => T::one(),
            ProfileKind::Sinc2 => SpectralModel::sinc(self.bandwidth).intensity_at(nu),
            ProfileKind::Gaussian => SpectralModel::gaussian(self.bandwidth).intensity_at(nu),
        }
    }

    /// `eta(W)` for the mode pair at detuning `nu`.
    pub fn eta_at(&self, nu: T) -> T {
        self.eta0 * self.unit_profile(nu - self.pump_detuning)
    }
}

impl Default for ConverterModel<f64> {
    fn default() -> Self {
        Self {
            eta0: 0.5,
            bandwidth: DEFAULT_CONVERSION_BANDWIDTH_HZ,
            profile: ProfileKind::Sinc2,
            pump_detuning: 0.0,
        }
    }
}

/// Per-detuning coupler amplitudes `t(W) = sqrt(1 - eta)`, `r(W) = sqrt(eta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversionProfile<T> {
    pub eta: Vec<T>,
    pub t: Vec<T>,
    pub r: Vec<T>,
}

pub fn conversion_profile<T: Scalar>(
    model: &ConverterModel<T>,
    grid: &FrequencyGrid<T>,
) -> Result<ConversionProfile<T>> {
    model.validate()?;
    if model.profile != ProfileKind::Flat && model.bandwidth < T::lit(4.0) * grid.step() {
        return Err(Error::config(format!(
            "conversion bandwidth {} Hz is not resolved by a {} Hz grid step",
            model.bandwidth,
            grid.step()
        )));
    }
    let eta: Vec<T> = grid.values().map(|nu| model.eta_at(nu)).collect();
    let t = eta.iter().map(|e| (T::one() - *e).sqrt()).collect();
    let r = eta.iter().map(|e| e.sqrt()).collect();
    Ok(ConversionProfile { eta, t, r })
}

/// Pump-power calibration of the peak transition probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpCalibration<T> {
    /// Circulating pump power giving complete conversion, W.
    pub p_max: T,
    /// Cavity power enhancement; informational only.
    pub enhancement: T,
}

impl<T: Scalar> PumpCalibration<T> {
    pub fn new(p_max: T, enhancement: T) -> Result<Self> {
        let cal = Self { p_max, enhancement };
        cal.validate()?;
        Ok(cal)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_max > T::zero() && self.p_max.is_finite()) {
            return Err(Error::config(format!("P_max {} must be positive", self.p_max)));
        }
        Ok(())
    }
}

impl Default for PumpCalibration<f64> {
    fn default() -> Self {
        Self {
            p_max: DEFAULT_P_MAX_W,
            enhancement: DEFAULT_ENHANCEMENT,
        }
    }
}

/// `eta = sin^2((pi/2) sqrt(P / P_max))` on the rising branch `0 <= P <= P_max`.
pub fn transition_probability<T: Scalar>(p_circulating: T, cal: &PumpCalibration<T>) -> Result<T> {
    cal.validate()?;
    if !(p_circulating >= T::zero() && p_circulating <= cal.p_max) {
        return Err(Error::domain(format!(
            "pump power {p_circulating} W outside [0, {}] W",
            cal.p_max
        )));
    }
    let s = (T::FRAC_PI_2() * (p_circulating / cal.p_max).sqrt()).sin();
    Ok(s * s)
}

/// Inverse of [`transition_probability`].
pub fn balance_pump_power<T: Scalar>(target_eta: T, cal: &PumpCalibration<T>) -> Result<T> {
    cal.validate()?;
    if !(target_eta >= T::zero() && target_eta <= T::one()) {
        return Err(Error::domain(format!(
            "target transition probability {target_eta} outside [0, 1]"
        )));
    }
    let x = target_eta.sqrt().asin() / T::FRAC_PI_2();
    Ok(cal.p_max * x * x)
}

/// Splitting ratio from the two large-delay coincidence peaks:
/// `p2/p1 = eta^2/(1-eta)^2`, so `eta = sqrt(p2/p1) / (1 + sqrt(p2/p1))`.
pub fn eta_from_peak_ratio<T: Scalar>(p2: T, p1: T) -> Result<T> {
    if !(p1 > T::zero()) {
        return Err(Error::Estimation(format!("no-swap peak must be positive, got {p1}")));
    }
    if !(p2 >= T::zero()) {
        return Err(Error::Estimation(format!("swap peak must be non-negative, got {p2}")));
    }
    let q = (p2 / p1).sqrt();
    Ok(q / (T::one() + q))
}

/// Forward relation `eta^2 / (1 - eta)^2`.
pub fn peak_ratio_for_eta<T: Scalar>(eta: T) -> Result<T> {
    if !(eta >= T::zero() && eta < T::one()) {
        return Err(Error::domain(format!("eta {eta} outside [0, 1)")));
    }
    let q = eta / (T::one() - eta);
    Ok(q * q)
}

/// `(P, eta(P))` on `n_samples` evenly spaced powers over `[0, P_max]`.
pub fn calibration_curve<T: Scalar>(cal: &PumpCalibration<T>, n_samples: usize) -> Result<Vec<(T, T)>> {
    if n_samples < 2 {
        return Err(Error::config("calibration curve needs at least two samples"));
    }
    let last = T::from_usize_lossy(n_samples - 1);
    (0..n_samples)
        .map(|k| {
            // pin the endpoint exactly so rounding cannot push it past P_max
            let p = if k + 1 == n_samples {
                cal.p_max
            } else {
                cal.p_max * T::from_usize_lossy(k) / last
            };
            transition_probability(p, cal).map(|eta| (p, eta))
        })
        .collect()
}

pub fn write_calibration_csv<T: Scalar, W: Write>(curve: &[(T, T)], mut out: W) -> Result<()> {
    writeln!(out, "p_watts,eta")?;
    for (p, eta) in curve {
        writeln!(out, "{p},{eta}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockcore::max_visibility_bound;

    const GHZ: f64 = 1e9;

    #[test]
    fn calibration_examples() {
        let cal = PumpCalibration::default();
        assert!((transition_probability(149.0, &cal).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(transition_probability(0.0, &cal).unwrap(), 0.0);
        let eta = transition_probability(35.0, &cal).unwrap();
        assert!((eta - 0.475_92).abs() < 5e-6, "{eta}");
        assert!((eta - 0.476).abs() <= 0.007);
        assert!(matches!(transition_probability(150.0, &cal), Err(Error::Domain(_))));
        assert!(transition_probability(-1.0, &cal).is_err());
    }

    #[test]
    fn balance_examples() {
        let cal = PumpCalibration::default();
        let p = balance_pump_power(0.5, &cal).unwrap();
        assert!((p - 37.25).abs() < 1e-12, "{p}");
        assert!((balance_pump_power(1.0, &cal).unwrap() - 149.0).abs() < 1e-12);
        let p = balance_pump_power(0.476, &cal).unwrap();
        assert!((p - 35.0).abs() < 0.05, "{p}");
        assert!(balance_pump_power(1.5, &cal).is_err());
    }

    #[test]
    fn balance_round_trips() {
        let cal = PumpCalibration::default();
        for k in 0..=1000 {
            let eta = k as f64 / 1000.0;
            let back = transition_probability(balance_pump_power(eta, &cal).unwrap(), &cal).unwrap();
            assert!((back - eta).abs() < 1e-12, "{eta} -> {back}");
        }
    }

    #[test]
    fn visibility_bound_at_operating_point() {
        let eta = transition_probability(35.0, &PumpCalibration::default()).unwrap();
        let v = max_visibility_bound(eta).unwrap();
        assert!((0.992..=0.996).contains(&v), "{v}");
    }

    #[test]
    fn peak_ratio_estimator() {
        assert!((eta_from_peak_ratio(100.0_f64, 100.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(eta_from_peak_ratio(0.0, 100.0).unwrap(), 0.0);
        let ratio = (0.476_f64 / 0.524).powi(2);
        assert!((ratio - 0.8252).abs() < 1e-3);
        assert!((eta_from_peak_ratio(ratio, 1.0).unwrap() - 0.476).abs() < 1e-12);
        assert!(matches!(eta_from_peak_ratio(1.0, 0.0), Err(Error::Estimation(_))));
        assert!(eta_from_peak_ratio(-1.0, 1.0).is_err());
    }

    #[test]
    fn flat_profile_is_balanced_everywhere() {
        let g = FrequencyGrid::default();
        let prof = conversion_profile(&ConverterModel::flat(0.5).unwrap(), &g).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(prof.t.iter().chain(&prof.r).all(|x| (x - h).abs() < 1e-15));
    }

    #[test]
    fn sinc2_profile_peak_and_half_width() {
        let g = FrequencyGrid::default();
        let m = ConverterModel::new(0.476, 110.0 * GHZ, ProfileKind::Sinc2).unwrap();
        let prof = conversion_profile(&m, &g).unwrap();
        assert_eq!(prof.eta[g.center_index()], 0.476);
        assert!((m.eta_at(55.0 * GHZ) - 0.238).abs() < 1e-12);
        assert!((m.eta_at(-55.0 * GHZ) - 0.238).abs() < 1e-12);
        // numerically: the sampled profile crosses eta0/2 near +/-55 GHz
        let c = g.center_index();
        let j = (c..g.len()).find(|&j| prof.eta[j] < 0.238).unwrap();
        assert!((g.value(j) - 55.0 * GHZ).abs() <= g.step());
    }

    #[test]
    fn detuned_profile_is_shifted() {
        let m = ConverterModel::new(0.5, 110.0 * GHZ, ProfileKind::Gaussian)
            .unwrap()
            .with_pump_detuning(20.0 * GHZ);
        assert_eq!(m.eta_at(20.0 * GHZ), 0.5);
        assert!((m.eta_at(75.0 * GHZ) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn pointwise_unitarity_for_every_kind() {
        let g = FrequencyGrid::default();
        for m in [
            ConverterModel::new(0.93, 110.0 * GHZ, ProfileKind::Sinc2).unwrap(),
            ConverterModel::new(0.476, 30.0 * GHZ, ProfileKind::Gaussian).unwrap(),
            ConverterModel::flat(0.2).unwrap(),
            ConverterModel::new(1.0, 55.0 * GHZ, ProfileKind::Sinc2)
                .unwrap()
                .with_pump_detuning(-13.0 * GHZ),
        ] {
            let p = conversion_profile(&m, &g).unwrap();
            for (t, r) in p.t.iter().zip(&p.r) {
                assert!((t * t + r * r - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn model_validation() {
        assert!(ConverterModel::new(1.2, 110.0 * GHZ, ProfileKind::Sinc2).is_err());
        assert!(ConverterModel::new(0.5, 0.0, ProfileKind::Gaussian).is_err());
        assert!(PumpCalibration::new(0.0, 50.0).is_err());
        let coarse = FrequencyGrid::new(16, 2e12).unwrap();
        let m = ConverterModel::new(0.5, 110.0 * GHZ, ProfileKind::Sinc2).unwrap();
        assert!(matches!(conversion_profile(&m, &coarse), Err(Error::Config(_))));
    }

    #[test]
    fn curve_export() {
        let cal = PumpCalibration::default();
        let curve = calibration_curve(&cal, 150).unwrap();
        assert_eq!(curve.first().unwrap().0, 0.0);
        assert_eq!(curve.last().unwrap().0, 149.0);
        assert!(curve.windows(2).all(|w| w[1].1 > w[0].1));
        let mut buf = Vec::new();
        write_calibration_csv(&curve[..2], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("p_watts,eta\n0,0\n1,"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn ratio_estimator_is_scale_invariant(eta in 0.0..0.999_f64, k in 1e-3..1e9_f64) {
                let p2 = eta * eta * k;
                let p1 = (1.0 - eta) * (1.0 - eta) * k;
                prop_assert!((eta_from_peak_ratio(p2, p1).unwrap() - eta).abs() < 1e-12);
            }

            #[test]
            fn calibration_monotone(a in 0.0..149.0_f64, b in 0.0..149.0_f64) {
                let cal = PumpCalibration::default();
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                prop_assume!(hi - lo > 1e-9);
                prop_assert!(transition_probability(lo, &cal).unwrap() < transition_probability(hi, &cal).unwrap());
            }
        }
    }
}
