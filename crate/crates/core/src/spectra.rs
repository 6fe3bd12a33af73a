//! Frequency grids and sampled spectral amplitudes.
//!
//! Detuning is ordinary frequency in Hz. A grid always holds an explicit
//! zero-detuning sample and exact `+/-` mirror pairs, so quantities that
//! pair a signal detuning `+W` with an idler detuning `-W` never need
//! interpolation.

use std::io::Write;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{sinc, Scalar, SINC2_HALF_MAX_ARG};

pub const DEFAULT_GRID_POINTS: usize = 4096;
pub const DEFAULT_GRID_SPAN_HZ: f64 = 2.0e12;

/// Minimum ratio of grid span to model FWHM accepted by [`sample_model`].
pub const MIN_SPAN_TO_FWHM: f64 = 8.0;

/// Uniform detuning grid centered on zero.
///
/// `n_points` is the configured (power-of-two) size; one extra sample is
/// stored so that the grid is odd and symmetric: `len() == n_points + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid<T> {
    n_points: usize,
    span: T,
}

impl<T: Scalar> FrequencyGrid<T> {
    pub fn new(n_points: usize, span: T) -> Result<Self> {
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(Error::config(format!(
                "grid size {n_points} must be a power of two >= 2"
            )));
        }
        if !(span > T::zero() && span.is_finite()) {
            return Err(Error::config(format!("grid span {span} must be positive")));
        }
        Ok(Self { n_points, span })
    }

    /// Configured size (the stored grid has one more sample).
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn span(&self) -> T {
        self.span
    }

    pub fn len(&self) -> usize {
        self.n_points + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Sample spacing in Hz.
    pub fn step(&self) -> T {
        self.span / T::from_usize_lossy(self.n_points)
    }

    pub fn center_index(&self) -> usize {
        self.n_points / 2
    }

    pub fn value(&self, i: usize) -> T {
        (T::from_usize_lossy(i) - T::from_usize_lossy(self.center_index())) * self.step()
    }

    /// Index holding the negated detuning of sample `i`.
    #[inline]
    pub fn mirror(&self, i: usize) -> usize {
        self.n_points - i
    }

    pub fn values(&self) -> impl ExactSizeIterator<Item = T> + '_ {
        (0..self.len()).map(move |i| self.value(i))
    }
}

impl Default for FrequencyGrid<f64> {
    fn default() -> Self {
        Self::new(DEFAULT_GRID_POINTS, DEFAULT_GRID_SPAN_HZ).expect("default grid is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralKind {
    /// `sin(x)/x` amplitude, the phase-matching profile of a uniform crystal.
    Sinc,
    Gaussian,
    Flat,
}

/// Analytic spectral amplitude parameterized by its intensity FWHM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralModel<T> {
    pub kind: SpectralKind,
    /// Intensity FWHM in Hz; ignored for [`SpectralKind::Flat`].
    pub fwhm: T,
}

impl<T: Scalar> SpectralModel<T> {
    pub fn sinc(fwhm: T) -> Self {
        Self {
            kind: SpectralKind::Sinc,
            fwhm,
        }
    }

    pub fn gaussian(fwhm: T) -> Self {
        Self {
            kind: SpectralKind::Gaussian,
            fwhm,
        }
    }

    pub fn flat() -> Self {
        Self {
            kind: SpectralKind::Flat,
            fwhm: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != SpectralKind::Flat && !(self.fwhm > T::zero() && self.fwhm.is_finite()) {
            return Err(Error::config(format!(
                "{:?} model needs a positive FWHM, got {}",
                self.kind, self.fwhm
            )));
        }
        Ok(())
    }

    /// Real amplitude at detuning `nu`, unit at the peak.
    pub fn amplitude_at(&self, nu: T) -> T {
        match self.kind {
            SpectralKind::Flat => T::one(),
            SpectralKind::Sinc => {
                // |amp|^2 = 1/2 where the argument reaches SINC2_HALF_MAX_ARG
                sinc(T::lit(2.0 * SINC2_HALF_MAX_ARG) * nu / self.fwhm)
            }
            SpectralKind::Gaussian => {
                let u = nu / self.fwhm;
                (-T::lit(2.0) * T::LN_2() * u * u).exp()
            }
        }
    }

    /// `|amplitude|^2`, a unit-peak intensity profile.
    pub fn intensity_at(&self, nu: T) -> T {
        let a = self.amplitude_at(nu);
        a * a
    }
}

/// Complex amplitude sampled on a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAmplitude<T> {
    grid: FrequencyGrid<T>,
    amp: Vec<Complex<T>>,
}

impl<T: Scalar> SpectralAmplitude<T> {
    pub fn from_fn(grid: FrequencyGrid<T>, f: impl Fn(T) -> Complex<T>) -> Self {
        let amp = grid.values().map(f).collect();
        Self { grid, amp }
    }

    pub fn from_samples(grid: FrequencyGrid<T>, amp: Vec<Complex<T>>) -> Result<Self> {
        if amp.len() != grid.len() {
            return Err(Error::usage(format!(
                "{} samples for a grid of {}",
                amp.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, amp })
    }

    pub fn grid(&self) -> &FrequencyGrid<T> {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amp
    }

    pub fn intensities(&self) -> impl Iterator<Item = T> + '_ {
        self.amp.iter().map(|a| a.norm_sqr())
    }

    /// `sum |amp|^2 * step`.
    pub fn norm_sqr(&self) -> T {
        self.intensities().fold(T::zero(), |acc, i| acc + i) * self.grid.step()
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            grid: self.grid,
            amp: self.amp.iter().map(|a| *a * factor).collect(),
        }
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        multiply(self, other)
    }

    pub fn normalize(&self) -> Result<Self> {
        normalize(self)
    }

    pub fn measure_fwhm(&self) -> Result<T> {
        measure_fwhm(self)
    }

    /// Writes `detuning_hz,re,im` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "detuning_hz,re,im")?;
        for (nu, a) in self.grid.values().zip(&self.amp) {
            writeln!(out, "{},{},{}", nu, a.re, a.im)?;
        }
        Ok(())
    }
}

pub fn sample_model<T: Scalar>(model: &SpectralModel<T>, grid: &FrequencyGrid<T>) -> Result<SpectralAmplitude<T>> {
    model.validate()?;
    if model.kind != SpectralKind::Flat && grid.span() < T::lit(MIN_SPAN_TO_FWHM) * model.fwhm {
        return Err(Error::config(format!(
            "grid span {} Hz is below {MIN_SPAN_TO_FWHM} x FWHM ({} Hz)",
            grid.span(),
            model.fwhm
        )));
    }
    Ok(SpectralAmplitude::from_fn(*grid, |nu| {
        Complex::new(model.amplitude_at(nu), T::zero())
    }))
}

pub fn multiply<T: Scalar>(a: &SpectralAmplitude<T>, b: &SpectralAmplitude<T>) -> Result<SpectralAmplitude<T>> {
    if a.grid != b.grid {
        return Err(Error::usage("cannot multiply spectra on different grids"));
    }
    Ok(SpectralAmplitude {
        grid: a.grid,
        amp: a.amp.iter().zip(&b.amp).map(|(x, y)| *x * *y).collect(),
    })
}

pub fn normalize<T: Scalar>(s: &SpectralAmplitude<T>) -> Result<SpectralAmplitude<T>> {
    let norm = s.norm_sqr();
    if !(norm > T::zero() && norm.is_finite()) {
        return Err(Error::domain("cannot normalize a spectrum with zero norm"));
    }
    Ok(s.scaled(T::one() / norm.sqrt()))
}

/// Full width at half maximum of `|amp|^2`, linearly interpolated between
/// the samples straddling the half-maximum level on each side of the peak.
pub fn measure_fwhm<T: Scalar>(s: &SpectralAmplitude<T>) -> Result<T> {
    let intensity: Vec<T> = s.intensities().collect();
    let (peak_idx, peak) =
        intensity.iter().copied().enumerate().fold(
            (0, T::neg_infinity()),
            |best, (i, v)| if v > best.1 { (i, v) } else { best },
        );
    if !(peak > T::zero()) {
        return Err(Error::Measurement("spectrum is identically zero".into()));
    }
    let half = peak / T::lit(2.0);
    let step = s.grid.step();

    let right = (peak_idx + 1..intensity.len()).find(|&j| intensity[j] < half).map(|j| {
        let (hi, lo) = (intensity[j - 1], intensity[j]);
        s.grid.value(j - 1) + (hi - half) / (hi - lo) * step
    });
    let left = (0..peak_idx).rev().find(|&j| intensity[j] < half).map(|j| {
        let (hi, lo) = (intensity[j + 1], intensity[j]);
        s.grid.value(j + 1) - (hi - half) / (hi - lo) * step
    });

    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::Measurement("no half-maximum crossing inside the grid".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GHZ: f64 = 1e9;

    fn grid_for(fwhm: f64) -> FrequencyGrid<f64> {
        let span = (MIN_SPAN_TO_FWHM * fwhm).max(DEFAULT_GRID_SPAN_HZ);
        FrequencyGrid::new(DEFAULT_GRID_POINTS, span).unwrap()
    }

    #[test]
    fn grid_is_symmetric_with_zero() {
        let g = FrequencyGrid::new(64, 1.0e12_f64).unwrap();
        assert_eq!(g.len(), 65);
        assert_eq!(g.value(g.center_index()), 0.0);
        for i in 0..g.len() {
            assert_eq!(g.value(i), -g.value(g.mirror(i)));
        }
        assert!((g.value(g.len() - 1) - 0.5e12).abs() < 1e-3);
        assert!(FrequencyGrid::new(100, 1.0e12).is_err());
        assert!(FrequencyGrid::new(64, -1.0).is_err());
    }

    #[test]
    fn gaussian_filter_width() {
        let g = FrequencyGrid::default();
        let s = sample_model(&SpectralModel::gaussian(105.0 * GHZ), &g).unwrap();
        assert!((s.measure_fwhm().unwrap() - 105.0 * GHZ).abs() <= g.step());
        let s = sample_model(&SpectralModel::gaussian(110.0 * GHZ), &g).unwrap();
        assert!((s.measure_fwhm().unwrap() - 110.0 * GHZ).abs() <= g.step());
    }

    #[test]
    fn flat_model_is_constant_and_unmeasurable() {
        let g = FrequencyGrid::default();
        let s = sample_model(&SpectralModel::flat(), &g).unwrap();
        assert!(s.amplitudes().iter().all(|a| *a == Complex::new(1.0, 0.0)));
        assert!(matches!(s.measure_fwhm(), Err(Error::Measurement(_))));
    }

    #[test]
    fn sinc_first_zero() {
        let g = FrequencyGrid::default();
        let s = sample_model(&SpectralModel::sinc(75.0 * GHZ), &g).unwrap();
        let expected = std::f64::consts::PI / (2.0 * SINC2_HALF_MAX_ARG) * 75.0 * GHZ;
        assert!((expected - 84.66 * GHZ).abs() < 0.01 * GHZ);
        // first sign change of the sampled amplitude right of center
        let c = g.center_index();
        let j = (c + 1..g.len()).find(|&j| s.amplitudes()[j].re < 0.0).unwrap();
        let (a, b) = (s.amplitudes()[j - 1].re, s.amplitudes()[j].re);
        let zero = g.value(j - 1) + a / (a - b) * g.step();
        assert!((zero - expected).abs() < 0.01 * g.step(), "{zero} vs {expected}");
    }

    #[test]
    fn widths_round_trip_for_all_kinds() {
        for fwhm in [10.0, 75.0, 105.0, 110.0, 300.0] {
            let fwhm = fwhm * GHZ;
            let g = grid_for(fwhm);
            for model in [SpectralModel::gaussian(fwhm), SpectralModel::sinc(fwhm)] {
                let w = sample_model(&model, &g).unwrap().measure_fwhm().unwrap();
                assert!((w - fwhm).abs() <= g.step(), "{model:?}: {w}");
            }
        }
    }

    #[test]
    fn span_precondition() {
        let g = FrequencyGrid::new(1024, 500.0 * GHZ).unwrap();
        let err = sample_model(&SpectralModel::sinc(75.0 * GHZ), &g).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(sample_model(&SpectralModel::flat(), &g).is_ok());
        assert!(SpectralModel::gaussian(0.0).validate().is_err());
    }

    #[test]
    fn gaussian_product_width() {
        let g = FrequencyGrid::default();
        let a = sample_model(&SpectralModel::gaussian(105.0 * GHZ), &g).unwrap();
        let b = sample_model(&SpectralModel::gaussian(110.0 * GHZ), &g).unwrap();
        let w = a.multiply(&b).unwrap().measure_fwhm().unwrap();
        let expected = 1.0 / (1.0 / 105.0_f64.powi(2) + 1.0 / 110.0_f64.powi(2)).sqrt() * GHZ;
        assert!((expected - 75.95 * GHZ).abs() < 0.01 * GHZ);
        assert!((w - expected).abs() <= g.step());
    }

    #[test]
    fn multiply_by_flat_is_identity() {
        let g = FrequencyGrid::default();
        let a = sample_model(&SpectralModel::sinc(75.0 * GHZ), &g).unwrap();
        let one = sample_model(&SpectralModel::flat(), &g).unwrap();
        assert_eq!(a.multiply(&one).unwrap(), a);
    }

    #[test]
    fn filtered_sinc_suppresses_sidelobes() {
        let g = FrequencyGrid::default();
        let src = sample_model(&SpectralModel::sinc(75.0 * GHZ), &g).unwrap();
        let filt = sample_model(&SpectralModel::gaussian(105.0 * GHZ), &g).unwrap();
        let prod = src.multiply(&filt).unwrap();
        assert!(prod.measure_fwhm().unwrap() < 75.0 * GHZ);
        // beyond the first zero of the sinc only sidelobes remain
        let first_zero = std::f64::consts::PI / (2.0 * SINC2_HALF_MAX_ARG) * 75.0 * GHZ;
        let peak = prod.intensities().fold(0.0, f64::max);
        let lobe = g
            .values()
            .zip(prod.intensities())
            .filter(|(nu, _)| nu.abs() > first_zero)
            .map(|(_, i)| i)
            .fold(0.0, f64::max);
        assert!(lobe < 1e-2 * peak, "sidelobe ratio {}", lobe / peak);
        let raw_lobe = g
            .values()
            .zip(src.intensities())
            .filter(|(nu, _)| nu.abs() > first_zero)
            .map(|(_, i)| i)
            .fold(0.0, f64::max);
        assert!(raw_lobe > 1e-2);
    }

    #[test]
    fn grid_mismatch_is_usage_error() {
        let a = sample_model(&SpectralModel::flat(), &FrequencyGrid::default()).unwrap();
        let b = sample_model(&SpectralModel::flat(), &FrequencyGrid::new(64, 1e12).unwrap()).unwrap();
        assert!(matches!(a.multiply(&b), Err(Error::Usage(_))));
    }

    #[test]
    fn normalization() {
        let g = FrequencyGrid::default();
        let s = sample_model(&SpectralModel::sinc(75.0 * GHZ), &g).unwrap();
        let n = s.normalize().unwrap();
        assert!((n.norm_sqr() - 1.0).abs() < 1e-10);
        let again = n.normalize().unwrap();
        for (a, b) in again.amplitudes().iter().zip(n.amplitudes()) {
            assert!((a - b).norm() < 1e-12 * n.amplitudes()[g.center_index()].norm());
        }
        let doubled = n.scaled(2.0).normalize().unwrap();
        for (a, b) in doubled.amplitudes().iter().zip(n.amplitudes()) {
            assert!((a - b).norm() < 1e-12 * n.amplitudes()[g.center_index()].norm());
        }
        assert!(matches!(s.scaled(0.0).normalize(), Err(Error::Domain(_))));
    }

    #[test]
    fn csv_export() {
        let g = FrequencyGrid::new(4, 4.0).unwrap();
        let s = sample_model(&SpectralModel::flat(), &g).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "detuning_hz,re,im");
        assert_eq!(lines[1], "-2,1,0");
        assert_eq!(lines.len(), 6);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_spectrum() -> impl Strategy<Value = SpectralAmplitude<f64>> {
            let g = FrequencyGrid::new(32, 1.0e12).unwrap();
            prop::collection::vec((-2.0..2.0_f64, -2.0..2.0_f64), g.len()).prop_map(move |v| {
                SpectralAmplitude::from_samples(g, v.into_iter().map(|(a, b)| Complex::new(a, b)).collect()).unwrap()
            })
        }

        fn close(a: &SpectralAmplitude<f64>, b: &SpectralAmplitude<f64>) -> bool {
            let scale = a.amplitudes().iter().map(|x| x.norm()).fold(0.0, f64::max);
            a.amplitudes()
                .iter()
                .zip(b.amplitudes())
                .all(|(x, y)| (x - y).norm() <= 1e-12 * scale)
        }

        proptest! {
            #[test]
            fn multiply_commutes_and_associates(a in arb_spectrum(), b in arb_spectrum(), c in arb_spectrum()) {
                prop_assert!(close(&a.multiply(&b).unwrap(), &b.multiply(&a).unwrap()));
                let left = a.multiply(&b).unwrap().multiply(&c).unwrap();
                let right = a.multiply(&b.multiply(&c).unwrap()).unwrap();
                prop_assert!(close(&left, &right));
            }

            #[test]
            fn normalize_idempotent_and_scale_invariant(a in arb_spectrum(), k in 0.01..100.0_f64) {
                prop_assume!(a.norm_sqr() > 1e-6);
                let n = a.normalize().unwrap();
                prop_assert!((n.norm_sqr() - 1.0).abs() < 1e-10);
                prop_assert!(close(&n.normalize().unwrap(), &n));
                prop_assert!(close(&a.scaled(k).normalize().unwrap(), &n));
            }
        }
    }
}
