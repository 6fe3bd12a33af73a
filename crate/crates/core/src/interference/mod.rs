//! Coincidence probabilities versus relative delay.
//!
//! A CW-pumped pair has its red photon at detuning `+W` and its telecom
//! photon at `-W` with amplitude `F(W)`. The delay `tau` acts on the telecom
//! input as the phase `exp(+i 2 pi nu tau)` at telecom detuning `nu`. Each
//! photon then meets the coupler of its own mode pair, so for a final state
//! with the red photon at `+W` and the telecom photon at `-W`:
//!
//! ```text
//!   no swap:   t(W) t(-W) F(W)  exp(-i 2 pi W tau)
//!   swap:   -  r(W) r(-W) F(-W) exp(+i 2 pi W tau)      (i * i = -1)
//! ```
//!
//! The two paths cancel at `tau = 0` for a balanced, frequency-flat
//! converter. Same-color outcomes collect the one-converted paths and
//! interfere constructively. Output filters act on the detected color and
//! frequency of each photon, and probabilities are normalized per emitted
//! pair, so filtering shows up as loss.

mod oracle;

use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;

use crate::converter::{conversion_profile, ConverterModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectra::{sample_model, FrequencyGrid, SpectralKind, SpectralModel};

pub use oracle::{oracle_delay_scan, ORACLE_MAX_POINTS};

/// Where the telecom band-pass sits relative to the converter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterPlacement {
    /// Filters the telecom input photon before conversion.
    PreConverter,
    /// Filters whichever photon leaves in the telecom color.
    #[default]
    PostConverter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentModel<T> {
    /// Biphoton amplitude as a function of the red detuning.
    pub source: SpectralModel<T>,
    pub converter: ConverterModel<T>,
    pub telecom_filter: SpectralModel<T>,
    pub filter_placement: FilterPlacement,
    /// Always applied at the output (red detection arm).
    pub red_filter: SpectralModel<T>,
    pub grid: FrequencyGrid<T>,
}

impl<T: Scalar> ExperimentModel<T> {
    /// Converter and filters frequency-flat: the single-mode limit.
    pub fn flat(source: SpectralModel<T>, eta0: T, grid: FrequencyGrid<T>) -> Result<Self> {
        let model = Self {
            source,
            converter: ConverterModel::flat(eta0)?,
            telecom_filter: SpectralModel::flat(),
            filter_placement: FilterPlacement::PostConverter,
            red_filter: SpectralModel::flat(),
            grid,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.converter.validate()?;
        self.telecom_filter.validate()?;
        self.red_filter.validate()
    }

    /// Rough transform-limited dip width, used only for coverage warnings.
    fn expected_feature_width(&self) -> Option<T> {
        match self.source.kind {
            SpectralKind::Flat => None,
            _ => Some(T::lit(0.44) / self.source.fwhm),
        }
    }

    /// Transition probability averaged over both photons' spectra.
    pub fn effective_transition_probability(&self) -> Result<T> {
        let inputs = SpectralInputs::prepare(self)?;
        let mut num = T::zero();
        let mut den = T::zero();
        for i in 0..inputs.len() {
            let w = inputs.g[i].norm_sqr();
            let m = self.grid.mirror(i);
            num += w * (inputs.eta[i] + inputs.eta[m]) / T::lit(2.0);
            den += w;
        }
        if !(den > T::zero()) {
            return Err(Error::domain("input spectrum has zero norm"));
        }
        Ok(num / den)
    }
}

impl Default for ExperimentModel<f64> {
    /// Sinc 75 GHz source, sinc^2 110 GHz converter at 47.6 %, Gaussian
    /// 105 GHz telecom filter after the converter, flat red filter.
    fn default() -> Self {
        Self {
            source: SpectralModel::sinc(75e9),
            converter: ConverterModel {
                eta0: 0.476,
                ..ConverterModel::default()
            },
            telecom_filter: SpectralModel::gaussian(105e9),
            filter_placement: FilterPlacement::PostConverter,
            red_filter: SpectralModel::flat(),
            grid: FrequencyGrid::default(),
        }
    }
}

/// Weight given to the two-path cross term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterferenceRegime {
    /// Coherent two-photon amplitudes.
    #[default]
    TwoPhoton,
    /// Classical fields with randomized relative phase: the cross term
    /// survives with weight one half, capping dip visibility at 50 %.
    PhaseAveraged,
    /// Fully distinguishable paths, no cross term.
    Distinguishable,
}

impl InterferenceRegime {
    fn cross_weight<T: Scalar>(self) -> T {
        match self {
            InterferenceRegime::TwoPhoton => T::one(),
            InterferenceRegime::PhaseAveraged => T::lit(0.5),
            InterferenceRegime::Distinguishable => T::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// One photon of each color (SNSPD x APD): the dip.
    Cross,
    /// Both photons telecom (SNSPD x SNSPD): an anti-dip.
    TelecomTelecom,
    /// Both photons red (APD x APD): an anti-dip.
    RedRed,
}

impl Channel {
    pub fn is_dip(self) -> bool {
        self == Channel::Cross
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Cross => "cross",
            Channel::TelecomTelecom => "telecom_telecom",
            Channel::RedRed => "red_red",
        }
    }
}

/// Coincidence probabilities tabulated against delay (seconds).
#[derive(Debug, Clone, PartialEq)]
pub struct DelayScan<T> {
    pub delays: Vec<T>,
    pub p_cross: Option<Vec<T>>,
    pub p_tt: Option<Vec<T>>,
    pub p_rr: Option<Vec<T>>,
}

impl<T: Scalar> DelayScan<T> {
    pub fn channel(&self, channel: Channel) -> Result<&[T]> {
        let col = match channel {
            Channel::Cross => &self.p_cross,
            Channel::TelecomTelecom => &self.p_tt,
            Channel::RedRed => &self.p_rr,
        };
        col.as_deref()
            .ok_or_else(|| Error::usage(format!("scan has no {} channel", channel.name())))
    }

    /// Writes `delay_s` followed by whichever probability columns are present.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let cols: Vec<(&str, &Vec<T>)> = [("p_cross", &self.p_cross), ("p_tt", &self.p_tt), ("p_rr", &self.p_rr)]
            .into_iter()
            .filter_map(|(name, col)| col.as_ref().map(|c| (name, c)))
            .collect();
        write!(out, "delay_s")?;
        for (name, _) in &cols {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for (k, tau) in self.delays.iter().enumerate() {
            write!(out, "{tau}")?;
            for (_, col) in &cols {
                write!(out, ",{}", col[k])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Everything the delay integrals need, sampled once per model.
#[derive(Debug, Clone)]
pub struct SpectralInputs<T> {
    pub grid: FrequencyGrid<T>,
    /// Source amplitude after any pre-converter filtering, by red detuning.
    pub g: Vec<Complex<T>>,
    pub eta: Vec<T>,
    pub t: Vec<T>,
    pub r: Vec<T>,
    /// Output filter amplitudes by detected detuning.
    pub h_telecom: Vec<T>,
    pub h_red: Vec<T>,
    /// `1 / sum |F|^2 dW` for the unfiltered source.
    pub norm: T,
}

impl<T: Scalar> SpectralInputs<T> {
    pub fn prepare(model: &ExperimentModel<T>) -> Result<Self> {
        model.validate()?;
        let grid = model.grid;
        let source = sample_model(&model.source, &grid)?;
        let norm_sqr = source.norm_sqr();
        if !(norm_sqr > T::zero()) {
            return Err(Error::domain("source spectrum has zero norm"));
        }
        let telecom = sample_model(&model.telecom_filter, &grid)?;
        let red = sample_model(&model.red_filter, &grid)?;
        let profile = conversion_profile(&model.converter, &grid)?;

        let telecom_amp: Vec<T> = telecom.amplitudes().iter().map(|a| a.re).collect();
        let (g, h_telecom) = match model.filter_placement {
            FilterPlacement::PreConverter => (
                // the telecom partner of red detuning W sits at -W
                source
                    .amplitudes()
                    .iter()
                    .enumerate()
                    .map(|(i, f)| *f * telecom_amp[grid.mirror(i)])
                    .collect(),
                vec![T::one(); grid.len()],
            ),
            FilterPlacement::PostConverter => (source.amplitudes().to_vec(), telecom_amp),
        };

        Ok(Self {
            grid,
            g,
            eta: profile.eta,
            t: profile.t,
            r: profile.r,
            h_telecom,
            h_red: red.amplitudes().iter().map(|a| a.re).collect(),
            norm: T::one() / norm_sqr,
        })
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    /// `(p_cross, p_tt, p_rr)` at one delay.
    pub fn probabilities_at(&self, tau: T, regime: InterferenceRegime) -> (T, T, T) {
        let w: T = regime.cross_weight();
        let two = T::lit(2.0);
        let half = T::lit(0.5);
        let mut cross = T::zero();
        let mut tt = T::zero();
        let mut rr = T::zero();

        for i in 0..self.len() {
            let m = self.grid.mirror(i);
            let phase = -two * T::PI() * self.grid.value(i) * tau;
            let e = Complex::new(phase.cos(), phase.sin());
            let ec = e.conj();
            let (gi, gm) = (self.g[i], self.g[m]);
            let (ti, tm, ri, rm) = (self.t[i], self.t[m], self.r[i], self.r[m]);

            // red at +W, telecom at -W; the swap path carries i*i = -1
            let a = gi * e * (ti * tm);
            let b = gm * ec * (ri * rm);
            let h = self.h_red[i] * self.h_telecom[m];
            cross += h * h * (a.norm_sqr() + b.norm_sqr() - two * w * (a * b.conj()).re);

            // both telecom at +/-W: red converted, telecom kept (and mirror)
            let a = gi * e * (ri * tm);
            let b = gm * ec * (rm * ti);
            let h = self.h_telecom[i] * self.h_telecom[m];
            tt += half * h * h * (a.norm_sqr() + b.norm_sqr() + two * w * (a * b.conj()).re);

            // both red at +/-W: red kept, telecom converted (and mirror)
            let a = gi * e * (ti * rm);
            let b = gm * ec * (tm * ri);
            let h = self.h_red[i] * self.h_red[m];
            rr += half * h * h * (a.norm_sqr() + b.norm_sqr() + two * w * (a * b.conj()).re);
        }

        let scale = self.grid.step() * self.norm;
        (cross * scale, tt * scale, rr * scale)
    }
}

fn warn_on_coverage<T: Scalar>(model: &ExperimentModel<T>, delays: &[T]) {
    let (Some(width), Some(lo), Some(hi)) = (
        model.expected_feature_width(),
        delays.iter().copied().reduce(T::min),
        delays.iter().copied().reduce(T::max),
    ) else {
        return;
    };
    if hi - lo < T::lit(5.0) * width {
        log::warn!(
            "delay range {} s may not resolve a dip of expected width ~{} s",
            hi - lo,
            width
        );
    }
}

/// All three channels at every delay under the given regime.
pub fn delay_scan_with<T: Scalar>(
    model: &ExperimentModel<T>,
    delays: &[T],
    regime: InterferenceRegime,
) -> Result<DelayScan<T>> {
    let inputs = SpectralInputs::prepare(model)?;
    warn_on_coverage(model, delays);
    let rows: Vec<(T, T, T)> = delays
        .par_iter()
        .map(|&tau| inputs.probabilities_at(tau, regime))
        .collect();
    Ok(DelayScan {
        delays: delays.to_vec(),
        p_cross: Some(rows.iter().map(|r| r.0).collect()),
        p_tt: Some(rows.iter().map(|r| r.1).collect()),
        p_rr: Some(rows.iter().map(|r| r.2).collect()),
    })
}

pub fn delay_scan<T: Scalar>(model: &ExperimentModel<T>, delays: &[T]) -> Result<DelayScan<T>> {
    delay_scan_with(model, delays, InterferenceRegime::TwoPhoton)
}

/// Cross-color coincidence probability (the dip) at each delay.
pub fn cross_color_dip<T: Scalar>(model: &ExperimentModel<T>, delays: &[T]) -> Result<DelayScan<T>> {
    let mut scan = delay_scan(model, delays)?;
    scan.p_tt = None;
    scan.p_rr = None;
    Ok(scan)
}

/// Telecom-telecom and red-red coincidence probabilities (the anti-dips).
pub fn same_color_antidips<T: Scalar>(model: &ExperimentModel<T>, delays: &[T]) -> Result<DelayScan<T>> {
    let mut scan = delay_scan(model, delays)?;
    scan.p_cross = None;
    Ok(scan)
}

/// Large-delay outcome probabilities, separated into the two cross-color
/// paths. These are the far baselines of the scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathProbabilities<T> {
    pub no_swap: T,
    pub swap: T,
    pub both_telecom: T,
    pub both_red: T,
}

impl<T: Scalar> PathProbabilities<T> {
    pub fn cross(&self) -> T {
        self.no_swap + self.swap
    }

    pub fn total(&self) -> T {
        self.no_swap + self.swap + self.both_telecom + self.both_red
    }
}

pub fn path_probabilities<T: Scalar>(model: &ExperimentModel<T>) -> Result<PathProbabilities<T>> {
    let s = SpectralInputs::prepare(model)?;
    let half = T::lit(0.5);
    let mut p = PathProbabilities {
        no_swap: T::zero(),
        swap: T::zero(),
        both_telecom: T::zero(),
        both_red: T::zero(),
    };
    for i in 0..s.len() {
        let m = s.grid.mirror(i);
        let (gi, gm) = (s.g[i].norm_sqr(), s.g[m].norm_sqr());
        let h = s.h_red[i] * s.h_telecom[m];
        let tt = s.t[i] * s.t[m];
        let rr = s.r[i] * s.r[m];
        p.no_swap += h * h * tt * tt * gi;
        p.swap += h * h * rr * rr * gm;
        let h = s.h_telecom[i] * s.h_telecom[m];
        p.both_telecom += half * h * h * ((s.r[i] * s.t[m]).powi(2) * gi + (s.r[m] * s.t[i]).powi(2) * gm);
        let h = s.h_red[i] * s.h_red[m];
        p.both_red += half * h * h * ((s.t[i] * s.r[m]).powi(2) * gi + (s.t[m] * s.r[i]).powi(2) * gm);
    }
    let scale = s.grid.step() * s.norm;
    p.no_swap *= scale;
    p.swap *= scale;
    p.both_telecom *= scale;
    p.both_red *= scale;
    Ok(p)
}

/// Depth (or height) of a scan feature relative to its far-delay baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureMeasure<T> {
    pub visibility: T,
    /// Delay of the extremum.
    pub location: T,
    pub baseline: T,
    pub extremum: T,
    /// Full width at half depth, interpolated; `None` for a featureless scan.
    pub width: Option<T>,
}

/// Fraction of samples at each end of a scan used as the far baseline.
const BASELINE_FRACTION: f64 = 0.1;
/// Baseline samples must sit this many feature widths from the extremum.
const BASELINE_CLEARANCE: f64 = 5.0;

/// Dip visibility `(P_far - P_min)/P_far`, or anti-dip visibility
/// `(P_max - P_far)/P_far`, with `P_far` the mean of the outer 20 % of the
/// delay samples.
pub fn visibility<T: Scalar>(scan: &DelayScan<T>, channel: Channel) -> Result<FeatureMeasure<T>> {
    let ys = scan.channel(channel)?;
    let xs = &scan.delays;
    measure_feature(xs, ys, channel.is_dip())
}

pub(crate) fn measure_feature<T: Scalar>(xs: &[T], ys: &[T], dip: bool) -> Result<FeatureMeasure<T>> {
    let n = ys.len();
    if xs.len() != n {
        return Err(Error::usage("delay and value arrays differ in length"));
    }
    if n < 10 {
        return Err(Error::analysis(format!("{n} samples cannot cover a baseline")));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::usage("delays must be strictly increasing"));
    }
    let k = ((n as f64 * BASELINE_FRACTION).floor() as usize).max(1);
    let outer = ys[..k].iter().chain(&ys[n - k..]);
    let baseline = outer.fold(T::zero(), |acc, y| acc + *y) / T::from_usize_lossy(2 * k);
    if !(baseline > T::zero()) {
        return Err(Error::analysis("far-delay baseline is not positive"));
    }

    let pick = |best: (usize, T), (i, y): (usize, T)| {
        let better = if dip { y < best.1 } else { y > best.1 };
        if better {
            (i, y)
        } else {
            best
        }
    };
    let (idx, extremum) = ys.iter().copied().enumerate().fold((0, ys[0]), pick);
    let depth = (extremum - baseline).abs();
    let visibility = depth / baseline;

    if depth <= T::lit(1e-12) * baseline {
        return Ok(FeatureMeasure {
            visibility: T::zero(),
            location: xs[idx],
            baseline,
            extremum,
            width: None,
        });
    }

    let level = (extremum + baseline) / T::lit(2.0);
    let beyond = |y: T| if dip { y > level } else { y < level };
    let cross = |a: usize, b: usize| xs[a] + (level - ys[a]) / (ys[b] - ys[a]) * (xs[b] - xs[a]);
    let right = (idx + 1..n).find(|&j| beyond(ys[j])).map(|j| cross(j - 1, j));
    let left = (0..idx).rev().find(|&j| beyond(ys[j])).map(|j| cross(j + 1, j));
    let (Some(l), Some(r)) = (left, right) else {
        return Err(Error::analysis("feature does not return to half depth inside the scan"));
    };
    let width = r - l;

    let clearance = T::lit(BASELINE_CLEARANCE) * width;
    if xs[k - 1] > xs[idx] - clearance || xs[n - k] < xs[idx] + clearance {
        return Err(Error::analysis(format!(
            "baseline samples lie within {BASELINE_CLEARANCE} feature widths ({width}) of the extremum"
        )));
    }

    Ok(FeatureMeasure {
        visibility,
        location: xs[idx],
        baseline,
        extremum,
        width: Some(width),
    })
}

/// Timing resolution needed to see the beat note of two colors, `1/dnu`.
pub fn beat_note_resolution<T: Scalar>(delta_nu: T) -> Result<T> {
    if !(delta_nu > T::zero() && delta_nu.is_finite()) {
        return Err(Error::domain(format!(
            "frequency difference {delta_nu} Hz must be positive"
        )));
    }
    Ok(T::one() / delta_nu)
}

/// Evenly spaced delays from `start` to `stop` inclusive.
pub fn delay_grid<T: Scalar>(start: T, stop: T, step: T) -> Result<Vec<T>> {
    if !(step > T::zero()) || !(stop > start) {
        return Err(Error::config(format!(
            "delay range [{start}, {stop}] with step {step} is empty"
        )));
    }
    let n = ((stop - start) / step + T::lit(1e-9)).floor().to_usize().unwrap_or(0) + 1;
    Ok((0..n).map(|k| start + step * T::from_usize_lossy(k)).collect())
}
