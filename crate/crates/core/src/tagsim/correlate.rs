//! Streaming start-stop correlation and coincidence-peak analysis.

use std::collections::VecDeque;
use std::io::Write;

use serde::Serialize;

use super::{Channel, TimeTag};
use crate::converter::eta_from_peak_ratio;
use crate::error::{Error, Result};
use crate::fitkit::{fit_gaussian_feature, GaussianDipFit, Weights};

/// A set of detector channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChannelSet(u8);

impl ChannelSet {
    pub fn new(channels: &[Channel]) -> Self {
        Self(channels.iter().fold(0, |m, c| m | 1 << c.index()))
    }

    pub fn snspds() -> Self {
        Self::new(&[Channel::SnspdA, Channel::SnspdB])
    }

    pub fn apds() -> Self {
        Self::new(&[Channel::ApdA, Channel::ApdB])
    }

    pub fn contains(self, c: Channel) -> bool {
        self.0 & (1 << c.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    fn overlaps(self, other: Self) -> bool {
        self.0 & other.0 != 0
    }
}

/// Counts of `t_b - t_a` in bins of `bin_width` centered on `offsets`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoincidenceHistogram {
    pub bin_width: u64,
    pub offsets: Vec<i64>,
    pub counts: Vec<u64>,
}

impl CoincidenceHistogram {
    fn empty(bin_width: u64, half_bins: i64) -> Self {
        let offsets = (-half_bins..=half_bins).map(|k| k * bin_width as i64).collect();
        Self {
            bin_width,
            offsets,
            counts: vec![0; (2 * half_bins + 1) as usize],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds the counts of a histogram with identical binning.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.bin_width != other.bin_width || self.offsets != other.offsets {
            return Err(Error::usage("cannot merge histograms with different binning"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Sum and bin count of the bins with `|offset - center| <= half_width`.
    pub fn window_sum(&self, center: i64, half_width: u64) -> (u64, usize) {
        self.offsets
            .iter()
            .zip(&self.counts)
            .filter(|(o, _)| (**o - center).unsigned_abs() <= half_width)
            .fold((0, 0), |(s, n), (_, c)| (s + c, n + 1))
    }

    /// Mean counts per bin outside all given windows, and the number of
    /// bins it was taken from.
    pub fn background_outside(&self, windows: &[(i64, u64)]) -> Result<(f64, usize)> {
        let (sum, n) = self
            .offsets
            .iter()
            .zip(&self.counts)
            .filter(|(o, _)| windows.iter().all(|&(c, hw)| (**o - c).unsigned_abs() > hw))
            .fold((0u64, 0usize), |(s, n), (_, c)| (s + c, n + 1));
        if n == 0 {
            return Err(Error::analysis("no sideband bins outside the peak windows"));
        }
        Ok((sum as f64 / n as f64, n))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "offset_ps,count")?;
        for (o, c) in self.offsets.iter().zip(&self.counts) {
            writeln!(out, "{o},{c}")?;
        }
        Ok(())
    }
}

/// Single-pass correlator. Tags must arrive in non-decreasing time order,
/// possibly split across several [`Correlator::feed`] calls.
#[derive(Debug, Clone)]
pub struct Correlator {
    group_a: ChannelSet,
    group_b: ChannelSet,
    half_bins: i64,
    /// Largest `|t_b - t_a|` that can land in a bin.
    reach: u64,
    recent_a: VecDeque<u64>,
    recent_b: VecDeque<u64>,
    last: u64,
    hist: CoincidenceHistogram,
}

impl Correlator {
    /// `window` is rounded to a whole number of bins on each side of zero.
    pub fn new(group_a: ChannelSet, group_b: ChannelSet, window: u64, bin_width: u64) -> Result<Self> {
        if bin_width == 0 || window < bin_width {
            return Err(Error::usage(format!(
                "window {window} ps must be at least the bin width {bin_width} ps (> 0)"
            )));
        }
        if group_a.is_empty() || group_b.is_empty() {
            return Err(Error::usage("channel groups must not be empty"));
        }
        if group_a.overlaps(group_b) {
            return Err(Error::usage("channel groups overlap"));
        }
        let half_bins = ((window as f64 / bin_width as f64).round() as i64).max(1);
        Ok(Self {
            group_a,
            group_b,
            half_bins,
            reach: half_bins as u64 * bin_width + bin_width / 2,
            recent_a: VecDeque::new(),
            recent_b: VecDeque::new(),
            last: 0,
            hist: CoincidenceHistogram::empty(bin_width, half_bins),
        })
    }

    fn record(&mut self, dt: i64) {
        let bw = self.hist.bin_width as i64;
        let k = (dt + bw / 2).div_euclid(bw);
        if k.abs() <= self.half_bins {
            self.hist.counts[(k + self.half_bins) as usize] += 1;
        }
    }

    pub fn push(&mut self, tag: TimeTag) -> Result<()> {
        if tag.time < self.last {
            return Err(Error::usage(format!(
                "tag at {} ps arrives after {} ps",
                tag.time, self.last
            )));
        }
        self.last = tag.time;
        let oldest = tag.time.saturating_sub(self.reach);
        while self.recent_a.front().is_some_and(|&t| t < oldest) {
            self.recent_a.pop_front();
        }
        while self.recent_b.front().is_some_and(|&t| t < oldest) {
            self.recent_b.pop_front();
        }

        if self.group_a.contains(tag.channel) {
            for i in 0..self.recent_b.len() {
                let dt = self.recent_b[i] as i64 - tag.time as i64;
                self.record(dt);
            }
            self.recent_a.push_back(tag.time);
        } else if self.group_b.contains(tag.channel) {
            for i in 0..self.recent_a.len() {
                let dt = tag.time as i64 - self.recent_a[i] as i64;
                self.record(dt);
            }
            self.recent_b.push_back(tag.time);
        }
        Ok(())
    }

    pub fn feed(&mut self, tags: &[TimeTag]) -> Result<()> {
        tags.iter().try_for_each(|&t| self.push(t))
    }

    pub fn histogram(&self) -> &CoincidenceHistogram {
        &self.hist
    }

    pub fn finish(self) -> CoincidenceHistogram {
        self.hist
    }
}

/// Histogram of `t_b - t_a` over a whole time-ordered tag stream.
pub fn correlate(
    tags: &[TimeTag],
    group_a: ChannelSet,
    group_b: ChannelSet,
    window: u64,
    bin_width: u64,
) -> Result<CoincidenceHistogram> {
    let mut c = Correlator::new(group_a, group_b, window, bin_width)?;
    c.feed(tags)?;
    Ok(c.finish())
}

/// Background-subtracted areas of the no-swap (`p1`) and swap (`p2`) peaks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakIntegrals {
    pub p1: f64,
    pub p2: f64,
    pub sigma_p1: f64,
    pub sigma_p2: f64,
    /// Mean accidental counts per bin from the sidebands.
    pub background: f64,
}

pub fn integrate_peaks(h: &CoincidenceHistogram, peak_centers: [i64; 2], half_width: u64) -> Result<PeakIntegrals> {
    let [c1, c2] = peak_centers;
    if (c1 - c2).unsigned_abs() <= 2 * half_width {
        return Err(Error::analysis(format!(
            "peaks at {c1} and {c2} ps overlap with half width {half_width} ps"
        )));
    }
    let (bg, n_bg) = h.background_outside(&[(c1, half_width), (c2, half_width)])?;
    let area = |c| {
        let (sum, n) = h.window_sum(c, half_width);
        let n = n as f64;
        let value = sum as f64 - n * bg;
        // Poisson on the raw sum plus the error of the subtracted floor
        let var = sum as f64 + n * n * bg / n_bg as f64;
        (value, var.sqrt())
    };
    let (p1, sigma_p1) = area(c1);
    let (p2, sigma_p2) = area(c2);
    Ok(PeakIntegrals {
        p1,
        p2,
        sigma_p1,
        sigma_p2,
        background: bg,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaEstimate {
    pub eta: f64,
    pub sigma: f64,
    pub ratio: f64,
}

/// Splitting ratio from the peak ratio, with first-order error propagation.
pub fn estimate_eta(peaks: &PeakIntegrals) -> Result<EtaEstimate> {
    let eta = eta_from_peak_ratio(peaks.p2.max(0.0), peaks.p1)?;
    let ratio = peaks.p2.max(0.0) / peaks.p1;
    let q = ratio.sqrt();
    if q == 0.0 {
        return Ok(EtaEstimate {
            eta,
            sigma: peaks.sigma_p2.max(0.0).sqrt() / peaks.p1.sqrt(),
            ratio,
        });
    }
    let sigma_ratio = ratio * ((peaks.sigma_p1 / peaks.p1).powi(2) + (peaks.sigma_p2 / peaks.p2).powi(2)).sqrt();
    // d eta / d ratio = 1 / (2 q (1 + q)^2)
    let sigma = sigma_ratio / (2.0 * q * (1.0 + q).powi(2));
    Ok(EtaEstimate { eta, sigma, ratio })
}

/// Dip scan before and after subtracting the pooled accidental floor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccidentalCorrection {
    pub delays_s: Vec<f64>,
    pub raw_counts: Vec<f64>,
    pub corrected_counts: Vec<f64>,
    /// Accidentals per bin, pooled over all delays.
    pub background_per_bin: f64,
    pub raw: GaussianDipFit<f64>,
    pub corrected: GaussianDipFit<f64>,
}

/// Fits the coincidence-peak area versus delay with and without the
/// accidental floor. `Weights::Poisson` is evaluated on the raw counts and
/// reused for the corrected fit, so the two fits differ only in baseline
/// and the corrected visibility is never below the raw one.
pub fn accidental_corrected_visibility(
    points: &[(f64, &CoincidenceHistogram)],
    peak_center: i64,
    half_width: u64,
    weights: &Weights<f64>,
) -> Result<AccidentalCorrection> {
    let mut bg_sum = 0.0;
    let mut bg_bins = 0usize;
    let mut raw = Vec::with_capacity(points.len());
    let mut bins = Vec::with_capacity(points.len());
    for (_, h) in points {
        let (bg, n) = h.background_outside(&[(peak_center, half_width)])?;
        bg_sum += bg * n as f64;
        bg_bins += n;
        let (sum, nb) = h.window_sum(peak_center, half_width);
        raw.push(sum as f64);
        bins.push(nb as f64);
    }
    let background = bg_sum / bg_bins.max(1) as f64;
    let corrected: Vec<f64> = raw.iter().zip(&bins).map(|(r, n)| r - n * background).collect();
    let delays: Vec<f64> = points.iter().map(|(d, _)| *d).collect();

    let weights = match weights {
        Weights::Poisson => Weights::Custom(raw.iter().map(|&y| 1.0 / y.max(1.0)).collect()),
        other => other.clone(),
    };
    let raw_fit = fit_gaussian_feature(&delays, &raw, &weights)?;
    let corrected_fit = fit_gaussian_feature(&delays, &corrected, &weights)?;
    Ok(AccidentalCorrection {
        delays_s: delays,
        raw_counts: raw,
        corrected_counts: corrected,
        background_per_bin: background,
        raw: raw_fit,
        corrected: corrected_fit,
    })
}
