//! Monte Carlo time-tags for the four-detector setup and their correlation.
//!
//! Red output photons go to two APDs and telecom output photons to two
//! SNSPDs, each color behind its own fiber splitter. Time is integer
//! picoseconds. This module works in `f64` only: counting statistics and
//! tag times gain nothing from a generic scalar.

pub mod correlate;
pub mod io;
pub mod pipeline;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use correlate::{
    accidental_corrected_visibility, correlate, estimate_eta, integrate_peaks, AccidentalCorrection, ChannelSet,
    CoincidenceHistogram, Correlator, EtaEstimate, PeakIntegrals,
};

/// FWHM of a Gaussian in units of its standard deviation.
const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Detector channel. The discriminant is the on-disk channel byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Channel {
    SnspdA = 0,
    SnspdB = 1,
    ApdA = 2,
    ApdB = 3,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::SnspdA, Channel::SnspdB, Channel::ApdA, Channel::ApdB];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: u8) -> Result<Self> {
        Self::ALL
            .get(i as usize)
            .copied()
            .ok_or_else(|| Error::Format(format!("unknown channel {i}")))
    }

    pub fn is_snspd(self) -> bool {
        matches!(self, Channel::SnspdA | Channel::SnspdB)
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::SnspdA => "SNSPD_A",
            Channel::SnspdB => "SNSPD_B",
            Channel::ApdA => "APD_A",
            Channel::ApdB => "APD_B",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(i) = s.parse::<u8>() {
            return Self::from_index(i);
        }
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Format(format!("unknown channel {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeTag {
    /// Picoseconds since the start of the run.
    pub time: u64,
    pub channel: Channel,
}

/// Losses, noise and timing of the detection chain.
///
/// Dark rates and jitters are indexed by [`Channel::index`]. Their defaults
/// are plausible placeholders, not measured values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionConfig {
    pub eff_snspd: f64,
    pub eff_apd: f64,
    pub collection_red: f64,
    pub collection_telecom: f64,
    /// Overall converter transmission, taken as the pair-level product:
    /// each photon survives with its square root.
    pub converter_transmission: f64,
    /// Counts per second.
    pub dark_rate: [f64; 4],
    /// Picoseconds.
    pub jitter_fwhm: [f64; 4],
    /// Fraction routed to the `A` detector of each color.
    pub splitter_ratio: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            eff_snspd: 0.90,
            eff_apd: 0.35,
            collection_red: 0.57,
            collection_telecom: 0.33,
            converter_transmission: 0.46,
            dark_rate: [100.0, 100.0, 500.0, 500.0],
            jitter_fwhm: [30.0, 30.0, 50.0, 50.0],
            splitter_ratio: 0.5,
        }
    }
}

impl DetectionConfig {
    /// Lossless, noiseless, jitter-free detection.
    pub fn ideal() -> Self {
        Self {
            eff_snspd: 1.0,
            eff_apd: 1.0,
            collection_red: 1.0,
            collection_telecom: 1.0,
            converter_transmission: 1.0,
            dark_rate: [0.0; 4],
            jitter_fwhm: [0.0; 4],
            splitter_ratio: 0.5,
        }
    }

    pub fn with_dark_rate(mut self, rate: f64) -> Self {
        self.dark_rate = [rate; 4];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("eff_snspd", self.eff_snspd),
            ("eff_apd", self.eff_apd),
            ("collection_red", self.collection_red),
            ("collection_telecom", self.collection_telecom),
            ("converter_transmission", self.converter_transmission),
            ("splitter_ratio", self.splitter_ratio),
        ];
        for (name, v) in probs {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} = {v} outside [0, 1]")));
            }
        }
        for (c, (&d, &j)) in Channel::ALL.iter().zip(self.dark_rate.iter().zip(&self.jitter_fwhm)) {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::config(format!("dark rate {d} on {c} must be finite and >= 0")));
            }
            if !(j >= 0.0 && j.is_finite()) {
                return Err(Error::config(format!("jitter {j} ps on {c} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    fn detector_efficiency(&self, telecom_out: bool) -> f64 {
        if telecom_out {
            self.eff_snspd
        } else {
            self.eff_apd
        }
    }

    /// Probability that one photon is detected, given its input and output colors.
    pub fn photon_detection_probability(&self, red_in: bool, telecom_out: bool) -> f64 {
        let collection = if red_in {
            self.collection_red
        } else {
            self.collection_telecom
        };
        collection * self.converter_transmission.sqrt() * self.detector_efficiency(telecom_out)
    }
}

/// Per-pair outcome probabilities at one delay. Whatever is left to one is
/// a lost pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub cross: f64,
    pub both_telecom: f64,
    pub both_red: f64,
    /// Share of cross-color pairs that took the swap path.
    pub swap_fraction: f64,
}

impl OutcomeDistribution {
    pub fn cross_only() -> Self {
        Self {
            cross: 1.0,
            both_telecom: 0.0,
            both_red: 0.0,
            swap_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = [self.cross, self.both_telecom, self.both_red, self.swap_fraction];
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::config(format!("outcome probabilities {p:?} outside [0, 1]")));
        }
        let total = self.cross + self.both_telecom + self.both_red;
        if total > 1.0 + 1e-12 {
            return Err(Error::config(format!("outcome probabilities sum to {total} > 1")));
        }
        Ok(())
    }
}

/// Pair emission parameters for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSource {
    /// Pairs per second.
    pub pair_rate: f64,
    /// Seconds.
    pub duration: f64,
    /// Extra delay on the telecom input photon, ps. No-swap pairs then show
    /// at `t_red - t_telecom = -arm_delay`, swapped pairs at `+arm_delay`.
    pub arm_delay: i64,
}

/// Fewest expected pairs accepted for a run.
pub const MIN_EXPECTED_PAIRS: f64 = 100.0;

impl PairSource {
    pub fn validate(&self) -> Result<()> {
        if !(self.pair_rate > 0.0 && self.pair_rate.is_finite() && self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::config(format!(
                "pair rate {} /s and duration {} s must be positive",
                self.pair_rate, self.duration
            )));
        }
        let expected = self.pair_rate * self.duration;
        if expected < MIN_EXPECTED_PAIRS {
            return Err(Error::config(format!(
                "{expected} expected pairs is below the minimum of {MIN_EXPECTED_PAIRS}"
            )));
        }
        Ok(())
    }

    pub fn duration_ps(&self) -> u64 {
        (self.duration * 1e12).round() as u64
    }
}

/// A photon on its way to the detectors.
#[derive(Clone, Copy)]
struct Photon {
    red_in: bool,
    telecom_out: bool,
    /// Arrival time before jitter, ps.
    time: f64,
}

struct Jitter {
    normals: [Option<Normal<f64>>; 4],
}

impl Jitter {
    fn new(cfg: &DetectionConfig) -> Self {
        let normals = cfg
            .jitter_fwhm
            .map(|fw| (fw > 0.0).then(|| Normal::new(0.0, fw / FWHM_PER_SIGMA).expect("validated jitter")));
        Self { normals }
    }

    fn sample<R: Rng>(&self, ch: Channel, rng: &mut R) -> f64 {
        self.normals[ch.index()].map_or(0.0, |n| n.sample(rng))
    }
}

/// Generates one run with an RNG seeded from `seed`.
pub fn generate_run(
    outcomes: &OutcomeDistribution,
    source: &PairSource,
    config: &DetectionConfig,
    seed: u64,
) -> Result<Vec<TimeTag>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_run_with(outcomes, source, config, &mut rng)
}

/// Generates tags sorted by time (ties broken by channel).
pub fn generate_run_with<R: Rng>(
    outcomes: &OutcomeDistribution,
    source: &PairSource,
    config: &DetectionConfig,
    rng: &mut R,
) -> Result<Vec<TimeTag>> {
    outcomes.validate()?;
    source.validate()?;
    config.validate()?;

    let end = source.duration * 1e12;
    let gap = Exp::new(source.pair_rate * 1e-12).map_err(|e| Error::config(e.to_string()))?;
    let jitter = Jitter::new(config);
    // keep jittered and delayed times away from zero
    let offset =
        source.arm_delay.unsigned_abs() as f64 + 10.0 * config.jitter_fwhm.iter().fold(0.0_f64, |m, &j| m.max(j));
    let delay = source.arm_delay as f64;
    let mut tags = Vec::with_capacity((source.pair_rate * source.duration * 0.5) as usize + 16);

    let p_cross = outcomes.cross;
    let p_tt = p_cross + outcomes.both_telecom;
    let p_rr = p_tt + outcomes.both_red;

    let mut t = 0.0;
    loop {
        t += gap.sample(rng);
        if t >= end {
            break;
        }
        let u: f64 = rng.random();
        // output color (telecom?) of the red-input and the telecom-input photon
        let (red_to_telecom, telecom_stays) = if u < p_cross {
            let swap = rng.random::<f64>() < outcomes.swap_fraction;
            (swap, !swap)
        } else if u < p_tt {
            (true, true)
        } else if u < p_rr {
            (false, false)
        } else {
            continue;
        };
        // the telecom-input photon carries the arm delay
        let pair = [
            Photon {
                red_in: true,
                telecom_out: red_to_telecom,
                time: t + offset,
            },
            Photon {
                red_in: false,
                telecom_out: telecom_stays,
                time: t + offset + delay,
            },
        ];
        let mut hits: [Option<TimeTag>; 2] = [None, None];
        for (slot, ph) in hits.iter_mut().zip(pair) {
            if rng.random::<f64>() >= config.photon_detection_probability(ph.red_in, ph.telecom_out) {
                continue;
            }
            let to_a = rng.random::<f64>() < config.splitter_ratio;
            let channel = match (ph.telecom_out, to_a) {
                (true, true) => Channel::SnspdA,
                (true, false) => Channel::SnspdB,
                (false, true) => Channel::ApdA,
                (false, false) => Channel::ApdB,
            };
            let time = (ph.time + jitter.sample(channel, rng)).round().max(0.0) as u64;
            *slot = Some(TimeTag { time, channel });
        }
        match hits {
            // no photon-number resolution: one click per detector
            [Some(a), Some(b)] if a.channel == b.channel => tags.push(a.min(b)),
            _ => tags.extend(hits.into_iter().flatten()),
        }
    }

    let span = end + 2.0 * offset;
    for ch in Channel::ALL {
        let rate = config.dark_rate[ch.index()];
        if rate == 0.0 {
            continue;
        }
        let n = Poisson::new(rate * span * 1e-12)
            .map_err(|e| Error::config(e.to_string()))?
            .sample(rng) as u64;
        for _ in 0..n {
            let time = (rng.random::<f64>() * span) as u64;
            tags.push(TimeTag { time, channel: ch });
        }
    }

    tags.sort_unstable();
    Ok(tags)
}

/// Expected tag rates per group (SNSPD, APD) and the true cross-color
/// coincidence rate, all per second, excluding dark counts.
pub fn expected_rates(outcomes: &OutcomeDistribution, pair_rate: f64, config: &DetectionConfig) -> (f64, f64, f64) {
    let q = |red_in, telecom_out| config.photon_detection_probability(red_in, telecom_out);
    let split_same = config.splitter_ratio.powi(2) + (1.0 - config.splitter_ratio).powi(2);
    // two photons in one group: clicks = q1 + q2 - P(both on one detector)
    let two = |q1: f64, q2: f64| q1 + q2 - split_same * q1 * q2;

    let s = outcomes.swap_fraction;
    let (no_swap, swap) = (outcomes.cross * (1.0 - s), outcomes.cross * s);
    let snspd =
        no_swap * q(false, true) + swap * q(true, true) + outcomes.both_telecom * two(q(true, true), q(false, true));
    let apd =
        no_swap * q(true, false) + swap * q(false, false) + outcomes.both_red * two(q(true, false), q(false, false));
    let coincidences = no_swap * q(true, false) * q(false, true) + swap * q(true, true) * q(false, false);
    (snspd * pair_rate, apd * pair_rate, coincidences * pair_rate)
}

/// Common per-channel dark rate that makes accidentals a fraction
/// `target` of the counts in a coincidence window of `window_ps`, at the
/// far-delay baseline described by `outcomes`.
pub fn dark_rate_for_accidental_fraction(
    outcomes: &OutcomeDistribution,
    pair_rate: f64,
    config: &DetectionConfig,
    window_ps: f64,
    target: f64,
) -> Result<f64> {
    if !(0.0 < target && target < 1.0) || !(window_ps > 0.0) {
        return Err(Error::config(format!(
            "accidental fraction {target} must lie in (0, 1) with a positive window"
        )));
    }
    let (sa, sb, c) = expected_rates(outcomes, pair_rate, config);
    let w = window_ps * 1e-12;
    // accidentals A = (sa + 2d)(sb + 2d) w and A / (A + c) = target
    let needed = target / (1.0 - target) * c / w;
    let floor = sa * sb;
    if needed < floor {
        return Err(Error::Estimation(format!(
            "signal singles alone give an accidental fraction above {target}"
        )));
    }
    let (a, b, k) = (4.0, 2.0 * (sa + sb), floor - needed);
    Ok((-b + (b * b - 4.0 * a * k).sqrt()) / (2.0 * a))
}

/// Share of the baseline that must be accidental for a dip of true
/// visibility `corrected` to read `raw` before subtraction.
pub fn accidental_fraction_for_gap(raw: f64, corrected: f64) -> Result<f64> {
    if !(0.0 < raw && raw < corrected && corrected <= 1.0) {
        return Err(Error::config(format!(
            "need 0 < raw ({raw}) < corrected ({corrected}) <= 1"
        )));
    }
    Ok(1.0 - raw / corrected)
}
