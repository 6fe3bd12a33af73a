//! End-to-end Monte Carlo: analytic outcome probabilities per delay, tag
//! generation, correlation, peak-ratio calibration and the dip fit.
//!
//! Every delay point draws from its own ChaCha stream of the configured
//! seed, so points can run in any order or in parallel (and in separate
//! processes) and still give identical tags.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::correlate::{
    accidental_corrected_visibility, correlate, estimate_eta, integrate_peaks, AccidentalCorrection, ChannelSet,
    CoincidenceHistogram, EtaEstimate, PeakIntegrals,
};
use super::{generate_run_with, DetectionConfig, OutcomeDistribution, PairSource, TimeTag};
use crate::error::{Error, Result};
use crate::fitkit::{fit_gaussian_feature, GaussianDipFit, Weights};
use crate::interference::{delay_scan, path_probabilities, ExperimentModel};

/// Stream id of the large-delay calibration run.
pub const CALIBRATION_STREAM: u64 = u64::MAX;

const PS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitWeighting {
    #[default]
    Poisson,
    Uniform,
}

impl FitWeighting {
    pub fn weights(self) -> Weights<f64> {
        match self {
            FitWeighting::Poisson => Weights::Poisson,
            FitWeighting::Uniform => Weights::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloConfig {
    /// Generated pairs per delay point, including the calibration run.
    pub pairs_per_point: u64,
    /// Pairs per second; sets the run duration together with the pair count.
    pub pair_rate: f64,
    pub detection: DetectionConfig,
    pub seed: u64,
    pub scan_start_ps: i64,
    pub scan_stop_ps: i64,
    pub scan_step_ps: i64,
    /// Arm delay of the calibration run, far outside the dip.
    pub calibration_delay_ps: i64,
    /// Frequency-flat splitting ratio used for the calibration run.
    pub calibration_eta: f64,
    pub window_ps: u64,
    pub bin_width_ps: u64,
    pub peak_half_width_ps: u64,
    pub fit_weights: FitWeighting,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            pairs_per_point: 1_000_000,
            pair_rate: 1e6,
            detection: DetectionConfig::default(),
            seed: 1,
            scan_start_ps: -40,
            scan_stop_ps: 40,
            scan_step_ps: 2,
            calibration_delay_ps: 500,
            calibration_eta: 0.476,
            window_ps: 2000,
            bin_width_ps: 10,
            peak_half_width_ps: 200,
            fit_weights: FitWeighting::Poisson,
        }
    }
}

impl MonteCarloConfig {
    pub fn validate(&self) -> Result<()> {
        self.detection.validate()?;
        if self.scan_step_ps <= 0 || self.scan_stop_ps <= self.scan_start_ps {
            return Err(Error::config(format!(
                "scan [{}, {}] ps with step {} ps is empty",
                self.scan_start_ps, self.scan_stop_ps, self.scan_step_ps
            )));
        }
        if !(0.0..1.0).contains(&self.calibration_eta) || self.calibration_eta == 0.0 {
            return Err(Error::config(format!(
                "calibration eta {} outside (0, 1)",
                self.calibration_eta
            )));
        }
        if self.calibration_delay_ps.unsigned_abs() <= self.peak_half_width_ps {
            return Err(Error::config("calibration peaks at +/- delay overlap"));
        }
        if self.calibration_delay_ps.unsigned_abs() + self.peak_half_width_ps >= self.window_ps {
            return Err(Error::config(
                "correlation window leaves no sidebands around the calibration peaks",
            ));
        }
        if self.peak_half_width_ps >= self.window_ps {
            return Err(Error::config(
                "correlation window leaves no sidebands around the dip peak",
            ));
        }
        self.source(0).validate()
    }

    pub fn scan_delays_ps(&self) -> Vec<i64> {
        (self.scan_start_ps..=self.scan_stop_ps)
            .step_by(self.scan_step_ps as usize)
            .collect()
    }

    pub fn source(&self, arm_delay: i64) -> PairSource {
        PairSource {
            pair_rate: self.pair_rate,
            duration: self.pairs_per_point as f64 / self.pair_rate,
            arm_delay,
        }
    }

    fn correlate(&self, tags: &[TimeTag]) -> Result<CoincidenceHistogram> {
        correlate(
            tags,
            ChannelSet::snspds(),
            ChannelSet::apds(),
            self.window_ps,
            self.bin_width_ps,
        )
    }
}

/// Outcome distributions of the model at each delay (ps).
pub fn scan_outcomes(model: &ExperimentModel<f64>, delays_ps: &[i64]) -> Result<Vec<OutcomeDistribution>> {
    let taus: Vec<f64> = delays_ps.iter().map(|&d| d as f64 * PS).collect();
    let scan = delay_scan(model, &taus)?;
    let paths = path_probabilities(model)?;
    let swap_fraction = paths.swap / (paths.swap + paths.no_swap);
    let (c, t, r) = (
        scan.p_cross.expect("full scan"),
        scan.p_tt.expect("full scan"),
        scan.p_rr.expect("full scan"),
    );
    Ok((0..taus.len())
        .map(|k| OutcomeDistribution {
            cross: c[k],
            both_telecom: t[k],
            both_red: r[k],
            swap_fraction,
        })
        .collect())
}

/// Far-delay outcomes of a frequency-flat converter with splitting ratio `eta`.
pub fn calibration_outcomes(eta: f64) -> OutcomeDistribution {
    let no_swap = (1.0 - eta).powi(2);
    let swap = eta * eta;
    OutcomeDistribution {
        cross: no_swap + swap,
        both_telecom: eta * (1.0 - eta),
        both_red: eta * (1.0 - eta),
        swap_fraction: swap / (no_swap + swap),
    }
}

/// Tags of one run drawn from stream `stream` of `seed`.
pub fn simulate_point(
    outcomes: &OutcomeDistribution,
    source: &PairSource,
    detection: &DetectionConfig,
    seed: u64,
    stream: u64,
) -> Result<Vec<TimeTag>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    generate_run_with(outcomes, source, detection, &mut rng)
}

/// Generated runs before correlation: the scan points plus the calibration run.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub delays_ps: Vec<i64>,
    pub outcomes: Vec<OutcomeDistribution>,
    pub calibration: OutcomeDistribution,
}

impl RunPlan {
    pub fn new(model: &ExperimentModel<f64>, cfg: &MonteCarloConfig) -> Result<Self> {
        cfg.validate()?;
        let delays_ps = cfg.scan_delays_ps();
        let outcomes = scan_outcomes(model, &delays_ps)?;
        Ok(Self {
            delays_ps,
            outcomes,
            calibration: calibration_outcomes(cfg.calibration_eta),
        })
    }

    pub fn point_tags(&self, k: usize, cfg: &MonteCarloConfig) -> Result<Vec<TimeTag>> {
        let source = cfg.source(self.delays_ps[k]);
        simulate_point(&self.outcomes[k], &source, &cfg.detection, cfg.seed, k as u64)
    }

    pub fn calibration_tags(&self, cfg: &MonteCarloConfig) -> Result<Vec<TimeTag>> {
        let source = cfg.source(cfg.calibration_delay_ps);
        simulate_point(&self.calibration, &source, &cfg.detection, cfg.seed, CALIBRATION_STREAM)
    }
}

/// Correlated histograms of every run.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloHistograms {
    pub delays_ps: Vec<i64>,
    pub points: Vec<CoincidenceHistogram>,
    pub calibration: CoincidenceHistogram,
}

impl MonteCarloHistograms {
    /// Correlates tag streams already generated (or read back from disk).
    pub fn from_tags(
        cfg: &MonteCarloConfig,
        delays_ps: Vec<i64>,
        points: &[Vec<TimeTag>],
        calibration: &[TimeTag],
    ) -> Result<Self> {
        let points = points.par_iter().map(|t| cfg.correlate(t)).collect::<Result<_>>()?;
        Ok(Self {
            delays_ps,
            points,
            calibration: cfg.correlate(calibration)?,
        })
    }
}

/// Generates and correlates every run, keeping only the histograms.
pub fn simulate(model: &ExperimentModel<f64>, cfg: &MonteCarloConfig) -> Result<MonteCarloHistograms> {
    let plan = RunPlan::new(model, cfg)?;
    let points = (0..plan.delays_ps.len())
        .into_par_iter()
        .map(|k| cfg.correlate(&plan.point_tags(k, cfg)?))
        .collect::<Result<Vec<_>>>()?;
    let calibration = cfg.correlate(&plan.calibration_tags(cfg)?)?;
    Ok(MonteCarloHistograms {
        delays_ps: plan.delays_ps,
        points,
        calibration,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub configured_eta: f64,
    pub peaks: PeakIntegrals,
    pub eta: EtaEstimate,
    pub dip: AccidentalCorrection,
    /// Fit of the analytic cross-color probability at the same delays,
    /// weighted like the counts.
    pub analytic: GaussianDipFit<f64>,
}

pub fn analyze(
    model: &ExperimentModel<f64>,
    cfg: &MonteCarloConfig,
    hist: &MonteCarloHistograms,
) -> Result<MonteCarloSummary> {
    let d = cfg.calibration_delay_ps;
    // no-swap pairs sit at t_apd - t_snspd = -d, swapped ones at +d
    let peaks = integrate_peaks(&hist.calibration, [-d, d], cfg.peak_half_width_ps)?;
    let eta = estimate_eta(&peaks)?;

    let points: Vec<(f64, &CoincidenceHistogram)> = hist
        .delays_ps
        .iter()
        .map(|&t| t as f64 * PS)
        .zip(&hist.points)
        .collect();
    let dip = accidental_corrected_visibility(&points, 0, cfg.peak_half_width_ps, &cfg.fit_weights.weights())?;

    let taus: Vec<f64> = hist.delays_ps.iter().map(|&t| t as f64 * PS).collect();
    let p_cross = delay_scan(model, &taus)?.p_cross.expect("full scan");
    // same weighting as the counts (1/y is scale-free), since the dip is not exactly Gaussian
    let weights = match cfg.fit_weights {
        FitWeighting::Poisson => Weights::Custom(p_cross.iter().map(|p| 1.0 / p).collect()),
        FitWeighting::Uniform => Weights::Uniform,
    };
    let analytic = fit_gaussian_feature(&taus, &p_cross, &weights)?;

    Ok(MonteCarloSummary {
        configured_eta: cfg.calibration_eta,
        peaks,
        eta,
        dip,
        analytic,
    })
}
