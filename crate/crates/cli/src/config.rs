//! Scenario configuration: one JSON document, every section optional.
//!
//! Unknown keys are rejected. Quantities accept unit suffixes (see
//! [`crate::units`]); bare numbers are Hz, ps and W.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use chromahom_core::converter::{transition_probability, ConverterModel, ProfileKind, PumpCalibration};
use chromahom_core::fitkit::{FitOptions, Weights};
use chromahom_core::interference::{delay_grid, ExperimentModel, FilterPlacement};
use chromahom_core::spectra::{FrequencyGrid, SpectralModel};
use chromahom_core::tagsim::pipeline::{scan_outcomes, FitWeighting, MonteCarloConfig};
use chromahom_core::tagsim::{accidental_fraction_for_gap, dark_rate_for_accidental_fraction, DetectionConfig};

use crate::units::{Frequency, Power, Time};
use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub model: ModelConfig,
    pub scan: ScanConfig,
    pub fit: FitConfig,
    pub calibration: CalibrationConfig,
    pub monte_carlo: MonteCarloSection,
    pub report: ReportConfig,
    /// Used when `--out` is not given. Not part of the config hash.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    Sinc,
    Gaussian,
    Flat,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub kind: SpectrumKind,
    /// Intensity FWHM; required unless `kind` is `flat`.
    #[serde(default)]
    pub fwhm: Option<Frequency>,
}

impl SpectrumConfig {
    fn new(kind: SpectrumKind, fwhm: f64) -> Self {
        Self {
            kind,
            fwhm: Some(Frequency(fwhm)),
        }
    }

    fn flat() -> Self {
        Self {
            kind: SpectrumKind::Flat,
            fwhm: None,
        }
    }

    fn resolve(&self, field: &str) -> Result<SpectralModel<f64>, CliError> {
        let fwhm = || {
            self.fwhm
                .map(|f| f.0)
                .ok_or_else(|| CliError::Config(format!("{field}.fwhm is required for a {:?} spectrum", self.kind)))
        };
        let model = match self.kind {
            SpectrumKind::Sinc => SpectralModel::sinc(fwhm()?),
            SpectrumKind::Gaussian => SpectralModel::gaussian(fwhm()?),
            SpectrumKind::Flat => SpectralModel::flat(),
        };
        model
            .validate()
            .map_err(|e| CliError::Config(format!("{field}: {e}")))?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Sinc2,
    Gaussian,
    Flat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConverterConfig {
    /// Peak transition probability. Mutually exclusive with `pump_power`.
    pub eta0: Option<f64>,
    /// Circulating pump power, converted to `eta0` with the calibration.
    pub pump_power: Option<Power>,
    pub bandwidth: Frequency,
    pub profile: Profile,
    pub pump_detuning: Frequency,
}

impl Default for ConverterConfig {
    fn default() -> Self {
        Self {
            eta0: None,
            pump_power: None,
            bandwidth: Frequency(110e9),
            profile: Profile::Sinc2,
            pump_detuning: Frequency(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    PreConverter,
    #[default]
    PostConverter,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub points: usize,
    pub span: Frequency,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            points: 4096,
            span: Frequency(2e12),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub source: SpectrumConfig,
    pub converter: ConverterConfig,
    pub telecom_filter: SpectrumConfig,
    pub red_filter: SpectrumConfig,
    pub filter_placement: Placement,
    pub grid: GridConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            source: SpectrumConfig::new(SpectrumKind::Sinc, 75e9),
            converter: ConverterConfig::default(),
            telecom_filter: SpectrumConfig::new(SpectrumKind::Gaussian, 105e9),
            red_filter: SpectrumConfig::flat(),
            filter_placement: Placement::PostConverter,
            grid: GridConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub start: Time,
    pub stop: Time,
    pub step: Time,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            start: Time(-80.0),
            stop: Time(80.0),
            step: Time(0.25),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalyticWeights {
    #[default]
    Uniform,
    Poisson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Weighting of the Gaussian fits to analytic scans.
    pub weights: AnalyticWeights,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        let o = FitOptions::default();
        Self {
            weights: AnalyticWeights::Uniform,
            max_iterations: o.max_iterations,
            tolerance: o.tolerance,
        }
    }
}

impl FitConfig {
    pub fn options(&self) -> FitOptions {
        FitOptions {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
        }
    }

    pub fn weights(&self) -> Weights<f64> {
        match self.weights {
            AnalyticWeights::Uniform => Weights::Uniform,
            AnalyticWeights::Poisson => Weights::Poisson,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    pub p_max: Power,
    pub enhancement: f64,
    /// Points on the emitted eta(P) curve.
    pub samples: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        let cal = PumpCalibration::default();
        Self {
            p_max: Power(cal.p_max),
            enhancement: cal.enhancement,
            // 0.2 W steps at the default P_max
            samples: 746,
        }
    }
}

impl CalibrationConfig {
    pub fn resolve(&self) -> Result<PumpCalibration<f64>, CliError> {
        if self.samples < 2 {
            return Err(CliError::Config("calibration.samples must be at least 2".into()));
        }
        Ok(PumpCalibration::new(self.p_max.0, self.enhancement)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionSection {
    pub eff_snspd: f64,
    pub eff_apd: f64,
    pub collection_red: f64,
    pub collection_telecom: f64,
    pub converter_transmission: f64,
    /// SNSPD A, SNSPD B, APD A, APD B.
    pub dark_rate: [Frequency; 4],
    pub jitter_fwhm: [Time; 4],
    pub splitter_ratio: f64,
}

impl Default for DetectionSection {
    fn default() -> Self {
        let d = DetectionConfig::default();
        Self {
            eff_snspd: d.eff_snspd,
            eff_apd: d.eff_apd,
            collection_red: d.collection_red,
            collection_telecom: d.collection_telecom,
            converter_transmission: d.converter_transmission,
            dark_rate: d.dark_rate.map(Frequency),
            jitter_fwhm: d.jitter_fwhm.map(Time),
            splitter_ratio: d.splitter_ratio,
        }
    }
}

impl DetectionSection {
    fn resolve(&self) -> DetectionConfig {
        DetectionConfig {
            eff_snspd: self.eff_snspd,
            eff_apd: self.eff_apd,
            collection_red: self.collection_red,
            collection_telecom: self.collection_telecom,
            converter_transmission: self.converter_transmission,
            dark_rate: self.dark_rate.map(|f| f.0),
            jitter_fwhm: self.jitter_fwhm.map(|t| t.0),
            splitter_ratio: self.splitter_ratio,
        }
    }
}

/// Replaces the dark rates by the uniform rate whose accidentals turn a dip
/// of visibility `corrected` into `raw` before subtraction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccidentalGap {
    pub raw: f64,
    pub corrected: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSection {
    pub pairs_per_point: u64,
    pub pair_rate: Frequency,
    pub seed: u64,
    pub scan_start: Time,
    pub scan_stop: Time,
    pub scan_step: Time,
    pub calibration_delay: Time,
    pub calibration_eta: f64,
    pub window: Time,
    pub bin_width: Time,
    pub peak_half_width: Time,
    pub fit_weights: FitWeighting,
    pub detection: DetectionSection,
    pub accidental_gap: Option<AccidentalGap>,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        let m = MonteCarloConfig::default();
        Self {
            pairs_per_point: m.pairs_per_point,
            pair_rate: Frequency(m.pair_rate),
            seed: m.seed,
            scan_start: Time(m.scan_start_ps as f64),
            scan_stop: Time(m.scan_stop_ps as f64),
            scan_step: Time(m.scan_step_ps as f64),
            calibration_delay: Time(m.calibration_delay_ps as f64),
            calibration_eta: m.calibration_eta,
            window: Time(m.window_ps as f64),
            bin_width: Time(m.bin_width_ps as f64),
            peak_half_width: Time(m.peak_half_width_ps as f64),
            fit_weights: m.fit_weights,
            detection: DetectionSection::default(),
            accidental_gap: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    /// Include the time-tag Monte Carlo rows.
    pub monte_carlo: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { monte_carlo: true }
    }
}

fn unsigned_ps(t: Time, field: &str) -> Result<u64, CliError> {
    let ps = t.whole_ps(field).map_err(CliError::Config)?;
    u64::try_from(ps).map_err(|_| CliError::Config(format!("{field} must not be negative")))
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// SHA-256 of the canonical JSON form, stamped on every output.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical))
    }

    /// Checks everything a command could need, so no run starts on a bad config.
    pub fn validate(&self) -> Result<(), CliError> {
        let model = self.experiment()?;
        self.delays()?;
        self.calibration.resolve()?;
        let fit = self.fit.options();
        if fit.max_iterations == 0 || fit.tolerance.is_nan() || fit.tolerance <= 0.0 {
            return Err(CliError::Config(
                "fit needs max_iterations > 0 and tolerance > 0".into(),
            ));
        }
        self.monte_carlo(&model)?;
        Ok(())
    }

    pub fn pump_calibration(&self) -> Result<PumpCalibration<f64>, CliError> {
        self.calibration.resolve()
    }

    pub fn eta0(&self) -> Result<f64, CliError> {
        let c = &self.model.converter;
        match (c.eta0, c.pump_power) {
            (Some(_), Some(_)) => Err(CliError::Config(
                "model.converter: give eta0 or pump_power, not both".into(),
            )),
            (Some(eta), None) => Ok(eta),
            (None, Some(p)) => Ok(transition_probability(p.0, &self.pump_calibration()?)?),
            (None, None) => Ok(0.476),
        }
    }

    pub fn experiment(&self) -> Result<ExperimentModel<f64>, CliError> {
        let m = &self.model;
        let c = &m.converter;
        let eta0 = self.eta0()?;
        let converter = match c.profile {
            Profile::Flat => ConverterModel::flat(eta0)?,
            Profile::Sinc2 => ConverterModel::new(eta0, c.bandwidth.0, ProfileKind::Sinc2)?,
            Profile::Gaussian => ConverterModel::new(eta0, c.bandwidth.0, ProfileKind::Gaussian)?,
        }
        .with_pump_detuning(c.pump_detuning.0);
        let model = ExperimentModel {
            source: m.source.resolve("model.source")?,
            converter,
            telecom_filter: m.telecom_filter.resolve("model.telecom_filter")?,
            filter_placement: match m.filter_placement {
                Placement::PreConverter => FilterPlacement::PreConverter,
                Placement::PostConverter => FilterPlacement::PostConverter,
            },
            red_filter: m.red_filter.resolve("model.red_filter")?,
            grid: FrequencyGrid::new(m.grid.points, m.grid.span.0)?,
        };
        model.validate()?;
        Ok(model)
    }

    /// Analytic scan delays in seconds.
    pub fn delays(&self) -> Result<Vec<f64>, CliError> {
        let s = &self.scan;
        Ok(delay_grid(s.start.seconds(), s.stop.seconds(), s.step.seconds())?)
    }

    pub fn monte_carlo(&self, model: &ExperimentModel<f64>) -> Result<MonteCarloConfig, CliError> {
        let s = &self.monte_carlo;
        let mut cfg = MonteCarloConfig {
            pairs_per_point: s.pairs_per_point,
            pair_rate: s.pair_rate.0,
            detection: s.detection.resolve(),
            seed: s.seed,
            scan_start_ps: s
                .scan_start
                .whole_ps("monte_carlo.scan_start")
                .map_err(CliError::Config)?,
            scan_stop_ps: s
                .scan_stop
                .whole_ps("monte_carlo.scan_stop")
                .map_err(CliError::Config)?,
            scan_step_ps: s
                .scan_step
                .whole_ps("monte_carlo.scan_step")
                .map_err(CliError::Config)?,
            calibration_delay_ps: s
                .calibration_delay
                .whole_ps("monte_carlo.calibration_delay")
                .map_err(CliError::Config)?,
            calibration_eta: s.calibration_eta,
            window_ps: unsigned_ps(s.window, "monte_carlo.window")?,
            bin_width_ps: unsigned_ps(s.bin_width, "monte_carlo.bin_width")?,
            peak_half_width_ps: unsigned_ps(s.peak_half_width, "monte_carlo.peak_half_width")?,
            fit_weights: s.fit_weights,
        };
        cfg.validate()?;
        if let Some(gap) = &s.accidental_gap {
            let target = accidental_fraction_for_gap(gap.raw, gap.corrected)?;
            // far-delay baseline of the scan and the dip integration window
            let far = scan_outcomes(model, &cfg.scan_delays_ps())?[0];
            let bins = 2 * (cfg.peak_half_width_ps / cfg.bin_width_ps) + 1;
            let window = (bins * cfg.bin_width_ps) as f64;
            let dark = dark_rate_for_accidental_fraction(&far, cfg.pair_rate, &cfg.detection, window, target)
                .map_err(|e| CliError::Config(format!("monte_carlo.accidental_gap: {e}")))?;
            cfg.detection.dark_rate = [dark; 4];
            cfg.validate()?;
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_to_reference_model() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.experiment().unwrap(), ExperimentModel::default());
        assert_eq!(
            cfg.monte_carlo(&ExperimentModel::default()).unwrap(),
            MonteCarloConfig::default()
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<ScenarioConfig>(r#"{"model": {"sauce": {}}}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"), "{err}");
        assert!(serde_json::from_str::<ScenarioConfig>(r#"{"scan": {"start": "-5ps", "stride": 1}}"#).is_err());
    }

    #[test]
    fn suffixed_quantities() {
        let cfg: ScenarioConfig = serde_json::from_str(
            r#"{"model": {"source": {"kind": "gaussian", "fwhm": "0.1THz"}},
                "scan": {"start": "-0.05ns", "stop": "50ps", "step": "500fs"}}"#,
        )
        .unwrap();
        let m = cfg.experiment().unwrap();
        assert_eq!(m.source, SpectralModel::gaussian(100e9));
        let d = cfg.delays().unwrap();
        assert_eq!(d.len(), 201);
        assert!((d[0] + 50e-12).abs() < 1e-24);
    }

    #[test]
    fn pump_power_sets_eta() {
        let cfg: ScenarioConfig = serde_json::from_str(r#"{"model": {"converter": {"pump_power": "35W"}}}"#).unwrap();
        assert!((cfg.eta0().unwrap() - 0.47592).abs() < 5e-6);
        let both: ScenarioConfig =
            serde_json::from_str(r#"{"model": {"converter": {"pump_power": "35W", "eta0": 0.5}}}"#).unwrap();
        assert!(matches!(both.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for text in [
            r#"{"model": {"converter": {"eta0": 1.5}}}"#,
            r#"{"model": {"source": {"kind": "sinc"}}}"#,
            r#"{"scan": {"step": 0}}"#,
            r#"{"monte_carlo": {"bin_width": "2.5ps"}}"#,
            r#"{"monte_carlo": {"window": "-1ns"}}"#,
            r#"{"calibration": {"p_max": 0}}"#,
        ] {
            let cfg: ScenarioConfig = serde_json::from_str(text).unwrap();
            assert!(matches!(cfg.validate(), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn hash_tracks_content_not_output_dir() {
        let a = ScenarioConfig::default();
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.monte_carlo.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn accidental_gap_sets_uniform_dark_rate() {
        let cfg: ScenarioConfig =
            serde_json::from_str(r#"{"monte_carlo": {"accidental_gap": {"raw": 0.914, "corrected": 0.928}}}"#).unwrap();
        let mc = cfg.monte_carlo(&cfg.experiment().unwrap()).unwrap();
        let d = mc.detection.dark_rate;
        assert!(d[0] > 1e3 && d.iter().all(|&x| x == d[0]), "{d:?}");
    }
}
