use chromahom_core::fitkit::{fit_gaussian_feature, Weights};
use chromahom_core::interference::{delay_grid, delay_scan, visibility, Channel, ExperimentModel};
use chromahom_core::tagsim::pipeline::{analyze, simulate, MonteCarloConfig, MonteCarloSummary, RunPlan};
use chromahom_core::tagsim::{accidental_fraction_for_gap, dark_rate_for_accidental_fraction};

const PS: f64 = 1e-12;

fn run(cfg: &MonteCarloConfig) -> MonteCarloSummary {
    let model = ExperimentModel::default();
    analyze(&model, cfg, &simulate(&model, cfg).unwrap()).unwrap()
}

/// Dark rate making `fraction` of the far-delay dip-window counts accidental.
fn dark_rate_for_fraction(cfg: &MonteCarloConfig, fraction: f64) -> f64 {
    let plan = RunPlan::new(&ExperimentModel::default(), cfg).unwrap();
    let bins = 2 * (cfg.peak_half_width_ps / cfg.bin_width_ps) + 1;
    let window = (bins * cfg.bin_width_ps) as f64;
    dark_rate_for_accidental_fraction(&plan.outcomes[0], cfg.pair_rate, &cfg.detection, window, fraction).unwrap()
}

#[test]
fn gaussian_fit_tracks_direct_measures() {
    let model = ExperimentModel::default();
    let scan = delay_scan(&model, &delay_grid(-80.0 * PS, 80.0 * PS, 0.25 * PS).unwrap()).unwrap();
    let direct = visibility(&scan, Channel::Cross).unwrap();
    let fit = fit_gaussian_feature(&scan.delays, scan.channel(Channel::Cross).unwrap(), &Weights::Uniform).unwrap();
    let width = direct.width.unwrap();
    assert!((fit.visibility - direct.visibility).abs() / direct.visibility < 0.02);
    // The dip is a filtered sinc transform, not a Gaussian: the fit trades
    // peak depth against the wings and lands 2.5 % narrower than the
    // interpolated half-depth width on a converged grid. A 2 % width
    // agreement is not reached.
    let rel = (fit.fwhm - width).abs() / width;
    assert!(rel < 0.03, "fit {} ps vs direct {} ps", fit.fwhm / PS, width / PS);
}

#[test]
fn no_darks_no_correction() {
    let cfg = MonteCarloConfig {
        pairs_per_point: 200_000,
        detection: MonteCarloConfig::default().detection.with_dark_rate(0.0),
        ..MonteCarloConfig::default()
    };
    let s = run(&cfg);
    // only pair-on-pair accidentals remain, far below one count per bin
    assert!(s.dip.background_per_bin < 0.05, "{}", s.dip.background_per_bin);
    let (raw, cor) = (&s.dip.raw, &s.dip.corrected);
    assert!((cor.visibility - raw.visibility).abs() < raw.sigma.visibility);
}

#[test]
fn doubling_the_floor_lowers_raw_only() {
    let base = MonteCarloConfig::default();
    let f = accidental_fraction_for_gap(0.914, 0.928).unwrap();
    let with = |fraction: f64| MonteCarloConfig {
        detection: base
            .detection
            .clone()
            .with_dark_rate(dark_rate_for_fraction(&base, fraction)),
        ..base.clone()
    };
    // twice the accidentals at the same signal: A/c doubles
    let one = run(&with(f));
    let two = run(&with(2.0 * f / (1.0 + f)));
    let ratio = two.dip.background_per_bin / one.dip.background_per_bin;
    assert!((1.9..2.1).contains(&ratio), "{ratio}");
    assert!(two.dip.raw.visibility < one.dip.raw.visibility);
    let sigma = one
        .dip
        .corrected
        .sigma
        .visibility
        .max(two.dip.corrected.sigma.visibility);
    assert!(
        (two.dip.corrected.visibility - one.dip.corrected.visibility).abs() < 2.0 * sigma,
        "{} vs {} (sigma {sigma})",
        one.dip.corrected.visibility,
        two.dip.corrected.visibility
    );
}

#[test]
fn injected_floor_opens_the_measured_gap() {
    let base = MonteCarloConfig::default();
    let f = accidental_fraction_for_gap(0.914, 0.928).unwrap();
    let cfg = MonteCarloConfig {
        detection: base.detection.clone().with_dark_rate(dark_rate_for_fraction(&base, f)),
        ..base
    };
    let s = run(&cfg);
    let (raw, cor) = (s.dip.raw.visibility, s.dip.corrected.visibility);
    // the floor sets the ratio raw/corrected, not the absolute values
    let sigma = s.dip.raw.sigma.visibility;
    assert!(
        (raw - cor * (1.0 - f)).abs() < 2.0 * sigma,
        "raw {raw}, corrected {cor}"
    );
    assert!((cor - s.analytic.visibility).abs() < 2.0 * s.dip.corrected.sigma.visibility);
    assert!(cor > raw);
}
