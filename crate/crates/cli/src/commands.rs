use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use chromahom_core::converter::{
    balance_pump_power, calibration_curve, peak_ratio_for_eta, transition_probability, write_calibration_csv,
};
use chromahom_core::fitkit::{fit_gaussian_feature_with, GaussianDipFit};
use chromahom_core::fockcore::max_visibility_bound;
use chromahom_core::interference::{beat_note_resolution, delay_scan, visibility, Channel, DelayScan, ExperimentModel};
use chromahom_core::tagsim::io::{read_binary, write_binary};
use chromahom_core::tagsim::pipeline::{
    analyze, simulate, MonteCarloConfig, MonteCarloHistograms, MonteCarloSummary, RunPlan,
};

use crate::config::ScenarioConfig;
use crate::output::OutputDir;
use crate::CliError;

pub const TAG_DIR: &str = "tags";
const MANIFEST: &str = "manifest.json";
const PS: f64 = 1e-12;

pub struct Context {
    pub cfg: ScenarioConfig,
    pub model: ExperimentModel<f64>,
    pub out: OutputDir,
}

impl Context {
    pub fn new(cfg: ScenarioConfig, dir: PathBuf) -> Result<Self, CliError> {
        let model = cfg.experiment()?;
        let out = OutputDir::new(dir, cfg.hash())?;
        Ok(Self { cfg, model, out })
    }

    fn monte_carlo(&self) -> Result<MonteCarloConfig, CliError> {
        self.cfg.monte_carlo(&self.model)
    }
}

#[derive(Debug, Serialize)]
struct FeatureSummary {
    visibility: f64,
    fwhm_ps: f64,
    location_ps: f64,
    baseline: f64,
    fit: GaussianDipFit<f64>,
}

fn feature(ctx: &Context, scan: &DelayScan<f64>, ch: Channel) -> Result<FeatureSummary, CliError> {
    let m = visibility(scan, ch)?;
    let fit = fit_gaussian_feature_with(
        &scan.delays,
        scan.channel(ch)?,
        &ctx.cfg.fit.weights(),
        &ctx.cfg.fit.options(),
    )?;
    Ok(FeatureSummary {
        visibility: m.visibility,
        fwhm_ps: m.width.map_or(0.0, |w| w / PS),
        location_ps: m.location / PS,
        baseline: m.baseline,
        fit,
    })
}

fn write_scan(ctx: &Context, name: &str, scan: &DelayScan<f64>, channels: &[Channel]) -> Result<(), CliError> {
    let cols = channels
        .iter()
        .map(|&c| scan.channel(c))
        .collect::<Result<Vec<_>, _>>()?;
    ctx.out.csv(name, |w| {
        write!(w, "delay_ps")?;
        for c in channels {
            write!(w, ",p_{}", c.name())?;
        }
        writeln!(w)?;
        for (k, tau) in scan.delays.iter().enumerate() {
            write!(w, "{}", tau / PS)?;
            for col in &cols {
                write!(w, ",{}", col[k])?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;
    Ok(())
}

#[derive(Serialize)]
struct DipSummary {
    eta0: f64,
    eta_effective: f64,
    /// Single-mode bound `2 t^2 r^2 / (t^4 + r^4)` at `eta0`.
    visibility_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cross: Option<FeatureSummary>,
    telecom_telecom: FeatureSummary,
    red_red: FeatureSummary,
}

fn analytic(ctx: &Context, with_dip: bool) -> Result<(DelayScan<f64>, DipSummary), CliError> {
    let scan = delay_scan(&ctx.model, &ctx.cfg.delays()?)?;
    let summary = DipSummary {
        eta0: ctx.model.converter.eta0,
        eta_effective: ctx.model.effective_transition_probability()?,
        visibility_bound: max_visibility_bound(ctx.model.converter.eta0)?,
        cross: with_dip.then(|| feature(ctx, &scan, Channel::Cross)).transpose()?,
        telecom_telecom: feature(ctx, &scan, Channel::TelecomTelecom)?,
        red_red: feature(ctx, &scan, Channel::RedRed)?,
    };
    Ok((scan, summary))
}

pub fn dip(ctx: &Context) -> Result<(), CliError> {
    let (scan, summary) = analytic(ctx, true)?;
    write_scan(
        ctx,
        "scan.csv",
        &scan,
        &[Channel::Cross, Channel::TelecomTelecom, Channel::RedRed],
    )?;
    ctx.out.json("dip_summary.json", &summary)?;
    Ok(())
}

pub fn antidip(ctx: &Context) -> Result<(), CliError> {
    let (scan, summary) = analytic(ctx, false)?;
    write_scan(ctx, "antidip.csv", &scan, &[Channel::TelecomTelecom, Channel::RedRed])?;
    ctx.out.json("antidip_summary.json", &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct CalibrationSummary {
    p_max_w: f64,
    enhancement: f64,
    /// Circulating power for a 50:50 splitting ratio.
    balanced_power_w: f64,
    eta0: f64,
    power_for_eta0_w: f64,
    /// Largest `|eta(balance(eta)) - eta|` over the emitted curve.
    round_trip_error: f64,
}

pub fn calibrate(ctx: &Context) -> Result<(), CliError> {
    let cal = ctx.cfg.pump_calibration()?;
    let curve = calibration_curve(&cal, ctx.cfg.calibration.samples)?;
    let mut round_trip = 0.0_f64;
    for &(_, eta) in &curve {
        let back = transition_probability(balance_pump_power(eta, &cal)?, &cal)?;
        round_trip = round_trip.max((back - eta).abs());
    }
    ctx.out
        .csv("calibration.csv", |w| Ok(write_calibration_csv(&curve, w)?))?;
    ctx.out.csv("peak_ratio.csv", |w| {
        writeln!(w, "eta,p2_over_p1")?;
        for k in 0..=95 {
            let eta = k as f64 / 100.0;
            writeln!(w, "{eta},{}", peak_ratio_for_eta(eta)?)?;
        }
        Ok(())
    })?;
    let eta0 = ctx.model.converter.eta0;
    ctx.out.json(
        "calibration_summary.json",
        &CalibrationSummary {
            p_max_w: cal.p_max,
            enhancement: cal.enhancement,
            balanced_power_w: balance_pump_power(0.5, &cal)?,
            eta0,
            power_for_eta0_w: balance_pump_power(eta0, &cal)?,
            round_trip_error: round_trip,
        },
    )?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct TagManifest {
    config_sha256: String,
    delays_ps: Vec<i64>,
    points: Vec<String>,
    calibration: String,
    tag_counts: Vec<usize>,
}

fn point_file(k: usize) -> String {
    format!("point_{k:03}.chtg")
}

pub fn timetags(ctx: &Context) -> Result<(), CliError> {
    let mc = ctx.monte_carlo()?;
    let plan = RunPlan::new(&ctx.model, &mc)?;
    let write = |name: &str, tags: &[_]| {
        ctx.out
            .write_with(&format!("{TAG_DIR}/{name}"), |w| Ok(write_binary(tags, w)?))
            .map(|_| tags.len())
    };
    let mut tag_counts = (0..plan.delays_ps.len())
        .into_par_iter()
        .map(|k| write(&point_file(k), &plan.point_tags(k, &mc)?))
        .collect::<Result<Vec<_>, CliError>>()?;
    tag_counts.push(write("calibration.chtg", &plan.calibration_tags(&mc)?)?);
    let manifest = TagManifest {
        config_sha256: ctx.out.hash().to_string(),
        points: (0..plan.delays_ps.len()).map(point_file).collect(),
        delays_ps: plan.delays_ps,
        calibration: "calibration.chtg".into(),
        tag_counts,
    };
    ctx.out.write_with(&format!("{TAG_DIR}/{MANIFEST}"), |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(writeln!(w)?)
    })?;
    Ok(())
}

fn read_tags(path: &Path) -> Result<Vec<chromahom_core::tagsim::TimeTag>, CliError> {
    let file = File::open(path).map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", path.display())))?;
    read_binary(BufReader::new(file)).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn correlate(ctx: &Context, tag_dir: &Path) -> Result<(), CliError> {
    let mc = ctx.monte_carlo()?;
    let manifest_path = tag_dir.join(MANIFEST);
    let text = std::fs::read_to_string(&manifest_path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", manifest_path.display())))?;
    let manifest: TagManifest =
        serde_json::from_str(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", manifest_path.display())))?;
    if manifest.config_sha256 != ctx.out.hash() {
        return Err(CliError::Config(format!(
            "tags in {} were generated from a different config ({})",
            tag_dir.display(),
            manifest.config_sha256
        )));
    }
    let points = manifest
        .points
        .par_iter()
        .map(|f| read_tags(&tag_dir.join(f)))
        .collect::<Result<Vec<_>, _>>()?;
    let calibration = read_tags(&tag_dir.join(&manifest.calibration))?;
    let hist = MonteCarloHistograms::from_tags(&mc, manifest.delays_ps, &points, &calibration)?;
    let summary = analyze(&ctx.model, &mc, &hist)?;
    write_monte_carlo(ctx, &mc, &hist, &summary)
}

#[derive(Serialize)]
struct MonteCarloOutput<'a> {
    dark_rate: [f64; 4],
    pairs_per_point: u64,
    #[serde(flatten)]
    summary: &'a MonteCarloSummary,
}

fn write_monte_carlo(
    ctx: &Context,
    mc: &MonteCarloConfig,
    hist: &MonteCarloHistograms,
    summary: &MonteCarloSummary,
) -> Result<(), CliError> {
    for (k, h) in hist.points.iter().enumerate() {
        ctx.out
            .csv(&format!("histograms/point_{k:03}.csv"), |w| Ok(h.write_csv(w)?))?;
    }
    ctx.out
        .csv("histograms/calibration.csv", |w| Ok(hist.calibration.write_csv(w)?))?;
    let dip = &summary.dip;
    ctx.out.csv("dip_counts.csv", |w| {
        writeln!(w, "delay_ps,raw,corrected")?;
        for ((d, r), c) in hist.delays_ps.iter().zip(&dip.raw_counts).zip(&dip.corrected_counts) {
            writeln!(w, "{d},{r},{c}")?;
        }
        Ok(())
    })?;
    ctx.out.json(
        "mc_summary.json",
        &MonteCarloOutput {
            dark_rate: mc.detection.dark_rate,
            pairs_per_point: mc.pairs_per_point,
            summary,
        },
    )?;
    Ok(())
}

/// One compared quantity. `pass` is `None` for values reported for
/// comparison only.
#[derive(Debug, Serialize)]
struct ReportRow {
    criterion: u32,
    quantity: &'static str,
    unit: &'static str,
    reference: f64,
    simulated: f64,
    lower: Option<f64>,
    upper: Option<f64>,
    pass: Option<bool>,
}

impl ReportRow {
    fn within(
        criterion: u32,
        quantity: &'static str,
        unit: &'static str,
        reference: f64,
        simulated: f64,
        lo: f64,
        hi: f64,
    ) -> Self {
        Self {
            criterion,
            quantity,
            unit,
            reference,
            simulated,
            lower: Some(lo),
            upper: Some(hi),
            pass: Some((lo..=hi).contains(&simulated)),
        }
    }

    fn relative(
        criterion: u32,
        quantity: &'static str,
        unit: &'static str,
        reference: f64,
        simulated: f64,
        rel: f64,
    ) -> Self {
        let d = rel * reference;
        Self::within(
            criterion,
            quantity,
            unit,
            reference,
            simulated,
            reference - d,
            reference + d,
        )
    }

    fn info(criterion: u32, quantity: &'static str, unit: &'static str, reference: f64, simulated: f64) -> Self {
        Self {
            criterion,
            quantity,
            unit,
            reference,
            simulated,
            lower: None,
            upper: None,
            pass: None,
        }
    }
}

#[derive(Serialize)]
struct Report {
    rows: Vec<ReportRow>,
    all_pass: bool,
}

// reference measurements
const REF_BOUND: (f64, f64) = (0.994, 0.002);
const REF_ETA_35W: (f64, f64) = (0.476, 0.007);
const REF_PUMP_W: f64 = 35.0;
const REF_DIP_V: f64 = 0.914;
const REF_DIP_V_CORRECTED: f64 = 0.928;
const MODEL_DIP_V_RANGE: (f64, f64) = (0.90, 0.995);
const REF_DIP_FWHM_PS: f64 = 7.78;
const REF_TT_FWHM_PS: f64 = 8.99;
const REF_RR_FWHM_PS: f64 = 5.99;
const REF_TT_V: f64 = 0.998;
const REF_RR_V: f64 = 0.811;
const DIP_FWHM_REL: f64 = 0.20;
const ANTIDIP_FWHM_REL: f64 = 0.25;
const BEAT_NU_HZ: f64 = 282e12;
const REF_BEAT_FS: f64 = 3.5;
const BEAT_ROUNDING_FS: f64 = 0.05;
const MC_SIGMAS: f64 = 2.0;

pub fn report(ctx: &Context) -> Result<(), CliError> {
    let (_, a) = analytic(ctx, true)?;
    let cross = a.cross.as_ref().expect("dip requested");
    let (vlo, vhi) = MODEL_DIP_V_RANGE;
    let cal = ctx.cfg.pump_calibration()?;
    let beat_fs = beat_note_resolution(BEAT_NU_HZ)? * 1e15;

    let mut rows = vec![
        ReportRow::within(
            2,
            "visibility_bound",
            "",
            REF_BOUND.0,
            a.visibility_bound,
            REF_BOUND.0 - REF_BOUND.1,
            REF_BOUND.0 + REF_BOUND.1,
        ),
        ReportRow::within(
            3,
            "eta_at_35W",
            "",
            REF_ETA_35W.0,
            transition_probability(REF_PUMP_W, &cal)?,
            REF_ETA_35W.0 - REF_ETA_35W.1,
            REF_ETA_35W.0 + REF_ETA_35W.1,
        ),
        ReportRow::within(4, "dip_visibility", "", REF_DIP_V, cross.fit.visibility, vlo, vhi),
        ReportRow::relative(4, "dip_fwhm", "ps", REF_DIP_FWHM_PS, cross.fit.fwhm / PS, DIP_FWHM_REL),
        ReportRow::relative(
            4,
            "telecom_antidip_fwhm",
            "ps",
            REF_TT_FWHM_PS,
            a.telecom_telecom.fit.fwhm / PS,
            ANTIDIP_FWHM_REL,
        ),
        ReportRow::relative(
            4,
            "red_antidip_fwhm",
            "ps",
            REF_RR_FWHM_PS,
            a.red_red.fit.fwhm / PS,
            ANTIDIP_FWHM_REL,
        ),
        ReportRow::info(
            4,
            "telecom_antidip_visibility",
            "",
            REF_TT_V,
            a.telecom_telecom.fit.visibility,
        ),
        ReportRow::info(4, "red_antidip_visibility", "", REF_RR_V, a.red_red.fit.visibility),
        ReportRow::within(
            8,
            "beat_note_282THz",
            "fs",
            REF_BEAT_FS,
            beat_fs,
            REF_BEAT_FS - BEAT_ROUNDING_FS,
            REF_BEAT_FS + BEAT_ROUNDING_FS,
        ),
    ];

    if ctx.cfg.report.monte_carlo {
        let mc = ctx.monte_carlo()?;
        let hist = simulate(&ctx.model, &mc)?;
        let s = analyze(&ctx.model, &mc, &hist)?;
        write_monte_carlo(ctx, &mc, &hist, &s)?;
        let eta_band = MC_SIGMAS * s.eta.sigma;
        let v_band = MC_SIGMAS * s.dip.raw.sigma.visibility;
        rows.extend([
            ReportRow::within(
                6,
                "mc_eta",
                "",
                mc.calibration_eta,
                s.eta.eta,
                mc.calibration_eta - eta_band,
                mc.calibration_eta + eta_band,
            ),
            ReportRow::within(
                6,
                "mc_raw_visibility_vs_analytic",
                "",
                s.analytic.visibility,
                s.dip.raw.visibility,
                s.analytic.visibility - v_band,
                s.analytic.visibility + v_band,
            ),
            ReportRow::within(6, "mc_raw_visibility", "", REF_DIP_V, s.dip.raw.visibility, vlo, vhi),
            ReportRow {
                // subtraction must never lower the visibility
                pass: Some(
                    s.dip.corrected.visibility >= s.dip.raw.visibility
                        && (vlo..=vhi).contains(&s.dip.corrected.visibility),
                ),
                ..ReportRow::within(
                    6,
                    "mc_corrected_visibility",
                    "",
                    REF_DIP_V_CORRECTED,
                    s.dip.corrected.visibility,
                    vlo,
                    vhi,
                )
            },
        ]);
    }

    let all_pass = rows.iter().all(|r| r.pass != Some(false));
    ctx.out.json("report.json", &Report { rows, all_pass })?;
    Ok(())
}
