//! Sensitivity of the reference model to how the quoted bandwidths are read.

use chromahom_core::converter::ConverterModel;
use chromahom_core::interference::{delay_grid, delay_scan, visibility, Channel, ExperimentModel};
use chromahom_core::spectra::SpectralModel;

const PS: f64 = 1e-12;

fn dip(model: &ExperimentModel<f64>) -> (f64, f64) {
    let scan = delay_scan(model, &delay_grid(-80.0 * PS, 80.0 * PS, 0.25 * PS).unwrap()).unwrap();
    let m = visibility(&scan, Channel::Cross).unwrap();
    (m.visibility, m.width.unwrap() / PS)
}

fn in_window((v, w): (f64, f64)) -> bool {
    (0.90..=0.995).contains(&v) && (w - 7.78).abs() <= 0.2 * 7.78
}

#[test]
fn source_bandwidth_readings() {
    let sinc = ExperimentModel::default();
    // 75 GHz as the FWHM of a Gaussian-equivalent spectrum
    let gaussian = ExperimentModel {
        source: SpectralModel::gaussian(75e9),
        ..sinc
    };
    let (a, b) = (dip(&sinc), dip(&gaussian));
    println!("source sinc: V {:.4}, FWHM {:.3} ps; Gaussian: V {:.4}, FWHM {:.3} ps", a.0, a.1, b.0, b.1);
    assert!(in_window(a) && in_window(b));
    assert!((a.0 - b.0).abs() < 0.02);
}

#[test]
fn converter_bandwidth_readings() {
    let eta = ExperimentModel::default();
    // 110 GHz as the FWHM of the amplitude sqrt(eta) = |sinc|: the
    // half-maxima of sinc and sinc^2 sit at x = 1.8955 and 1.3916
    let amplitude = ExperimentModel {
        converter: ConverterModel {
            bandwidth: 110e9 * 1.391_557_378 / 1.895_494_267,
            ..eta.converter
        },
        ..eta
    };
    let (a, b) = (dip(&eta), dip(&amplitude));
    println!("converter eta FWHM: V {:.4}, FWHM {:.3} ps; amplitude FWHM: V {:.4}, FWHM {:.3} ps", a.0, a.1, b.0, b.1);
    assert!(in_window(a));
    // the narrower converter costs visibility
    assert!(b.0 < a.0);
}
