//! Brute-force delay scan by explicit multimode Fock evolution.
//!
//! Every grid detuning `nu` carries a red and a telecom mode coupled by
//! their own two-mode beam splitter. A pair with red photon at `+W` lives in
//! the mode pairs `+W` and `-W`; its mirror term lives in the same two mode
//! pairs, so each mirrored pair of mode pairs is an isolated four-mode
//! problem (the zero-detuning pair is the genuine two-photon `|1,1>` case).
//! Single photons and photon pairs are pushed through
//! [`crate::fockcore`] and the output amplitudes summed by occupation.
//! Nothing here reuses the closed-form path products of the analytic scan.

use num_complex::Complex;

use super::{DelayScan, ExperimentModel, FilterPlacement};
use crate::error::{Error, Result};
use crate::fockcore::{BeamSplitterMatrix, TwoModeFockState};
use crate::scalar::Scalar;

/// Largest configured grid size the oracle accepts.
pub const ORACLE_MAX_POINTS: usize = 512;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Color {
    Red,
    Telecom,
}

/// Output amplitudes of one photon entering a mode pair in `color`,
/// as `[(Red, amp), (Telecom, amp)]`.
fn single_photon<T: Scalar>(bs: &BeamSplitterMatrix<T>, color: Color) -> [(Color, Complex<T>); 2] {
    let input = match color {
        Color::Red => TwoModeFockState::basis(1, 0, 1),
        Color::Telecom => TwoModeFockState::basis(0, 1, 1),
    }
    .expect("single photon fits cutoff 1")
    .apply(bs);
    [
        (Color::Red, input.amplitude(1, 0)),
        (Color::Telecom, input.amplitude(0, 1)),
    ]
}

struct Oracle<T> {
    nus: Vec<T>,
    step: T,
    /// Source amplitude (with any pre-converter telecom filter), red detuning.
    input: Vec<T>,
    splitters: Vec<BeamSplitterMatrix<T>>,
    out_red: Vec<T>,
    out_telecom: Vec<T>,
    norm: T,
}

impl<T: Scalar> Oracle<T> {
    fn new(model: &ExperimentModel<T>) -> Result<Self> {
        model.validate()?;
        let grid = model.grid;
        if grid.n_points() > ORACLE_MAX_POINTS {
            return Err(Error::usage(format!(
                "oracle limited to {ORACLE_MAX_POINTS} grid points, got {}",
                grid.n_points()
            )));
        }
        let nus: Vec<T> = grid.values().collect();
        let step = grid.step();
        let source: Vec<T> = nus.iter().map(|&nu| model.source.amplitude_at(nu)).collect();
        let norm = T::one() / (source.iter().fold(T::zero(), |a, f| a + *f * *f) * step);

        let pre = model.filter_placement == FilterPlacement::PreConverter;
        let input = nus
            .iter()
            .zip(&source)
            .map(|(&nu, &f)| {
                if pre {
                    f * model.telecom_filter.amplitude_at(-nu)
                } else {
                    f
                }
            })
            .collect();
        let splitters = nus
            .iter()
            .map(|&nu| BeamSplitterMatrix::from_transition_probability(model.converter.eta_at(nu)))
            .collect::<Result<_>>()?;
        let out_red = nus.iter().map(|&nu| model.red_filter.amplitude_at(nu)).collect();
        let out_telecom = nus
            .iter()
            .map(|&nu| {
                if pre {
                    T::one()
                } else {
                    model.telecom_filter.amplitude_at(nu)
                }
            })
            .collect();

        Ok(Self {
            nus,
            step,
            input,
            splitters,
            out_red,
            out_telecom,
            norm,
        })
    }

    fn filter(&self, k: usize, color: Color) -> T {
        match color {
            Color::Red => self.out_red[k],
            Color::Telecom => self.out_telecom[k],
        }
    }

    /// Delay phase on a telecom input photon at grid index `k`.
    fn telecom_phase(&self, k: usize, tau: T) -> Complex<T> {
        let arg = T::lit(2.0) * T::PI() * self.nus[k] * tau;
        Complex::new(arg.cos(), arg.sin())
    }

    fn scan_point(&self, tau: T) -> (T, T, T) {
        let n = self.nus.len();
        let center = n / 2;
        let mut cross = T::zero();
        let mut tt = T::zero();
        let mut rr = T::zero();

        for lo in 0..center {
            let hi = n - 1 - lo;
            // amplitude[(color in pair lo, color in pair hi)]
            let mut out = [[Complex::new(T::zero(), T::zero()); 2]; 2];
            // term 1: red in `lo`, telecom in `hi`; term 2: red in `hi`, telecom in `lo`
            let terms = [
                (lo, hi, self.telecom_phase(hi, tau) * self.input[lo]),
                (hi, lo, self.telecom_phase(lo, tau) * self.input[hi]),
            ];
            for (red_pair, tel_pair, amp) in terms {
                let red_out = single_photon(&self.splitters[red_pair], Color::Red);
                let tel_out = single_photon(&self.splitters[tel_pair], Color::Telecom);
                for (c_red, a_red) in red_out {
                    for (c_tel, a_tel) in tel_out {
                        let (c_lo, c_hi) = if red_pair == lo { (c_red, c_tel) } else { (c_tel, c_red) };
                        let weight = self.filter(red_pair, c_red) * self.filter(tel_pair, c_tel);
                        out[c_lo as usize][c_hi as usize] += a_red * a_tel * amp * weight;
                    }
                }
            }
            for (c_lo, row) in [Color::Red, Color::Telecom].into_iter().zip(out) {
                for (c_hi, a) in [Color::Red, Color::Telecom].into_iter().zip(row) {
                    let p = a.norm_sqr();
                    match (c_lo, c_hi) {
                        (Color::Red, Color::Red) => rr += p,
                        (Color::Telecom, Color::Telecom) => tt += p,
                        _ => cross += p,
                    }
                }
            }
        }

        // both photons in the zero-detuning mode pair
        let bs = &self.splitters[center];
        let pair = TwoModeFockState::basis(1, 1, 2).expect("|1,1> fits cutoff 2").apply(bs);
        let amp = self.telecom_phase(center, tau) * self.input[center];
        let (hr, ht) = (self.out_red[center], self.out_telecom[center]);
        rr += (pair.amplitude(2, 0) * amp * hr * hr).norm_sqr();
        cross += (pair.amplitude(1, 1) * amp * hr * ht).norm_sqr();
        tt += (pair.amplitude(0, 2) * amp * ht * ht).norm_sqr();

        let scale = self.step * self.norm;
        (cross * scale, tt * scale, rr * scale)
    }
}

/// Independent re-computation of [`super::delay_scan`] for small grids.
pub fn oracle_delay_scan<T: Scalar>(model: &ExperimentModel<T>, delays: &[T]) -> Result<DelayScan<T>> {
    let oracle = Oracle::new(model)?;
    let rows: Vec<(T, T, T)> = delays.iter().map(|&tau| oracle.scan_point(tau)).collect();
    Ok(DelayScan {
        delays: delays.to_vec(),
        p_cross: Some(rows.iter().map(|r| r.0).collect()),
        p_tt: Some(rows.iter().map(|r| r.1).collect()),
        p_rr: Some(rows.iter().map(|r| r.2).collect()),
    })
}
