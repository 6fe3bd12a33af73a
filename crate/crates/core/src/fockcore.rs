//! Two-mode Fock-space beam splitter algebra.
//!
//! A lossless two-mode coupler maps output annihilators to inputs as
//! `b = B a` with
//!
//! ```text
//!     B = | t    i r |
//!         | i r  t   |,     t^2 + r^2 = 1.
//! ```
//!
//! For the frequency converter, mode 1 is the red color and mode 2 the
//! telecom color, `t = cos(theta)`, `r = sin(theta)` and the transition
//! probability is `eta = r^2`. States are transformed by substituting every
//! input creation operator `a_j^dag -> sum_k B_jk b_k^dag` and expanding the
//! resulting polynomial exactly.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Photon-number cutoff used when none is requested.
pub const DEFAULT_N_MAX: usize = 4;

const MAX_N_MAX: usize = 32;

/// Sign of the `pi/2` phase carried by the off-diagonal elements.
///
/// Both signs satisfy the commutator constraints; observable probabilities
/// do not depend on the choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseConvention {
    /// Off-diagonal elements are `+i r`.
    #[default]
    PlusHalfPi,
    /// Off-diagonal elements are `-i r`.
    MinusHalfPi,
}

impl PhaseConvention {
    fn flipped(self) -> Self {
        match self {
            PhaseConvention::PlusHalfPi => PhaseConvention::MinusHalfPi,
            PhaseConvention::MinusHalfPi => PhaseConvention::PlusHalfPi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitterMatrix<T> {
    t: T,
    r: T,
    phase_convention: PhaseConvention,
}

impl<T: Scalar> BeamSplitterMatrix<T> {
    /// Builds the coupler for transition probability `eta` (`r^2 = eta`).
    pub fn from_transition_probability(eta: T) -> Result<Self> {
        if !(eta >= T::zero() && eta <= T::one()) {
            return Err(Error::domain(format!("transition probability {eta} outside [0, 1]")));
        }
        Ok(Self {
            t: (T::one() - eta).sqrt(),
            r: eta.sqrt(),
            phase_convention: PhaseConvention::default(),
        })
    }

    /// Builds the coupler from the interaction angle `theta = chi * t`,
    /// restricted to the first quadrant so that `t, r >= 0`.
    pub fn from_angle(theta: T) -> Result<Self> {
        if !(theta >= T::zero() && theta <= T::FRAC_PI_2()) {
            return Err(Error::domain(format!("interaction angle {theta} outside [0, pi/2]")));
        }
        Ok(Self {
            t: theta.cos(),
            r: theta.sin(),
            phase_convention: PhaseConvention::default(),
        })
    }

    pub fn with_phase_convention(mut self, convention: PhaseConvention) -> Self {
        self.phase_convention = convention;
        self
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn r(&self) -> T {
        self.r
    }

    pub fn phase_convention(&self) -> PhaseConvention {
        self.phase_convention
    }

    pub fn transition_probability(&self) -> T {
        self.r * self.r
    }

    /// Interaction angle with `t = cos(theta)` and `r = sin(theta)`.
    pub fn theta(&self) -> T {
        self.r.atan2(self.t)
    }

    pub fn matrix(&self) -> [[Complex<T>; 2]; 2] {
        let diag = Complex::new(self.t, T::zero());
        let off = match self.phase_convention {
            PhaseConvention::PlusHalfPi => Complex::new(T::zero(), self.r),
            PhaseConvention::MinusHalfPi => Complex::new(T::zero(), -self.r),
        };
        [[diag, off], [off, diag]]
    }

    /// `B^-1 = B^dag = B^*`, which for this symmetric form is the same
    /// coupler with the opposite off-diagonal phase.
    pub fn inverse(&self) -> Self {
        Self {
            phase_convention: self.phase_convention.flipped(),
            ..*self
        }
    }

    /// Largest entry of `|B^dag B - 1|`.
    pub fn unitarity_defect(&self) -> T {
        let b = self.matrix();
        let mut worst = T::zero();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = Complex::new(T::zero(), T::zero());
                for k in 0..2 {
                    acc += b[k][i].conj() * b[k][j];
                }
                if i == j {
                    acc -= Complex::new(T::one(), T::zero());
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }
}

/// Shorthand for [`BeamSplitterMatrix::from_transition_probability`].
pub fn make_beam_splitter<T: Scalar>(eta: T) -> Result<BeamSplitterMatrix<T>> {
    BeamSplitterMatrix::from_transition_probability(eta)
}

/// Pure state of two bosonic modes truncated at `n_max` total photons.
///
/// Amplitudes are stored shell by shell: total photon number `n` occupies
/// the slots `n(n+1)/2 ..= n(n+1)/2 + n`, ordered by increasing `n2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeFockState<T> {
    n_max: usize,
    amplitudes: Vec<Complex<T>>,
}

fn slot(n1: usize, n2: usize) -> usize {
    let n = n1 + n2;
    n * (n + 1) / 2 + n2
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

impl<T: Scalar> TwoModeFockState<T> {
    pub fn vacuum(n_max: usize) -> Result<Self> {
        if n_max == 0 || n_max > MAX_N_MAX {
            return Err(Error::domain(format!(
                "photon-number cutoff {n_max} outside 1..={MAX_N_MAX}"
            )));
        }
        let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); slot(0, n_max) + 1];
        amplitudes[0] = Complex::new(T::one(), T::zero());
        Ok(Self { n_max, amplitudes })
    }

    /// Number state `|n1, n2>`.
    pub fn basis(n1: usize, n2: usize, n_max: usize) -> Result<Self> {
        let mut state = Self::vacuum(n_max)?;
        if n1 + n2 > n_max {
            return Err(Error::domain(format!("|{n1},{n2}> exceeds the cutoff n_max = {n_max}")));
        }
        state.amplitudes[0] = Complex::new(T::zero(), T::zero());
        state.amplitudes[slot(n1, n2)] = Complex::new(T::one(), T::zero());
        Ok(state)
    }

    /// Builds a state from `(n1, n2, amplitude)` triples and normalizes it.
    pub fn from_components(
        n_max: usize,
        components: impl IntoIterator<Item = (usize, usize, Complex<T>)>,
    ) -> Result<Self> {
        let mut state = Self::vacuum(n_max)?;
        state.amplitudes[0] = Complex::new(T::zero(), T::zero());
        for (n1, n2, a) in components {
            if n1 + n2 > n_max {
                return Err(Error::domain(format!("|{n1},{n2}> exceeds the cutoff n_max = {n_max}")));
            }
            state.amplitudes[slot(n1, n2)] += a;
        }
        let norm = state.norm_sqr().sqrt();
        if !(norm > T::zero()) {
            return Err(Error::domain("state has zero norm"));
        }
        for a in &mut state.amplitudes {
            *a /= norm;
        }
        Ok(state)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// `<n1, n2 | psi>`, zero beyond the cutoff.
    pub fn amplitude(&self, n1: usize, n2: usize) -> Complex<T> {
        if n1 + n2 > self.n_max {
            Complex::new(T::zero(), T::zero())
        } else {
            self.amplitudes[slot(n1, n2)]
        }
    }

    /// Iterates `(n1, n2, amplitude)` over every stored basis state.
    pub fn components(&self) -> impl Iterator<Item = (usize, usize, Complex<T>)> + '_ {
        (0..=self.n_max).flat_map(move |n| (0..=n).map(move |n2| (n - n2, n2, self.amplitudes[slot(n - n2, n2)])))
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr())
    }

    /// `<N1 + N2>`.
    pub fn mean_photon_number(&self) -> T {
        self.components().fold(T::zero(), |acc, (n1, n2, a)| {
            acc + T::from_usize_lossy(n1 + n2) * a.norm_sqr()
        })
    }

    /// `<N1>` and `<N2>` separately.
    pub fn mode_occupations(&self) -> (T, T) {
        self.components().fold((T::zero(), T::zero()), |(m1, m2), (n1, n2, a)| {
            let p = a.norm_sqr();
            (m1 + T::from_usize_lossy(n1) * p, m2 + T::from_usize_lossy(n2) * p)
        })
    }

    /// Largest amplitude difference to `other` (same cutoff required).
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).norm()))
    }

    pub fn apply(&self, bs: &BeamSplitterMatrix<T>) -> Self {
        apply_beam_splitter(self, bs)
    }
}

/// Transforms `state` through the coupler by exact binomial expansion of
/// `(B11 b1^dag + B12 b2^dag)^n1 (B21 b1^dag + B22 b2^dag)^n2`.
pub fn apply_beam_splitter<T: Scalar>(state: &TwoModeFockState<T>, bs: &BeamSplitterMatrix<T>) -> TwoModeFockState<T> {
    let b = bs.matrix();
    let zero = Complex::new(T::zero(), T::zero());
    let mut out = vec![zero; state.amplitudes.len()];

    for (n1, n2, c) in state.components() {
        if c == zero {
            continue;
        }
        let n = n1 + n2;
        let prefactor = c / T::lit((factorial(n1) * factorial(n2)).sqrt());
        for k1 in 0..=n1 {
            let first = b[0][0].powu(k1 as u32) * b[0][1].powu((n1 - k1) as u32) * T::lit(binomial(n1, k1));
            for k2 in 0..=n2 {
                let second = b[1][0].powu(k2 as u32) * b[1][1].powu((n2 - k2) as u32) * T::lit(binomial(n2, k2));
                let m1 = k1 + k2;
                let m2 = n - m1;
                let creation_norm = T::lit((factorial(m1) * factorial(m2)).sqrt());
                out[slot(m1, m2)] += prefactor * first * second * creation_norm;
            }
        }
    }

    TwoModeFockState {
        n_max: state.n_max,
        amplitudes: out,
    }
}

/// Probability of one photon in each output mode, `|<1,1|psi>|^2`.
pub fn coincidence_probability<T: Scalar>(state: &TwoModeFockState<T>) -> T {
    state.amplitude(1, 1).norm_sqr()
}

/// Output of the two-photon input `|1,1>` through `bs`.
pub fn two_photon_output<T: Scalar>(bs: &BeamSplitterMatrix<T>) -> TwoModeFockState<T> {
    let input = TwoModeFockState::basis(1, 1, DEFAULT_N_MAX).expect("|1,1> fits the default cutoff");
    apply_beam_splitter(&input, bs)
}

/// Best achievable dip visibility for an unbalanced coupler:
/// `V = 2 t^2 r^2 / (t^4 + r^4)`, the dip floor `(t^2 - r^2)^2` measured
/// against the distinguishable-photon baseline `t^4 + r^4`.
pub fn max_visibility_bound<T: Scalar>(eta: T) -> Result<T> {
    if !(eta > T::zero() && eta < T::one()) {
        return Err(Error::domain(format!("visibility bound needs 0 < eta < 1, got {eta}")));
    }
    let t2 = T::one() - eta;
    let r2 = eta;
    Ok(T::lit(2.0) * t2 * r2 / (t2 * t2 + r2 * r2))
}
