//! Ground-truth propagation for the two reconfigurable links.
//!
//! RIS: end-to-end gain `h = direct + sum_m c_m * exp(j * phi_m)` over the
//! cascaded Tx-RIS-Rx coefficients `c`.
//!
//! MA: narrowband planar field response
//! `h(p) = sum_k g_k * exp(j * 2pi/lambda * <p, u_k>)` with
//! `u_k = (sin(el_k) cos(az_k), cos(el_k))`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::hash::{DefaultHasher, Hash, Hasher};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Wrap an angle into `[0, 2pi)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2pi for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Draw a circularly-symmetric complex Gaussian with the given variance.
pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Cascaded Tx-RIS-Rx channel: `coeffs[m]` is the product of the m-th
/// Tx-RIS and RIS-Rx gains.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedChannel {
    coeffs: Vec<Complex64>,
    direct: Complex64,
}

impl CascadedChannel {
    pub fn new(coeffs: Vec<Complex64>, direct: Complex64) -> Result<Self, ChannelError> {
        if coeffs.is_empty() {
            return Err(ChannelError::InvalidDimension(
                "cascaded channel needs at least one element".into(),
            ));
        }
        let finite = |c: &Complex64| c.re.is_finite() && c.im.is_finite();
        if !coeffs.iter().all(finite) || !finite(&direct) {
            return Err(ChannelError::InvalidParameter(
                "channel coefficients must be finite".into(),
            ));
        }
        Ok(Self { coeffs, direct })
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn direct(&self) -> Complex64 {
        self.direct
    }

    pub fn elements(&self) -> usize {
        self.coeffs.len()
    }

    /// `|direct| + sum_m |c_m|`, the largest end-to-end magnitude any phase
    /// configuration can reach.
    pub fn magnitude_bound(&self) -> f64 {
        self.direct.norm() + self.coeffs.iter().map(|c| c.norm()).sum::<f64>()
    }

    pub(crate) fn hash_into<H: Hasher>(&self, state: &mut H) {
        for c in &self.coeffs {
            c.re.to_bits().hash(state);
            c.im.to_bits().hash(state);
        }
        self.direct.re.to_bits().hash(state);
        self.direct.im.to_bits().hash(state);
    }
}

/// RIS phase configuration. Phases are kept in `[0, 2pi)`, so the induced
/// reflection coefficients `exp(j phi_m)` are unit-modulus by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RisPhases {
    phases: Vec<f64>,
}

impl RisPhases {
    pub fn new(phases: Vec<f64>) -> Self {
        Self {
            phases: phases.into_iter().map(wrap_phase).collect(),
        }
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            phases: vec![0.0; m],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn reflection(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.phases.iter().map(|&p| Complex64::from_polar(1.0, p))
    }
}

/// One propagation path of the MA field-response model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub gain: Complex64,
    /// Elevation in `[-pi/2, pi/2]`.
    pub elevation: f64,
    /// Azimuth in `[-pi, pi]`.
    pub azimuth: f64,
}

impl Path {
    pub fn direction(&self) -> [f64; 2] {
        direction(self.elevation, self.azimuth)
    }
}

/// Projected 2-D arrival direction for the given angles.
pub fn direction(elevation: f64, azimuth: f64) -> [f64; 2] {
    [elevation.sin() * azimuth.cos(), elevation.cos()]
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    paths: Vec<Path>,
    wavelength: f64,
}

impl PathSet {
    pub fn new(paths: Vec<Path>, wavelength: f64) -> Result<Self, ChannelError> {
        if paths.is_empty() {
            return Err(ChannelError::InvalidDimension(
                "path set needs at least one path".into(),
            ));
        }
        Self::new_allow_empty(paths, wavelength)
    }

    /// Used by estimators that may legitimately recover no paths at all.
    pub fn new_allow_empty(paths: Vec<Path>, wavelength: f64) -> Result<Self, ChannelError> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(ChannelError::InvalidParameter(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        for p in &paths {
            if !(p.gain.re.is_finite() && p.gain.im.is_finite()) {
                return Err(ChannelError::InvalidParameter(
                    "path gain not finite".into(),
                ));
            }
            if !(-FRAC_PI_2..=FRAC_PI_2).contains(&p.elevation) {
                return Err(ChannelError::InvalidParameter(format!(
                    "elevation {} outside [-pi/2, pi/2]",
                    p.elevation
                )));
            }
            if !(-PI..=PI).contains(&p.azimuth) {
                return Err(ChannelError::InvalidParameter(format!(
                    "azimuth {} outside [-pi, pi]",
                    p.azimuth
                )));
            }
        }
        Ok(Self { paths, wavelength })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn gain_sum_abs(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm()).sum()
    }

    pub(crate) fn hash_into<H: Hasher>(&self, state: &mut H) {
        for p in &self.paths {
            p.gain.re.to_bits().hash(state);
            p.gain.im.to_bits().hash(state);
            p.elevation.to_bits().hash(state);
            p.azimuth.to_bits().hash(state);
        }
        self.wavelength.to_bits().hash(state);
    }
}

/// Antenna position in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.x, self.y]
    }

    /// Clamp into the square `[0, side]^2`.
    pub fn clamped(self, side: f64) -> Self {
        Self {
            x: self.x.clamp(0.0, side),
            y: self.y.clamp(0.0, side),
        }
    }
}

pub fn gen_cascaded_channel(
    m: usize,
    seed: u64,
    fading: f64,
    direct_variance: Option<f64>,
) -> Result<CascadedChannel, ChannelError> {
    if m == 0 {
        return Err(ChannelError::InvalidDimension(
            "M must be at least 1".into(),
        ));
    }
    if !(fading > 0.0 && fading.is_finite()) {
        return Err(ChannelError::InvalidParameter(format!(
            "fading variance must be positive, got {fading}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = (0..m).map(|_| complex_gaussian(&mut rng, fading)).collect();
    // drawn after the cascaded gains so toggling the direct link leaves them unchanged
    let direct = match direct_variance {
        Some(v) if v > 0.0 => complex_gaussian(&mut rng, v),
        Some(v) if v < 0.0 || !v.is_finite() => {
            return Err(ChannelError::InvalidParameter(format!(
                "direct-link variance must be non-negative, got {v}"
            )))
        }
        _ => Complex64::new(0.0, 0.0),
    };
    CascadedChannel::new(coeffs, direct)
}

pub fn ris_end_to_end(
    chan: &CascadedChannel,
    phases: &RisPhases,
) -> Result<Complex64, ChannelError> {
    if phases.len() != chan.elements() {
        return Err(ChannelError::DimensionMismatch {
            expected: chan.elements(),
            got: phases.len(),
        });
    }
    Ok(chan
        .coeffs
        .iter()
        .zip(phases.reflection())
        .fold(chan.direct, |acc, (c, t)| acc + c * t))
}

pub fn gen_path_set(k: usize, seed: u64, wavelength: f64) -> Result<PathSet, ChannelError> {
    if k == 0 {
        return Err(ChannelError::InvalidDimension(
            "K must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let var = 1.0 / k as f64;
    let paths = (0..k)
        .map(|_| {
            let elevation = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
            let azimuth = rng.random_range(-PI..=PI);
            let gain = complex_gaussian(&mut rng, var);
            Path {
                gain,
                elevation,
                azimuth,
            }
        })
        .collect();
    PathSet::new(paths, wavelength)
}

pub fn ma_channel(paths: &PathSet, p: Position) -> Complex64 {
    let k0 = TAU / paths.wavelength;
    paths
        .paths
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, path| {
            let [ux, uy] = path.direction();
            acc + path.gain * Complex64::from_polar(1.0, k0 * (p.x * ux + p.y * uy))
        })
}

/// Stable-within-process fingerprint of a channel realization.
pub fn fingerprint<F: FnOnce(&mut DefaultHasher)>(f: F) -> u64 {
    let mut h = DefaultHasher::new();
    f(&mut h);
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn seeded_generation_is_bit_identical() {
        let a = gen_cascaded_channel(4, 7, 1.0, Some(1.0)).unwrap();
        let b = gen_cascaded_channel(4, 7, 1.0, Some(1.0)).unwrap();
        assert_eq!(a, b);
        let p = gen_path_set(5, 3, 1.0).unwrap();
        assert_eq!(p, gen_path_set(5, 3, 1.0).unwrap());
    }

    #[test]
    fn no_direct_link_means_exact_zero() {
        let a = gen_cascaded_channel(4, 7, 1.0, None).unwrap();
        assert_eq!(a.direct(), c(0.0, 0.0));
    }

    #[test]
    fn zero_elements_is_rejected() {
        assert!(matches!(
            gen_cascaded_channel(0, 1, 1.0, None),
            Err(ChannelError::InvalidDimension(_))
        ));
        assert!(matches!(
            gen_path_set(0, 1, 1.0),
            Err(ChannelError::InvalidDimension(_))
        ));
        assert!(gen_cascaded_channel(3, 1, 0.0, None).is_err());
    }

    #[test]
    fn cascaded_power_sample_mean() {
        let ch = gen_cascaded_channel(10_000, 11, 1.0, None).unwrap();
        let mean = ch.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>() / 10_000.0;
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn path_gain_sample_means() {
        for k in [1usize, 8] {
            let total: f64 = (0..10_000u64)
                .map(|s| {
                    gen_path_set(k, s, 1.0)
                        .unwrap()
                        .paths()
                        .iter()
                        .map(|p| p.gain.norm_sqr())
                        .sum::<f64>()
                })
                .sum::<f64>()
                / 10_000.0;
            assert!((total - 1.0).abs() < 0.05, "K={k}: {total}");
        }
    }

    #[test]
    fn ris_small_cases() {
        let ch = CascadedChannel::new(vec![c(1.0, 0.0)], c(0.0, 0.0)).unwrap();
        assert_eq!(
            ris_end_to_end(&ch, &RisPhases::new(vec![0.0])).unwrap(),
            c(1.0, 0.0)
        );

        let ch = CascadedChannel::new(vec![c(1.0, 0.0), c(0.0, 1.0)], c(0.0, 0.0)).unwrap();
        let h = ris_end_to_end(&ch, &RisPhases::new(vec![0.0, -FRAC_PI_2])).unwrap();
        assert!((h - c(2.0, 0.0)).norm() < 1e-15);

        assert_eq!(
            ris_end_to_end(&ch, &RisPhases::zeros(3)),
            Err(ChannelError::DimensionMismatch {
                expected: 2,
                got: 3
            })
        );
    }

    #[test]
    fn ris_matches_naive_summation() {
        let ch = gen_cascaded_channel(6, 99, 1.0, Some(0.5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let phases: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..TAU)).collect();
        let mut re = ch.direct().re;
        let mut im = ch.direct().im;
        for (cm, &p) in ch.coeffs().iter().zip(&phases) {
            re += cm.re * p.cos() - cm.im * p.sin();
            im += cm.re * p.sin() + cm.im * p.cos();
        }
        let h = ris_end_to_end(&ch, &RisPhases::new(phases)).unwrap();
        let naive = c(re, im);
        assert!((h - naive).norm() <= 1e-12 * naive.norm());
    }

    #[test]
    fn ma_origin_is_gain_sum() {
        let ps = gen_path_set(5, 4, 1.0).unwrap();
        let sum: Complex64 = ps.paths().iter().map(|p| p.gain).sum();
        assert!((ma_channel(&ps, Position::new(0.0, 0.0)) - sum).norm() < 1e-15);
    }

    #[test]
    fn ma_single_path_magnitude_and_period() {
        let lambda = 0.7;
        let ps = PathSet::new(
            vec![Path {
                gain: c(1.0, 0.0),
                elevation: 0.0,
                azimuth: 0.0,
            }],
            lambda,
        )
        .unwrap();
        for &(x, y) in &[(0.1, 0.2), (1.3, 0.4), (0.0, 1.1)] {
            let h = ma_channel(&ps, Position::new(x, y));
            assert!((h.norm() - 1.0).abs() < 1e-12);
        }
        let gen = gen_path_set(1, 17, lambda).unwrap();
        let [ux, uy] = gen.paths()[0].direction();
        let p = Position::new(0.3, 0.9);
        let n2 = ux * ux + uy * uy;
        let shifted = Position::new(p.x + lambda * ux / n2, p.y + lambda * uy / n2);
        assert!((ma_channel(&gen, p) - ma_channel(&gen, shifted)).norm() < 1e-12);
    }

    #[test]
    fn wrap_phase_edges() {
        assert_eq!(wrap_phase(-1e-300), 0.0);
        assert!((wrap_phase(TAU + 0.5) - 0.5).abs() < 1e-15);
        assert!(wrap_phase(-0.5) > 5.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn ris_triangle_bound(seed in any::<u64>(), m in 1usize..40, direct in any::<bool>(),
                              phases in proptest::collection::vec(0.0..TAU, 40)) {
            let ch = gen_cascaded_channel(m, seed, 1.0, direct.then_some(2.0)).unwrap();
            let h = ris_end_to_end(&ch, &RisPhases::new(phases[..m].to_vec())).unwrap();
            prop_assert!(h.norm() <= ch.magnitude_bound() * (1.0 + 1e-12));
        }

        #[test]
        fn ris_linear_in_coefficients(seed in any::<u64>(), m in 2usize..20,
                                      phases in proptest::collection::vec(-10.0..10.0f64, 20)) {
            let ch = gen_cascaded_channel(m, seed, 1.0, None).unwrap();
            let ph = RisPhases::new(phases[..m].to_vec());
            let split = m / 2;
            let zero = c(0.0, 0.0);
            let a: Vec<_> = ch.coeffs().iter().enumerate().map(|(i, &v)| if i < split { v } else { zero }).collect();
            let b: Vec<_> = ch.coeffs().iter().enumerate().map(|(i, &v)| if i < split { zero } else { v }).collect();
            let ha = ris_end_to_end(&CascadedChannel::new(a, zero).unwrap(), &ph).unwrap();
            let hb = ris_end_to_end(&CascadedChannel::new(b, zero).unwrap(), &ph).unwrap();
            let h = ris_end_to_end(&ch, &ph).unwrap();
            prop_assert!((h - ha - hb).norm() <= 1e-12 * (1.0 + h.norm()));
        }

        #[test]
        fn ris_common_rotation(seed in any::<u64>(), alpha in -PI..PI) {
            let ch = gen_cascaded_channel(8, seed, 1.0, None).unwrap();
            let rot = Complex64::from_polar(1.0, alpha);
            let rotated = CascadedChannel::new(ch.coeffs().iter().map(|v| v * rot).collect(), c(0.0, 0.0)).unwrap();
            let ph = RisPhases::new((0..8).map(|i| i as f64 * 0.37).collect());
            let h = ris_end_to_end(&ch, &ph).unwrap();
            let hr = ris_end_to_end(&rotated, &ph).unwrap();
            prop_assert!((hr - h * rot).norm() <= 1e-12 * (1.0 + h.norm()));
            prop_assert!((hr.norm() - h.norm()).abs() <= 1e-12 * (1.0 + h.norm()));
        }

        #[test]
        fn ma_magnitude_bound(seed in any::<u64>(), k in 1usize..10, x in -5.0..5.0f64, y in -5.0..5.0f64) {
            let ps = gen_path_set(k, seed, 1.0).unwrap();
            prop_assert!(ma_channel(&ps, Position::new(x, y)).norm() <= ps.gain_sum_abs() * (1.0 + 1e-12));
            for p in ps.paths() {
                let [ux, uy] = p.direction();
                prop_assert!((ux * ux + uy * uy).sqrt() <= 1.0 + 1e-15);
            }
        }
    }
}
