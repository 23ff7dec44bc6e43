use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{pbf_perfect, BaselineError};
use crate::channel::{CascadedChannel, RisPhases};
use crate::linalg::min_norm_lstsq;
use crate::oracle::{PilotOracle, QueryMode, ReconfigVariable};

/// Discrete-Fourier probe patterns for `m` elements.
///
/// Row `n`, element `j` gets phase `2 pi n (j + s) / D` where `D = m + s`
/// and `s = 1` when a direct link is estimated alongside (its regressor is
/// the constant column), `0` otherwise. Rows are mutually orthogonal up to
/// `D`; beyond that the pattern repeats.
pub fn dft_probe_book(n: usize, m: usize, with_direct: bool) -> Vec<RisPhases> {
    let shift = usize::from(with_direct);
    let d = m + shift;
    (0..n)
        .map(|row| {
            RisPhases::new(
                (0..m)
                    .map(|j| TAU * ((row * (j + shift)) % d) as f64 / d as f64)
                    .collect(),
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsOutcome {
    /// Perfect-CSI beamformer applied to the estimate.
    pub phases: RisPhases,
    pub estimate: CascadedChannel,
    /// Probe matrix had rank below the number of unknowns while `N` was
    /// large enough to identify them.
    pub rank_deficient: bool,
    pub queries_used: usize,
}

/// Least-squares cascaded-channel estimation followed by passive
/// beamforming on the estimate.
///
/// Collects one coherent measurement per probe row, solves the stacked
/// system for the minimum-norm estimate and co-phases against it. With
/// `estimate_direct` the direct-link gain is an extra unknown.
pub fn ls_estimate_then_pbf(
    oracle: &mut PilotOracle,
    probe_book: &[RisPhases],
    estimate_direct: bool,
) -> Result<LsOutcome, BaselineError> {
    let n = probe_book.len();
    if n == 0 {
        return Err(BaselineError::Invalid("LS needs at least one pilot".into()));
    }
    if oracle.mode() != QueryMode::Coherent {
        return Err(BaselineError::Invalid(
            "LS needs coherent measurements".into(),
        ));
    }
    let m = oracle.dim();
    if probe_book.iter().any(|r| r.len() != m) {
        return Err(BaselineError::Invalid(format!(
            "probe rows must have {m} phases"
        )));
    }
    if let Some(r) = oracle.remaining_queries() {
        if r < n {
            return Err(BaselineError::Invalid(format!(
                "budget {r} below pilot count {n}"
            )));
        }
    }
    let amp = oracle.config().tx_power.sqrt();
    if amp <= 0.0 {
        return Err(BaselineError::Invalid(
            "LS needs positive transmit power".into(),
        ));
    }

    let shift = usize::from(estimate_direct);
    let unknowns = m + shift;
    let mut a = DMatrix::<Complex64>::zeros(n, unknowns);
    let mut y = DVector::<Complex64>::zeros(n);
    let before = oracle.used();
    for (row, probe) in probe_book.iter().enumerate() {
        let meas = oracle.query(&ReconfigVariable::Phases(probe.clone()))?;
        y[row] = meas.as_coherent().expect("coherent oracle") / amp;
        if estimate_direct {
            a[(row, 0)] = Complex64::new(1.0, 0.0);
        }
        for (j, t) in probe.reflection().enumerate() {
            a[(row, j + shift)] = t;
        }
    }

    let sol = min_norm_lstsq(&a, &y);
    let direct = if estimate_direct {
        sol.x[0]
    } else {
        Complex64::new(0.0, 0.0)
    };
    let coeffs: Vec<Complex64> = sol.x.iter().skip(shift).copied().collect();
    let estimate = CascadedChannel::new(coeffs, direct)
        .map_err(|e| BaselineError::Invalid(format!("non-finite estimate: {e}")))?;
    Ok(LsOutcome {
        phases: pbf_perfect(&estimate),
        estimate,
        rank_deficient: sol.rank_deficient && n >= unknowns,
        queries_used: oracle.used() - before,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gen_cascaded_channel, ris_end_to_end};
    use crate::oracle::{OracleConfig, Scenario};

    fn coherent(ch: CascadedChannel, budget: usize) -> PilotOracle {
        let cfg = OracleConfig {
            mode: QueryMode::Coherent,
            budget: Some(budget),
            ..Default::default()
        };
        PilotOracle::new(Scenario::Ris(ch), cfg).unwrap()
    }

    fn rel_close(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
        let num: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let den: f64 = b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        num <= tol * den
    }

    #[test]
    fn square_dft_probes_recover_exactly() {
        let ch = gen_cascaded_channel(16, 5, 1.0, None).unwrap();
        let mut o = coherent(ch.clone(), 16);
        let out = ls_estimate_then_pbf(&mut o, &dft_probe_book(16, 16, false), false).unwrap();
        assert_eq!(out.queries_used, 16);
        assert!(!out.rank_deficient);
        assert!(rel_close(out.estimate.coeffs(), ch.coeffs(), 1e-9));
        let got = ris_end_to_end(&ch, &out.phases).unwrap().norm_sqr();
        let best = ch.magnitude_bound().powi(2);
        assert!((got - best).abs() <= 1e-9 * best);
    }

    #[test]
    fn direct_link_estimated_with_one_extra_pilot() {
        let ch = gen_cascaded_channel(12, 8, 1.0, Some(12.0)).unwrap();
        let mut o = coherent(ch.clone(), 13);
        let out = ls_estimate_then_pbf(&mut o, &dft_probe_book(13, 12, true), true).unwrap();
        assert!(rel_close(out.estimate.coeffs(), ch.coeffs(), 1e-9));
        assert!((out.estimate.direct() - ch.direct()).norm() <= 1e-9 * ch.direct().norm());
    }

    #[test]
    fn single_pilot_gives_min_norm_solution() {
        let ch = gen_cascaded_channel(2, 9, 1.0, None).unwrap();
        let book = vec![RisPhases::new(vec![0.3, 1.9])];
        let mut o = coherent(ch.clone(), 1);
        let out = ls_estimate_then_pbf(&mut o, &book, false).unwrap();
        // normal-equations route: x = a^H (a a^H)^{-1} y for a single row a
        let row: Vec<Complex64> = book[0].reflection().collect();
        let y = ris_end_to_end(&ch, &book[0]).unwrap();
        let aa: f64 = row.iter().map(|v| v.norm_sqr()).sum();
        let expect: Vec<Complex64> = row.iter().map(|v| v.conj() * y / aa).collect();
        assert!(rel_close(out.estimate.coeffs(), &expect, 1e-12));
        assert!(!out.rank_deficient);
    }

    #[test]
    fn repeated_probes_are_flagged() {
        let ch = gen_cascaded_channel(3, 1, 1.0, None).unwrap();
        let book = vec![RisPhases::new(vec![0.0, 1.0, 2.0]); 4];
        let mut o = coherent(ch, 4);
        let out = ls_estimate_then_pbf(&mut o, &book, false).unwrap();
        assert!(out.rank_deficient);
        assert_eq!(out.queries_used, 4);
    }

    #[test]
    fn invalid_inputs() {
        let ch = gen_cascaded_channel(3, 1, 1.0, None).unwrap();
        let mut o = coherent(ch.clone(), 4);
        assert!(ls_estimate_then_pbf(&mut o, &[], false).is_err());
        assert!(ls_estimate_then_pbf(&mut o, &dft_probe_book(5, 3, false), false).is_err());
        let mut p = PilotOracle::new(Scenario::Ris(ch), OracleConfig::default()).unwrap();
        assert!(ls_estimate_then_pbf(&mut p, &dft_probe_book(3, 3, false), false).is_err());
    }

    #[test]
    fn underdetermined_regime_loses_power() {
        let mut ratio = 0.0;
        for seed in 0..100u64 {
            let ch = gen_cascaded_channel(32, seed, 1.0, None).unwrap();
            let mut o = coherent(ch.clone(), 16);
            let out = ls_estimate_then_pbf(&mut o, &dft_probe_book(16, 32, false), false).unwrap();
            let got = ris_end_to_end(&ch, &out.phases).unwrap().norm_sqr();
            ratio += got / ch.magnitude_bound().powi(2);
        }
        ratio /= 100.0;
        assert!(ratio < 0.9, "mean power ratio {ratio}");
    }
}
