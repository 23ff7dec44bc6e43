use num_complex::Complex64;

use crate::channel::{CascadedChannel, RisPhases};

fn arg(z: Complex64) -> f64 {
    if z == Complex64::new(0.0, 0.0) {
        0.0
    } else {
        z.arg()
    }
}

/// Co-phase every reflected term with the direct link:
/// `phi_m = arg(direct) - arg(c_m)`, with `arg(0) = 0`. Reaches
/// `|direct| + sum |c_m|`, the SISO optimum.
pub fn pbf_perfect(chan: &CascadedChannel) -> RisPhases {
    let reference = arg(chan.direct());
    RisPhases::new(chan.coeffs().iter().map(|&c| reference - arg(c)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gen_cascaded_channel, ris_end_to_end};
    use std::f64::consts::{FRAC_PI_2, TAU};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_element_alignment() {
        let ch = CascadedChannel::new(vec![c(1.0, 0.0), c(0.0, 1.0)], c(0.0, 0.0)).unwrap();
        let ph = pbf_perfect(&ch);
        assert!((ph.as_slice()[0]).abs() < 1e-15);
        assert!((ph.as_slice()[1] - 3.0 * FRAC_PI_2).abs() < 1e-12);
        assert!((ris_end_to_end(&ch, &ph).unwrap().norm_sqr() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_cascade_leaves_direct_power() {
        let ch = CascadedChannel::new(vec![c(0.0, 0.0), c(0.0, 0.0)], c(0.3, -0.4)).unwrap();
        let p = ris_end_to_end(&ch, &pbf_perfect(&ch)).unwrap().norm_sqr();
        assert!((p - 0.25).abs() < 1e-15);
    }

    #[test]
    fn closed_form_power_on_random_instances() {
        for seed in 0..1000u64 {
            let m = [1usize, 3, 17, 64][seed as usize % 4];
            let ch = gen_cascaded_channel(m, seed, 1.0, (seed % 2 == 0).then_some(2.0)).unwrap();
            let p = ris_end_to_end(&ch, &pbf_perfect(&ch)).unwrap().norm_sqr();
            let bound = ch.magnitude_bound().powi(2);
            assert!((p - bound).abs() <= 1e-9 * bound, "seed {seed}");
        }
    }

    #[test]
    fn no_phase_grid_point_beats_the_bound() {
        // exhaustive 64^3 search on a three-element instance
        let ch = gen_cascaded_channel(3, 42, 1.0, Some(1.0)).unwrap();
        let best = ris_end_to_end(&ch, &pbf_perfect(&ch)).unwrap().norm_sqr();
        let grid: Vec<f64> = (0..64).map(|k| TAU * k as f64 / 64.0).collect();
        let mut brute: f64 = 0.0;
        for &a in &grid {
            for &b in &grid {
                for &d in &grid {
                    let p = ris_end_to_end(&ch, &RisPhases::new(vec![a, b, d]))
                        .unwrap()
                        .norm_sqr();
                    brute = brute.max(p);
                }
            }
        }
        assert!(brute <= best * (1.0 + 1e-12));
        // the grid gets close: 64 levels lose at most cos(pi/64) per term
        assert!(brute >= best * (std::f64::consts::PI / 64.0).cos().powi(2));
    }
}
