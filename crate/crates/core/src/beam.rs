//! Beam weight synthesis and pattern evaluation.
//!
//! Two weight families: phase-conjugate (conventional) beams that point the
//! full aperture at a target, and zero-forcing null-steered beams that
//! additionally pin the response to zero at requested azimuths. Weights are
//! unit norm so total radiated power per beam is fixed; link-budget effects
//! live in the power module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::array::{check_azimuth, steering_vector, ArrayGeometry};
use crate::doa::azimuth_grid;
use crate::error::{Error, Result};

/// Minimum angular separation between constraint directions, in degrees.
pub const MIN_CONSTRAINT_SEPARATION_DEG: f64 = 1.0;

/// Relative null depth guaranteed by the zero-forcing construction.
pub const NULL_DEPTH_REL: f64 = 1e-10;

/// Unit-norm complex weights defining one served beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamWeights {
    weights: DVector<Complex64>,
    target_azimuth_deg: f64,
    null_azimuths_deg: Vec<f64>,
}

impl BeamWeights {
    pub fn weights(&self) -> &DVector<Complex64> {
        &self.weights
    }

    pub fn target_azimuth_deg(&self) -> f64 {
        self.target_azimuth_deg
    }

    pub fn null_azimuths_deg(&self) -> &[f64] {
        &self.null_azimuths_deg
    }

    pub fn num_elements(&self) -> usize {
        self.weights.len()
    }
}

/// Sampled, peak-normalized power pattern with its 3 dB beamwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamPattern {
    pub azimuths_deg: Vec<f64>,
    /// Power gain per grid point, normalized so the maximum is 1.
    pub gain: Vec<f64>,
    pub beamwidth_3db_deg: f64,
}

/// Phase-conjugate beam: w = a(target) / ||a(target)||. The pattern peaks
/// at the target with gain M.
pub fn conjugate_weights(geometry: ArrayGeometry, target_deg: f64) -> Result<BeamWeights> {
    geometry.validate()?;
    check_azimuth(target_deg)?;
    let a = steering_vector(geometry, target_deg)?;
    let norm = a.norm();
    Ok(BeamWeights {
        weights: a.unscale(norm),
        target_azimuth_deg: target_deg,
        null_azimuths_deg: Vec::new(),
    })
}

/// Zero-forcing beam: unit response at the target, exact zeros at each null
/// azimuth. With C = [a(target), a(null_1), ...] and f = e_1, the weights
/// solve w = C (C^H C)^{-1} f, then renormalize to unit norm.
pub fn null_steering_weights(
    geometry: ArrayGeometry,
    target_deg: f64,
    nulls_deg: &[f64],
) -> Result<BeamWeights> {
    geometry.validate()?;
    check_azimuth(target_deg)?;
    for &n in nulls_deg {
        check_azimuth(n)?;
    }
    let m = geometry.num_elements;
    if nulls_deg.len() + 2 > m {
        return Err(Error::domain(format!(
            "at most M-2 = {} nulls supported on an {m}-element array (got {})",
            m.saturating_sub(2),
            nulls_deg.len()
        )));
    }
    let mut directions = vec![target_deg];
    directions.extend_from_slice(nulls_deg);
    for (i, a) in directions.iter().enumerate() {
        for b in directions.iter().skip(i + 1) {
            if (a - b).abs() < MIN_CONSTRAINT_SEPARATION_DEG {
                return Err(Error::domain(format!(
                    "constraint directions {a} and {b} closer than {MIN_CONSTRAINT_SEPARATION_DEG} deg"
                )));
            }
        }
    }

    if nulls_deg.is_empty() {
        return conjugate_weights(geometry, target_deg);
    }

    let cols: Vec<DVector<Complex64>> = directions
        .iter()
        .map(|&d| steering_vector(geometry, d))
        .collect::<Result<_>>()?;
    let c = DMatrix::from_columns(&cols);

    // Conditioning gate on the constraint matrix itself.
    let sv = crate::linalg::singular_values(&c);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = sv.last().copied().unwrap_or(0.0);
    if sigma_min < 1e-10 * sigma_max {
        return Err(Error::Conditioning { sigma_min });
    }

    let gram = c.adjoint() * &c;
    let mut f = DVector::<Complex64>::zeros(directions.len());
    f[0] = Complex64::new(1.0, 0.0);
    let g =
        crate::linalg::solve_vec(&gram, &f).ok_or(Error::Conditioning { sigma_min })?;
    let w = &c * g;
    let norm = w.norm();
    if norm < 1e-100 {
        return Err(Error::Conditioning { sigma_min });
    }
    let beam = BeamWeights {
        weights: w.unscale(norm),
        target_azimuth_deg: target_deg,
        null_azimuths_deg: nulls_deg.to_vec(),
    };

    // Post-verify the defining constraint; a violation is a bug.
    let target_gain = beam_gain_at(&beam, geometry, target_deg)?;
    for &n in nulls_deg {
        let g = beam_gain_at(&beam, geometry, n)?;
        if g > NULL_DEPTH_REL * target_gain {
            return Err(Error::Integrity(format!(
                "null at {n} deg has relative gain {:.3e}",
                g / target_gain
            )));
        }
    }
    Ok(beam)
}

/// Un-normalized power gain |w^H a(azimuth)|^2.
pub fn beam_gain_at(w: &BeamWeights, geometry: ArrayGeometry, azimuth_deg: f64) -> Result<f64> {
    if w.num_elements() != geometry.num_elements {
        return Err(Error::domain(
            "weight vector length does not match array geometry",
        ));
    }
    let a = steering_vector(geometry, azimuth_deg)?;
    Ok(w.weights.dotc(&a).norm_sqr())
}

/// Sample the power pattern on the azimuth grid and measure the 3 dB width
/// of the main lobe (linear interpolation at the 0.5 crossings; 180 deg
/// when the pattern never drops below half power, as for a single element).
pub fn beam_pattern(
    w: &BeamWeights,
    geometry: ArrayGeometry,
    grid_step_deg: f64,
) -> Result<BeamPattern> {
    if !(grid_step_deg > 0.0 && grid_step_deg <= 5.0) {
        return Err(Error::domain("grid step must be in (0, 5] degrees"));
    }
    let grid = azimuth_grid(grid_step_deg);
    let mut gain = Vec::with_capacity(grid.len());
    for &theta in &grid {
        gain.push(beam_gain_at(w, geometry, theta)?);
    }
    let peak = gain.iter().cloned().fold(0f64, f64::max).max(f64::MIN_POSITIVE);
    for g in &mut gain {
        *g /= peak;
    }
    let beamwidth_3db_deg = main_lobe_width(&grid, &gain, grid_step_deg);
    Ok(BeamPattern {
        azimuths_deg: grid,
        gain,
        beamwidth_3db_deg,
    })
}

fn main_lobe_width(grid: &[f64], gain: &[f64], step: f64) -> f64 {
    let peak_idx = gain
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("gains are finite"))
        .map(|(i, _)| i)
        .expect("grid is nonempty");

    // Walk left from the peak to the first sub-half-power sample.
    let mut i = peak_idx;
    let left = loop {
        if gain[i] < 0.5 {
            // Crossing between i and i+1.
            let frac = (0.5 - gain[i]) / (gain[i + 1] - gain[i]);
            break grid[i] + frac * step;
        }
        if i == 0 {
            break -90.0; // main lobe reaches the field-of-view edge
        }
        i -= 1;
    };
    let mut i = peak_idx;
    let right = loop {
        if gain[i] < 0.5 {
            let frac = (0.5 - gain[i]) / (gain[i - 1] - gain[i]);
            break grid[i] - frac * step;
        }
        if i == gain.len() - 1 {
            break 90.0;
        }
        i += 1;
    };
    right - left
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geom(m: usize) -> ArrayGeometry {
        ArrayGeometry::new(m, 0.5).unwrap()
    }

    #[test]
    fn single_element_is_omni() {
        let w = conjugate_weights(geom(1), 12.0).unwrap();
        let p = beam_pattern(&w, geom(1), 1.0).unwrap();
        assert!(p.gain.iter().all(|&g| (g - 1.0).abs() < 1e-12));
        assert_eq!(p.beamwidth_3db_deg, 180.0);
    }

    #[test]
    fn conjugate_first_nulls_match_theory() {
        // First array-factor nulls at +-asin(1/(M d)) for a broadside beam.
        let g = geom(8);
        let w = conjugate_weights(g, 0.0).unwrap();
        let expected = (1.0f64 / 4.0).asin().to_degrees(); // 14.4775 deg
        for sign in [-1.0, 1.0] {
            let gain = beam_gain_at(&w, g, sign * expected).unwrap();
            assert!(gain < 1e-20, "gain at first null {gain}");
        }
    }

    #[test]
    fn conjugate_pattern_peaks_at_target() {
        let g = geom(8);
        let w = conjugate_weights(g, 20.0).unwrap();
        let p = beam_pattern(&w, g, 0.01).unwrap();
        let (best, _) = p
            .gain
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert!((p.azimuths_deg[best] - 20.0).abs() <= 0.01 + 1e-9);
    }

    #[test]
    fn empty_nulls_reduce_to_conjugate() {
        let g = geom(8);
        let a = null_steering_weights(g, 15.0, &[]).unwrap();
        let b = conjugate_weights(g, 15.0).unwrap();
        assert!((a.weights() - b.weights()).norm() < 1e-12);
    }

    #[test]
    fn null_depth_is_deep() {
        let g = geom(8);
        let w = null_steering_weights(g, 0.0, &[30.0]).unwrap();
        let null_gain = beam_gain_at(&w, g, 30.0).unwrap();
        let target_gain = beam_gain_at(&w, g, 0.0).unwrap();
        assert!(null_gain / target_gain <= 1e-10);
    }

    #[test]
    fn too_many_nulls_rejected() {
        let g = geom(4);
        let err = null_steering_weights(g, 0.0, &[20.0, -20.0, 40.0]);
        assert!(err.is_err(), "M-1 nulls must be rejected");
    }

    #[test]
    fn close_constraints_rejected() {
        let g = geom(8);
        assert!(null_steering_weights(g, 0.0, &[0.5]).is_err());
        assert!(null_steering_weights(g, 0.0, &[10.0, 10.5]).is_err());
    }

    #[test]
    fn broadside_beamwidth_matches_aperture_rule() {
        let g = geom(8);
        let w = conjugate_weights(g, 0.0).unwrap();
        let p = beam_pattern(&w, g, 0.01).unwrap();
        let approx = (0.886 / 4.0f64).to_degrees();
        assert!(
            (p.beamwidth_3db_deg - approx).abs() < 0.5,
            "beamwidth {} vs {}",
            p.beamwidth_3db_deg,
            approx
        );
    }

    #[test]
    fn doubling_elements_halves_beamwidth() {
        let w8 = conjugate_weights(geom(8), 0.0).unwrap();
        let w16 = conjugate_weights(geom(16), 0.0).unwrap();
        let b8 = beam_pattern(&w8, geom(8), 0.01).unwrap().beamwidth_3db_deg;
        let b16 = beam_pattern(&w16, geom(16), 0.01).unwrap().beamwidth_3db_deg;
        let ratio = b8 / b16;
        assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn mean_gain_over_sine_grid_is_unity() {
        // Parseval-type check: a unit-norm beam averaged uniformly in
        // sin(theta) over a half-wavelength array has mean gain 1.
        let g = geom(8);
        let w = null_steering_weights(g, 10.0, &[-30.0, 45.0]).unwrap();
        let n = 200_000;
        let mut acc = 0.0;
        for i in 0..n {
            let s = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
            let theta = s.asin().to_degrees().clamp(-89.9999, 89.9999);
            acc += beam_gain_at(&w, g, theta).unwrap();
        }
        let mean = acc / n as f64;
        assert!((mean - 1.0).abs() < 1e-3, "mean gain {mean}");
    }

    #[test]
    fn pattern_symmetric_for_broadside_target() {
        let g = geom(8);
        let w = conjugate_weights(g, 0.0).unwrap();
        for theta in [5.0, 12.5, 33.0, 61.0] {
            let a = beam_gain_at(&w, g, theta).unwrap();
            let b = beam_gain_at(&w, g, -theta).unwrap();
            assert!((a - b).abs() < 1e-9 * a.max(1.0), "asymmetry at {theta}");
        }
    }

    #[test]
    fn beamwidth_strictly_decreases_with_aperture() {
        let mut last = f64::INFINITY;
        for m in [2usize, 4, 8, 16, 32] {
            let g = geom(m);
            let w = conjugate_weights(g, 0.0).unwrap();
            let bw = beam_pattern(&w, g, 0.02).unwrap().beamwidth_3db_deg;
            assert!(bw < last, "beamwidth {bw} at M={m} not below {last}");
            last = bw;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn conjugate_gain_at_target_is_m(m in 2usize..24, theta in -85.0f64..85.0) {
            let g = geom(m);
            let w = conjugate_weights(g, theta).unwrap();
            let gain = beam_gain_at(&w, g, theta).unwrap();
            prop_assert!((gain - m as f64).abs() < 1e-9 * m as f64);
        }

        #[test]
        fn null_gains_stay_deep(seed in 0u64..5_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = rng.gen_range(4usize..=16);
            let g = geom(m);
            let target: f64 = rng.gen_range(-60.0..60.0);
            let count = rng.gen_range(1usize..=(m - 2).min(4));
            let mut nulls: Vec<f64> = Vec::new();
            let mut guard = 0;
            while nulls.len() < count && guard < 1000 {
                guard += 1;
                let cand: f64 = rng.gen_range(-80.0..80.0);
                let ok = (cand - target).abs() >= 2.0
                    && nulls.iter().all(|&n: &f64| (cand - n).abs() >= 2.0);
                if ok {
                    nulls.push(cand);
                }
            }
            prop_assume!(nulls.len() == count);
            let w = null_steering_weights(g, target, &nulls).unwrap();
            let tgt = beam_gain_at(&w, g, target).unwrap();
            for &n in &nulls {
                let ng = beam_gain_at(&w, g, n).unwrap();
                prop_assert!(ng <= 1e-10 * tgt, "null {n}: {}", ng / tgt);
            }
        }

        #[test]
        fn weights_unit_norm(m in 2usize..16, theta in -80.0f64..80.0) {
            let g = geom(m);
            let w = conjugate_weights(g, theta).unwrap();
            prop_assert!((w.weights().norm() - 1.0).abs() < 1e-10);
        }
    }
}
