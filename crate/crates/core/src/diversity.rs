//! Dual-branch diversity analysis: branch powers, complex and envelope
//! cross-correlation, correlated Rayleigh pair generation, per-sample
//! selection combining, and outage-quantile diversity gain.
//!
//! For correlated Rayleigh branches the envelope correlation tracks the
//! squared magnitude of the complex correlation; combining pays off while
//! the envelope correlation stays below about 0.5.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};

/// A complex baseband trace x(t).
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrace {
    samples: Vec<Complex64>,
}

impl SignalTrace {
    pub fn new(samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::domain("signal trace needs at least 2 samples"));
        }
        Ok(SignalTrace { samples })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Summary of a dual-branch analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiversityReport {
    pub p1_w: f64,
    pub p2_w: f64,
    pub rho_c_re: f64,
    pub rho_c_im: f64,
    pub rho_e: f64,
    pub gain_db: f64,
    pub outage_prob: f64,
}

/// Mean power P = E(|x(t)|^2) as a time average.
pub fn mean_power(x: &SignalTrace) -> f64 {
    x.samples.iter().map(|c| c.norm_sqr()).sum::<f64>() / x.len() as f64
}

fn check_equal_lengths(x1: &SignalTrace, x2: &SignalTrace) -> Result<()> {
    if x1.len() != x2.len() {
        return Err(Error::domain(format!(
            "traces have different lengths ({} vs {})",
            x1.len(),
            x2.len()
        )));
    }
    Ok(())
}

/// Normalized complex cross-correlation with sample means removed:
/// rho_c = E[x1~ conj(x2~)] / sqrt(P1~ P2~).
pub fn complex_correlation(x1: &SignalTrace, x2: &SignalTrace) -> Result<Complex64> {
    check_equal_lengths(x1, x2)?;
    let n = x1.len() as f64;
    let m1 = x1.samples.iter().sum::<Complex64>() / n;
    let m2 = x2.samples.iter().sum::<Complex64>() / n;
    let mut cross = Complex64::new(0.0, 0.0);
    let mut p1 = 0.0;
    let mut p2 = 0.0;
    for (a, b) in x1.samples.iter().zip(&x2.samples) {
        let a = a - m1;
        let b = b - m2;
        cross += a * b.conj();
        p1 += a.norm_sqr();
        p2 += b.norm_sqr();
    }
    if p1 <= 0.0 || p2 <= 0.0 {
        return Err(Error::DegenerateInput(
            "a branch has zero variance after mean removal".to_string(),
        ));
    }
    Ok(cross / (p1 * p2).sqrt())
}

/// Pearson correlation of the envelope sequences |x1(t)| and |x2(t)|.
pub fn envelope_correlation(x1: &SignalTrace, x2: &SignalTrace) -> Result<f64> {
    check_equal_lengths(x1, x2)?;
    let n = x1.len() as f64;
    let e1: Vec<f64> = x1.samples.iter().map(|c| c.norm()).collect();
    let e2: Vec<f64> = x2.samples.iter().map(|c| c.norm()).collect();
    let m1 = e1.iter().sum::<f64>() / n;
    let m2 = e2.iter().sum::<f64>() / n;
    let mut cross = 0.0;
    let mut v1 = 0.0;
    let mut v2 = 0.0;
    for (a, b) in e1.iter().zip(&e2) {
        let a = a - m1;
        let b = b - m2;
        cross += a * b;
        v1 += a * a;
        v2 += b * b;
    }
    if v1 <= 0.0 || v2 <= 0.0 {
        return Err(Error::DegenerateInput(
            "a branch has constant envelope".to_string(),
        ));
    }
    Ok(cross / (v1 * v2).sqrt())
}

/// Generate a correlated Rayleigh pair with target complex correlation
/// `rho`: x1 is unit complex Gaussian and x2 = rho x1 + sqrt(1-|rho|^2) w.
pub fn generate_correlated_rayleigh(
    n: usize,
    rho: Complex64,
    seed: u64,
) -> Result<(SignalTrace, SignalTrace)> {
    if n < 2 {
        return Err(Error::domain("need at least 2 samples"));
    }
    if rho.norm() >= 1.0 {
        return Err(Error::domain(format!(
            "|rho| = {:.6} must be below 1",
            rho.norm()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ortho = (1.0 - rho.norm_sqr()).sqrt();
    let mut s1 = Vec::with_capacity(n);
    let mut s2 = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = unit_complex_gaussian(&mut rng);
        let w = unit_complex_gaussian(&mut rng);
        s1.push(x1);
        s2.push(rho * x1 + ortho * w);
    }
    Ok((SignalTrace::new(s1)?, SignalTrace::new(s2)?))
}

fn unit_complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) / 2f64.sqrt()
}

/// Selection combining: per sample, keep whichever branch has the larger
/// instantaneous envelope. Branch 1 wins ties.
pub fn selection_combine(x1: &SignalTrace, x2: &SignalTrace) -> Result<SignalTrace> {
    check_equal_lengths(x1, x2)?;
    let samples = x1
        .samples
        .iter()
        .zip(&x2.samples)
        .map(|(&a, &b)| if a.norm_sqr() >= b.norm_sqr() { a } else { b })
        .collect();
    SignalTrace::new(samples)
}

/// Diversity gain in dB at an outage probability: the improvement of the
/// combined branch's outage-level power over branch 1,
/// 10 log10( Q_p(|x_c|^2) / Q_p(|x_1|^2) ).
pub fn diversity_gain(x1: &SignalTrace, x2: &SignalTrace, outage_prob: f64) -> Result<f64> {
    if !(outage_prob > 0.0 && outage_prob < 0.5) {
        return Err(Error::domain("outage probability must be in (0, 0.5)"));
    }
    let needed = (100.0 / outage_prob).ceil() as usize;
    if x1.len() < needed {
        return Err(Error::domain(format!(
            "need at least {needed} samples to resolve the {outage_prob} quantile (got {})",
            x1.len()
        )));
    }
    let combined = selection_combine(x1, x2)?;
    let q_combined = power_quantile(&combined, outage_prob);
    let q_branch = power_quantile(x1, outage_prob);
    if q_branch <= 0.0 {
        return Err(Error::DegenerateInput(
            "branch 1 outage-level power is zero".to_string(),
        ));
    }
    Ok(10.0 * (q_combined / q_branch).log10())
}

/// Interpolated empirical quantile of the instantaneous power sequence.
fn power_quantile(x: &SignalTrace, p: f64) -> f64 {
    let mut powers: Vec<f64> = x.samples.iter().map(|c| c.norm_sqr()).collect();
    powers.sort_by(|a, b| a.partial_cmp(b).expect("powers are finite"));
    let h = p * (powers.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(powers.len() - 1);
    powers[lo] + (h - lo as f64) * (powers[hi] - powers[lo])
}

/// Full dual-branch report.
pub fn analyze(x1: &SignalTrace, x2: &SignalTrace, outage_prob: f64) -> Result<DiversityReport> {
    let rho_c = complex_correlation(x1, x2)?;
    Ok(DiversityReport {
        p1_w: mean_power(x1),
        p2_w: mean_power(x2),
        rho_c_re: rho_c.re,
        rho_c_im: rho_c.im,
        rho_e: envelope_correlation(x1, x2)?,
        gain_db: diversity_gain(x1, x2, outage_prob)?,
        outage_prob,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn trace(values: &[(f64, f64)]) -> SignalTrace {
        SignalTrace::new(values.iter().map(|&(re, im)| Complex64::new(re, im)).collect())
            .unwrap()
    }

    fn rayleigh(n: usize, seed: u64) -> SignalTrace {
        generate_correlated_rayleigh(n, Complex64::new(0.0, 0.0), seed)
            .unwrap()
            .0
    }

    #[test]
    fn mean_power_constants() {
        assert!((mean_power(&trace(&[(1.0, 0.0), (1.0, 0.0)])) - 1.0).abs() < 1e-15);
        assert_eq!(mean_power(&trace(&[(0.0, 0.0), (0.0, 0.0)])), 0.0);
    }

    #[test]
    fn mean_power_unit_gaussian() {
        let x = rayleigh(100_000, 8);
        let p = mean_power(&x);
        assert!((p - 1.0).abs() < 0.02, "mean power {p}");
    }

    #[test]
    fn complex_correlation_identity_and_rotation() {
        let x = rayleigh(10_000, 3);
        let rho = complex_correlation(&x, &x).unwrap();
        assert!((rho - Complex64::new(1.0, 0.0)).norm() < 1e-12);

        // x2 = i x1: unit magnitude, -90 degrees under the conj-on-second
        // convention.
        let rotated = SignalTrace::new(
            x.samples().iter().map(|&c| Complex64::new(0.0, 1.0) * c).collect(),
        )
        .unwrap();
        let rho = complex_correlation(&x, &rotated).unwrap();
        assert!((rho.norm() - 1.0).abs() < 1e-12);
        assert!((rho.arg().to_degrees() + 90.0).abs() < 1e-9);
    }

    #[test]
    fn independent_branches_nearly_uncorrelated() {
        let (x1, x2) =
            generate_correlated_rayleigh(100_000, Complex64::new(0.0, 0.0), 42).unwrap();
        assert!(complex_correlation(&x1, &x2).unwrap().norm() < 0.02);
        assert!(envelope_correlation(&x1, &x2).unwrap().abs() < 0.02);
    }

    #[test]
    fn envelope_correlation_scaled_copy_is_one() {
        let x = rayleigh(5_000, 4);
        let doubled =
            SignalTrace::new(x.samples().iter().map(|&c| 2.0 * c).collect()).unwrap();
        let rho = envelope_correlation(&x, &doubled).unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn envelope_tracks_squared_complex_correlation() {
        let (x1, x2) =
            generate_correlated_rayleigh(100_000, Complex64::new(0.5, 0.5), 7).unwrap();
        let rho_c = complex_correlation(&x1, &x2).unwrap();
        let rho_e = envelope_correlation(&x1, &x2).unwrap();
        assert!((rho_e - rho_c.norm_sqr()).abs() < 0.05);
        assert!((rho_e - 0.5).abs() < 0.05);
    }

    #[test]
    fn generator_hits_target_correlation() {
        let (x1, x2) =
            generate_correlated_rayleigh(100_000, Complex64::new(0.9, 0.0), 11).unwrap();
        let rho = complex_correlation(&x1, &x2).unwrap();
        assert!((rho.re - 0.9).abs() < 0.01, "re {}", rho.re);
        assert!(rho.im.abs() < 0.01);
    }

    #[test]
    fn generator_rejects_unit_correlation() {
        assert!(generate_correlated_rayleigh(100, Complex64::new(1.0, 0.0), 0).is_err());
    }

    #[test]
    fn selection_combine_basics() {
        let x1 = rayleigh(1_000, 5);
        let zeros =
            SignalTrace::new(vec![Complex64::new(0.0, 0.0); 1_000]).unwrap();
        assert_eq!(selection_combine(&x1, &zeros).unwrap(), x1);
        assert_eq!(selection_combine(&x1, &x1).unwrap(), x1);
    }

    #[test]
    fn selection_combine_improves_mean_power() {
        let (x1, x2) =
            generate_correlated_rayleigh(100_000, Complex64::new(0.0, 0.0), 21).unwrap();
        let xc = selection_combine(&x1, &x2).unwrap();
        let pc = mean_power(&xc);
        assert!(pc > mean_power(&x1).max(mean_power(&x2)), "combined {pc}");
    }

    #[test]
    fn combined_envelope_dominates_pointwise() {
        let (x1, x2) =
            generate_correlated_rayleigh(10_000, Complex64::new(0.3, 0.1), 33).unwrap();
        let xc = selection_combine(&x1, &x2).unwrap();
        for ((a, b), c) in x1.samples().iter().zip(x2.samples()).zip(xc.samples()) {
            assert!(c.norm() >= a.norm() - 1e-15);
            assert!(c.norm() >= b.norm() - 1e-15);
        }
    }

    #[test]
    fn identical_branches_gain_nothing() {
        let x = rayleigh(100_000, 17);
        let g = diversity_gain(&x, &x, 0.01).unwrap();
        assert!(g.abs() < 0.2, "gain {g}");
    }

    #[test]
    fn diversity_gain_needs_enough_samples() {
        let x = rayleigh(1_000, 1);
        assert!(diversity_gain(&x, &x, 0.01).is_err());
        assert!(diversity_gain(&x, &x, 0.6).is_err());
    }

    #[test]
    fn lower_envelope_correlation_gains_more() {
        let n = 200_000;
        let gain_at = |rho: f64, seed: u64| {
            let (x1, x2) =
                generate_correlated_rayleigh(n, Complex64::new(rho, 0.0), seed).unwrap();
            diversity_gain(&x1, &x2, 0.01).unwrap()
        };
        // |rho_c| 0.5 -> rho_e ~ 0.25; |rho_c| 0.9 -> rho_e ~ 0.81.
        let g_low = gain_at(0.5, 100);
        let g_high = gain_at(0.9, 101);
        assert!(
            g_low - g_high >= 1.0,
            "gain at rho_e 0.25 ({g_low}) vs 0.81 ({g_high})"
        );
    }

    #[test]
    fn degenerate_inputs_error() {
        let constant = trace(&[(1.0, 0.0), (1.0, 0.0), (1.0, 0.0)]);
        let x = trace(&[(1.0, 0.0), (0.0, 2.0), (0.5, 0.5)]);
        assert!(matches!(
            complex_correlation(&constant, &x),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            envelope_correlation(&constant, &x),
            Err(Error::DegenerateInput(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn correlations_bounded(seed in 0u64..1_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(8usize..200);
            let s1: Vec<Complex64> = (0..n).map(|_| unit_complex_gaussian(&mut rng)).collect();
            let s2: Vec<Complex64> = (0..n).map(|_| unit_complex_gaussian(&mut rng)).collect();
            let x1 = SignalTrace::new(s1).unwrap();
            let x2 = SignalTrace::new(s2).unwrap();
            let rho_c = complex_correlation(&x1, &x2).unwrap();
            let rho_e = envelope_correlation(&x1, &x2).unwrap();
            prop_assert!(rho_c.norm() <= 1.0 + 1e-9);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&rho_e));
        }

        #[test]
        fn correlations_scale_invariant(seed in 0u64..500, scale_re in -3.0f64..3.0, scale_im in -3.0f64..3.0) {
            let c = Complex64::new(scale_re, scale_im);
            prop_assume!(c.norm() > 1e-3);
            let (x1, x2) = generate_correlated_rayleigh(256, Complex64::new(0.4, -0.2), seed).unwrap();
            let scaled = SignalTrace::new(x2.samples().iter().map(|&v| c * v).collect()).unwrap();
            let rho_base = complex_correlation(&x1, &x2).unwrap();
            let rho_scaled = complex_correlation(&x1, &scaled).unwrap();
            // Scaling rotates the complex correlation but not its magnitude.
            prop_assert!((rho_base.norm() - rho_scaled.norm()).abs() < 1e-12);
            let e_base = envelope_correlation(&x1, &x2).unwrap();
            let e_scaled = envelope_correlation(&x1, &scaled).unwrap();
            prop_assert!((e_base - e_scaled).abs() < 1e-12);
        }
    }
}
