//! Uniform linear array model: steering vectors, synthetic received
//! snapshots, and sample covariance.
//!
//! The array sits in a 2-D plane facing the +y half plane; azimuth is
//! measured from broadside, positive toward +x. Element spacing is given in
//! carrier wavelengths so no explicit frequency appears anywhere. All
//! expectations are realized as time averages over `N` snapshots, so
//! second-order statistics converge at the usual 1/sqrt(N) rate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum azimuth separation between synthesized sources, in degrees.
pub const MIN_SOURCE_SEPARATION_DEG: f64 = 0.1;

/// Geometry of a uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    /// Number of elements M.
    pub num_elements: usize,
    /// Element spacing in carrier wavelengths (0.5 = half wavelength).
    pub spacing: f64,
}

impl ArrayGeometry {
    pub fn new(num_elements: usize, spacing: f64) -> Result<Self> {
        let g = ArrayGeometry {
            num_elements,
            spacing,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_elements < 1 {
            return Err(Error::domain("array must have at least one element"));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::domain("element spacing must be positive"));
        }
        Ok(())
    }

    /// Spacings above half a wavelength alias: two azimuths in (-90, +90)
    /// can produce identical phase progressions.
    pub fn has_ambiguous_spacing(&self) -> bool {
        self.spacing > 0.5
    }
}

/// Source waveform drawn per snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    /// Complex circular Gaussian with unit power (default).
    Gaussian,
    /// Unit-modulus tone: a single random phase held constant over all
    /// snapshots. Useful for single-snapshot pencil tests.
    Tone,
}

/// An emitting node as seen by the array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    /// Azimuth in degrees, strictly inside (-90, +90).
    pub azimuth_deg: f64,
    /// Per-element SNR in dB against unit-power noise.
    pub snr_db: f64,
    pub waveform: Waveform,
}

impl SourceSpec {
    pub fn gaussian(azimuth_deg: f64, snr_db: f64) -> Self {
        SourceSpec {
            azimuth_deg,
            snr_db,
            waveform: Waveform::Gaussian,
        }
    }

    pub fn tone(azimuth_deg: f64, snr_db: f64) -> Self {
        SourceSpec {
            azimuth_deg,
            snr_db,
            waveform: Waveform::Tone,
        }
    }
}

/// M x N complex baseband samples (element index x time index).
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    samples: DMatrix<Complex64>,
    geometry: ArrayGeometry,
}

impl SnapshotMatrix {
    /// Wrap an existing sample matrix. Row count must match the geometry.
    pub fn from_samples(geometry: ArrayGeometry, samples: DMatrix<Complex64>) -> Result<Self> {
        geometry.validate()?;
        if samples.nrows() != geometry.num_elements {
            return Err(Error::domain(format!(
                "snapshot matrix has {} rows but the array has {} elements",
                samples.nrows(),
                geometry.num_elements
            )));
        }
        if samples.ncols() < 1 {
            return Err(Error::domain("snapshot matrix needs at least one column"));
        }
        Ok(SnapshotMatrix { samples, geometry })
    }

    pub fn samples(&self) -> &DMatrix<Complex64> {
        &self.samples
    }

    pub fn geometry(&self) -> ArrayGeometry {
        self.geometry
    }

    pub fn num_elements(&self) -> usize {
        self.samples.nrows()
    }

    pub fn num_snapshots(&self) -> usize {
        self.samples.ncols()
    }
}

/// M x M Hermitian positive semidefinite covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    r: DMatrix<Complex64>,
}

impl CovarianceMatrix {
    /// Validating constructor: the matrix must be Hermitian to 1e-12
    /// relative tolerance and have no eigenvalue below -1e-10 * trace.
    pub fn new(r: DMatrix<Complex64>) -> Result<Self> {
        if r.nrows() != r.ncols() {
            return Err(Error::domain("covariance matrix must be square"));
        }
        let scale = r.norm().max(f64::MIN_POSITIVE);
        let asym = (&r - r.adjoint()).norm();
        if asym > 1e-12 * scale {
            return Err(Error::domain(format!(
                "covariance matrix is not Hermitian (relative asymmetry {:.3e})",
                asym / scale
            )));
        }
        let trace = r.trace().re;
        let (eigs, _) = crate::linalg::hermitian_eigen(&r);
        if eigs.iter().any(|&l| l < -1e-10 * trace.abs().max(1.0)) {
            return Err(Error::domain(
                "covariance matrix is not positive semidefinite",
            ));
        }
        Ok(CovarianceMatrix { r })
    }

    /// Constructor for matrices PSD by construction (X * X^H / N). The
    /// Hermitian part is taken to scrub rounding asymmetry.
    fn from_gram(r: DMatrix<Complex64>) -> Self {
        let herm = (&r + r.adjoint()).scale(0.5);
        CovarianceMatrix { r: herm }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.r
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    /// Eigenvalues sorted ascending, paired with their eigenvectors as
    /// matrix columns in the same order.
    pub fn sorted_eigen(&self) -> (Vec<f64>, DMatrix<Complex64>) {
        crate::linalg::hermitian_eigen(&self.r)
    }
}

/// Array response a(theta) for a unit plane wave from `azimuth_deg`.
/// Element m carries phase 2*pi*spacing*m*sin(theta); component 0 is 1.
pub fn steering_vector(geometry: ArrayGeometry, azimuth_deg: f64) -> Result<DVector<Complex64>> {
    geometry.validate()?;
    check_azimuth(azimuth_deg)?;
    let s = azimuth_deg.to_radians().sin();
    let step = 2.0 * std::f64::consts::PI * geometry.spacing * s;
    Ok(DVector::from_fn(geometry.num_elements, |m, _| {
        Complex64::from_polar(1.0, step * m as f64)
    }))
}

pub(crate) fn check_azimuth(azimuth_deg: f64) -> Result<()> {
    if !azimuth_deg.is_finite() || azimuth_deg <= -90.0 || azimuth_deg >= 90.0 {
        return Err(Error::domain(format!(
            "azimuth {azimuth_deg} deg outside (-90, +90)"
        )));
    }
    Ok(())
}

/// Synthesize `num_snapshots` received samples from the given sources plus
/// spatially white unit-power noise. Deterministic for a fixed seed.
///
/// Each source k contributes a(theta_k) * s_k(t) with per-element power
/// 10^(snr_db/10); noise adds unit power per element.
pub fn synthesize_snapshots(
    geometry: ArrayGeometry,
    sources: &[SourceSpec],
    num_snapshots: usize,
    seed: u64,
) -> Result<SnapshotMatrix> {
    geometry.validate()?;
    if num_snapshots < 1 {
        return Err(Error::domain("need at least one snapshot"));
    }
    for s in sources {
        check_azimuth(s.azimuth_deg)?;
    }
    for (i, a) in sources.iter().enumerate() {
        for b in sources.iter().skip(i + 1) {
            if (a.azimuth_deg - b.azimuth_deg).abs() < MIN_SOURCE_SEPARATION_DEG {
                return Err(Error::domain(format!(
                    "source azimuths {} and {} closer than {} deg",
                    a.azimuth_deg, b.azimuth_deg, MIN_SOURCE_SEPARATION_DEG
                )));
            }
        }
    }

    let m = geometry.num_elements;
    let n = num_snapshots;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::<Complex64>::zeros(m, n);

    // Sources first, then noise, in a fixed order so the stream layout is
    // part of the determinism contract.
    for source in sources {
        let a = steering_vector(geometry, source.azimuth_deg)?;
        let amplitude = 10f64.powf(source.snr_db / 20.0);
        match source.waveform {
            Waveform::Gaussian => {
                for t in 0..n {
                    let s = amplitude * complex_gaussian(&mut rng);
                    for e in 0..m {
                        x[(e, t)] += a[e] * s;
                    }
                }
            }
            Waveform::Tone => {
                let phase: f64 =
                    rand::Rng::gen_range(&mut rng, 0.0..2.0 * std::f64::consts::PI);
                let s = Complex64::from_polar(amplitude, phase);
                for t in 0..n {
                    for e in 0..m {
                        x[(e, t)] += a[e] * s;
                    }
                }
            }
        }
    }
    for t in 0..n {
        for e in 0..m {
            x[(e, t)] += complex_gaussian(&mut rng);
        }
    }

    SnapshotMatrix::from_samples(geometry, x)
}

/// Unit-power complex circular Gaussian sample: both quadratures N(0, 1/2).
fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) / 2f64.sqrt()
}

/// Sample covariance R = X * X^H / N.
pub fn sample_covariance(x: &SnapshotMatrix) -> CovarianceMatrix {
    let n = x.num_snapshots() as f64;
    let r = (x.samples() * x.samples().adjoint()).scale(1.0 / n);
    CovarianceMatrix::from_gram(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn geom(m: usize) -> ArrayGeometry {
        ArrayGeometry::new(m, 0.5).unwrap()
    }

    #[test]
    fn steering_broadside_is_all_ones() {
        let a = steering_vector(geom(4), 0.0).unwrap();
        for e in a.iter() {
            assert_relative_eq!(e.re, 1.0, epsilon = 1e-15);
            assert_relative_eq!(e.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn steering_single_element() {
        let a = steering_vector(geom(1), 37.0).unwrap();
        assert_eq!(a.len(), 1);
        assert_relative_eq!(a[0].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn steering_30_deg_quarter_turns() {
        // sin 30 = 1/2 exactly, so the phase step is pi/2 per element.
        let a = steering_vector(geom(4), 30.0).unwrap();
        let expected = [0.0, 0.5, 1.0, 1.5].map(|k| k * std::f64::consts::PI);
        for (got, want) in a.iter().zip(expected) {
            let phase = got.arg().rem_euclid(2.0 * std::f64::consts::PI);
            let want = want.rem_euclid(2.0 * std::f64::consts::PI);
            assert_relative_eq!(phase, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn steering_rejects_out_of_range() {
        assert!(steering_vector(geom(4), 90.0).is_err());
        assert!(steering_vector(geom(4), -95.0).is_err());
    }

    #[test]
    fn noise_only_power_is_unit() {
        let x = synthesize_snapshots(geom(4), &[], 1000, 11).unwrap();
        let n = x.num_snapshots() as f64;
        let total: f64 = x.samples().iter().map(|c| c.norm_sqr()).sum();
        let per_element = total / (n * 4.0);
        assert!(
            (per_element - 1.0).abs() < 0.1,
            "noise power {per_element} not within 10% of 1"
        );
    }

    #[test]
    fn single_source_dominant_eigenvalue() {
        // One source at 25 deg, 20 dB: the signal eigenvalue sits near
        // M * 10^(snr/10) + 1 = 801 while noise eigenvalues sit near 1.
        let x = synthesize_snapshots(geom(8), &[SourceSpec::gaussian(25.0, 20.0)], 256, 7).unwrap();
        let (eigs, _) = sample_covariance(&x).sorted_eigen();
        let top = eigs[7];
        assert!(
            (top - 801.0).abs() < 0.25 * 801.0,
            "dominant eigenvalue {top} far from 801"
        );
        for &noise in &eigs[..7] {
            assert!(noise < 2.0, "noise eigenvalue {noise} too large");
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let spec = [SourceSpec::gaussian(10.0, 5.0), SourceSpec::tone(-30.0, 0.0)];
        let a = synthesize_snapshots(geom(4), &spec, 64, 99).unwrap();
        let b = synthesize_snapshots(geom(4), &spec, 64, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_azimuths_rejected() {
        let spec = [SourceSpec::gaussian(10.0, 5.0), SourceSpec::gaussian(10.05, 5.0)];
        assert!(synthesize_snapshots(geom(4), &spec, 16, 1).is_err());
    }

    #[test]
    fn covariance_of_zeros_is_zero() {
        let x =
            SnapshotMatrix::from_samples(geom(3), DMatrix::zeros(3, 5)).unwrap();
        let r = sample_covariance(&x);
        assert!(r.matrix().norm() < 1e-15);
    }

    #[test]
    fn covariance_single_snapshot_is_outer_product() {
        let v = DMatrix::from_column_slice(
            3,
            1,
            &[
                Complex64::new(1.0, 2.0),
                Complex64::new(-0.5, 0.0),
                Complex64::new(0.0, 1.0),
            ],
        );
        let x = SnapshotMatrix::from_samples(geom(3), v.clone()).unwrap();
        let r = sample_covariance(&x);
        let expected = &v * v.adjoint();
        assert!((r.matrix() - expected).norm() < 1e-14);
    }

    #[test]
    fn two_sources_give_two_signal_eigenvalues() {
        let spec = [
            SourceSpec::gaussian(-20.0, 10.0),
            SourceSpec::gaussian(40.0, 10.0),
        ];
        let x = synthesize_snapshots(geom(8), &spec, 10_000, 3).unwrap();
        let (eigs, _) = sample_covariance(&x).sorted_eigen();
        // Noise floor sits near 1; count eigenvalues clearly above it.
        let above = eigs.iter().filter(|&&l| l > 3.0).count();
        assert_eq!(above, 2, "eigenvalues: {eigs:?}");
    }

    #[test]
    fn noiseless_single_source_covariance_is_rank_one() {
        let g = geom(6);
        let a = steering_vector(g, 17.0).unwrap();
        let p = 4.0f64;
        let n = 32;
        let mut x = DMatrix::zeros(6, n);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for t in 0..n {
            let s = p.sqrt() * complex_gaussian(&mut rng);
            for e in 0..6 {
                x[(e, t)] = a[e] * s;
            }
        }
        let snap = SnapshotMatrix::from_samples(g, x.clone()).unwrap();
        let r = sample_covariance(&snap);
        let power = x.row_iter().next().unwrap().iter().map(|c| c.norm_sqr()).sum::<f64>()
            / n as f64;
        let expected = (&a * a.adjoint()).scale(power);
        assert!(
            (r.matrix() - &expected).norm() < 1e-10 * expected.norm(),
            "covariance deviates from P * a a^H"
        );
    }

    #[test]
    fn covariance_constructor_rejects_non_hermitian() {
        let mut r = DMatrix::<Complex64>::identity(3, 3);
        r[(0, 1)] = Complex64::new(0.5, 0.0);
        assert!(CovarianceMatrix::new(r).is_err());
    }

    proptest! {
        #[test]
        fn steering_components_unit_modulus(theta in -89.9f64..89.9, m in 1usize..24) {
            let a = steering_vector(geom(m), theta).unwrap();
            for e in a.iter() {
                prop_assert!((e.norm() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn steering_self_inner_product_is_m(theta in -89.9f64..89.9, m in 1usize..24) {
            let a = steering_vector(geom(m), theta).unwrap();
            let ip = a.dotc(&a);
            prop_assert!((ip.re - m as f64).abs() < 1e-12 * m as f64 + 1e-12);
            prop_assert!(ip.im.abs() < 1e-12);
        }

        #[test]
        fn sample_covariance_hermitian_psd(seed in 0u64..500, m in 1usize..6, n in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = DMatrix::from_fn(m, n, |_, _| complex_gaussian(&mut rng));
            let snap = SnapshotMatrix::from_samples(geom(m), x).unwrap();
            let r = sample_covariance(&snap);
            // The validating constructor enforces both invariants.
            prop_assert!(CovarianceMatrix::new(r.matrix().clone()).is_ok());
        }
    }
}
