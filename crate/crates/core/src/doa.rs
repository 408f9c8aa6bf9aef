//! Direction-of-arrival estimation from array snapshots.
//!
//! Two estimators are provided: MUSIC (noise-subspace pseudospectrum scanned
//! over an azimuth grid, with parabolic peak refinement) and the Matrix
//! Pencil method (generalized eigenvalues of shifted Hankel matrices built
//! from a spatial snapshot, rank-truncated by SVD for noise robustness).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{sample_covariance, steering_vector, ArrayGeometry, CovarianceMatrix, SnapshotMatrix};
use crate::error::{Error, Result};

/// Which estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoaMethod {
    Music,
    MatrixPencil,
}

impl std::fmt::Display for DoaMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DoaMethod::Music => write!(f, "music"),
            DoaMethod::MatrixPencil => write!(f, "pencil"),
        }
    }
}

/// Tuning knobs for [`estimate_doa`].
#[derive(Debug, Clone, Copy)]
pub struct DoaOptions {
    /// MUSIC grid step in degrees.
    pub grid_step_deg: f64,
    /// Pencil parameter L; defaults to floor(M/2) when `None`.
    pub pencil_param: Option<usize>,
}

impl Default for DoaOptions {
    fn default() -> Self {
        DoaOptions {
            grid_step_deg: 0.1,
            pencil_param: None,
        }
    }
}

/// MUSIC pseudospectrum sampled on a uniform azimuth grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSpectrum {
    pub azimuths_deg: Vec<f64>,
    pub values: Vec<f64>,
    /// Set when the eigenvalue at the signal/noise boundary is degenerate,
    /// i.e. the subspace split is not well defined.
    pub degraded: bool,
}

impl PseudoSpectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Result of a DOA estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct DoaResult {
    /// Estimated azimuths, sorted ascending, one per requested source.
    pub azimuths_deg: Vec<f64>,
    pub method: DoaMethod,
    /// Sampled pseudospectrum (MUSIC only).
    pub spectrum: Option<PseudoSpectrum>,
    /// True when peak finding had to pad with non-peak grid points or the
    /// noise-subspace split was degenerate.
    pub degraded: bool,
}

/// Peaks selected from a pseudospectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSelection {
    /// Azimuths of the selected grid points, in descending peak height
    /// (ties broken toward smaller azimuth).
    pub azimuths_deg: Vec<f64>,
    /// Grid indices matching `azimuths_deg`.
    pub indices: Vec<usize>,
    /// For each entry, whether it is a strict interior local maximum.
    pub is_local_max: Vec<bool>,
    /// Set when fewer than the requested number of local maxima existed.
    pub degraded: bool,
}

/// The azimuth grid shared by MUSIC and pattern scans:
/// [-90 + step, 90 - step] in `step`-degree increments.
pub(crate) fn azimuth_grid(step_deg: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut i = 1usize;
    loop {
        let theta = -90.0 + step_deg * i as f64;
        if theta > 90.0 - step_deg + 1e-12 {
            break;
        }
        grid.push(theta);
        i += 1;
    }
    grid
}

/// Relative tolerance used to call two adjacent eigenvalues degenerate.
const EIGEN_DEGENERACY_RTOL: f64 = 1e-9;

/// MUSIC pseudospectrum: eigendecompose the covariance, take the M-K
/// smallest eigenvalues' eigenvectors as the noise subspace E_n, and
/// evaluate 1 / (a^H E_n E_n^H a) over the azimuth grid.
pub fn music_spectrum(
    r: &CovarianceMatrix,
    geometry: ArrayGeometry,
    num_sources: usize,
    grid_step_deg: f64,
) -> Result<PseudoSpectrum> {
    geometry.validate()?;
    let m = geometry.num_elements;
    if r.dim() != m {
        return Err(Error::domain(format!(
            "covariance dimension {} does not match {} array elements",
            r.dim(),
            m
        )));
    }
    if num_sources < 1 || num_sources >= m {
        return Err(Error::domain(format!(
            "num_sources must satisfy 1 <= K < M (got K={num_sources}, M={m})"
        )));
    }
    if !(grid_step_deg > 0.0) {
        return Err(Error::domain("grid step must be positive"));
    }

    let (eigenvalues, eigenvectors) = r.sorted_eigen();
    let noise_dim = m - num_sources;
    // Degenerate split: the largest noise eigenvalue equals the smallest
    // signal eigenvalue (within tolerance), as for an isotropic covariance.
    let scale = eigenvalues
        .iter()
        .fold(0f64, |acc, &l| acc.max(l.abs()))
        .max(f64::MIN_POSITIVE);
    let degraded =
        (eigenvalues[noise_dim] - eigenvalues[noise_dim - 1]).abs() <= EIGEN_DEGENERACY_RTOL * scale;

    let noise_basis = eigenvectors.columns(0, noise_dim).into_owned();
    let grid = azimuth_grid(grid_step_deg);
    let mut values = Vec::with_capacity(grid.len());
    for &theta in &grid {
        let a = steering_vector(geometry, theta)?;
        let projected = noise_basis.adjoint() * &a;
        let denom = projected.norm_squared().max(1e-300);
        values.push(1.0 / denom);
    }
    debug_assert!(values.iter().all(|v| v.is_finite() && *v > 0.0));

    Ok(PseudoSpectrum {
        azimuths_deg: grid,
        values,
        degraded,
    })
}

/// Select the `k` largest strict interior local maxima of a spectrum.
///
/// Ties break toward smaller azimuth. When fewer than `k` local maxima
/// exist, the remaining slots are filled with the largest not-yet-selected
/// grid values and the result is flagged degraded.
pub fn find_peaks(spectrum: &PseudoSpectrum, k: usize) -> Result<PeakSelection> {
    if spectrum.is_empty() {
        return Err(Error::domain("spectrum is empty"));
    }
    if k < 1 {
        return Err(Error::domain("k must be at least 1"));
    }
    if k > spectrum.len() {
        return Err(Error::domain(format!(
            "k={k} exceeds grid size {}",
            spectrum.len()
        )));
    }

    let v = &spectrum.values;
    let mut maxima: Vec<usize> = (1..v.len().saturating_sub(1))
        .filter(|&i| v[i] > v[i - 1] && v[i] > v[i + 1])
        .collect();
    // Descending by value; ties toward smaller azimuth (smaller index).
    maxima.sort_by(|&a, &b| {
        v[b].partial_cmp(&v[a])
            .expect("spectrum values are finite")
            .then(a.cmp(&b))
    });

    let mut indices: Vec<usize> = maxima.iter().copied().take(k).collect();
    let mut is_local_max = vec![true; indices.len()];
    let degraded = indices.len() < k;
    if degraded {
        let mut rest: Vec<usize> = (0..v.len()).filter(|i| !indices.contains(i)).collect();
        rest.sort_by(|&a, &b| {
            v[b].partial_cmp(&v[a])
                .expect("spectrum values are finite")
                .then(a.cmp(&b))
        });
        for &i in rest.iter().take(k - indices.len()) {
            indices.push(i);
            is_local_max.push(false);
        }
    }

    Ok(PeakSelection {
        azimuths_deg: indices.iter().map(|&i| spectrum.azimuths_deg[i]).collect(),
        indices,
        is_local_max,
        degraded,
    })
}

/// Matrix Pencil DOA from a snapshot matrix.
///
/// The spatial snapshot y (length M) is the principal eigenvector of the
/// sample covariance, which for a single snapshot reduces to the snapshot
/// itself. From y, Hankel matrices Y0/Y1 shifted by one sample form the
/// pencil; SVD truncation to the K dominant right singular vectors makes
/// the pole extraction noise robust. Poles map to azimuths via
/// theta = asin(arg(z) / (2 pi spacing)).
pub fn matrix_pencil_doa(
    x: &SnapshotMatrix,
    num_sources: usize,
    pencil_param: Option<usize>,
) -> Result<DoaResult> {
    let geometry = x.geometry();
    let m = geometry.num_elements;
    let k = num_sources;
    if k < 1 {
        return Err(Error::domain("num_sources must be at least 1"));
    }
    if m < 2 * k {
        return Err(Error::domain(format!(
            "matrix pencil needs M >= 2K (got M={m}, K={k})"
        )));
    }
    let l = pencil_param.unwrap_or(m / 2);
    if l < k || l > m - k {
        return Err(Error::domain(format!(
            "pencil parameter must satisfy K <= L <= M-K (got L={l}, K={k}, M={m})"
        )));
    }

    let y = principal_spatial_snapshot(x);

    // Hankel data matrix, rows (M-L) x columns (L+1): H[i][j] = y[i+j].
    let hankel = DMatrix::from_fn(m - l, l + 1, |i, j| y[i + j]);
    // Rank truncation: the K dominant right singular vectors of the Hankel
    // matrix are the top eigenvectors of its Gram matrix H^H H.
    let gram = hankel.adjoint() * &hankel;
    let (_, eigenvectors) = crate::linalg::hermitian_eigen(&gram);
    let v_k = eigenvectors.columns(l + 1 - k, k).into_owned();

    let v_lower = v_k.rows(0, l).into_owned();
    let v_upper = v_k.rows(1, l).into_owned();
    // Least-squares pencil: A = pinv(V_lower) * V_upper via the normal
    // equations (V_lower is near orthonormal, so this is well conditioned).
    let normal = v_lower.adjoint() * &v_lower;
    let rhs = v_lower.adjoint() * &v_upper;
    let a = crate::linalg::solve(&normal, &rhs).ok_or_else(|| Error::Estimation {
        message: "pencil normal equations are singular".to_string(),
        eigenvalue: None,
    })?;

    // The V-space pencil yields the conjugated poles.
    let eig = crate::linalg::general_eigenvalues(&a)?;
    let poles: Vec<Complex64> = eig.iter().map(|z| z.conj()).collect();

    let mut azimuths = Vec::with_capacity(k);
    for z in poles {
        let s = z.arg() / (2.0 * std::f64::consts::PI * geometry.spacing);
        if s.abs() > 1.0 {
            return Err(Error::Estimation {
                message: format!(
                    "pencil eigenvalue maps outside the visible region (sin theta = {s:.6})"
                ),
                eigenvalue: Some(z),
            });
        }
        azimuths.push(s.asin().to_degrees());
    }
    azimuths.sort_by(|a, b| a.partial_cmp(b).expect("azimuths are finite"));

    Ok(DoaResult {
        azimuths_deg: azimuths,
        method: DoaMethod::MatrixPencil,
        spectrum: None,
        degraded: false,
    })
}

/// Principal eigenvector of the sample covariance, used as the spatial
/// snapshot for the pencil. For N = 1 this is the snapshot itself (up to
/// scale, which the pencil ignores).
fn principal_spatial_snapshot(x: &SnapshotMatrix) -> DVector<Complex64> {
    if x.num_snapshots() == 1 {
        return x.samples().column(0).into_owned();
    }
    let (eigenvalues, eigenvectors) = sample_covariance(x).sorted_eigen();
    let top = eigenvalues.len() - 1;
    eigenvectors.column(top).into_owned()
}

/// Unified entry point: dispatch to MUSIC (covariance, spectrum, peaks,
/// one parabolic refinement per peak) or the Matrix Pencil method.
pub fn estimate_doa(
    x: &SnapshotMatrix,
    method: DoaMethod,
    num_sources: usize,
    options: DoaOptions,
) -> Result<DoaResult> {
    if num_sources < 1 {
        return Err(Error::domain("num_sources must be at least 1"));
    }
    match method {
        DoaMethod::MatrixPencil => matrix_pencil_doa(x, num_sources, options.pencil_param),
        DoaMethod::Music => {
            let r = sample_covariance(x);
            let spectrum = music_spectrum(&r, x.geometry(), num_sources, options.grid_step_deg)?;
            let peaks = find_peaks(&spectrum, num_sources)?;
            let mut azimuths: Vec<f64> = peaks
                .indices
                .iter()
                .zip(&peaks.is_local_max)
                .map(|(&i, &local)| {
                    if local {
                        refine_peak(&spectrum, i, options.grid_step_deg)
                    } else {
                        spectrum.azimuths_deg[i]
                    }
                })
                .collect();
            azimuths.sort_by(|a, b| a.partial_cmp(b).expect("azimuths are finite"));
            let degraded = peaks.degraded || spectrum.degraded;
            Ok(DoaResult {
                azimuths_deg: azimuths,
                method: DoaMethod::Music,
                spectrum: Some(spectrum),
                degraded,
            })
        }
    }
}

/// Parabolic interpolation through the log-spectrum at an interior peak.
/// Shifts the peak by at most half a grid step.
fn refine_peak(spectrum: &PseudoSpectrum, index: usize, step_deg: f64) -> f64 {
    debug_assert!(index > 0 && index + 1 < spectrum.len());
    let y0 = spectrum.values[index - 1].ln();
    let y1 = spectrum.values[index].ln();
    let y2 = spectrum.values[index + 1].ln();
    let denom = y0 - 2.0 * y1 + y2;
    if denom.abs() < 1e-300 {
        return spectrum.azimuths_deg[index];
    }
    let delta = (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5);
    spectrum.azimuths_deg[index] + delta * step_deg
}
