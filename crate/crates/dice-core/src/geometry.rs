//! Parallel-beam scan geometry, the Radon transform pair, and phantoms.
//!
//! Rays are integrated by sampling the bilinear interpolant of the image in
//! fine steps placed symmetrically about the detector axis. The weights
//! are precomputed per ray into a sparse matrix so the adjoint is the exact
//! transpose of the forward map: both directions walk the same
//! (pixel, weight) entries, which is what the consensus-equilibrium math
//! assumes of A and Aᵀ.
//!
//! Angle convention: degrees in [0°, 180°), detector axis (cos θ, sin θ),
//! ray direction (−sin θ, cosθ), image x right and y up, origin at the
//! image center. θ = 0 integrates columns.

use alloc::vec;
use alloc::vec::Vec;

// Float math comes from libm in no_std builds; test builds link std,
// whose inherent methods shadow the trait and leave it "unused".
use crate::error::{Error, Result};
use crate::linalg::LinearOperator;
use crate::rng::SeedStream;
#[allow(unused_imports)]
use num_traits::Float;

/// How view angles are chosen from the full 180-angle grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatternKind {
    /// Every (180/n_views)-th angle, starting at 0°.
    Uniform,
    /// A seeded random subset of the grid, sorted ascending.
    NonUniform,
}

/// View-subsampling request against the 180-view, 1° acquisition grid.
#[derive(Clone, Copy, Debug)]
pub struct SamplingPattern {
    pub kind: PatternKind,
    pub n_views: usize,
    /// Consumed only by [`PatternKind::NonUniform`].
    pub seed: u64,
}

/// Parallel-beam acquisition description.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanGeometry {
    image_side: usize,
    n_detectors: usize,
    /// View angles in degrees, strictly increasing, each in [0, 180).
    angles: Vec<f64>,
    detector_spacing: f64,
}

impl ScanGeometry {
    pub fn new(
        image_side: usize,
        n_detectors: usize,
        angles: Vec<f64>,
        detector_spacing: f64,
    ) -> Result<Self> {
        if image_side < 8 {
            return Err(Error::InvalidConfig(alloc::format!(
                "image_side {image_side} < 8"
            )));
        }
        if n_detectors < image_side {
            return Err(Error::InvalidConfig(alloc::format!(
                "n_detectors {n_detectors} < image_side {image_side}"
            )));
        }
        if angles.is_empty() {
            return Err(Error::InvalidPattern("no view angles".into()));
        }
        if detector_spacing <= 0.0 || detector_spacing.is_nan() {
            return Err(Error::InvalidConfig("detector_spacing must be > 0".into()));
        }
        for (i, &a) in angles.iter().enumerate() {
            if !(0.0..180.0).contains(&a) {
                return Err(Error::InvalidPattern(alloc::format!(
                    "angle {a}° outside [0°, 180°)"
                )));
            }
            if i > 0 && angles[i - 1] >= a {
                return Err(Error::InvalidPattern(
                    "angles must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self {
            image_side,
            n_detectors,
            angles,
            detector_spacing,
        })
    }

    pub fn image_side(&self) -> usize {
        self.image_side
    }

    pub fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn detector_spacing(&self) -> f64 {
        self.detector_spacing
    }

    /// Pixel count n = side².
    pub fn image_len(&self) -> usize {
        self.image_side * self.image_side
    }

    /// Sinogram length m = |angles|·n_detectors.
    pub fn sino_len(&self) -> usize {
        self.angles.len() * self.n_detectors
    }
}

/// Line-integral data over a [`ScanGeometry`], angle-major, detector-minor.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinogram {
    pub geometry: ScanGeometry,
    pub data: Vec<f64>,
}

impl Sinogram {
    pub fn new(geometry: ScanGeometry, data: Vec<f64>) -> Result<Self> {
        if data.len() != geometry.sino_len() {
            return Err(Error::dims(
                "Sinogram::new",
                geometry.sino_len(),
                data.len(),
            ));
        }
        Ok(Self { geometry, data })
    }

    /// The detector row for one view angle.
    pub fn view(&self, angle_idx: usize) -> &[f64] {
        let d = self.geometry.n_detectors;
        &self.data[angle_idx * d..(angle_idx + 1) * d]
    }
}

/// Angles on the acquisition grid selected by `pattern`.
///
/// Uniform patterns take every (180/n_views)-th degree; non-uniform ones
/// draw a sorted subset without replacement from the seeded stream.
pub fn select_angles(pattern: &SamplingPattern) -> Result<Vec<f64>> {
    const GRID: usize = 180;
    if pattern.n_views == 0 || pattern.n_views > GRID {
        return Err(Error::InvalidPattern(alloc::format!(
            "n_views {} outside 1..=180",
            pattern.n_views
        )));
    }
    match pattern.kind {
        PatternKind::Uniform => {
            if !GRID.is_multiple_of(pattern.n_views) {
                return Err(Error::InvalidPattern(alloc::format!(
                    "uniform pattern needs n_views dividing 180, got {}",
                    pattern.n_views
                )));
            }
            let stride = GRID / pattern.n_views;
            Ok((0..pattern.n_views).map(|k| (k * stride) as f64).collect())
        }
        PatternKind::NonUniform => {
            let mut stream = SeedStream::named(pattern.seed, "view-pattern");
            let idx = stream.choose_indices(GRID, pattern.n_views);
            Ok(idx.into_iter().map(|i| i as f64).collect())
        }
    }
}

/// Builds the scan geometry for a square image under a sampling pattern.
///
/// Detector count equals the image side and spacing is one pixel, so each
/// view produces one line integral per image column at θ = 0.
pub fn build_geometry(image_side: usize, pattern: &SamplingPattern) -> Result<ScanGeometry> {
    let angles = select_angles(pattern)?;
    ScanGeometry::new(image_side, image_side, angles, 1.0)
}

/// Integration step along rays, in pixels. The quadrature error on the
/// bilinear interpolant scales with the square of this.
const RAY_STEP: f64 = 1.0 / 32.0;

/// Precomputed sparse projector for one geometry.
///
/// Row r = angle_idx·n_detectors + detector_idx holds the merged bilinear
/// weights of that ray. Construction is independent per ray, so a geometry
/// with a subset of the angles produces bit-identical rows.
pub struct ProjectionMatrix {
    geom: ScanGeometry,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    weights: Vec<f64>,
}

impl ProjectionMatrix {
    pub fn build(geom: &ScanGeometry) -> Self {
        let side = geom.image_side;
        let n = geom.image_len();
        let half_span = side as f64 * core::f64::consts::SQRT_2 / 2.0 + 1.0;
        let n_samples = (2.0 * half_span / RAY_STEP).ceil() as usize;
        // Midpoint abscissas symmetric about tau = 0, so reflected rays
        // sample mirror-image positions exactly.
        let tau_origin = -(n_samples as f64) * RAY_STEP / 2.0;
        let ctr = (side as f64 - 1.0) / 2.0;
        let det_ctr = (geom.n_detectors as f64 - 1.0) / 2.0;

        let mut row_ptr = Vec::with_capacity(geom.sino_len() + 1);
        row_ptr.push(0usize);
        let mut col_idx: Vec<u32> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();

        // Dense scratch keeps per-ray merging O(touched pixels).
        let mut acc = vec![0.0f64; n];
        let mut touched: Vec<u32> = Vec::new();

        for &angle_deg in &geom.angles {
            let theta = angle_deg.to_radians();
            let (sin_t, cos_t) = theta.sin_cos();
            for det in 0..geom.n_detectors {
                let offset = (det as f64 - det_ctr) * geom.detector_spacing;
                // Ray: p(τ) = offset·(cosθ, sinθ) + τ·(−sinθ, cosθ).
                for k in 0..n_samples {
                    let tau = tau_origin + (k as f64 + 0.5) * RAY_STEP;
                    let x = offset * cos_t - tau * sin_t;
                    let y = offset * sin_t + tau * cos_t;
                    // Image coords: x right, y up.
                    let cf = x + ctr;
                    let rf = ctr - y;
                    let c0 = cf.floor();
                    let r0 = rf.floor();
                    let fc = cf - c0;
                    let fr = rf - r0;
                    let c0 = c0 as i64;
                    let r0 = r0 as i64;
                    let side_i = side as i64;
                    let mut put = |r: i64, c: i64, w: f64| {
                        if w == 0.0 || r < 0 || c < 0 || r >= side_i || c >= side_i {
                            return;
                        }
                        let idx = (r * side_i + c) as usize;
                        if acc[idx] == 0.0 {
                            touched.push(idx as u32);
                        }
                        acc[idx] += w;
                    };
                    let w = RAY_STEP;
                    put(r0, c0, w * (1.0 - fr) * (1.0 - fc));
                    put(r0, c0 + 1, w * (1.0 - fr) * fc);
                    put(r0 + 1, c0, w * fr * (1.0 - fc));
                    put(r0 + 1, c0 + 1, w * fr * fc);
                }
                touched.sort_unstable();
                for &idx in &touched {
                    let w = acc[idx as usize];
                    if w != 0.0 {
                        col_idx.push(idx);
                        weights.push(w);
                    }
                    acc[idx as usize] = 0.0;
                }
                touched.clear();
                row_ptr.push(col_idx.len());
            }
        }

        Self {
            geom: geom.clone(),
            row_ptr,
            col_idx,
            weights,
        }
    }

    pub fn geometry(&self) -> &ScanGeometry {
        &self.geom
    }

    /// A·x as a [`Sinogram`].
    pub fn forward(&self, img: &[f64]) -> Result<Sinogram> {
        if img.len() != self.geom.image_len() {
            return Err(Error::dims("forward img", self.geom.image_len(), img.len()));
        }
        Sinogram::new(self.geom.clone(), self.apply(img))
    }

    /// Aᵀ·y as a flat image.
    pub fn adjoint(&self, sino: &Sinogram) -> Result<Vec<f64>> {
        if sino.geometry != self.geom {
            return Err(Error::Contract(
                "adjoint: sinogram geometry differs from projector geometry".into(),
            ));
        }
        Ok(self.apply_adjoint(&sino.data))
    }
}

impl LinearOperator for ProjectionMatrix {
    fn domain_dim(&self) -> usize {
        self.geom.image_len()
    }
    fn range_dim(&self) -> usize {
        self.geom.sino_len()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.domain_dim());
        let mut out = Vec::with_capacity(self.range_dim());
        for r in 0..self.range_dim() {
            let mut s = 0.0;
            for e in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.weights[e] * x[self.col_idx[e] as usize];
            }
            out.push(s);
        }
        out
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.range_dim());
        let mut out = vec![0.0; self.domain_dim()];
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for e in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.col_idx[e] as usize] += self.weights[e] * yr;
            }
        }
        out
    }
}

/// One-shot forward projection; hot loops should build a
/// [`ProjectionMatrix`] once and reuse it.
pub fn radon_forward(img: &[f64], geom: &ScanGeometry) -> Result<Sinogram> {
    ProjectionMatrix::build(geom).forward(img)
}

/// One-shot backprojection of `sino` under its own geometry.
pub fn radon_adjoint(sino: &Sinogram) -> Result<Vec<f64>> {
    ProjectionMatrix::build(&sino.geometry).adjoint(sino)
}

/// y + e with e i.i.d. N(0, sigma²); sigma = 0 returns the input bit-exactly.
pub fn add_noise(sino: &Sinogram, sigma: f64, seed: u64) -> Sinogram {
    assert!(sigma >= 0.0, "noise sigma must be >= 0");
    if sigma == 0.0 {
        return sino.clone();
    }
    let mut stream = SeedStream::named(seed, "sino-noise");
    let data = sino
        .data
        .iter()
        .map(|v| v + sigma * stream.standard_normal())
        .collect();
    Sinogram {
        geometry: sino.geometry.clone(),
        data,
    }
}

/// Intensity, semi-axes, center, rotation (degrees, CCW) of one ellipse.
struct Ellipse {
    value: f64,
    a: f64,
    b: f64,
    x0: f64,
    y0: f64,
    phi_deg: f64,
}

/// Head phantom ellipses with soft-tissue contrast.
///
/// The off-axis pairs (3, 4) and (8, 10) are exact mirror images of each
/// other, so the phantom is symmetric about the vertical axis.
const HEAD_ELLIPSES: [Ellipse; 10] = [
    Ellipse {
        value: 1.0,
        a: 0.69,
        b: 0.92,
        x0: 0.0,
        y0: 0.0,
        phi_deg: 0.0,
    },
    Ellipse {
        value: -0.8,
        a: 0.6624,
        b: 0.874,
        x0: 0.0,
        y0: -0.0184,
        phi_deg: 0.0,
    },
    Ellipse {
        value: -0.2,
        a: 0.11,
        b: 0.31,
        x0: 0.22,
        y0: 0.0,
        phi_deg: -18.0,
    },
    Ellipse {
        value: -0.2,
        a: 0.11,
        b: 0.31,
        x0: -0.22,
        y0: 0.0,
        phi_deg: 18.0,
    },
    Ellipse {
        value: 0.1,
        a: 0.21,
        b: 0.25,
        x0: 0.0,
        y0: 0.35,
        phi_deg: 0.0,
    },
    Ellipse {
        value: 0.1,
        a: 0.046,
        b: 0.046,
        x0: 0.0,
        y0: 0.1,
        phi_deg: 0.0,
    },
    Ellipse {
        value: 0.1,
        a: 0.046,
        b: 0.046,
        x0: 0.0,
        y0: -0.1,
        phi_deg: 0.0,
    },
    Ellipse {
        value: 0.1,
        a: 0.046,
        b: 0.023,
        x0: -0.08,
        y0: -0.605,
        phi_deg: 0.0,
    },
    Ellipse {
        value: 0.1,
        a: 0.023,
        b: 0.023,
        x0: 0.0,
        y0: -0.606,
        phi_deg: 0.0,
    },
    Ellipse {
        value: 0.1,
        a: 0.046,
        b: 0.023,
        x0: 0.08,
        y0: -0.605,
        phi_deg: 0.0,
    },
];

/// Subsamples per pixel axis when rasterizing the phantom.
const PHANTOM_AA: usize = 4;

/// Shepp–Logan style head phantom on side×side pixels, values in [0, 1].
///
/// Each pixel averages a 4×4 grid of ellipse-indicator samples, so edges
/// are antialiased and the raster agrees across resolutions.
pub fn shepp_logan(image_side: usize) -> Vec<f64> {
    assert!(image_side >= 8, "phantom side must be >= 8");
    let side = image_side;
    let prepared: Vec<(f64, f64, f64, f64, f64, f64, f64)> = HEAD_ELLIPSES
        .iter()
        .map(|e| {
            let (st, ct) = e.phi_deg.to_radians().sin_cos();
            (
                e.value,
                ct,
                st,
                1.0 / (e.a * e.a),
                1.0 / (e.b * e.b),
                e.x0,
                e.y0,
            )
        })
        .collect();
    // Subpixel offsets symmetric about the pixel center (units of pixels).
    let offsets: Vec<f64> = (0..PHANTOM_AA)
        .map(|i| (i as f64 + 0.5) / PHANTOM_AA as f64 - 0.5)
        .collect();
    let norm = 1.0 / (PHANTOM_AA * PHANTOM_AA) as f64;

    let mut img = vec![0.0f64; side * side];
    for r in 0..side {
        for c in 0..side {
            let mut acc = 0.0;
            for oy in &offsets {
                let y = ((side as f64 - 1.0) - 2.0 * (r as f64 + oy)) / side as f64;
                for ox in &offsets {
                    let x = (2.0 * (c as f64 + ox) - (side as f64 - 1.0)) / side as f64;
                    for &(value, ct, st, inv_a2, inv_b2, x0, y0) in &prepared {
                        let dx = x - x0;
                        let dy = y - y0;
                        let u = dx * ct + dy * st;
                        let v = -dx * st + dy * ct;
                        if u * u * inv_a2 + v * v * inv_b2 <= 1.0 {
                            acc += value;
                        }
                    }
                }
            }
            img[r * side + c] = (acc * norm).clamp(0.0, 1.0);
        }
    }
    img
}

/// 90° counterclockwise rotation of a square row-major image.
pub fn rot90(img: &[f64], side: usize) -> Vec<f64> {
    assert_eq!(img.len(), side * side);
    let mut out = vec![0.0; side * side];
    for r in 0..side {
        for c in 0..side {
            // Column c (top to bottom) becomes row side-1-c.
            out[(side - 1 - c) * side + r] = img[r * side + c];
        }
    }
    out
}

/// Left-right mirror of a square row-major image.
pub fn flip_horizontal(img: &[f64], side: usize) -> Vec<f64> {
    assert_eq!(img.len(), side * side);
    let mut out = vec![0.0; side * side];
    for r in 0..side {
        for c in 0..side {
            out[r * side + (side - 1 - c)] = img[r * side + c];
        }
    }
    out
}
