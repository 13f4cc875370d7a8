//! Synthetic stand-in for the camera feedback: project the strip into an
//! image through a homography, then recover the liftoff point by a line
//! search along the image of the flat strip.

pub mod homography;
pub mod raster;

pub use homography::{estimate_homography, Correspondence, Estimate, Homography};
pub use raster::{color_distance, RasterImage, Rgb};

use crate::sim::{detect_desk_contact_x, StripParams, StripState, Vec2};
use crate::{Error, Result};

pub const DESK_COLOR: Rgb = [200, 190, 170];
pub const STRIP_COLOR: Rgb = [40, 60, 150];
pub const DEFAULT_THRESHOLD: u8 = 30;

/// Camera, image size and drawing style of the synthetic setup.
#[derive(Debug, Clone)]
pub struct Camera {
    pub homography: Homography,
    pub width: usize,
    pub height: usize,
    pub desk_color: Rgb,
    pub strip_color: Rgb,
    pub thickness_px: f64,
    pub threshold: u8,
}

/// Oblique view of the desk-scale workspace, x in [-0.05, 0.65] m and
/// z in [0, 0.35] m, seen slightly from the grasped-end side.
pub const CANONICAL_VIEW: [((f64, f64), (f64, f64)); 4] = [
    ((-0.05, 0.0), (60.0, 680.0)),
    ((0.65, 0.0), (1220.0, 640.0)),
    ((0.65, 0.35), (1150.0, 80.0)),
    ((-0.05, 0.35), (140.0, 120.0)),
];

impl Camera {
    pub fn canonical() -> Self {
        let pairs: Vec<Correspondence> = CANONICAL_VIEW
            .iter()
            .map(|&((x, z), (u, v))| Correspondence {
                plane: Vec2::new(x, z),
                image: Vec2::new(u, v),
            })
            .collect();
        let homography = estimate_homography(&pairs)
            .expect("canonical view is a valid quadrilateral")
            .homography;
        Self {
            homography,
            width: 1280,
            height: 720,
            desk_color: DESK_COLOR,
            strip_color: STRIP_COLOR,
            thickness_px: 2.0,
            threshold: DEFAULT_THRESHOLD,
        }
    }

    /// Image segment of the flat strip's centre line, from the grasped end
    /// to the pinned end.
    pub fn search_line(&self, params: &StripParams) -> Result<(Vec2, Vec2)> {
        let z = params.sphere_radius;
        let a = self.homography.project(Vec2::new(params.strip_length, z));
        let b = self.homography.project(Vec2::new(0.0, z));
        match (a, b) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::SingularHomography),
        }
    }

    pub fn render(&self, state: &StripState) -> Result<RasterImage> {
        render_strip(
            state,
            &self.homography,
            self.width,
            self.height,
            self.desk_color,
            self.strip_color,
            self.thickness_px,
        )
    }

    /// Liftoff x seen by the camera, `None` when no contact is found.
    pub fn detect_liftoff_x(&self, image: &RasterImage, params: &StripParams) -> Result<Option<f64>> {
        let line = self.search_line(params)?;
        let inv = self.homography.inverse()?;
        Ok(detect_touch_point(image, line, self.desk_color, self.threshold)?
            .and_then(|p| inv.project(p))
            .map(|q| q.x))
    }

    /// Plane length covered by one line-search step at plane x.
    pub fn pixel_equivalent(&self, params: &StripParams, x: f64) -> Result<f64> {
        let (a, b) = self.search_line(params)?;
        let n = line_steps(a, b);
        let step = (b - a) / n as f64;
        let inv = self.homography.inverse()?;
        let q = self
            .homography
            .project(Vec2::new(x, params.sphere_radius))
            .ok_or(Error::SingularHomography)?;
        match (inv.project(q), inv.project(q + step)) {
            (Some(p0), Some(p1)) => Ok((p1 - p0).norm()),
            _ => Err(Error::SingularHomography),
        }
    }
}

fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

/// Draws the chain as a polyline of the given pixel thickness on a desk
/// coloured canvas. A pixel is strip-coloured when its centre lies within
/// half the thickness of a projected link.
pub fn render_strip(
    state: &StripState,
    homography: &Homography,
    width: usize,
    height: usize,
    desk_color: Rgb,
    strip_color: Rgb,
    thickness_px: f64,
) -> Result<RasterImage> {
    let mut img = RasterImage::filled(width, height, desk_color)?;
    let pts: Vec<Option<Vec2>> = state.positions.iter().map(|p| homography.project(*p)).collect();
    let half = 0.5 * thickness_px;
    for w in pts.windows(2) {
        let (Some(a), Some(b)) = (w[0], w[1]) else { continue };
        let u0 = (a.x.min(b.x) - half).floor().max(0.0) as usize;
        let v0 = (a.y.min(b.y) - half).floor().max(0.0) as usize;
        let u1 = ((a.x.max(b.x) + half).ceil().max(0.0) as usize).min(width);
        let v1 = ((a.y.max(b.y) + half).ceil().max(0.0) as usize).min(height);
        for v in v0..v1 {
            for u in u0..u1 {
                let c = Vec2::new(u as f64 + 0.5, v as f64 + 0.5);
                if segment_distance(c, a, b) <= half {
                    img.set(u, v, strip_color);
                }
            }
        }
    }
    Ok(img)
}

fn line_steps(a: Vec2, b: Vec2) -> usize {
    let d = b - a;
    d.x.abs().max(d.y.abs()).ceil().max(1.0) as usize
}

/// Walks the rasterized segment from `line.0` toward `line.1` and returns
/// the first sample whose pixel differs from `desk_color` by more than
/// `threshold` in some channel.
pub fn detect_touch_point(
    image: &RasterImage,
    line: (Vec2, Vec2),
    desk_color: Rgb,
    threshold: u8,
) -> Result<Option<Vec2>> {
    let (a, b) = line;
    for p in [a, b] {
        if !image.contains(p.x, p.y) {
            return Err(Error::OutsideImage(p.x, p.y));
        }
    }
    let n = line_steps(a, b);
    let mut last = None;
    for i in 0..=n {
        let p = a + (b - a) * (i as f64 / n as f64);
        let px = (p.x.floor() as usize, p.y.floor() as usize);
        if last == Some(px) {
            continue;
        }
        last = Some(px);
        if color_distance(image.get(px.0, px.1), desk_color) > threshold {
            return Ok(Some(p));
        }
    }
    Ok(None)
}

/// Agreement between camera and simulator liftoff over a set of states.
#[derive(Debug, Clone, Default)]
pub struct LoopClosureReport {
    pub states: usize,
    pub within_one_pixel: usize,
    pub no_contact: usize,
    /// Detected minus simulated liftoff, in pixel equivalents.
    pub errors_px: Vec<f64>,
}

impl LoopClosureReport {
    pub fn fraction_within(&self) -> f64 {
        if self.states == 0 {
            return 0.0;
        }
        self.within_one_pixel as f64 / self.states as f64
    }

    pub fn max_abs_error_px(&self) -> f64 {
        self.errors_px.iter().map(|e| e.abs()).fold(0.0, f64::max)
    }
}

/// Renders every state, detects its liftoff and compares with the simulator.
pub fn loop_closure(camera: &Camera, params: &StripParams, states: &[StripState]) -> Result<LoopClosureReport> {
    let mut report = LoopClosureReport::default();
    for s in states {
        report.states += 1;
        let truth = detect_desk_contact_x(s, params);
        let img = camera.render(s)?;
        match camera.detect_liftoff_x(&img, params)? {
            None => {
                report.no_contact += 1;
                report.errors_px.push(f64::INFINITY);
            }
            Some(x) => {
                let e = (x - truth) / camera.pixel_equivalent(params, truth)?;
                if e.abs() <= 1.0 {
                    report.within_one_pixel += 1;
                }
                report.errors_px.push(e);
            }
        }
    }
    Ok(report)
}
