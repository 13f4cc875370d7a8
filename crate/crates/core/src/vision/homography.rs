use std::path::Path;

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::sim::Vec2;
use crate::{Error, Result};

/// Projective map from the folding plane `(x, z)` to image pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

/// A plane point and where it appears in the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub image: Vec2,
    pub plane: Vec2,
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub homography: Homography,
    /// Root-mean-square reprojection error in pixels.
    pub rms: f64,
}

const MAX_CONDITION: f64 = 1e12;

impl Homography {
    pub fn identity() -> Self {
        Self { m: Matrix3::identity() }
    }

    /// Scales `m` so that its bottom-right entry is 1.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let h33 = m[(2, 2)];
        if !m.iter().all(|v| v.is_finite()) || h33.abs() < 1e-14 * m.abs().max() {
            return Err(Error::SingularHomography);
        }
        let m = m / h33;
        let sv = m.singular_values();
        if sv.min() <= 0.0 || sv.max() / sv.min() > MAX_CONDITION {
            return Err(Error::SingularHomography);
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self.m.try_inverse().ok_or(Error::SingularHomography)?;
        Self::from_matrix(inv)
    }

    /// Maps a homogeneous point; `None` on the line at infinity.
    pub fn apply_homogeneous(&self, p: &Vector3<f64>) -> Option<Vec2> {
        let q = self.m * p;
        (q.z.abs() > 1e-300).then(|| Vec2::new(q.x / q.z, q.y / q.z))
    }

    pub fn project(&self, plane: Vec2) -> Option<Vec2> {
        self.apply_homogeneous(&Vector3::new(plane.x, plane.y, 1.0))
    }

    /// Composition `self ∘ other`.
    pub fn compose(&self, other: &Homography) -> Result<Self> {
        Self::from_matrix(self.m * other.m)
    }

    /// Nine numbers, row-major, one row per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in 0..3 {
            let row: Vec<String> = (0..3).map(|c| format!("{:?}", self.m[(r, c)])).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let values: Vec<f64> = text
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| Error::parse("homography", format!("`{t}`: {e}"))))
            .collect::<Result<_>>()?;
        if values.len() != 9 {
            return Err(Error::parse("homography", format!("expected 9 numbers, got {}", values.len())));
        }
        Self::from_matrix(Matrix3::from_row_slice(&values))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Similarity moving the centroid to the origin with mean distance √2.
fn normalizer(points: &[Vec2]) -> Matrix3<f64> {
    let n = points.len() as f64;
    let c = points.iter().fold(Vec2::zeros(), |a, p| a + p) / n;
    let mean_dist = points.iter().map(|p| (p - c).norm()).sum::<f64>() / n;
    let s = if mean_dist > 0.0 { std::f64::consts::SQRT_2 / mean_dist } else { 1.0 };
    Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0)
}

fn apply(t: &Matrix3<f64>, p: Vec2) -> Vec2 {
    let q = t * Vector3::new(p.x, p.y, 1.0);
    Vec2::new(q.x / q.z, q.y / q.z)
}

fn collinear(a: Vec2, b: Vec2, c: Vec2, scale: f64) -> bool {
    let cross = (b - a).perp(&(c - a));
    cross.abs() <= 1e-10 * scale * scale
}

fn has_collinear_triple(points: &[Vec2]) -> bool {
    let scale = points.iter().map(|p| p.norm()).fold(1e-300, f64::max);
    let n = points.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if collinear(points[i], points[j], points[k], scale) {
                    return true;
                }
            }
        }
    }
    false
}

/// Normalized direct linear transform from at least four correspondences.
pub fn estimate_homography(pairs: &[Correspondence]) -> Result<Estimate> {
    if pairs.len() < 4 {
        return Err(Error::TooFewCorrespondences(pairs.len()));
    }
    let plane: Vec<Vec2> = pairs.iter().map(|c| c.plane).collect();
    let image: Vec<Vec2> = pairs.iter().map(|c| c.image).collect();
    if pairs.len() == 4 && (has_collinear_triple(&plane) || has_collinear_triple(&image)) {
        return Err(Error::RankDeficient);
    }
    let t_plane = normalizer(&plane);
    let t_image = normalizer(&image);

    // At least 9 rows so the SVD yields a full right basis.
    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, c) in pairs.iter().enumerate() {
        let p = apply(&t_plane, c.plane);
        let q = apply(&t_image, c.image);
        let r = 2 * i;
        a.row_mut(r).copy_from_slice(&[-p.x, -p.y, -1.0, 0.0, 0.0, 0.0, q.x * p.x, q.x * p.y, q.x]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, -p.x, -p.y, -1.0, q.y * p.x, q.y * p.y, q.y]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::RankDeficient)?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    // The null space must be one-dimensional.
    if sv[order[7]] <= 1e-10 * sv[order[0]] {
        return Err(Error::RankDeficient);
    }
    let h = v_t.row(order[8]);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_image_inv = t_image.try_inverse().ok_or(Error::RankDeficient)?;
    let homography = Homography::from_matrix(t_image_inv * hn * t_plane)?;

    let sq: f64 = pairs
        .iter()
        .map(|c| match homography.project(c.plane) {
            Some(p) => (p - c.image).norm_squared(),
            None => f64::INFINITY,
        })
        .sum();
    Ok(Estimate {
        homography,
        rms: (sq / pairs.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corners() -> Vec<Vec2> {
        vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ]
    }

    #[test]
    fn identity_from_four_pairs() {
        let pairs: Vec<_> = corners().into_iter().map(|p| Correspondence { image: p, plane: p }).collect();
        let est = estimate_homography(&pairs).unwrap();
        assert!((est.homography.matrix() - Matrix3::identity()).abs().max() < 1e-10);
        assert!(est.rms < 1e-12);
    }

    #[test]
    fn three_pairs_are_rejected() {
        let pairs: Vec<_> = corners()[..3].iter().map(|&p| Correspondence { image: p, plane: p }).collect();
        assert!(matches!(estimate_homography(&pairs), Err(Error::TooFewCorrespondences(3))));
    }

    #[test]
    fn collinear_points_are_rank_deficient() {
        let pairs: Vec<_> = (0..6)
            .map(|i| {
                let p = Vec2::new(i as f64, 2.0 * i as f64);
                Correspondence { image: p, plane: p }
            })
            .collect();
        assert!(matches!(estimate_homography(&pairs), Err(Error::RankDeficient)));
        let mut four: Vec<_> = corners().into_iter().map(|p| Correspondence { image: p, plane: p }).collect();
        four[2].plane = Vec2::new(2.0, 0.0);
        assert!(matches!(estimate_homography(&four), Err(Error::RankDeficient)));
    }

    #[test]
    fn projection_ignores_homogeneous_scale() {
        let h = Homography::from_matrix(Matrix3::new(2.0, 0.1, 3.0, -0.2, 1.5, 4.0, 0.01, 0.02, 1.0)).unwrap();
        let p = Vector3::new(0.3, -0.7, 1.0);
        let a = h.apply_homogeneous(&p).unwrap();
        for alpha in [-3.0, 0.5, 1e3] {
            let b = h.apply_homogeneous(&(p * alpha)).unwrap();
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn round_trip_through_inverse() {
        let h = Homography::from_matrix(Matrix3::new(900.0, 40.0, 60.0, 15.0, -850.0, 650.0, 0.1, 0.3, 1.0)).unwrap();
        let inv = h.inverse().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let p = Vec2::new(rng.random_range(-0.1..0.7), rng.random_range(0.0..0.4));
            let back = inv.project(h.project(p).unwrap()).unwrap();
            assert!((back - p).norm() < 1e-9);
        }
    }

    #[test]
    fn text_round_trip() {
        let h = Homography::from_matrix(Matrix3::new(1.5, 0.25, -3.0, 0.1, 2.0, 7.0, 1e-3, -2e-3, 1.0)).unwrap();
        assert_eq!(Homography::parse(&h.to_text()).unwrap(), h);
        assert!(Homography::parse("1 2 3").is_err());
    }
}
