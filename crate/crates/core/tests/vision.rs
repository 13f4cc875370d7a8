use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

use stripfold::sim::{StripParams, StripState, Vec2};
use stripfold::vision::{estimate_homography, loop_closure, Camera, Correspondence, Homography};

fn homography(p: &[f64]) -> Homography {
    Homography::from_matrix(Matrix3::new(p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], 1.0)).unwrap()
}

fn entries() -> impl Strategy<Value = Vec<f64>> {
    (
        0.5f64..2.0,
        -0.3f64..0.3,
        -1.0f64..1.0,
        -0.3f64..0.3,
        0.5f64..2.0,
        -1.0f64..1.0,
        -0.1f64..0.1,
        -0.1f64..0.1,
    )
        .prop_map(|t| vec![t.0, t.1, t.2, t.3, t.4, t.5, t.6, t.7])
}

proptest! {
    #[test]
    fn projection_ignores_homogeneous_scale(p in entries(), x in -1.0f64..1.0, y in -1.0f64..1.0, alpha in 0.1f64..10.0) {
        let h = homography(&p);
        let a = h.apply_homogeneous(&Vector3::new(x, y, 1.0)).unwrap();
        let b = h.apply_homogeneous(&Vector3::new(alpha * x, alpha * y, alpha)).unwrap();
        prop_assert!((a - b).norm() < 1e-9);
    }

    #[test]
    fn noiseless_correspondences_recover_the_matrix(p in entries(), pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6..12)) {
        let h = homography(&p);
        let pairs: Vec<Correspondence> = pts
            .iter()
            .map(|&(x, y)| {
                let plane = Vec2::new(x, y);
                Correspondence { image: h.project(plane).unwrap(), plane }
            })
            .collect();
        if let Ok(est) = estimate_homography(&pairs) {
            prop_assert!((est.homography.matrix() - h.matrix()).abs().max() < 1e-6);
            prop_assert!(est.rms < 1e-6);
        }
    }
}

#[test]
fn resting_strip_is_seen_at_the_grasped_end() {
    let params = StripParams::desk_scale();
    let flat = StripState::flat(&params).unwrap();
    let report = loop_closure(&Camera::canonical(), &params, &[flat]).unwrap();
    assert_eq!(report.states, 1);
    assert_eq!(report.no_contact, 0);
}

#[test]
fn canonical_camera_round_trips_through_text() {
    let cam = Camera::canonical();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.txt");
    cam.homography.save(&path).unwrap();
    let back = Homography::load(&path).unwrap();
    assert!((back.matrix() - cam.homography.matrix()).abs().max() < 1e-12);
}
