use a2pm::config::SgamConfig;
use a2pm::eval::{DepthProjector, PairEntry, Projector, RelativePose};
use a2pm::gam::size_proportion;
use a2pm::geometry::{estimate_fundamental, Correspondence, MatchSet, Point2};
use a2pm::matcher::{AreaTransform, MatcherRequest, OracleMatcher, PointMatcher};
use a2pm::sam::sam_pipeline;
use a2pm::synth::{generate, generate_fixture, intrinsics, Camera, Fixture, Object, Scene, Shape, HEIGHT, WIDTH};
use nalgebra::{Matrix3, Rotation3, Vector3};

fn plane_scene(baseline_x: f64, depth: f64) -> Scene {
    let k = intrinsics();
    let wall = Object {
        shape: Shape::Quad {
            origin: [-10.0, -10.0, depth],
            u: [20.0, 0.0, 0.0],
            v: [0.0, 20.0, 0.0],
        },
        label: 3,
        texture: 3,
    };
    Scene {
        width: WIDTH,
        height: HEIGHT,
        cameras: [
            Camera::looking(k, Matrix3::identity(), Vector3::zeros()),
            Camera::looking(k, Matrix3::identity(), Vector3::new(baseline_x, 0.0, 0.0)),
        ],
        objects: vec![wall],
        texture_seed: 1,
    }
}

#[test]
fn fronto_parallel_translation_is_a_pure_shift() {
    let (b, z) = (0.2, 4.0);
    let pair = generate(plane_scene(b, z)).unwrap();
    let gt = pair.ground_truth();
    // disparity f b / Z, leftward
    let shift = intrinsics().fx * b / z;
    let mut checked = 0;
    for y in (0..HEIGHT).step_by(17) {
        for x in (0..WIDTH).step_by(13) {
            let q = Point2::new(x as f64 + 0.25, y as f64 + 0.75);
            if let Some(p) = gt.project(&q) {
                assert!(p.distance(&Point2::new(q.x - shift, q.y)) < 1e-6, "{q:?} -> {p:?}");
                checked += 1;
            }
        }
    }
    assert!(checked > 1000, "{checked}");
}

#[test]
fn identity_pose_renders_identical_maps() {
    let mut scene = Fixture::Room6.scene(4);
    scene.cameras[1] = scene.cameras[0];
    let pair = generate(scene).unwrap();
    assert_eq!(pair.sem[0], pair.sem[1]);
    assert_eq!(pair.rgb[0], pair.rgb[1]);
}

#[test]
fn projection_preserves_labels_under_rotation() {
    for seed in 0..3 {
        let mut scene = Fixture::Room6.scene(seed);
        let c0 = scene.cameras[0];
        let r = Rotation3::from_euler_angles(0.0, 10f64.to_radians(), 0.0).into_inner();
        scene.cameras[1] = Camera::looking(c0.k, r, Vector3::new(0.5, -0.1, 0.3));
        let pair = generate(scene).unwrap();
        let gt = pair.ground_truth();
        let (mut exact, mut near, mut total) = (0, 0, 0);
        for y in (1..HEIGHT).step_by(5) {
            for x in (1..WIDTH).step_by(5) {
                let label = pair.sem[0].get(x, y);
                let Some(p) = gt.project(&Point2::new(x as f64 + 0.5, y as f64 + 0.5)) else {
                    continue;
                };
                total += 1;
                let (px, py) = (p.x as usize, p.y as usize);
                if pair.sem[1].get(px, py) == label {
                    exact += 1;
                    continue;
                }
                // a projection can fall in a pixel whose center sees the neighboring surface
                let hood = (px.saturating_sub(1)..=(px + 1).min(WIDTH - 1))
                    .flat_map(|i| (py.saturating_sub(1)..=(py + 1).min(HEIGHT - 1)).map(move |j| (i, j)));
                assert!(
                    hood.clone().any(|(i, j)| pair.sem[1].get(i, j) == label),
                    "seed {seed}: ({x}, {y}) label {label}"
                );
                near += 1;
            }
        }
        assert!(total > 5000, "{total}");
        assert!(exact as f64 >= 0.99 * total as f64, "exact {exact} near {near} of {total}");
    }
}

#[test]
fn depth_round_trip_in_the_same_view_is_exact() {
    let pair = generate_fixture(Fixture::Twins, 2).unwrap();
    let k = pair.scene().cameras[0].k;
    let proj = DepthProjector {
        depth0: pair.depth[0].clone(),
        depth1: None,
        k0: k,
        k1: k,
        pose: RelativePose {
            rotation: Matrix3::identity(),
            t: Vector3::zeros(),
        },
        bounds: Some((WIDTH, HEIGHT)),
    };
    for y in (0..HEIGHT).step_by(7) {
        for x in (0..WIDTH).step_by(7) {
            let q = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
            if let Some(p) = proj.project(&q) {
                assert!(p.distance(&q) < 1e-6);
            }
        }
    }
}

#[test]
fn depth_projector_agrees_with_scene_truth() {
    let pair = generate_fixture(Fixture::Room6, 5).unwrap();
    let scene = pair.scene();
    let proj = DepthProjector {
        depth0: pair.depth[0].clone(),
        depth1: Some(pair.depth[1].clone()),
        k0: scene.cameras[0].k,
        k1: scene.cameras[1].k,
        pose: scene.relative_pose(),
        bounds: None,
    };
    let gt = pair.ground_truth();
    let (mut agree, mut both) = (0, 0);
    for y in (0..HEIGHT).step_by(9) {
        for x in (0..WIDTH).step_by(9) {
            let q = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
            if let (Some(a), Some(b)) = (proj.project(&q), gt.project(&q)) {
                both += 1;
                // float32 depth limits agreement to about a millipixel
                agree += usize::from(a.distance(&b) < 1e-2);
            }
        }
    }
    assert!(both > 1000 && agree == both, "{agree}/{both}");
}

#[test]
fn generation_is_deterministic() {
    for f in Fixture::ALL {
        let a = generate_fixture(f, 9).unwrap();
        let b = generate_fixture(f, 9).unwrap();
        assert_eq!(a.rgb, b.rgb);
        assert_eq!(a.sem, b.sem);
        assert_eq!(a.depth, b.depth);
    }
    assert_ne!(generate_fixture(Fixture::Room6, 1).unwrap().rgb[0], generate_fixture(Fixture::Room6, 2).unwrap().rgb[0]);
}

#[test]
fn twins_make_sam_doubtful() {
    for seed in 0..5 {
        let pair = generate_fixture(Fixture::Twins, seed).unwrap();
        let sam = sam_pipeline(&pair.sem[0], &pair.sem[1], &SgamConfig::indoor());
        assert!(sam.doubtful_a0.len() >= 2 && sam.doubtful_a1.len() >= 2, "seed {seed}: {sam:?}");
    }
}

#[test]
fn sparse_covers_little_of_the_image() {
    for seed in 0..5 {
        let pair = generate_fixture(Fixture::Sparse, seed).unwrap();
        let sam = sam_pipeline(&pair.sem[0], &pair.sem[1], &SgamConfig::indoor());
        assert!(!sam.accepted.is_empty());
        let sp = size_proportion(&sam.accepted, (WIDTH, HEIGHT), (WIDTH, HEIGHT));
        assert!(sp < 0.3, "seed {seed}: {sp}");
    }
}

#[test]
fn planar_oracle_matches_follow_the_homography() {
    let pair = generate_fixture(Fixture::Planar, 0).unwrap();
    let h = pair.homography.unwrap();
    let req = MatcherRequest {
        image0: pair.rgb[0].clone(),
        image1: pair.rgb[1].clone(),
        transform0: AreaTransform::identity(),
        transform1: AreaTransform::identity(),
        max_matches: 300,
    };
    let resp = OracleMatcher::new(pair.truth.clone()).match_pair(&req).unwrap();
    for c in resp.matches.iter() {
        let v = h * c.q.homogeneous();
        assert!(c.p.distance(&Point2::new(v.x / v.z, v.y / v.z)) < 1e-9);
    }
    // a plane leaves the fundamental matrix undetermined
    let s: MatchSet = resp.matches.iter().map(|c| Correspondence::new(c.q, c.p)).collect();
    assert!(estimate_fundamental(&s).is_err());
}

#[test]
fn written_pair_has_seven_files_and_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let pair = generate_fixture(Fixture::Twins, 7).unwrap();
    pair.write(dir.path()).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["depth0.pfm", "depth1.pfm", "gt.json", "rgb0.png", "rgb1.png", "sem0.png", "sem1.png"]);
    let entry = PairEntry::from_dir(dir.path());
    let gt = entry.ground_truth(Some((WIDTH, HEIGHT))).unwrap();
    let direct = pair.ground_truth();
    let q = Point2::new(320.5, 300.5);
    assert_eq!(gt.project(&q), direct.project(&q));
    assert_eq!(gt.pose, direct.pose);
}
