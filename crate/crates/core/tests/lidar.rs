mod common;

use mvsdf::geometry::Point3;
use mvsdf::lidar::*;
use mvsdf::mesh::{MeshSdf, TriangleMesh};
use mvsdf::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn car_box() -> TriangleMesh {
    TriangleMesh::cuboid(Point3::new(-1.0, -0.45, -0.35), Point3::new(1.0, 0.45, 0.35))
}

#[test]
fn poses_respect_constraints() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..1000 {
        let side = if i % 2 == 0 { Side::Positive } else { Side::Negative };
        let p = sample_pose(&mut rng, side);
        assert!(p.is_valid(), "{p:?}");
        assert!(side.contains(p.theta));
        assert!((3.0..=15.0).contains(&p.r) && (0.8..=1.2).contains(&p.h));
    }
    let seq = |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        (0..5).map(|_| sample_pose(&mut rng, Side::Positive)).collect::<Vec<_>>()
    };
    assert_eq!(seq(4), seq(4));
    assert!(seq(4).iter().all(|p| (0.0..=180.0).contains(&p.theta)));
}

#[test]
fn sphere_hits_lie_on_near_hemisphere() {
    let mesh = TriangleMesh::icosphere(1.0, 3);
    let pose = SensorPose { theta: 0.0, r: 5.0, h: 1.0 };
    let cloud = raycast_sweep(&mesh, &pose, &LidarConfig::default()).unwrap();
    assert_eq!(cloud.sensor_origin, Some(Point3::new(5.0, 0.0, 0.0)));
    assert!(cloud.len() > 100);
    let sdf = MeshSdf::new(&mesh).unwrap();
    for p in &cloud.points {
        assert!(sdf.unsigned(p) <= 1e-6);
        assert!(p.x > 0.0);
    }
}

#[test]
fn occluded_faces_receive_no_points() {
    let far = TriangleMesh::cuboid(Point3::new(-1.0, -0.5, -0.3), Point3::new(1.0, 0.5, 0.3));
    let near = TriangleMesh::cuboid(Point3::new(2.0, -0.2, -0.3), Point3::new(2.4, 0.2, 0.2));
    let offset = far.vertices.len() as u32;
    let mesh = TriangleMesh::new(
        far.vertices.iter().chain(&near.vertices).copied().collect(),
        far.triangles
            .iter()
            .copied()
            .chain(near.triangles.iter().map(|t| t.map(|i| i + offset)))
            .collect(),
    );
    let pose = SensorPose { theta: 0.0, r: 6.0, h: 0.9 };
    let config = LidarConfig {
        azimuth_step_deg: 0.5,
        ..LidarConfig::default()
    };
    let lidar = Lidar::new(&mesh).unwrap();
    let o = lidar.sensor_position(&pose);
    let cloud = lidar.scan(&pose, &config, 0).unwrap();
    let mut expected = Vec::new();
    for d in lidar.ray_directions(&pose, &config) {
        if let Some((t, _)) = common::brute_first_hit(&mesh, &o, &d, 1e-9) {
            if t <= config.max_range {
                expected.push(o + d * t);
            }
        }
    }
    assert_eq!(cloud.len(), expected.len());
    let mut shadowed = 0;
    for (p, q) in cloud.points.iter().zip(&expected) {
        assert!((p - q).norm() < 1e-9);
        // Any ray that crosses the near box must stop on it.
        let hits_near = (0..near.triangles.len())
            .any(|t| common::ray_triangle(&o, &((p - o) / (p - o).norm()), near.corners(t)).is_some_and(|s| s > 0.0));
        if hits_near {
            shadowed += 1;
            assert!(p.x >= 2.0 - 1e-9, "{p:?} behind the occluder");
        }
    }
    assert!(shadowed > 0);
}

#[test]
fn looking_away_gives_empty_sweep() {
    let config = LidarConfig {
        horizontal_fov_deg: 20.0,
        boresight_yaw_offset_deg: 180.0,
        ..LidarConfig::default()
    };
    let pose = SensorPose { theta: 45.0, r: 5.0, h: 1.0 };
    assert!(matches!(raycast_sweep(&car_box(), &pose, &config), Err(Error::EmptySweep)));
}

#[test]
fn instances_are_consistent_and_nested() {
    let mesh = car_box();
    let config = LidarConfig::default();
    let nine = generate_instance("box", &mesh, 9, &config, 77).unwrap();
    nine.validate().unwrap();
    assert_eq!(nine.b(), 9);
    assert!(nine.poses.iter().all(|p| nine.side.contains(p.theta)));
    let three = generate_instance("box", &mesh, 3, &config, 77).unwrap();
    assert_eq!(three, nine.prefix(3).unwrap());
    assert_eq!(generate_instance("box", &mesh, 1, &config, 5).unwrap().b(), 1);
    assert_eq!(generate_instance("box", &mesh, 9, &config, 77).unwrap(), nine);
    assert!(generate_instance("box", &mesh, 0, &config, 77).is_err());

    let sdf = MeshSdf::new(&mesh).unwrap();
    for (s, pose) in nine.sweeps.iter().zip(&nine.poses) {
        let o = s.sensor_origin.unwrap();
        assert!((o - pose.position(nine.ground_z)).norm() < 1e-12);
        assert!((o.z - (-0.35 + pose.h)).abs() < 1e-12);
        for (i, p) in s.points.iter().enumerate() {
            assert!(sdf.unsigned(p) <= 1e-6);
            if i % 50 == 0 {
                assert!(common::visible(&mesh, &o, p));
            }
        }
    }
}

#[test]
fn impossible_instance_gives_up() {
    let config = LidarConfig {
        horizontal_fov_deg: 10.0,
        boresight_yaw_offset_deg: 180.0,
        ..LidarConfig::default()
    };
    assert!(matches!(
        generate_instance("box", &car_box(), 2, &config, 1),
        Err(Error::RetriesExhausted { attempts: MAX_POSE_ATTEMPTS, .. })
    ));
}

#[test]
fn range_noise_moves_points_off_surface() {
    let config = LidarConfig {
        range_noise_std: 0.01,
        ..LidarConfig::default()
    };
    let mesh = car_box();
    let a = generate_instance("box", &mesh, 2, &config, 3).unwrap();
    let b = generate_instance("box", &mesh, 2, &config, 3).unwrap();
    assert_eq!(a, b);
    let sdf = MeshSdf::new(&mesh).unwrap();
    let off = a.sweeps[0].points.iter().filter(|p| sdf.unsigned(p) > 1e-4).count();
    assert!(off > a.sweeps[0].len() / 2);
}

#[test]
fn instance_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut inst = generate_instance("box", &car_box(), 3, &LidarConfig::default(), 12).unwrap();
    inst.gt_latent = Some(mvsdf::sdf_model::LatentCode(vec![0.5, -0.25]));
    inst.save(dir.path()).unwrap();
    for f in ["meta.json", "sweep_0.ply", "sweep_2.ply", "gt.obj", "gt_latent.bin"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let back = SweepInstance::load(dir.path()).unwrap();
    assert_eq!(back.b(), 3);
    assert_eq!(back.poses, inst.poses);
    assert_eq!(back.gt_latent, inst.gt_latent);
    for (a, b) in back.sweeps.iter().zip(&inst.sweeps) {
        assert_eq!(a.len(), b.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!((p - q).norm() < 1e-5);
        }
    }
    let p = inst.permuted(&[2, 0, 1]).unwrap();
    assert_eq!(p.sweeps[0], inst.sweeps[2]);
    assert!(inst.permuted(&[0, 0, 1]).is_err());
}
