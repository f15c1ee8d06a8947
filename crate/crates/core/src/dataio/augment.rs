//! Scene-level (flip, rotation, scaling) and object-level (ground-truth
//! paste) augmentation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, LabeledScene};
use crate::geometry::{bev_iou, contains, Box7, Point};
use crate::sampling::PointCloud;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Probability of mirroring the scene across the xz-plane.
    pub flip_prob: f64,
    /// Rotation about z drawn uniformly from this range, radians.
    pub rotation: [f64; 2],
    /// Uniform scale factor range.
    pub scale: [f64; 2],
    /// Instances pasted per class id.
    pub paste_counts: Vec<usize>,
    /// Bank instances with fewer interior points are never pasted.
    pub min_points: usize,
    /// BEV region `[x_min, y_min, x_max, y_max]` for pasted box centers.
    pub paste_range: [f64; 4],
    /// Placement attempts per pasted instance.
    pub paste_retries: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            flip_prob: 0.5,
            rotation: [-std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_4],
            scale: [0.95, 1.05],
            paste_counts: vec![20, 15, 15],
            min_points: 5,
            paste_range: [0.0, -40.0, 70.4, 40.0],
            paste_retries: 100,
        }
    }
}

impl AugmentConfig {
    /// Leaves scenes untouched.
    pub fn identity() -> Self {
        Self {
            flip_prob: 0.0,
            rotation: [0.0, 0.0],
            scale: [1.0, 1.0],
            paste_counts: Vec::new(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let ok = (0.0..=1.0).contains(&self.flip_prob)
            && self.rotation[0] <= self.rotation[1]
            && self.scale[0] <= self.scale[1]
            && self.scale[0] > 0.0
            && self.paste_range[0] <= self.paste_range[2]
            && self.paste_range[1] <= self.paste_range[3];
        if ok {
            Ok(())
        } else {
            Err(DataError::InvalidSpec(format!(
                "malformed augmentation config {self:?}"
            )))
        }
    }
}

/// A ground-truth instance available for pasting.
#[derive(Debug, Clone, PartialEq)]
pub struct BankInstance {
    pub bbox: Box7,
    pub points: Vec<Point>,
    pub intensity: Vec<f64>,
}

/// Collects the interior points of every box with at least `min_points` of them.
pub fn build_bank(scenes: &[LabeledScene], min_points: usize) -> Vec<BankInstance> {
    let mut bank = Vec::new();
    for s in scenes {
        let pts = s.cloud.points();
        for b in &s.boxes {
            let idx: Vec<usize> = (0..pts.len()).filter(|&i| contains(b, pts[i])).collect();
            if idx.len() >= min_points.max(1) {
                bank.push(BankInstance {
                    bbox: b.without_instance(),
                    points: idx.iter().map(|&i| pts[i]).collect(),
                    intensity: idx
                        .iter()
                        .map(|&i| s.cloud.intensity().map_or(0.0, |v| v[i]))
                        .collect(),
                });
            }
        }
    }
    bank
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AugmentReport {
    pub flipped: bool,
    pub rotation: f64,
    pub scale: f64,
    /// Instances pasted per class id.
    pub pasted: Vec<usize>,
    /// Classes whose pasting stopped early because no free spot was found.
    pub paste_exhausted: Vec<usize>,
}

fn draw(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.random_range(range[0]..=range[1])
    }
}

/// Applies flip, rotation, scaling and then ground-truth paste, in that order.
///
/// Pasted instances are translated to a random BEV position inside
/// `paste_range` and rejected when their box overlaps any existing box
/// (BEV IoU > 0). Existing points inside an accepted pasted box are dropped.
pub fn augment(
    scene: &LabeledScene,
    config: &AugmentConfig,
    bank: &[BankInstance],
    seed: u64,
) -> Result<(LabeledScene, AugmentReport), DataError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AugmentReport::default();

    let mut cloud = scene.cloud.clone();
    let mut boxes = scene.boxes.clone();

    if config.flip_prob > 0.0 && rng.random_bool(config.flip_prob) {
        report.flipped = true;
        cloud = cloud.map_points(|p| Point::new(p.x, -p.y, p.z));
        boxes = boxes.iter().map(Box7::mirrored_y).collect();
    }

    let angle = draw(&mut rng, config.rotation);
    report.rotation = angle;
    if angle != 0.0 {
        cloud = cloud.map_points(|p| p.rotate_z(angle));
        boxes = boxes.iter().map(|b| b.rotated_z(angle)).collect();
    }

    let factor = draw(&mut rng, config.scale);
    report.scale = factor;
    if factor != 1.0 {
        cloud = cloud.map_points(|p| p * factor);
        boxes = boxes
            .iter()
            .map(|b| b.scaled(factor))
            .collect::<Result<_, _>>()?;
    }

    report.pasted = vec![0; config.paste_counts.len()];
    let mut next_id = boxes
        .iter()
        .filter_map(|b| b.instance_id())
        .max()
        .map_or(0, |m| m + 1);
    for (class_id, &want) in config.paste_counts.iter().enumerate() {
        let candidates: Vec<&BankInstance> = bank
            .iter()
            .filter(|b| b.bbox.class_id() == class_id && b.points.len() >= config.min_points)
            .collect();
        if candidates.is_empty() {
            continue;
        }
        for _ in 0..want {
            let inst = candidates[rng.random_range(0..candidates.len())];
            let [x0, y0, x1, y1] = config.paste_range;
            let mut placed = None;
            for _ in 0..config.paste_retries {
                let target = Point::new(
                    draw(&mut rng, [x0, x1]),
                    draw(&mut rng, [y0, y1]),
                    inst.bbox.center().z,
                );
                let shift = Point::new(
                    target.x - inst.bbox.center().x,
                    target.y - inst.bbox.center().y,
                    0.0,
                );
                let candidate = inst.bbox.translated(shift);
                if boxes.iter().all(|b| bev_iou(b, &candidate) == 0.0) {
                    placed = Some((candidate, shift));
                    break;
                }
            }
            let Some((bbox, shift)) = placed else {
                report.paste_exhausted.push(class_id);
                break;
            };
            let keep: Vec<usize> = (0..cloud.len())
                .filter(|&i| !contains(&bbox, cloud.points()[i]))
                .collect();
            let pasted = PointCloud::new(inst.points.iter().map(|&p| p + shift).collect())?;
            let pasted = match cloud.intensity() {
                Some(_) => pasted.with_intensity(inst.intensity.clone())?,
                None => pasted,
            };
            cloud = cloud.subset(&keep).concat(&pasted);
            boxes.push(bbox.with_instance(next_id));
            next_id += 1;
            report.pasted[class_id] += 1;
        }
    }

    Ok((
        LabeledScene::new(scene.frame_id.clone(), cloud, boxes)?,
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_scene, SceneGenSpec};

    fn small_scene(seed: u64) -> LabeledScene {
        let spec = SceneGenSpec {
            total_points: Some(3000),
            seed,
            ..Default::default()
        };
        generate_scene(&spec).unwrap()
    }

    #[test]
    fn identity_config_leaves_scene_unchanged() {
        let s = small_scene(1);
        let (out, rep) = augment(&s, &AugmentConfig::identity(), &[], 9).unwrap();
        assert_eq!(out, s);
        assert!(!rep.flipped);
    }

    #[test]
    fn pure_rotation_is_an_isometry() {
        let s = small_scene(2);
        let theta = 0.37;
        let cfg = AugmentConfig {
            rotation: [theta, theta],
            ..AugmentConfig::identity()
        };
        let (out, _) = augment(&s, &cfg, &[], 0).unwrap();
        for (a, b) in s.cloud.points().iter().zip(out.cloud.points()) {
            assert!(a.rotate_z(theta).dist(*b) < 1e-12);
        }
        let (p, q) = (s.cloud.points(), out.cloud.points());
        for i in (0..p.len()).step_by(97) {
            for j in (0..p.len()).step_by(89) {
                assert!((p[i].dist(p[j]) - q[i].dist(q[j])).abs() < 1e-9);
            }
        }
        for (a, b) in s.boxes.iter().zip(&out.boxes) {
            assert!(a.center().rotate_z(theta).dist(b.center()) < 1e-12);
        }
    }

    #[test]
    fn paste_into_empty_scene() {
        let src = small_scene(3);
        let bank: Vec<BankInstance> = build_bank(&[src], 5)
            .into_iter()
            .filter(|b| b.bbox.class_id() == 0)
            .collect();
        assert!(!bank.is_empty());
        let empty = LabeledScene::new(
            "e",
            PointCloud::new(vec![])
                .unwrap()
                .with_intensity(vec![])
                .unwrap(),
            vec![],
        )
        .unwrap();
        let cfg = AugmentConfig {
            paste_counts: vec![5],
            ..AugmentConfig::identity()
        };
        let (out, rep) = augment(&empty, &cfg, &bank, 42).unwrap();
        assert_eq!(rep.pasted, vec![5]);
        assert_eq!(out.boxes.len(), 5);
        for i in 0..5 {
            for j in i + 1..5 {
                assert_eq!(bev_iou(&out.boxes[i], &out.boxes[j]), 0.0);
            }
        }
        let total: usize = out
            .boxes
            .iter()
            .map(|b| {
                out.cloud
                    .points()
                    .iter()
                    .filter(|p| contains(b, **p))
                    .count()
            })
            .sum();
        assert_eq!(total, out.cloud.len());
        let sizes: Vec<usize> = bank.iter().map(|b| b.points.len()).collect();
        for b in &out.boxes {
            let n = out
                .cloud
                .points()
                .iter()
                .filter(|p| contains(b, **p))
                .count();
            assert!(sizes.contains(&n));
        }
    }

    #[test]
    fn rejects_malformed_ranges() {
        let s = small_scene(4);
        let cfg = AugmentConfig {
            scale: [1.1, 0.9],
            ..AugmentConfig::identity()
        };
        assert!(augment(&s, &cfg, &[], 0).is_err());
    }
}
