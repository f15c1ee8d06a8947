pub mod bench;
pub mod convert;
pub mod detect;
pub mod eval;
pub mod recall;
pub mod sample;
pub mod train;

use pcdet_core::dataio::LabeledScene;
use pcdet_core::geometry::Box7;
use pcdet_core::sampling::{Features, OracleScorer, PointCloud, Strategy};

use crate::error::CliError;
use crate::{scenes, Context};

/// Scenes from the configured directory, or synthetic ones seeded from the master seed.
pub fn load_scenes(ctx: &Context, need_labels: bool) -> Result<Vec<LabeledScene>, CliError> {
    let data = &ctx.config.data;
    match &data.dir {
        Some(dir) => scenes::load_dir(dir, &data.class_names, need_labels),
        None => scenes::synthetic(&data.synthetic, data.scenes, ctx.config.seed),
    }
}

/// Feature rows `(x, y, z, intensity)` for clouds that carry no features of their own.
pub fn with_derived_features(cloud: &PointCloud) -> Result<PointCloud, CliError> {
    if cloud.features().is_some() {
        return Ok(cloud.clone());
    }
    let intensity = cloud.intensity();
    let data: Vec<f64> = cloud
        .points()
        .iter()
        .enumerate()
        .flat_map(|(i, p)| [p.x, p.y, p.z, intensity.map_or(0.0, |v| v[i])])
        .collect();
    Ok(cloud.clone().with_features(Features::new(4, data)?)?)
}

/// Ground-truth scorer standing in for a trained score head.
pub fn oracle(strategy: Strategy, boxes: &[Box7]) -> Option<OracleScorer> {
    match strategy {
        Strategy::ClsAware => Some(OracleScorer::Foreground(boxes.to_vec())),
        Strategy::CtrAware => Some(OracleScorer::Centroid(boxes.to_vec())),
        _ => None,
    }
}
