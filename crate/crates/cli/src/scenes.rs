use std::path::{Path, PathBuf};

use pcdet_core::dataio::{generate_scene, read_point_bin, read_scene_labels, ClassCatalog, LabeledScene, SceneGenSpec};
use rayon::prelude::*;

use crate::error::CliError;

pub fn catalog(names: &[String]) -> ClassCatalog {
    ClassCatalog { names: names.to_vec() }
}

/// `<frame>.bin` files in `dir`, sorted by frame id.
pub fn list_frames(dir: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut frames = Vec::new();
    for e in entries {
        let path = e.map_err(|e| CliError::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "bin") {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            frames.push((stem, path));
        }
    }
    frames.sort();
    if frames.is_empty() {
        return Err(CliError::Data(format!("no .bin point files in {}", dir.display())));
    }
    Ok(frames)
}

/// Loads a directory of scenes. With `need_labels`, a missing `<frame>.txt`
/// is an error; otherwise the scene gets no boxes.
pub fn load_dir(dir: &Path, names: &[String], need_labels: bool) -> Result<Vec<LabeledScene>, CliError> {
    let cat = catalog(names);
    list_frames(dir)?
        .into_par_iter()
        .map(|(frame, bin)| {
            let cloud = read_point_bin(&bin)?;
            let labels = bin.with_extension("txt");
            let boxes = if labels.exists() {
                read_scene_labels(&labels, &cat)?
            } else if need_labels {
                return Err(CliError::Data(format!("scene {frame} has no labels ({})", labels.display())));
            } else {
                Vec::new()
            };
            Ok(LabeledScene::new(frame, cloud, boxes)?.with_instance_ids())
        })
        .collect()
}

/// `count` generated scenes with seeds `seed, seed + 1, ...`.
pub fn synthetic(spec: &SceneGenSpec, count: usize, seed: u64) -> Result<Vec<LabeledScene>, CliError> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| Ok(generate_scene(&spec.clone().with_seed(seed.wrapping_add(i)))?))
        .collect()
}
