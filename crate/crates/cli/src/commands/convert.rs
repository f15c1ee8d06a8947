use std::path::Path;

use pcdet_core::dataio::{convert_kitti_frame, write_scene_labels};

use crate::error::CliError;
use crate::report::ReportTable;
use crate::scenes::catalog;
use crate::Context;

/// Converts every `<frame>.txt` in `labels` using `calib/<frame>.txt`, writing `<out>/labels/<frame>.txt`.
pub fn run(ctx: &Context, labels: &Path, calib: &Path) -> Result<ReportTable, CliError> {
    let cat = catalog(&ctx.config.data.class_names);
    let mut frames: Vec<_> = std::fs::read_dir(labels)
        .map_err(|e| CliError::io(labels, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    frames.sort();
    if frames.is_empty() {
        return Err(CliError::Data(format!("no label files in {}", labels.display())));
    }
    let dir = ctx.out.join("labels");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;

    let mut table = ReportTable::new("converted labels", "frame", cat.names.clone());
    for path in frames {
        let name = path.file_name().expect("file path").to_owned();
        let frame = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let calib_path = calib.join(&name);
        let calib_text = std::fs::read_to_string(&calib_path).map_err(|e| CliError::io(&calib_path, e))?;
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let boxes = convert_kitti_frame(&text, &calib_text, &cat, &path.display().to_string())?;
        write_scene_labels(dir.join(&name), &boxes, &cat)?;
        let counts = (0..cat.len()).map(|c| Some(boxes.iter().filter(|b| b.class_id() == c).count() as f64)).collect();
        table.push(frame, counts);
    }
    ctx.emit(&table, "convert")?;
    Ok(table)
}
