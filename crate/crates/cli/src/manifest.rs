use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use panolayout::gt_synth::LayoutModel;
use panolayout::ImageGeometry;

/// Predicted artifacts for one record. Any subset may be present.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corner: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
}

/// Camera perturbation a record was generated with. Angles in degrees,
/// translations in ceiling heights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationTag {
    pub kind: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panorama: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    /// Ground-truth `Layout3D` document, when known exactly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<Prediction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corner: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationTag>,
}

impl Record {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            panorama: None,
            labels: None,
            layout: None,
            prediction: None,
            edge: None,
            corner: None,
            perturbation: None,
        }
    }

    fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        let mut v: Vec<&mut PathBuf> = Vec::new();
        for p in [&mut self.panorama, &mut self.labels, &mut self.layout, &mut self.edge, &mut self.corner]
            .into_iter()
            .flatten()
        {
            v.push(p);
        }
        if let Some(pred) = &mut self.prediction {
            for p in [&mut pred.edge, &mut pred.corner, &mut pred.labels].into_iter().flatten() {
                v.push(p);
            }
        }
        v
    }
}

/// A dataset listing. Paths are relative to the manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub width: usize,
    pub height: usize,
    pub records: Vec<Record>,
}

impl Manifest {
    pub fn new(geom: &ImageGeometry, records: Vec<Record>) -> Self {
        Self {
            width: geom.width,
            height: geom.height,
            records,
        }
    }

    pub fn geometry(&self) -> Result<ImageGeometry> {
        Ok(ImageGeometry::with_any_aspect(self.width, self.height)?)
    }

    /// Reads a manifest, resolves its paths and checks that every referenced
    /// file exists and every label file matches the dataset geometry.
    pub fn load(path: &Path) -> Result<Self> {
        let mut m: Manifest =
            panolayout::io::read_json(path).with_context(|| format!("reading manifest {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let geom = m.geometry()?;
        let mut seen = std::collections::BTreeSet::new();
        for rec in &mut m.records {
            if !seen.insert(rec.id.clone()) {
                bail!("duplicate record id {:?}", rec.id);
            }
            let id = rec.id.clone();
            for p in rec.paths_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
                if !p.exists() {
                    bail!("record {id:?}: missing file {}", p.display());
                }
            }
            for labels in [rec.labels.as_ref(), rec.prediction.as_ref().and_then(|p| p.labels.as_ref())]
                .into_iter()
                .flatten()
            {
                let model: LayoutModel = panolayout::io::read_json(labels)
                    .with_context(|| format!("record {:?}: reading {}", rec.id, labels.display()))?;
                if model.geometry != geom {
                    bail!(
                        "record {:?}: labels are {}x{}, dataset is {}x{}",
                        rec.id,
                        model.geometry.width,
                        model.geometry.height,
                        geom.width,
                        geom.height
                    );
                }
            }
        }
        Ok(m)
    }

    /// Writes the manifest with paths relative to its own directory.
    pub fn save(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new("."));
        let mut m = self.clone();
        for rec in &mut m.records {
            for p in rec.paths_mut() {
                if let Some(rel) = pathdiff::diff_paths(&*p, base) {
                    *p = rel;
                }
            }
        }
        panolayout::io::write_json(path, &m)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let g = ImageGeometry::new(16, 8).unwrap();
        let mut r = Record::new("a");
        r.panorama = Some(dir.path().join("nope.png"));
        let path = dir.path().join("manifest.json");
        Manifest::new(&g, vec![r]).save(&path).unwrap();
        let err = Manifest::load(&path).unwrap_err().to_string();
        assert!(err.contains("missing file"), "{err}");
    }

    #[test]
    fn paths_are_relative_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let g = ImageGeometry::new(16, 8).unwrap();
        let img = dir.path().join("a.png");
        std::fs::write(&img, b"x").unwrap();
        let mut r = Record::new("a");
        r.panorama = Some(img.clone());
        let path = dir.path().join("manifest.json");
        Manifest::new(&g, vec![r]).save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"panorama\": \"a.png\""), "{text}");
        let back = Manifest::load(&path).unwrap();
        assert_eq!(back.records[0].panorama.as_deref(), Some(img.as_path()));
    }
}
