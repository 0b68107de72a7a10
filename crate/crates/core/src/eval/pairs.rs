use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::truth::{DepthMap, DepthProjector, GroundTruth, HomographyProjector, RelativePose};
use super::EvalError;
use crate::geometry::{matrix_from_rows, CameraIntrinsics};
use crate::synth::{Scene, SceneTruth};

/// Ground truth as stored on disk. Projection comes from the first
/// available source: an embedded synthetic scene, a homography, or
/// first-image depth with pose and intrinsics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFile {
    #[serde(rename = "K0", default, skip_serializing_if = "Option::is_none", with = "k_serde")]
    pub k0: Option<CameraIntrinsics>,
    #[serde(rename = "K1", default, skip_serializing_if = "Option::is_none", with = "k_serde")]
    pub k1: Option<CameraIntrinsics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<RelativePose>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "h_serde")]
    pub homography: Option<nalgebra::Matrix3<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth0: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth1: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<Scene>,
}

impl GroundTruthFile {
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Builds the projector; relative depth paths resolve against `base`.
    /// `bounds` is the second image size.
    pub fn resolve(&self, base: &Path, bounds: Option<(usize, usize)>) -> Result<GroundTruth, EvalError> {
        if let Some(scene) = &self.scene {
            return Ok(Arc::new(SceneTruth::new(scene.clone())).ground_truth());
        }
        if let Some(h) = self.homography {
            return Ok(GroundTruth {
                pose: self.pose,
                k0: self.k0,
                k1: self.k1,
                projector: Arc::new(HomographyProjector { h, bounds }),
            });
        }
        let (Some(depth0), Some(pose), Some(k0), Some(k1)) = (&self.depth0, self.pose, self.k0, self.k1) else {
            return Err(EvalError::Format(
                "ground truth needs a scene, a homography, or depth0 with pose, K0 and K1".into(),
            ));
        };
        let depth1 = match &self.depth1 {
            Some(p) => Some(DepthMap::read_pfm(&base.join(p))?),
            None => None,
        };
        Ok(GroundTruth {
            pose: Some(pose),
            k0: Some(k0),
            k1: Some(k1),
            projector: Arc::new(DepthProjector {
                depth0: DepthMap::read_pfm(&base.join(depth0))?,
                depth1,
                k0,
                k1,
                pose,
                bounds,
            }),
        })
    }
}

/// Ground truth given inline or as a path to a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroundTruthSpec {
    Path(PathBuf),
    Inline(Box<GroundTruthFile>),
}

/// One line of a pair list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub image0: PathBuf,
    pub image1: PathBuf,
    pub sem0: PathBuf,
    pub sem1: PathBuf,
    pub gt: GroundTruthSpec,
}

impl PairEntry {
    /// Entry for a directory in the layout written by the synthetic
    /// generator (`rgb0.png`, `sem0.png`, ..., `gt.json`).
    pub fn from_dir(dir: &Path) -> Self {
        Self {
            name: dir.file_name().map(|n| n.to_string_lossy().into_owned()),
            image0: dir.join("rgb0.png"),
            image1: dir.join("rgb1.png"),
            sem0: dir.join("sem0.png"),
            sem1: dir.join("sem1.png"),
            gt: GroundTruthSpec::Path(dir.join("gt.json")),
        }
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.image0.display().to_string())
    }

    fn rebase(mut self, base: &Path) -> Self {
        for p in [&mut self.image0, &mut self.image1, &mut self.sem0, &mut self.sem1] {
            *p = base.join(&*p);
        }
        if let GroundTruthSpec::Path(p) = &mut self.gt {
            *p = base.join(&*p);
        }
        self
    }

    /// The stored ground truth and the directory its relative paths
    /// resolve against.
    pub fn truth_file(&self) -> Result<(GroundTruthFile, PathBuf), EvalError> {
        match &self.gt {
            GroundTruthSpec::Path(p) => Ok((GroundTruthFile::load(p)?, p.parent().unwrap_or(Path::new(".")).to_path_buf())),
            GroundTruthSpec::Inline(g) => Ok(((**g).clone(), self.image0.parent().unwrap_or(Path::new(".")).to_path_buf())),
        }
    }

    pub fn ground_truth(&self, bounds: Option<(usize, usize)>) -> Result<GroundTruth, EvalError> {
        let (file, base) = self.truth_file()?;
        file.resolve(&base, bounds)
    }
}

/// Reads a JSON-lines pair list; blank lines and `#` comments are skipped and
/// relative paths resolve against the list's directory.
pub fn load_pair_list(path: &Path) -> Result<Vec<PairEntry>, EvalError> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            serde_json::from_str::<PairEntry>(l)
                .map(|e| e.rebase(base))
                .map_err(|e| EvalError::Format(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

mod k_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Matrix([[f64; 3]; 3]),
        Params(CameraIntrinsics),
    }

    pub fn serialize<S: Serializer>(k: &Option<CameraIntrinsics>, s: S) -> Result<S::Ok, S::Error> {
        k.map(|k| {
            let m = k.matrix();
            std::array::from_fn::<[f64; 3], 3, _>(|r| std::array::from_fn(|c| m[(r, c)]))
        })
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<CameraIntrinsics>, D::Error> {
        let k = match Option::<Repr>::deserialize(d)? {
            None => return Ok(None),
            Some(Repr::Params(k)) => k,
            Some(Repr::Matrix(m)) => CameraIntrinsics {
                fx: m[0][0],
                fy: m[1][1],
                cx: m[0][2],
                cy: m[1][2],
                skew: m[0][1],
            },
        };
        k.validate().map_err(serde::de::Error::custom)?;
        Ok(Some(k))
    }
}

mod h_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(h: &Option<nalgebra::Matrix3<f64>>, s: S) -> Result<S::Ok, S::Error> {
        h.map(|m| std::array::from_fn::<[f64; 3], 3, _>(|r| std::array::from_fn(|c| m[(r, c)])))
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<nalgebra::Matrix3<f64>>, D::Error> {
        Ok(Option::<[[f64; 3]; 3]>::deserialize(d)?.map(|r| matrix_from_rows(&r)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    #[test]
    fn pair_list_resolves_relative_paths_and_inline_homography() {
        let dir = tempfile::tempdir().unwrap();
        let list = dir.path().join("pairs.jsonl");
        std::fs::write(
            &list,
            "# comment\n{\"image0\":\"a.png\",\"image1\":\"b.png\",\"sem0\":\"s0.png\",\"sem1\":\"s1.png\",\
             \"gt\":{\"homography\":[[1,0,3],[0,1,0],[0,0,1]]}}\n\n",
        )
        .unwrap();
        let pairs = load_pair_list(&list).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].image0, dir.path().join("a.png"));
        let gt = pairs[0].ground_truth(None).unwrap();
        assert_eq!(gt.project(&Point2::new(1.0, 2.0)), Some(Point2::new(4.0, 2.0)));
    }

    #[test]
    fn intrinsics_accept_matrix_form() {
        let g: GroundTruthFile =
            serde_json::from_str(r#"{"K0":[[500,0,320],[0,400,240],[0,0,1]],"K1":{"fx":1,"fy":2,"cx":3,"cy":4}}"#).unwrap();
        assert_eq!(g.k0.unwrap().fy, 400.0);
        assert_eq!(g.k1.unwrap().cy, 4.0);
        let back: GroundTruthFile = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn missing_sources_is_a_format_error() {
        let g = GroundTruthFile::default();
        assert!(matches!(g.resolve(Path::new("."), None), Err(EvalError::Format(_))));
    }
}
