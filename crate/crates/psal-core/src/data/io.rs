//! On-disk formats.
//!
//! JSON carries everything human-inspectable (manifest, tubes, points,
//! detections); features, mass maps, and models are little-endian binary
//! with an eight-byte magic. All writes go through a temp file and a rename
//! so partially written files never appear under their final name.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Box2D, Point, PointTrack, Tube};
use crate::mining::{FeatureMatrix, LinearModel};
use crate::pseudo::{MassMap, PersonDetection};

pub const FEATURES_MAGIC: &[u8; 8] = b"PSAL0001";
pub const MASS_MAP_MAGIC: &[u8; 8] = b"PSALMASS";
pub const MODEL_MAGIC: &[u8; 8] = b"PSALMODL";

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

/// Write bytes to `<path>.tmp`, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(path_str(parent), e))?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(path_str(&tmp), e))?;
        f.write_all(bytes).map_err(|e| Error::io(path_str(&tmp), e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path_str(path), e))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Json {
        path: path_str(path),
        source: e,
    })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path_str(path), e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Json {
        path: path_str(path),
        source: e,
    })
}

/// Tube as stored on disk: start frame plus per-frame `[xmin, ymin, xmax, ymax]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TubeJson {
    pub start_frame: u32,
    pub boxes: Vec<[f64; 4]>,
}

impl TubeJson {
    pub fn from_tube(tube: &Tube) -> Self {
        TubeJson {
            start_frame: tube.start_frame,
            boxes: tube
                .boxes
                .iter()
                .map(|b| [b.xmin, b.ymin, b.xmax, b.ymax])
                .collect(),
        }
    }

    pub fn into_tube(self) -> Result<Tube> {
        let boxes = self
            .boxes
            .into_iter()
            .map(|[xmin, ymin, xmax, ymax]| Box2D::new(xmin, ymin, xmax, ymax))
            .collect::<Result<Vec<_>>>()?;
        Tube::new(self.start_frame, boxes)
    }
}

/// Ground-truth instance: a tube tagged with its action name.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthJson {
    pub action: String,
    pub start_frame: u32,
    pub boxes: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointJson {
    pub frame: u32,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionJson {
    pub frame: u32,
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub confidence: f64,
}

pub fn write_tubes(path: &Path, tubes: &[Tube]) -> Result<()> {
    let dto: Vec<TubeJson> = tubes.iter().map(TubeJson::from_tube).collect();
    write_json(path, &dto)
}

pub fn read_tubes(path: &Path) -> Result<Vec<Tube>> {
    let dto: Vec<TubeJson> = read_json(path)?;
    dto.into_iter().map(TubeJson::into_tube).collect()
}

pub fn write_points(path: &Path, track: &PointTrack) -> Result<()> {
    let dto: Vec<PointJson> = track
        .iter()
        .map(|(frame, p)| PointJson {
            frame,
            x: p.x,
            y: p.y,
        })
        .collect();
    write_json(path, &dto)
}

pub fn read_points(path: &Path) -> Result<PointTrack> {
    let dto: Vec<PointJson> = read_json(path)?;
    Ok(PointTrack::from_entries(
        dto.into_iter().map(|p| (p.frame, Point::new(p.x, p.y))),
    ))
}

pub fn write_ground_truth(path: &Path, instances: &[(String, Tube)]) -> Result<()> {
    let dto: Vec<GroundTruthJson> = instances
        .iter()
        .map(|(action, tube)| {
            let t = TubeJson::from_tube(tube);
            GroundTruthJson {
                action: action.clone(),
                start_frame: t.start_frame,
                boxes: t.boxes,
            }
        })
        .collect();
    write_json(path, &dto)
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<(String, Tube)>> {
    let dto: Vec<GroundTruthJson> = read_json(path)?;
    dto.into_iter()
        .map(|g| {
            let tube = TubeJson {
                start_frame: g.start_frame,
                boxes: g.boxes,
            }
            .into_tube()?;
            Ok((g.action, tube))
        })
        .collect()
}

pub fn write_detections(path: &Path, detections: &[PersonDetection]) -> Result<()> {
    let dto: Vec<DetectionJson> = detections
        .iter()
        .map(|d| DetectionJson {
            frame: d.frame,
            bbox: [d.bbox.xmin, d.bbox.ymin, d.bbox.xmax, d.bbox.ymax],
            confidence: d.confidence,
        })
        .collect();
    write_json(path, &dto)
}

pub fn read_detections(path: &Path) -> Result<Vec<PersonDetection>> {
    let dto: Vec<DetectionJson> = read_json(path)?;
    dto.into_iter()
        .map(|d| {
            if !d.confidence.is_finite() {
                return Err(Error::malformed(
                    path_str(path),
                    format!("non-finite confidence at frame {}", d.frame),
                ));
            }
            Ok(PersonDetection {
                frame: d.frame,
                bbox: Box2D::new(d.bbox[0], d.bbox[1], d.bbox[2], d.bbox[3])?,
                confidence: d.confidence,
            })
        })
        .collect()
}

struct ByteReader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        ByteReader { path, bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::malformed(path_str(self.path), "unexpected end of file"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn magic(&mut self, expected: &[u8; 8]) -> Result<()> {
        let got = self.take(8)?;
        if got != expected {
            return Err(Error::malformed(
                path_str(self.path),
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(expected)
                ),
            ));
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32(&mut self) -> Result<f32> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32_vec(&mut self, n: usize) -> Result<Vec<f32>> {
        let b = self.take(n * 4)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::malformed(
                path_str(self.path),
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

pub fn write_features(path: &Path, features: &FeatureMatrix) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + features.raw().len() * 4);
    bytes.extend_from_slice(FEATURES_MAGIC);
    bytes.extend_from_slice(&(features.rows() as u32).to_le_bytes());
    bytes.extend_from_slice(&(features.dim() as u32).to_le_bytes());
    for v in features.raw() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &bytes)
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path_str(path), e))?;
    let mut r = ByteReader::new(path, &bytes);
    r.magic(FEATURES_MAGIC)?;
    let rows = r.u32()? as usize;
    let dim = r.u32()? as usize;
    if dim == 0 {
        return Err(Error::malformed(path_str(path), "zero feature dimension"));
    }
    let data = r.f32_vec(rows * dim)?;
    r.finish()?;
    FeatureMatrix::new(dim, data)
}

pub fn write_mass_map(path: &Path, map: &MassMap) -> Result<()> {
    let cells = (map.grid_width * map.grid_height) as usize;
    let mut bytes = Vec::with_capacity(24 + map.frames.len() * cells * 4);
    bytes.extend_from_slice(MASS_MAP_MAGIC);
    bytes.extend_from_slice(&(map.frames.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&map.grid_width.to_le_bytes());
    bytes.extend_from_slice(&map.grid_height.to_le_bytes());
    bytes.extend_from_slice(&map.downsample.to_le_bytes());
    for frame in &map.frames {
        for v in frame {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_atomic(path, &bytes)
}

pub fn read_mass_map(path: &Path) -> Result<MassMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path_str(path), e))?;
    let mut r = ByteReader::new(path, &bytes);
    r.magic(MASS_MAP_MAGIC)?;
    let frame_count = r.u32()? as usize;
    let grid_width = r.u32()?;
    let grid_height = r.u32()?;
    let downsample = r.u32()?;
    let cells = (grid_width as usize) * (grid_height as usize);
    let mut frames = Vec::with_capacity(frame_count);
    for _ in 0..frame_count {
        frames.push(r.f32_vec(cells)?);
    }
    r.finish()?;
    let map = MassMap {
        downsample,
        grid_width,
        grid_height,
        frames,
    };
    map.validate()?;
    Ok(map)
}

/// Model weights are stored in f32; an f64-trained model rounds once on
/// save and loads back exactly.
pub fn write_model(path: &Path, model: &LinearModel) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + model.dim() * 4);
    bytes.extend_from_slice(MODEL_MAGIC);
    bytes.extend_from_slice(&(model.dim() as u32).to_le_bytes());
    for w in &model.weights {
        bytes.extend_from_slice(&(*w as f32).to_le_bytes());
    }
    bytes.extend_from_slice(&(model.bias as f32).to_le_bytes());
    write_atomic(path, &bytes)
}

pub fn read_model(path: &Path) -> Result<LinearModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path_str(path), e))?;
    let mut r = ByteReader::new(path, &bytes);
    r.magic(MODEL_MAGIC)?;
    let dim = r.u32()? as usize;
    let weights: Vec<f64> = r.f32_vec(dim)?.into_iter().map(f64::from).collect();
    let bias = r.f32()? as f64;
    r.finish()?;
    Ok(LinearModel { weights, bias })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn features_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.bin");
        let m = FeatureMatrix::new(3, vec![0.1, -2.5, 3.0_f32, f32::MIN_POSITIVE, 0.0, 1e30]).unwrap();
        write_features(&path, &m).unwrap();
        let back = read_features(&path).unwrap();
        assert_eq!(m, back);
        // byte-for-byte stable rewrite
        let first = std::fs::read(&path).unwrap();
        write_features(&path, &back).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
    }

    #[test]
    fn features_bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.bin");
        write_atomic(&path, b"WRONGMAGIC\x00\x00").unwrap();
        let err = read_features(&path).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }

    #[test]
    fn features_truncated_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.bin");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(FEATURES_MAGIC);
        bytes.extend_from_slice(&5u32.to_le_bytes());
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        write_atomic(&path, &bytes).unwrap();
        assert!(read_features(&path).is_err());
    }

    #[test]
    fn model_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.model");
        let model = LinearModel {
            weights: vec![0.5, -1.25, 3.0],
            bias: 0.75,
        };
        write_model(&path, &model).unwrap();
        let back = read_model(&path).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn mass_map_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mass.bin");
        let map = MassMap {
            downsample: 8,
            grid_width: 3,
            grid_height: 2,
            frames: vec![vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0], vec![1.0; 6]],
        };
        write_mass_map(&path, &map).unwrap();
        assert_eq!(map, read_mass_map(&path).unwrap());
    }

    proptest! {
        #[test]
        fn tube_json_round_trip(
            start in 1u32..100,
            coords in proptest::collection::vec((0.0..100.0f64, 0.0..100.0f64, 0.1..50.0f64, 0.1..50.0f64), 1..10),
        ) {
            let boxes: Vec<Box2D> = coords
                .into_iter()
                .map(|(x, y, w, h)| Box2D::new(x, y, x + w, y + h).unwrap())
                .collect();
            let tube = Tube::new(start, boxes).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("tubes.json");
            write_tubes(&path, &[tube.clone()]).unwrap();
            let back = read_tubes(&path).unwrap();
            prop_assert_eq!(back, vec![tube]);
        }

        #[test]
        fn points_json_round_trip(
            entries in proptest::collection::btree_map(1u32..200, (0.0..320.0f64, 0.0..240.0f64), 0..20),
        ) {
            let track = PointTrack::from_entries(
                entries.into_iter().map(|(f, (x, y))| (f, Point::new(x, y))),
            );
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("points.json");
            write_points(&path, &track).unwrap();
            let back = read_points(&path).unwrap();
            prop_assert_eq!(back, track);
        }
    }
}
