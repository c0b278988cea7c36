//! Record types and the versioned JSONL storage schema.
//!
//! Files are UTF-8, one JSON object per line. The first line of a non-empty
//! file is a header `{"schema": "...", "version": 1}`; a zero-byte file is
//! an empty dataset. Two schemas share the format:
//!
//! * `lgaze-records` — normalized training records ([`GazeRecord`]).
//! * `lgaze-raw` — pre-normalization records ([`RawRecord`]) consumed by the
//!   `normalize` subcommand.
//!
//! Gaze labels may be given as a 3-vector (`gaze_norm` / `gaze_raw`) or as
//! `[pitch, yaw]` radians (`gaze_pitchyaw` / `gaze_raw_pitchyaw`), which are
//! converted on load. Unit-norm deviations up to 1e-3 are renormalized with
//! a warning; anything worse is rejected with the offending line number.

use super::DataError;
use crate::geometry::{pitchyaw_to_vector, CameraIntrinsics, HeadPose, Mat3, Vec2, Vec3};
use crate::landmarks::{LandmarkSet, LANDMARK_COUNT};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub const RECORDS_SCHEMA: &str = "lgaze-records";
pub const RAW_SCHEMA: &str = "lgaze-raw";
pub const SCHEMA_VERSION: u32 = 1;

const GAZE_NORM_EXACT: f64 = 1e-6;
const GAZE_NORM_RENORM: f64 = 1e-3;

/// One normalized training sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeRecord {
    pub dataset: String,
    pub subject: String,
    pub frame: u64,
    /// Landmarks in the normalized (virtual-camera) frame, pixels.
    pub landmarks_norm: LandmarkSet,
    /// Unit gaze direction in the normalized frame.
    pub gaze_norm: Vec3,
    /// Raw-frame landmarks, kept when re-normalization may be needed.
    pub landmarks_raw: Option<LandmarkSet>,
    pub intrinsics: Option<CameraIntrinsics>,
    /// Dataset-provided head pose (raw frame), usable as a solver init.
    pub provided_pose: Option<HeadPose>,
    /// Exact generator pose, present on synthetic data.
    pub true_pose: Option<HeadPose>,
    /// Raw-frame gaze direction.
    pub gaze_raw: Option<Vec3>,
}

/// One pre-normalization sample (detector output plus labels).
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub dataset: String,
    pub subject: String,
    pub frame: u64,
    pub landmarks_raw: LandmarkSet,
    /// Physical camera intrinsics; when absent the pinhole fallback from
    /// `image_size` is used.
    pub intrinsics: Option<CameraIntrinsics>,
    pub image_size: Option<(f64, f64)>,
    pub provided_pose: Option<HeadPose>,
    pub gaze_raw: Vec3,
}

impl RawRecord {
    /// Provided intrinsics, or the image-size pinhole fallback.
    pub fn effective_intrinsics(&self) -> Result<CameraIntrinsics, DataError> {
        if let Some(k) = self.intrinsics {
            return Ok(k);
        }
        let (w, h) = self.image_size.ok_or(DataError::MissingField("intrinsics or image_size"))?;
        Ok(CameraIntrinsics::from_image_size(w, h))
    }
}

// ---------------------------------------------------------------------------
// JSON wire types
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct HeaderJson {
    schema: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseJson {
    /// Row-major 3x3 rotation.
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl PoseJson {
    fn from_pose(p: &HeadPose) -> Self {
        let mut rotation = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                rotation[3 * r + c] = p.rotation[(r, c)];
            }
        }
        Self { rotation, translation: [p.translation.x, p.translation.y, p.translation.z] }
    }

    fn into_pose(self) -> Result<HeadPose, String> {
        let m = Mat3::from_row_slice(&self.rotation);
        let t = Vec3::new(self.translation[0], self.translation[1], self.translation[2]);
        HeadPose::new(m, t).map_err(|e| e.to_string())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordJson {
    dataset: String,
    subject: String,
    frame: u64,
    landmarks_norm: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gaze_norm: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gaze_pitchyaw: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    landmarks_raw: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    intrinsics: Option<CameraIntrinsics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    provided_pose: Option<PoseJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    true_pose: Option<PoseJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gaze_raw: Option<[f64; 3]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecordJson {
    dataset: String,
    subject: String,
    frame: u64,
    landmarks_raw: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    intrinsics: Option<CameraIntrinsics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    image_size: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    provided_pose: Option<PoseJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gaze_raw: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gaze_raw_pitchyaw: Option<[f64; 2]>,
}

fn landmarks_to_json(lm: &LandmarkSet) -> Vec<[f64; 2]> {
    lm.iter().map(|p| [p.x, p.y]).collect()
}

fn landmarks_from_json(pts: &[[f64; 2]]) -> Result<LandmarkSet, String> {
    if pts.len() != LANDMARK_COUNT {
        return Err(format!("expected {LANDMARK_COUNT} landmarks, got {}", pts.len()));
    }
    let v: Vec<Vec2> = pts.iter().map(|p| Vec2::new(p[0], p[1])).collect();
    LandmarkSet::from_slice(&v).map_err(|e| e.to_string())
}

/// Accept a stored gaze vector or pitch/yaw pair; validate or renormalize.
fn resolve_gaze(
    vector: Option<[f64; 3]>,
    pitchyaw: Option<[f64; 2]>,
    field: &str,
) -> Result<Vec3, String> {
    let g = match (vector, pitchyaw) {
        (Some(v), None) => Vec3::new(v[0], v[1], v[2]),
        (None, Some([p, y])) => pitchyaw_to_vector(p, y),
        (Some(_), Some(_)) => return Err(format!("{field}: both vector and pitch/yaw forms present")),
        (None, None) => return Err(format!("{field}: missing gaze label")),
    };
    if !g.iter().all(|v| v.is_finite()) {
        return Err(format!("{field}: non-finite gaze"));
    }
    let n = g.norm();
    if (n - 1.0).abs() <= GAZE_NORM_EXACT {
        Ok(g)
    } else if (n - 1.0).abs() <= GAZE_NORM_RENORM {
        log::warn!("{field}: gaze norm {n} off by more than {GAZE_NORM_EXACT:e}; renormalizing");
        Ok(g / n)
    } else {
        Err(format!("{field}: gaze norm {n} deviates from 1 by more than {GAZE_NORM_RENORM:e}"))
    }
}

impl RecordJson {
    fn from_record(r: &GazeRecord) -> Self {
        Self {
            dataset: r.dataset.clone(),
            subject: r.subject.clone(),
            frame: r.frame,
            landmarks_norm: landmarks_to_json(&r.landmarks_norm),
            gaze_norm: Some([r.gaze_norm.x, r.gaze_norm.y, r.gaze_norm.z]),
            gaze_pitchyaw: None,
            landmarks_raw: r.landmarks_raw.as_ref().map(landmarks_to_json),
            intrinsics: r.intrinsics,
            provided_pose: r.provided_pose.as_ref().map(PoseJson::from_pose),
            true_pose: r.true_pose.as_ref().map(PoseJson::from_pose),
            gaze_raw: r.gaze_raw.map(|g| [g.x, g.y, g.z]),
        }
    }

    fn into_record(self) -> Result<GazeRecord, String> {
        let landmarks_norm = landmarks_from_json(&self.landmarks_norm)?;
        let gaze_norm = resolve_gaze(self.gaze_norm, self.gaze_pitchyaw, "gaze_norm")?;
        let landmarks_raw = self.landmarks_raw.as_deref().map(landmarks_from_json).transpose()?;
        if let Some(k) = &self.intrinsics {
            CameraIntrinsics::checked(k.fx, k.fy, k.cx, k.cy).map_err(|e| e.to_string())?;
        }
        let gaze_raw = self
            .gaze_raw
            .map(|v| resolve_gaze(Some(v), None, "gaze_raw"))
            .transpose()?;
        Ok(GazeRecord {
            dataset: self.dataset,
            subject: self.subject,
            frame: self.frame,
            landmarks_norm,
            gaze_norm,
            landmarks_raw,
            intrinsics: self.intrinsics,
            provided_pose: self.provided_pose.map(PoseJson::into_pose).transpose()?,
            true_pose: self.true_pose.map(PoseJson::into_pose).transpose()?,
            gaze_raw,
        })
    }
}

impl RawRecordJson {
    fn from_record(r: &RawRecord) -> Self {
        Self {
            dataset: r.dataset.clone(),
            subject: r.subject.clone(),
            frame: r.frame,
            landmarks_raw: landmarks_to_json(&r.landmarks_raw),
            intrinsics: r.intrinsics,
            image_size: r.image_size,
            provided_pose: r.provided_pose.as_ref().map(PoseJson::from_pose),
            gaze_raw: Some([r.gaze_raw.x, r.gaze_raw.y, r.gaze_raw.z]),
            gaze_raw_pitchyaw: None,
        }
    }

    fn into_record(self) -> Result<RawRecord, String> {
        let landmarks_raw = landmarks_from_json(&self.landmarks_raw)?;
        let gaze_raw = resolve_gaze(self.gaze_raw, self.gaze_raw_pitchyaw, "gaze_raw")?;
        if let Some(k) = &self.intrinsics {
            CameraIntrinsics::checked(k.fx, k.fy, k.cx, k.cy).map_err(|e| e.to_string())?;
        }
        Ok(RawRecord {
            dataset: self.dataset,
            subject: self.subject,
            frame: self.frame,
            landmarks_raw,
            intrinsics: self.intrinsics,
            image_size: self.image_size,
            provided_pose: self.provided_pose.map(PoseJson::into_pose).transpose()?,
            gaze_raw,
        })
    }
}

// ---------------------------------------------------------------------------
// File I/O
// ---------------------------------------------------------------------------

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> DataError {
    DataError::Parse { path: path.display().to_string(), line, message: message.into() }
}

fn load_jsonl<T, F>(path: &Path, schema: &str, parse_line: F) -> Result<Vec<T>, DataError>
where
    F: Fn(&str) -> Result<T, String>,
{
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut header_seen = false;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            let header: HeaderJson = serde_json::from_str(&line)
                .map_err(|e| parse_err(path, line_no, format!("expected schema header: {e}")))?;
            if header.schema != schema {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("wrong schema '{}', expected '{schema}'", header.schema),
                ));
            }
            if header.version != SCHEMA_VERSION {
                return Err(DataError::SchemaVersionMismatch {
                    found: header.version,
                    expected: SCHEMA_VERSION,
                });
            }
            header_seen = true;
            continue;
        }
        out.push(parse_line(&line).map_err(|m| parse_err(path, line_no, m))?);
    }
    Ok(out)
}

fn save_jsonl<T: Serialize>(path: &Path, schema: &str, rows: Vec<T>) -> Result<(), DataError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &HeaderJson { schema: schema.to_string(), version: SCHEMA_VERSION })
        .map_err(|e| DataError::Io(e.into()))?;
    w.write_all(b"\n")?;
    for row in rows {
        serde_json::to_writer(&mut w, &row).map_err(|e| DataError::Io(e.into()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Load normalized training records; a zero-byte file is an empty dataset.
pub fn load_records(path: &Path) -> Result<Vec<GazeRecord>, DataError> {
    load_jsonl(path, RECORDS_SCHEMA, |line| {
        let json: RecordJson = serde_json::from_str(line).map_err(|e| e.to_string())?;
        json.into_record()
    })
}

pub fn save_records(path: &Path, records: &[GazeRecord]) -> Result<(), DataError> {
    save_jsonl(path, RECORDS_SCHEMA, records.iter().map(RecordJson::from_record).collect())
}

/// Load pre-normalization records.
pub fn load_raw_records(path: &Path) -> Result<Vec<RawRecord>, DataError> {
    load_jsonl(path, RAW_SCHEMA, |line| {
        let json: RawRecordJson = serde_json::from_str(line).map_err(|e| e.to_string())?;
        json.into_record()
    })
}

pub fn save_raw_records(path: &Path, records: &[RawRecord]) -> Result<(), DataError> {
    save_jsonl(path, RAW_SCHEMA, records.iter().map(RawRecordJson::from_record).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmarks::LANDMARK_COUNT;

    fn sample_record(subject: &str, frame: u64) -> GazeRecord {
        let pts: Vec<Vec2> =
            (0..LANDMARK_COUNT).map(|i| Vec2::new(100.0 + i as f64 * 3.5, 200.0 - i as f64)).collect();
        GazeRecord {
            dataset: "unit".into(),
            subject: subject.into(),
            frame,
            landmarks_norm: LandmarkSet::from_slice(&pts).unwrap(),
            gaze_norm: Vec3::new(0.0, 0.0, -1.0),
            landmarks_raw: Some(LandmarkSet::from_slice(&pts).unwrap()),
            intrinsics: Some(CameraIntrinsics::new(960.0, 960.0, 224.0, 224.0)),
            provided_pose: Some(HeadPose {
                rotation: Mat3::identity(),
                translation: Vec3::new(0.0, 0.0, 400.0),
            }),
            true_pose: None,
            gaze_raw: Some(Vec3::new(0.0, 0.0, -1.0)),
        }
    }

    #[test]
    fn empty_file_loads_as_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(load_records(&path).unwrap().is_empty());
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let records = vec![sample_record("s1", 0), sample_record("s2", 7)];
        save_records(&path, &records).unwrap();
        let back = load_records(&path).unwrap();
        assert_eq!(records, back);
    }

    #[test]
    fn wrong_landmark_count_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let mut records = vec![sample_record("s1", 0)];
        save_records(&path, &records).unwrap();
        // Append a record with 19 landmarks.
        let mut text = std::fs::read_to_string(&path).unwrap();
        let mut json = RecordJson::from_record(&records.remove(0));
        json.landmarks_norm.pop();
        text.push_str(&serde_json::to_string(&json).unwrap());
        text.push('\n');
        std::fs::write(&path, text).unwrap();

        match load_records(&path) {
            Err(DataError::Parse { line, message, .. }) => {
                assert_eq!(line, 3); // header + good record + bad record
                assert!(message.contains("19"), "message: {message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn schema_version_mismatch_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v9.jsonl");
        std::fs::write(&path, "{\"schema\":\"lgaze-records\",\"version\":9}\n").unwrap();
        assert!(matches!(
            load_records(&path),
            Err(DataError::SchemaVersionMismatch { found: 9, expected: 1 })
        ));
    }

    #[test]
    fn near_unit_gaze_is_renormalized_and_bad_gaze_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.jsonl");
        let mut json = RecordJson::from_record(&sample_record("s1", 0));
        json.gaze_norm = Some([0.0, 0.0, -1.0005]); // within renorm tolerance
        let mut text = format!("{}\n", serde_json::to_string(&HeaderJson { schema: RECORDS_SCHEMA.into(), version: 1 }).unwrap());
        text.push_str(&serde_json::to_string(&json).unwrap());
        text.push('\n');
        std::fs::write(&path, &text).unwrap();
        let rec = load_records(&path).unwrap();
        approx::assert_relative_eq!(rec[0].gaze_norm.norm(), 1.0, epsilon = 1e-12);

        let mut json_bad = RecordJson::from_record(&sample_record("s1", 0));
        json_bad.gaze_norm = Some([0.0, 0.0, -1.5]);
        let mut text = format!("{}\n", serde_json::to_string(&HeaderJson { schema: RECORDS_SCHEMA.into(), version: 1 }).unwrap());
        text.push_str(&serde_json::to_string(&json_bad).unwrap());
        std::fs::write(&path, &text).unwrap();
        assert!(matches!(load_records(&path), Err(DataError::Parse { line: 2, .. })));
    }

    #[test]
    fn pitchyaw_labels_convert_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("py.jsonl");
        let mut json = RecordJson::from_record(&sample_record("s1", 0));
        json.gaze_norm = None;
        json.gaze_pitchyaw = Some([0.2, -0.4]);
        let mut text = format!("{}\n", serde_json::to_string(&HeaderJson { schema: RECORDS_SCHEMA.into(), version: 1 }).unwrap());
        text.push_str(&serde_json::to_string(&json).unwrap());
        std::fs::write(&path, &text).unwrap();
        let rec = load_records(&path).unwrap();
        let expected = pitchyaw_to_vector(0.2, -0.4);
        approx::assert_relative_eq!(rec[0].gaze_norm, expected, epsilon = 1e-12);
    }

    #[test]
    fn raw_records_round_trip_and_fallback_intrinsics() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.jsonl");
        let pts: Vec<Vec2> = (0..LANDMARK_COUNT).map(|i| Vec2::new(i as f64, i as f64)).collect();
        let raw = RawRecord {
            dataset: "unit".into(),
            subject: "s9".into(),
            frame: 3,
            landmarks_raw: LandmarkSet::from_slice(&pts).unwrap(),
            intrinsics: None,
            image_size: Some((640.0, 480.0)),
            provided_pose: None,
            gaze_raw: Vec3::new(0.0, 0.0, -1.0),
        };
        save_raw_records(&path, &[raw.clone()]).unwrap();
        let back = load_raw_records(&path).unwrap();
        assert_eq!(back, vec![raw.clone()]);
        let k = back[0].effective_intrinsics().unwrap();
        assert_eq!(k.fx, 640.0);
        assert_eq!(k.cx, 320.0);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.jsonl");
        let text = "{\"schema\":\"lgaze-records\",\"version\":1}\n{\"dataset\":\"d\",\"subject\":\"s\",\"frame\":0,\"landmarks_norm\":[],\"gaze_norm\":[0,0,-1],\"bogus\":1}\n";
        std::fs::write(&path, text).unwrap();
        assert!(matches!(load_records(&path), Err(DataError::Parse { line: 2, .. })));
    }
}
