//! Subject-disjoint train/validation/test splitting.

use super::{DataError, GazeRecord};
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// How subjects are assigned to splits. Subjects, never individual frames,
/// are the unit of assignment, so a subject's records can never straddle
/// splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SplitSpec {
    /// Inclusive numeric subject-id ranges (e.g. 1-46 / 47-51 / 52-56).
    SubjectRanges { train: (u32, u32), val: (u32, u32), test: (u32, u32) },
    /// Random subject assignment by fractions; the remainder after the
    /// train and validation draws goes to test.
    RandomBySubject { train_frac: f64, val_frac: f64, seed: u64 },
    /// Explicit subject-id lists.
    FileList { train: Vec<String>, val: Vec<String>, test: Vec<String> },
}

#[derive(Debug, Clone, Default)]
pub struct DatasetSplit {
    pub train: Vec<GazeRecord>,
    pub val: Vec<GazeRecord>,
    pub test: Vec<GazeRecord>,
}

/// Extract the numeric part of a subject id ("subject0007" -> 7).
fn numeric_subject(id: &str) -> Result<u32, DataError> {
    let digits: String = id.chars().filter(|c| c.is_ascii_digit()).collect();
    digits.parse().map_err(|_| DataError::NonNumericSubject(id.to_string()))
}

fn in_range(v: u32, (lo, hi): (u32, u32)) -> bool {
    v >= lo && v <= hi
}

/// Partition records into subject-disjoint splits. Records whose subject
/// falls outside every range/list are dropped with a warning; producing any
/// empty split is an error.
pub fn split(records: Vec<GazeRecord>, spec: &SplitSpec) -> Result<DatasetSplit, DataError> {
    let mut out = DatasetSplit::default();
    let mut dropped = 0usize;

    match spec {
        SplitSpec::SubjectRanges { train, val, test } => {
            for rec in records {
                let id = numeric_subject(&rec.subject)?;
                if in_range(id, *train) {
                    out.train.push(rec);
                } else if in_range(id, *val) {
                    out.val.push(rec);
                } else if in_range(id, *test) {
                    out.test.push(rec);
                } else {
                    dropped += 1;
                }
            }
        }
        SplitSpec::RandomBySubject { train_frac, val_frac, seed } => {
            let subjects: Vec<String> = records
                .iter()
                .map(|r| r.subject.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let mut shuffled = subjects;
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
            let n = shuffled.len();
            let n_train = ((n as f64) * train_frac).round() as usize;
            let n_val = ((n as f64) * val_frac).round() as usize;
            let train_set: BTreeSet<&String> = shuffled.iter().take(n_train).collect();
            let val_set: BTreeSet<&String> = shuffled.iter().skip(n_train).take(n_val).collect();
            for rec in records {
                if train_set.contains(&rec.subject) {
                    out.train.push(rec);
                } else if val_set.contains(&rec.subject) {
                    out.val.push(rec);
                } else {
                    out.test.push(rec);
                }
            }
        }
        SplitSpec::FileList { train, val, test } => {
            let train: BTreeSet<&String> = train.iter().collect();
            let val: BTreeSet<&String> = val.iter().collect();
            let test: BTreeSet<&String> = test.iter().collect();
            for rec in records {
                if train.contains(&rec.subject) {
                    out.train.push(rec);
                } else if val.contains(&rec.subject) {
                    out.val.push(rec);
                } else if test.contains(&rec.subject) {
                    out.test.push(rec);
                } else {
                    dropped += 1;
                }
            }
        }
    }

    if dropped > 0 {
        log::warn!("split: {dropped} records fell outside every split and were dropped");
    }
    if out.train.is_empty() {
        return Err(DataError::EmptySplitProduced("train"));
    }
    if out.val.is_empty() {
        return Err(DataError::EmptySplitProduced("val"));
    }
    if out.test.is_empty() {
        return Err(DataError::EmptySplitProduced("test"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Vec2, Vec3};
    use crate::landmarks::{LandmarkSet, LANDMARK_COUNT};
    use std::collections::BTreeSet;

    fn record(subject: &str, frame: u64) -> GazeRecord {
        GazeRecord {
            dataset: "unit".into(),
            subject: subject.into(),
            frame,
            landmarks_norm: LandmarkSet::new([Vec2::new(1.0, 1.0); LANDMARK_COUNT]),
            gaze_norm: Vec3::new(0.0, 0.0, -1.0),
            landmarks_raw: None,
            intrinsics: None,
            provided_pose: None,
            true_pose: None,
            gaze_raw: None,
        }
    }

    fn corpus(n_subjects: u32, frames: u64) -> Vec<GazeRecord> {
        (1..=n_subjects)
            .flat_map(|s| (0..frames).map(move |f| record(&format!("s{s:03}"), f)))
            .collect()
    }

    #[test]
    fn paper_style_subject_ranges() {
        let spec =
            SplitSpec::SubjectRanges { train: (1, 46), val: (47, 51), test: (52, 56) };
        let out = split(corpus(56, 2), &spec).unwrap();
        assert_eq!(out.train.len(), 46 * 2);
        assert_eq!(out.val.len(), 5 * 2);
        assert_eq!(out.test.len(), 5 * 2);
    }

    #[test]
    fn random_by_subject_counts_match_protocol() {
        let spec = SplitSpec::RandomBySubject { train_frac: 0.8, val_frac: 0.1, seed: 5 };
        let out = split(corpus(80, 3), &spec).unwrap();
        let subjects = |v: &[GazeRecord]| v.iter().map(|r| r.subject.clone()).collect::<BTreeSet<_>>();
        assert_eq!(subjects(&out.train).len(), 64);
        assert_eq!(subjects(&out.val).len(), 8);
        assert_eq!(subjects(&out.test).len(), 8);

        // Deterministic per seed.
        let again = split(corpus(80, 3), &spec).unwrap();
        assert_eq!(subjects(&out.train), subjects(&again.train));
    }

    #[test]
    fn subjects_never_straddle_splits() {
        let spec = SplitSpec::RandomBySubject { train_frac: 0.6, val_frac: 0.2, seed: 1 };
        let out = split(corpus(10, 5), &spec).unwrap();
        let sets = [
            out.train.iter().map(|r| &r.subject).collect::<BTreeSet<_>>(),
            out.val.iter().map(|r| &r.subject).collect::<BTreeSet<_>>(),
            out.test.iter().map(|r| &r.subject).collect::<BTreeSet<_>>(),
        ];
        assert!(sets[0].is_disjoint(&sets[1]));
        assert!(sets[0].is_disjoint(&sets[2]));
        assert!(sets[1].is_disjoint(&sets[2]));
    }

    #[test]
    fn file_list_assignment() {
        let spec = SplitSpec::FileList {
            train: vec!["s001".into(), "s002".into()],
            val: vec!["s003".into()],
            test: vec!["s004".into()],
        };
        let out = split(corpus(5, 1), &spec).unwrap(); // s005 dropped
        assert_eq!(out.train.len(), 2);
        assert_eq!(out.val.len(), 1);
        assert_eq!(out.test.len(), 1);
    }

    #[test]
    fn empty_split_is_an_error() {
        let spec = SplitSpec::SubjectRanges { train: (1, 3), val: (4, 4), test: (90, 99) };
        assert!(matches!(split(corpus(5, 1), &spec), Err(DataError::EmptySplitProduced("test"))));
    }

    #[test]
    fn non_numeric_subject_errors_in_range_mode() {
        let recs = vec![record("alpha", 0)];
        let spec = SplitSpec::SubjectRanges { train: (1, 1), val: (2, 2), test: (3, 3) };
        assert!(matches!(split(recs, &spec), Err(DataError::NonNumericSubject(_))));
    }
}
