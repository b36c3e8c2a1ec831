//! Synthetic identity-structured datasets and the FEATv1 feature file.
//!
//! FEATv1 layout, all little-endian:
//!
//! | bytes | field |
//! |---|---|
//! | 6 | magic `FEATv1` |
//! | 4 | `u32` N |
//! | 4 | `u32` D |
//! | 1 | `u8` has_ids (0/1) |
//! | 1 | `u8` has_cams (0/1) |
//! | 8·N·D | `f64` features, row-major |
//! | 4·N | `i32` ids, if present |
//! | 4·N | `i32` cams, if present |

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalSet;
use crate::numcore::{normalize_row, FeatureMatrix, Seed};

pub const FEAT_MAGIC: &[u8; 6] = b"FEATv1";
const HEADER_LEN: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Easy,
    Medium,
    Hard,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Easy, Preset::Medium, Preset::Hard];

    pub fn config(self, seed: Seed) -> SynthConfig {
        let (num_ids, intra_sigma, cam_sigma) = match self {
            Preset::Easy => (50, 0.05, 0.02),
            Preset::Medium => (100, 0.12, 0.06),
            Preset::Hard => (100, 0.2, 0.1),
        };
        SynthConfig {
            num_ids,
            samples_per_id: 8,
            dim: 32,
            num_cams: 4,
            intra_sigma,
            cam_sigma,
            seed,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Easy => "easy",
            Preset::Medium => "medium",
            Preset::Hard => "hard",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Preset::Easy),
            "medium" => Ok(Preset::Medium),
            "hard" => Ok(Preset::Hard),
            other => Err(Error::config(format!("unknown preset {other:?}, expected easy, medium or hard"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub num_ids: usize,
    pub samples_per_id: usize,
    pub dim: usize,
    pub num_cams: usize,
    pub intra_sigma: f64,
    pub cam_sigma: f64,
    pub seed: Seed,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_ids == 0 || self.dim == 0 {
            return Err(Error::config("num_ids and dim must be positive"));
        }
        if self.samples_per_id < 2 || self.num_cams < 2 {
            return Err(Error::config("samples_per_id and num_cams must both be at least 2"));
        }
        for (name, v) in [("intra_sigma", self.intra_sigma), ("cam_sigma", self.cam_sigma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if i32::try_from(self.num_ids).is_err() || u32::try_from(self.num_ids * self.samples_per_id).is_err() {
            return Err(Error::config("dataset too large"));
        }
        Ok(())
    }
}

/// Raw features with ground truth and a query/gallery split.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: FeatureMatrix,
    pub true_ids: Vec<i32>,
    pub cams: Vec<i32>,
    pub query: Vec<usize>,
    pub gallery: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub query: Vec<usize>,
    pub gallery: Vec<usize>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.features.n()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Retrieval set built from `embedded`, whose rows align with the dataset's.
    pub fn eval_set(&self, embedded: &FeatureMatrix) -> Result<EvalSet> {
        if embedded.n() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: embedded.n(),
            });
        }
        let pick = |idx: &[usize], v: &[i32]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        EvalSet::new(
            embedded.select_rows(&self.query)?,
            embedded.select_rows(&self.gallery)?,
            pick(&self.query, &self.true_ids),
            pick(&self.gallery, &self.true_ids),
            pick(&self.query, &self.cams),
            pick(&self.gallery, &self.cams),
        )
    }

    pub fn split(&self) -> Split {
        Split {
            query: self.query.clone(),
            gallery: self.gallery.clone(),
        }
    }

    /// Reassembles a dataset from a feature file with ids and cams plus a split.
    pub fn from_parts(file: FeatureFile, split: Split) -> Result<Self> {
        let n = file.features.n();
        let (Some(true_ids), Some(cams)) = (file.ids, file.cams) else {
            return Err(Error::config("dataset feature file must carry ids and cams"));
        };
        let mut seen = vec![false; n];
        for &i in split.query.iter().chain(&split.gallery) {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::DuplicateIndex(i));
            }
        }
        if split.query.is_empty() || split.gallery.is_empty() {
            return Err(Error::config("split needs at least one query and one gallery entry"));
        }
        Ok(LabeledDataset {
            features: file.features,
            true_ids,
            cams,
            query: split.query,
            gallery: split.gallery,
        })
    }
}

pub const DATASET_FEATURES: &str = "features.feat";
pub const DATASET_SPLIT: &str = "split.json";

/// Writes `features.feat` (with ids and cams) and `split.json` into `dir`.
pub fn write_dataset_dir(dir: &Path, ds: &LabeledDataset) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_features(&dir.join(DATASET_FEATURES), &ds.features, Some(&ds.true_ids), Some(&ds.cams))?;
    let split = serde_json::to_string(&ds.split()).expect("split serializes");
    let path = dir.join(DATASET_SPLIT);
    std::fs::write(&path, split + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_dataset_dir(dir: &Path) -> Result<LabeledDataset> {
    let file = read_features(&dir.join(DATASET_FEATURES))?;
    let path = dir.join(DATASET_SPLIT);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let split: Split = serde_json::from_str(&text)
        .map_err(|e| Error::format(0, format!("{}: {e}", path.display())))?;
    LabeledDataset::from_parts(file, split)
}

/// Draws identity centers on the unit sphere, one fixed offset per camera and
/// isotropic Gaussian noise per sample.
///
/// Cameras cycle per identity. For every identity, the first sample seen by
/// each camera becomes a query as long as that camera holds another sample of
/// the identity for the gallery.
pub fn generate(cfg: &SynthConfig) -> Result<LabeledDataset> {
    cfg.validate()?;
    let d = cfg.dim;
    let mut center_rng = cfg.seed.derive(1).rng();
    let mut cam_rng = cfg.seed.derive(2).rng();
    let mut noise_rng = cfg.seed.derive(3).rng();

    let gaussian_unit = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        loop {
            let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            if normalize_row(&mut v).is_ok() {
                return v;
            }
        }
    };
    let centers: Vec<Vec<f64>> = (0..cfg.num_ids).map(|_| gaussian_unit(&mut center_rng)).collect();
    let offsets: Vec<Vec<f64>> = (0..cfg.num_cams)
        .map(|_| gaussian_unit(&mut cam_rng).into_iter().map(|v| v * cfg.cam_sigma).collect())
        .collect();

    let n = cfg.num_ids * cfg.samples_per_id;
    let mut data = Vec::with_capacity(n * d);
    let mut true_ids = Vec::with_capacity(n);
    let mut cams = Vec::with_capacity(n);
    let mut query = Vec::new();
    let mut gallery = Vec::new();
    for (id, center) in centers.iter().enumerate() {
        for s in 0..cfg.samples_per_id {
            let cam = s % cfg.num_cams;
            for (c, o) in center.iter().zip(&offsets[cam]) {
                let z: f64 = StandardNormal.sample(&mut noise_rng);
                data.push(c + o + cfg.intra_sigma * z);
            }
            let idx = true_ids.len();
            true_ids.push(id as i32);
            cams.push(cam as i32);
            let per_cam = cfg.samples_per_id / cfg.num_cams + usize::from(cam < cfg.samples_per_id % cfg.num_cams);
            if s < cfg.num_cams && per_cam >= 2 {
                query.push(idx);
            } else {
                gallery.push(idx);
            }
        }
    }
    Ok(LabeledDataset {
        features: FeatureMatrix::new(n, d, data)?,
        true_ids,
        cams,
        query,
        gallery,
    })
}

/// Contents of a feature file.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub features: FeatureMatrix,
    pub ids: Option<Vec<i32>>,
    pub cams: Option<Vec<i32>>,
}

pub fn encode_features(features: &FeatureMatrix, ids: Option<&[i32]>, cams: Option<&[i32]>) -> Result<Vec<u8>> {
    let n = features.n();
    for arr in [ids, cams].into_iter().flatten() {
        if arr.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: arr.len(),
            });
        }
    }
    let to_u32 = |v: usize| u32::try_from(v).map_err(|_| Error::config(format!("dimension {v} exceeds u32")));
    let mut out = Vec::with_capacity(HEADER_LEN as usize + features.as_slice().len() * 8 + n * 8);
    out.extend_from_slice(FEAT_MAGIC);
    out.extend_from_slice(&to_u32(n)?.to_le_bytes());
    out.extend_from_slice(&to_u32(features.d())?.to_le_bytes());
    out.push(u8::from(ids.is_some()));
    out.push(u8::from(cams.is_some()));
    for v in features.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for arr in [ids, cams].into_iter().flatten() {
        for v in arr {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureFile> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(6)?;
    if magic != FEAT_MAGIC {
        return Err(Error::format(0, "bad magic, expected \"FEATv1\""));
    }
    let n = r.u32()? as usize;
    let d = r.u32()? as usize;
    let has_ids = r.flag()?;
    let has_cams = r.flag()?;
    if n == 0 || d == 0 {
        return Err(Error::format(6, format!("empty matrix {n}x{d}")));
    }
    let body = (n as u64) * (d as u64) * 8 + (n as u64) * 4 * (u64::from(has_ids) + u64::from(has_cams));
    let remaining = (bytes.len() as u64).saturating_sub(r.pos);
    if remaining < body {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated: payload needs {body} bytes, {remaining} present"),
        ));
    }
    let data: Vec<f64> = r
        .take(n * d * 8)?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let mut i32s = |present: bool| -> Result<Option<Vec<i32>>> {
        if !present {
            return Ok(None);
        }
        Ok(Some(
            r.take(n * 4)?
                .chunks_exact(4)
                .map(|c| i32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect(),
        ))
    };
    let ids = i32s(has_ids)?;
    let cams = i32s(has_cams)?;
    if r.pos != bytes.len() as u64 {
        return Err(Error::format(r.pos, "trailing bytes after payload"));
    }
    let features = FeatureMatrix::new(n, d, data).map_err(|e| match e {
        Error::NonFinite { row, col } => Error::format(
            HEADER_LEN + 8 * (row * d + col) as u64,
            format!("non-finite value at row {row}, column {col}"),
        ),
        other => other,
    })?;
    Ok(FeatureFile { features, ids, cams })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let start = self.pos as usize;
        let end = start.checked_add(len).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::format(self.pos, format!("truncated: needed {len} bytes, {} left", self.bytes.len() - start))
        })?;
        self.pos = end as u64;
        Ok(&self.bytes[start..end])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn flag(&mut self) -> Result<bool> {
        let at = self.pos;
        match self.take(1)?[0] {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::format(at, format!("flag byte must be 0 or 1, got {other}"))),
        }
    }
}

pub fn write_features(path: &Path, features: &FeatureMatrix, ids: Option<&[i32]>, cams: Option<&[i32]>) -> Result<()> {
    let bytes = encode_features(features, ids, cams)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads FEATv1, or the `id,cam,f0,…` CSV form when the file ends in `.csv`.
pub fn read_features(path: &Path) -> Result<FeatureFile> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return parse_features_csv(&text);
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes)
}

/// Header row required; ids and cams are always present in this form.
pub fn parse_features_csv(text: &str) -> Result<FeatureFile> {
    let mut offset = 0u64;
    let mut lines = text.split_inclusive('\n');
    let header = lines.next().ok_or_else(|| Error::format(0, "empty CSV"))?;
    let cols: Vec<&str> = header.trim_end().split(',').map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "id" || cols[1] != "cam" {
        return Err(Error::format(0, "CSV header must be id,cam,f0,..."));
    }
    for (k, c) in cols[2..].iter().enumerate() {
        if *c != format!("f{k}") {
            return Err(Error::format(0, format!("CSV header column {} should be f{k}, got {c:?}", k + 2)));
        }
    }
    let d = cols.len() - 2;
    offset += header.len() as u64;
    let (mut data, mut ids, mut cams) = (Vec::new(), Vec::new(), Vec::new());
    for line in lines {
        let at = offset;
        offset += line.len() as u64;
        let body = line.trim_end();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split(',').map(str::trim).collect();
        if fields.len() != d + 2 {
            return Err(Error::format(at, format!("expected {} fields, got {}", d + 2, fields.len())));
        }
        let int = |s: &str| s.parse::<i32>().map_err(|e| Error::format(at, format!("bad integer {s:?}: {e}")));
        ids.push(int(fields[0])?);
        cams.push(int(fields[1])?);
        for s in &fields[2..] {
            let v: f64 = s.parse().map_err(|e| Error::format(at, format!("bad number {s:?}: {e}")))?;
            if !v.is_finite() {
                return Err(Error::format(at, format!("non-finite value {s:?}")));
            }
            data.push(v);
        }
    }
    if ids.is_empty() {
        return Err(Error::format(offset, "CSV has no data rows"));
    }
    Ok(FeatureFile {
        features: FeatureMatrix::new(ids.len(), d, data)?,
        ids: Some(ids),
        cams: Some(cams),
    })
}
