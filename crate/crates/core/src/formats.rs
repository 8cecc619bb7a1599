//! On-disk formats shared by the command-line tools.
//!
//! A prediction bundle is a JSON file listing proposals and optional global
//! maps; every map lives in its own binary map file whose path is relative
//! to the bundle. A box list is plain JSON with one record per aligned box.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Rect;
use crate::refine::{GlobalPrediction, ProposalPrediction, RefineError, RefinedBox, SideStatus};
use crate::scalar::Real;
use crate::scalar_map::{MapError, ScalarMap};
use crate::table_model::CellId;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Map {
        path: PathBuf,
        #[source]
        source: MapError,
    },
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
}

impl FormatError {
    fn schema(path: &Path, message: impl Into<String>) -> Self {
        FormatError::Schema {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct BundleProposal<T> {
    /// Defaults to the proposal's position in the list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<CellId>,
    #[serde(rename = "box")]
    pub bbox: Rect<T>,
    pub text_rect: Rect<T>,
    pub pyr_h: String,
    pub pyr_v: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleGlobal {
    pub seg: String,
    pub pyr_h: String,
    pub pyr_v: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct PredictionBundle<T> {
    pub image_width: u32,
    pub image_height: u32,
    pub proposals: Vec<BundleProposal<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global: Option<BundleGlobal>,
}

/// A bundle with all of its maps loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedBundle<T> {
    pub image_width: u32,
    pub image_height: u32,
    pub proposals: Vec<ProposalPrediction<T>>,
    pub global: Option<GlobalPrediction<T>>,
}

pub fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D, FormatError> {
    let text = fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_map<T: Real>(path: &Path) -> Result<ScalarMap<T>, FormatError> {
    let file = fs::File::open(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ScalarMap::read_from(std::io::BufReader::new(file)).map_err(|source| FormatError::Map {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_bundle<T: Real>(path: &Path) -> Result<LoadedBundle<T>, FormatError> {
    let bundle: PredictionBundle<T> = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let dims = (bundle.image_width as usize, bundle.image_height as usize);
    let global = match &bundle.global {
        None => None,
        Some(g) => {
            let maps = [&g.seg, &g.pyr_h, &g.pyr_v]
                .iter()
                .map(|f| read_map::<T>(&dir.join(f)))
                .collect::<Result<Vec<_>, _>>()?;
            if maps.iter().any(|m| (m.width(), m.height()) != dims) {
                return Err(FormatError::schema(path, "global maps must match the image size"));
            }
            let [seg, h, v]: [ScalarMap<T>; 3] = maps.try_into().expect("three maps");
            Some(GlobalPrediction::new(seg, h, v).map_err(|e| FormatError::schema(path, e.to_string()))?)
        }
    };
    let mut proposals = Vec::with_capacity(bundle.proposals.len());
    let mut seen = BTreeMap::new();
    for (i, p) in bundle.proposals.iter().enumerate() {
        let id = p.id.unwrap_or(i as CellId);
        if seen.insert(id, ()).is_some() {
            return Err(FormatError::schema(path, format!("proposals[{i}].id: duplicate id {id}")));
        }
        let h = read_map(&dir.join(&p.pyr_h))?;
        let v = read_map(&dir.join(&p.pyr_v))?;
        let pred = ProposalPrediction::new(id, p.bbox, p.text_rect, h, v).map_err(|e: RefineError| {
            FormatError::schema(path, format!("proposals[{i}]: {e}"))
        })?;
        proposals.push(pred);
    }
    Ok(LoadedBundle {
        image_width: bundle.image_width,
        image_height: bundle.image_height,
        proposals,
        global,
    })
}

/// Bundle JSON plus the map files it references, as `(relative path, bytes)`.
pub fn encode_bundle<T: Real>(
    image_width: u32,
    image_height: u32,
    proposals: &[ProposalPrediction<T>],
    global: Option<&GlobalPrediction<T>>,
) -> (PredictionBundle<T>, Vec<(String, Vec<u8>)>) {
    let mut files = Vec::new();
    let mut entries = Vec::new();
    for p in proposals {
        let (h, v) = (format!("proposal_{}_h.map", p.id), format!("proposal_{}_v.map", p.id));
        files.push((h.clone(), p.pyr_h_local.to_bytes()));
        files.push((v.clone(), p.pyr_v_local.to_bytes()));
        entries.push(BundleProposal {
            id: Some(p.id),
            bbox: p.bbox,
            text_rect: p.text_rect,
            pyr_h: h,
            pyr_v: v,
        });
    }
    let global = global.map(|g| {
        for (name, m) in [("global_seg.map", &g.seg), ("global_h.map", &g.pyr_h_global), ("global_v.map", &g.pyr_v_global)] {
            files.push((name.to_string(), m.to_bytes()));
        }
        BundleGlobal {
            seg: "global_seg.map".into(),
            pyr_h: "global_h.map".into(),
            pyr_v: "global_v.map".into(),
        }
    });
    let bundle = PredictionBundle {
        image_width,
        image_height,
        proposals: entries,
        global,
    };
    (bundle, files)
}

/// Refinement details carried along with a refined box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementInfo {
    pub sides: [SideStatus; 4],
    pub global_match: bool,
    pub text_clamped: bool,
    pub fell_back: bool,
    pub iterations_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct BoxRecord<T> {
    pub id: CellId,
    pub rect: Rect<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_rect: Option<Rect<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement: Option<RefinementInfo>,
}

impl<T: Real> From<&RefinedBox<T>> for BoxRecord<T> {
    fn from(r: &RefinedBox<T>) -> Self {
        BoxRecord {
            id: r.id,
            rect: r.rect,
            text_rect: Some(r.text_rect),
            refinement: Some(RefinementInfo {
                sides: r.sides,
                global_match: r.global_match,
                text_clamped: r.text_clamped,
                fell_back: r.fell_back,
                iterations_run: r.iterations_run,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct BoxList<T> {
    pub image_width: u32,
    pub image_height: u32,
    pub boxes: Vec<BoxRecord<T>>,
}
