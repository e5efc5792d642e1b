use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{checkpoint, ParameterSet, Scalar};

/// A point in the decoder's latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCode(pub Vec<f64>);

impl LatentCode {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn to_row<T: Scalar>(&self) -> Array2<T> {
        Array2::from_shape_fn((1, self.0.len()), |(_, c)| T::of(self.0[c]))
    }

    pub fn from_row<T: Scalar>(row: &Array2<T>) -> Self {
        Self(row.iter().map(|v| v.as_f64()).collect())
    }

    /// Largest absolute component difference.
    pub fn max_abs_diff(&self, other: &LatentCode) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(if self.len() == other.len() { 0.0 } else { f64::INFINITY }, f64::max)
    }

    /// Stored as a checkpoint holding the single tensor `latent`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut p = ParameterSet::<f32>::new();
        p.add("latent", self.to_row::<f32>());
        checkpoint::save(&p, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let p = checkpoint::load::<f32>(path)?;
        let id = p
            .find("latent")
            .filter(|_| p.len() == 1)
            .ok_or_else(|| Error::Checkpoint(format!("{path:?} is not a latent file")))?;
        if p.value(id).nrows() != 1 {
            return Err(Error::Checkpoint("latent tensor must be a row".into()));
        }
        Ok(Self::from_row(p.value(id)))
    }
}

/// Trained latent codes by shape id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ShapeCodebook {
    pub codes: BTreeMap<String, LatentCode>,
}

#[derive(Serialize, Deserialize)]
struct CodebookIndex {
    latent_dim: usize,
    shapes: Vec<CodebookEntry>,
}

#[derive(Serialize, Deserialize)]
struct CodebookEntry {
    id: String,
    file: String,
}

impl ShapeCodebook {
    pub fn get(&self, id: &str) -> Option<&LatentCode> {
        self.codes.get(id)
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// One latent file per shape plus `index.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut shapes = Vec::new();
        for (id, code) in &self.codes {
            let file = format!("{id}.latent");
            code.save(&dir.join(&file))?;
            shapes.push(CodebookEntry { id: id.clone(), file });
        }
        let index = CodebookIndex {
            latent_dim: self.codes.values().next().map_or(0, |c| c.len()),
            shapes,
        };
        fs::write(dir.join("index.json"), serde_json::to_vec_pretty(&index)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let index: CodebookIndex = serde_json::from_slice(&fs::read(dir.join("index.json"))?)?;
        let mut codes = BTreeMap::new();
        for e in index.shapes {
            let code = LatentCode::load(&dir.join(&e.file))?;
            if code.len() != index.latent_dim {
                return Err(Error::Checkpoint(format!(
                    "code {} has length {}, index says {}",
                    e.id,
                    code.len(),
                    index.latent_dim
                )));
            }
            codes.insert(e.id, code);
        }
        Ok(Self { codes })
    }
}
