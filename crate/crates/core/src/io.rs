//! File formats: structure description files, self-similar structure files,
//! conductance overrides, and module element serialization. All formats are
//! JSON with a `schema_version` field.

use crate::cell_structure::{CellAddress, SubdivisionRule};
use crate::error::{Error, Result};
use crate::hilbert_module::ModuleElement;
use crate::resistance_form::{Network, ResistanceForm};
use crate::self_similar::SelfSimilarStructure;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

fn parse_error(what: &str, e: serde_json::Error) -> Error {
    Error::Parse(format!(
        "{what}: line {}, column {}: {e}",
        e.line(),
        e.column()
    ))
}

/// Structure description file: a subdivision rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureFile {
    #[serde(default)]
    pub schema_version: Option<u32>,
    pub name: String,
    pub arity: usize,
    pub boundary_size: usize,
    /// per-child images of the virtual slots (0..boundary_size = parent)
    pub child_boundary_maps: Vec<Vec<usize>>,
    #[serde(default)]
    pub identifications: Vec<(usize, usize)>,
}

impl StructureFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: StructureFile =
            serde_json::from_str(text).map_err(|e| parse_error("structure file", e))?;
        if file.child_boundary_maps.len() != file.arity {
            return Err(Error::Parse(format!(
                "child_boundary_maps lists {} children, arity says {}",
                file.child_boundary_maps.len(),
                file.arity
            )));
        }
        Ok(file)
    }

    pub fn to_rule(&self) -> Result<SubdivisionRule> {
        SubdivisionRule::new(
            &self.name,
            self.boundary_size,
            self.child_boundary_maps.clone(),
            &self.identifications,
        )
    }
}

/// Self-similar structure file: a rule plus base conductances and scalings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelfSimilarFile {
    #[serde(default)]
    pub schema_version: Option<u32>,
    pub name: String,
    pub arity: usize,
    pub boundary_size: usize,
    pub r: Vec<f64>,
    pub mu: Vec<f64>,
    /// triples (x, y, conductance) on the boundary vertices
    pub base_conductances: Vec<(usize, usize, f64)>,
    pub child_boundary_maps: Vec<Vec<usize>>,
    #[serde(default)]
    pub identifications: Vec<(usize, usize)>,
}

impl SelfSimilarFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| parse_error("self-similar structure file", e))
    }

    pub fn to_structure(&self) -> Result<SelfSimilarStructure> {
        let rule = SubdivisionRule::new(
            &self.name,
            self.boundary_size,
            self.child_boundary_maps.clone(),
            &self.identifications,
        )?;
        let base = Network::new(self.boundary_size, &self.base_conductances)?;
        SelfSimilarStructure::new(rule, base, self.r.clone(), self.mu.clone())
    }
}

/// Per-cell conductance overrides for non-self-similar forms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverrideFile {
    #[serde(default)]
    pub schema_version: Option<u32>,
    pub overrides: Vec<CellOverride>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellOverride {
    /// address word of the cell
    pub address: Vec<u32>,
    /// triples (local x, local y, conductance) on the cell's vertex list
    pub conductances: Vec<(usize, usize, f64)>,
}

impl OverrideFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| parse_error("override file", e))
    }

    pub fn apply(&self, form: &mut ResistanceForm) -> Result<()> {
        for over in &self.overrides {
            let addr = CellAddress {
                word: over.address.clone(),
            };
            let (level, idx) = form
                .structure()
                .find_cell(&addr)
                .ok_or_else(|| Error::InvalidParameter(format!("no cell at address {addr}")))?;
            let size = form.structure().cell(level, idx).vertices.len();
            let net = Network::new(size, &over.conductances)?;
            form.set_cell_network(level, idx, net)?;
        }
        Ok(())
    }
}

/// Serialized module element: level plus per-cell address and values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModuleElementFile {
    pub schema_version: u32,
    pub level: usize,
    pub cells: Vec<CellValues>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellValues {
    pub address: Vec<u32>,
    pub values: Vec<f64>,
}

impl ModuleElementFile {
    pub fn encode(form: &ResistanceForm, element: &ModuleElement) -> Self {
        let cells = form
            .structure()
            .cells(element.level)
            .iter()
            .zip(&element.cells)
            .map(|(cell, values)| CellValues {
                address: cell.address.word.clone(),
                values: values.clone(),
            })
            .collect();
        ModuleElementFile {
            schema_version: SCHEMA_VERSION,
            level: element.level,
            cells,
        }
    }

    pub fn decode(&self, form: &ResistanceForm) -> Result<ModuleElement> {
        let structure = form.structure();
        if self.level > form.depth() {
            return Err(Error::LevelOutOfRange {
                level: self.level,
                depth: form.depth(),
            });
        }
        let mut element = ModuleElement::zero(form, self.level);
        for cv in &self.cells {
            let addr = CellAddress {
                word: cv.address.clone(),
            };
            let (level, idx) = structure
                .find_cell(&addr)
                .ok_or_else(|| Error::InvalidParameter(format!("no cell at address {addr}")))?;
            if level != self.level {
                return Err(Error::LevelMismatch {
                    expected: self.level,
                    got: level,
                });
            }
            if cv.values.len() != element.cells[idx].len() {
                return Err(Error::SizeMismatch {
                    expected: element.cells[idx].len(),
                    got: cv.values.len(),
                });
            }
            element.cells[idx] = cv.values.clone();
        }
        element.canonicalize();
        Ok(element)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| parse_error("module element file", e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_file_round_trip() {
        let text = r#"{
            "name": "gasket",
            "arity": 3,
            "boundary_size": 3,
            "child_boundary_maps": [[0, 5, 4], [5, 1, 3], [4, 3, 2]]
        }"#;
        let file = StructureFile::from_json(text).unwrap();
        let rule = file.to_rule().unwrap();
        let cs = crate::cell_structure::build_structure(&rule, 2).unwrap();
        assert_eq!(cs.vertex_count(2), 15);
        assert!(cs.validate_frcs().is_valid());
    }

    #[test]
    fn bad_json_reports_position() {
        let err = StructureFile::from_json("{ \"name\": ").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn self_similar_file_builds_interval() {
        let text = r#"{
            "name": "interval",
            "arity": 2,
            "boundary_size": 2,
            "r": [0.5, 0.5],
            "mu": [0.5, 0.5],
            "base_conductances": [[0, 1, 1.0]],
            "child_boundary_maps": [[0, 2], [2, 1]]
        }"#;
        let ss = SelfSimilarFile::from_json(text)
            .unwrap()
            .to_structure()
            .unwrap();
        assert!(ss.fixed_point_residual().unwrap() < 1e-12);
    }

    #[test]
    fn override_breaks_compatibility() {
        let (_, mut form) = SelfSimilarStructure::gasket().decimate(1).unwrap();
        let over = OverrideFile {
            schema_version: Some(1),
            overrides: vec![CellOverride {
                address: vec![0],
                conductances: vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)],
            }],
        };
        over.apply(&mut form).unwrap();
        assert!(form.check_compatibility(0).unwrap() > 0.01);
    }

    #[test]
    fn module_element_round_trip() {
        let (_, form) = SelfSimilarStructure::gasket().decimate(1).unwrap();
        let mut el = ModuleElement::zero(&form, 1);
        el.cells[1] = vec![1.0, -0.5, 0.25];
        el.canonicalize();
        let encoded = ModuleElementFile::encode(&form, &el);
        let text = encoded.to_json();
        let decoded = ModuleElementFile::from_json(&text)
            .unwrap()
            .decode(&form)
            .unwrap();
        assert_eq!(el, decoded);
    }
}
