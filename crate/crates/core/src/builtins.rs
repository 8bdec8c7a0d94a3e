//! Built-in structures addressable by name, with their measure weights and
//! depth caps.

use crate::cell_structure::quantum_graph_structure;
use crate::error::{Error, Result};
use crate::resistance_form::{Network, ResistanceForm};
use crate::self_similar::SelfSimilarStructure;
use std::sync::Arc;

pub const BUILTIN_NAMES: &[&str] = &[
    "interval",
    "gasket",
    "vicsek",
    "quantum_graph",
    "theta",
    "triangle",
    "path",
];

/// A named structure expanded to some depth.
pub struct BuiltinModel {
    pub name: String,
    pub form: ResistanceForm,
    pub self_similar: Option<SelfSimilarStructure>,
    pub measure_weights: Vec<f64>,
}

/// Deepest level the command line accepts per structure, keeping dense
/// linear algebra at desk scale.
pub fn depth_cap(name: &str) -> usize {
    match name {
        "interval" => 14,
        "gasket" => 7,
        "vicsek" => 7,
        _ => 10, // quantum graphs
    }
}

fn quantum_graph_form(edges: &[(usize, usize)], depth: usize) -> Result<ResistanceForm> {
    let cs = Arc::new(quantum_graph_structure(edges, depth)?);
    let nets: Vec<Vec<Network>> = (0..=depth)
        .map(|n| {
            let c = (1u64 << n) as f64;
            (0..cs.cells(n).len())
                .map(|_| Network::new(2, &[(0, 1, c)]).expect("edge network"))
                .collect()
        })
        .collect();
    ResistanceForm::new(cs, nets)
}

/// Build a builtin by name. `quantum_graph` and `theta` are the two-vertex
/// graph with three parallel edges; `triangle` and `path` are the obvious
/// three- and two-edge graphs.
pub fn builtin(name: &str, depth: usize) -> Result<BuiltinModel> {
    let cap = depth_cap(name);
    if depth > cap {
        return Err(Error::InvalidParameter(format!(
            "depth {depth} above the cap {cap} for {name}"
        )));
    }
    let (form, self_similar) = match name {
        "interval" => {
            let ss = SelfSimilarStructure::interval();
            (ss.decimate(depth)?.1, Some(ss))
        }
        "gasket" => {
            let ss = SelfSimilarStructure::gasket();
            (ss.decimate(depth)?.1, Some(ss))
        }
        "vicsek" => {
            let ss = SelfSimilarStructure::vicsek();
            (ss.decimate(depth)?.1, Some(ss))
        }
        "quantum_graph" | "theta" => (quantum_graph_form(&[(0, 1), (0, 1), (0, 1)], depth)?, None),
        "triangle" => (quantum_graph_form(&[(0, 1), (1, 2), (2, 0)], depth)?, None),
        "path" => (quantum_graph_form(&[(0, 1), (1, 2)], depth)?, None),
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown builtin {other:?}; expected one of {BUILTIN_NAMES:?}"
            )))
        }
    };
    let measure_weights = match &self_similar {
        Some(ss) => ss.measure_weights().to_vec(),
        None => vec![0.5, 0.5],
    };
    Ok(BuiltinModel {
        name: name.to_string(),
        form,
        self_similar,
        measure_weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtins_build() {
        for &name in BUILTIN_NAMES {
            let model = builtin(name, 2).unwrap();
            assert!(model.form.structure().validate_frcs().is_valid(), "{name}");
            assert!(model.form.check_compatibility(0).unwrap() < 1e-10, "{name}");
        }
    }

    #[test]
    fn caps_are_enforced() {
        assert!(builtin("gasket", 8).is_err());
        assert!(builtin("interval", 14).is_ok());
        assert!(builtin("nonsense", 1).is_err());
    }
}
