//! Numerical realization, at finite scale, of the Hilbert module attached to
//! a resistance form on a finitely ramified cell structure: Hodge
//! decomposition into piecewise-harmonic pieces, the Fredholm operator
//! F = P - P^perp with its commutator spectra and summability diagnostics,
//! discrete Laplacian spectra, and matrix-product pressure statistics for
//! the harmonic extension cocycle.

pub mod builtins;
pub mod cell_structure;
pub mod error;
pub mod fredholm;
pub mod hilbert_module;
pub mod io;
pub mod pressure;
pub mod resistance_form;
pub mod self_similar;
pub mod spectral;

pub use cell_structure::{
    build_structure, quantum_graph_structure, CellAddress, CellStructure, SubdivisionRule,
    ValidationReport, VertexId,
};
pub use error::{Error, Result};
pub use fredholm::{Multiplier, SingularSpectrum, SummabilityReport};
pub use hilbert_module::{HodgeBasis, ModuleElement};
pub use pressure::{MatrixEnsemble, MatrixNorm, PressureCurve};
pub use resistance_form::{Network, ResistanceForm, VertexFunction};
pub use self_similar::{HarmonicMatrices, SelfSimilarStructure};
pub use spectral::{BoundaryCondition, EigenSystem, VertexMeasure};
