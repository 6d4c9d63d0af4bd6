//! Linearized junction problems: assembly, banded solution and the
//! Lopatinskii–Shapiro verifier.

pub mod banded;
pub mod ls;
pub mod rows;
pub mod system;

pub use banded::{solve_banded, BandLu, BandMatrix, BandSolution};
pub use ls::{
    default_lambdas, ls_matrix, ls_verify, ls_verify_at, singular_range, symbol_roots, Complex64, JunctionFrame,
    LSQuery, LSReport, LSSample, SymbolRoots, LS_THRESHOLD,
};
pub use rows::{boundary_rows, end_kinds, BoundaryRow, EndKind, Term, ROWS_PER_END};
pub use system::{
    assemble, assemble_with_frames, natural_boundary, third_order_coefficient, AssembleOptions, LinearData,
    LinearSolution, LinearizedSystem, RowResidual,
};
