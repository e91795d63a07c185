//! Post-closure pressure fields of the three isolated sections, the inlet
//! formulas used for localization, and the finite-difference oracle that
//! cross-checks them.

pub mod calibrate;
pub mod field;
pub mod kernel;
pub mod model;
pub mod oracle;
pub mod table;

pub use calibrate::{fit_section_flow, FlowFit};
pub use field::{FieldSource, PressureField};
pub use kernel::{PointSource, SectionKernel, SeriesPolicy, SeriesValue};
pub use model::{
    exact_inlet_pressure, simplified_inlet_pressure, Evaluation, InletMode, Section, TermSet,
    TransientModel, TransientParams, EULER_C,
};
pub use oracle::{fd_oracle_solve, OracleGrid, OracleProblem};
pub use table::{emit_table, published_positions, PressureTable, PublishedTables, TABLE_OFFSETS};
