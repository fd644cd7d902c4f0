//! Experiments built on the solver: coupling sweeps, the sign-changing construction,
//! two-group scans and single solves, all producing [`SweepRecord`]s whose reports
//! are pure functions of the records.

pub mod measure;
pub mod record;
pub mod report;
pub mod runs;
pub mod sign;
pub mod sweep;
pub mod two_group;

pub use record::{
    read_records, records_from_csv, records_to_csv, write_records, Start, SweepRecord,
};
pub use report::{build_report, Check, Report, Status};
pub use sweep::SweepOutput;
