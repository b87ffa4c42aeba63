//! Firm-year and debt-instrument ingestion, validation, deflation and
//! contract deduplication.

mod debt;
mod deflate;
mod firm;

pub use debt::{
    accept_by_face_value, dedup_new_contracts, maturity_bucket, read_instruments, read_instruments_from,
    write_instruments, AcceptanceCell, AcceptanceReport, CreditBucket, DebtInstrument, DebtType, MaturityBucket,
    MaturitySplit, RejectReason, INSTRUMENT_HEADER,
};
pub use deflate::{deflate, deflate_instruments, DeflatorTable, DEFLATOR_HEADER};
pub(crate) use firm::{check_header, fmt_opt};
pub use firm::{
    ingest_firm_years, read_firm_years, write_firm_years, DropReason, FirmField, FirmYear, IngestReport, Panel,
    YearWindow, EXCLUDED_SECTORS, FIRM_YEAR_HEADER,
};
