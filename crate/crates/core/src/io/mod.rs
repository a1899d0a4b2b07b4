pub mod avec;
pub mod csv;
pub mod json;

pub use avec::{decode_avec, encode_avec, read_avec, sidecar_path, write_avec};
pub use json::{
    parse_head, parse_report, parse_spec, read_head, read_spec, spec_to_string, write_head, write_report,
    write_spec, HeadFile, Report, ReportResult,
};
pub use self::csv::{format_roc, format_scores, format_sweep, parse_scores, read_scores, write_csv};
