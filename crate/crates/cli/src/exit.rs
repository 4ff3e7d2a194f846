use std::fmt;
use std::process::ExitCode;

pub const USAGE: u8 = 2;
pub const DATA: u8 = 3;
pub const RUNTIME: u8 = 4;

/// Bad arguments or configuration.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Missing, corrupt or unsuitable input files.
#[derive(Debug)]
pub struct Data(pub String);

impl fmt::Display for Data {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Data {}

pub fn code_for(err: &anyhow::Error) -> ExitCode {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return ExitCode::from(USAGE);
        }
        if cause.is::<Data>() {
            return ExitCode::from(DATA);
        }
        if let Some(e) = cause.downcast_ref::<radcom::Error>() {
            if e.is_data_error() {
                return ExitCode::from(DATA);
            }
            if matches!(e, radcom::Error::Config(_) | radcom::Error::InvalidArgument(_)) {
                return ExitCode::from(USAGE);
            }
        }
    }
    ExitCode::from(RUNTIME)
}
