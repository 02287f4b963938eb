use std::fmt;
use std::process::ExitCode;

/// A failure carrying the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub const CONFIG: u8 = 2;
pub const DATA: u8 = 3;
pub const NUMERIC: u8 = 4;

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: CONFIG, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { code: DATA, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self { code: NUMERIC, message: message.into() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<dmapper::Error> for Failure {
    fn from(e: dmapper::Error) -> Self {
        use dmapper::Error as E;
        let code = match e {
            E::InvalidParameter { .. } => CONFIG,
            E::Data(_) | E::Parse { .. } | E::Io(_) | E::Json(_) => DATA,
            E::Numeric(_) => NUMERIC,
        };
        Self { code, message: e.to_string() }
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;
