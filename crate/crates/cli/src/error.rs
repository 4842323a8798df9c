use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error(transparent)]
    Module(bergmann2d::Error),

    #[error("i/o: {0}")]
    Io(String),

    #[error("self-test failed: {0}")]
    SelftestFailed(String),
}

impl From<bergmann2d::Error> for CliError {
    fn from(e: bergmann2d::Error) -> Self {
        match e {
            bergmann2d::Error::Io(m) => CliError::Io(m),
            e => CliError::Module(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ConfigInvalid(_) => 2,
            CliError::Io(_) => 3,
            CliError::Module(_) | CliError::SelftestFailed(_) => 1,
        }
    }

    /// Machine-readable failure report.
    pub fn report(&self) -> serde_json::Value {
        let (kind, module) = match self {
            CliError::ConfigInvalid(_) => ("ConfigInvalid", None),
            CliError::Io(_) => ("IoError", None),
            CliError::SelftestFailed(_) => ("SelftestFailed", None),
            CliError::Module(e) => ("ModuleError", Some(variant_name(e))),
        };
        json!({
            "status": "error",
            "error": kind,
            "module_error": module,
            "message": self.to_string(),
        })
    }
}

fn variant_name(e: &bergmann2d::Error) -> String {
    let debug = format!("{e:?}");
    debug
        .split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or_default()
        .to_string()
}
