use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(bam_core::Error),
    /// A replayed run produced different bytes than its manifest records.
    Mismatch(Vec<String>),
}

impl From<bam_core::Error> for CliError {
    fn from(e: bam_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use bam_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Core(E::InvalidConfig(_)) => 1,
            CliError::Core(E::NonFiniteLoss { .. }) | CliError::Mismatch(_) => 3,
            CliError::Core(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::Core(e) => e.kind(),
            CliError::Mismatch(_) => "RerunMismatch",
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
            CliError::Mismatch(names) => {
                format!("outputs differ from the manifest: {}", names.join(", "))
            }
        }
    }

    pub fn to_json(&self) -> String {
        json!({
            "error": {
                "kind": self.kind(),
                "message": self.message(),
                "exit_code": self.exit_code(),
            }
        })
        .to_string()
    }
}
