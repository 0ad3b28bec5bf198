use std::path::{Path, PathBuf};

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),

    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error(
        "parameters are inadmissible (H = {hurst} vs bound {h_bound}, gamma0 = {gamma0} vs bound {gamma0_bound}); \
         pass --override-inadmissible to run anyway"
    )]
    Inadmissible {
        hurst: f64,
        h_bound: f64,
        gamma0: f64,
        gamma0_bound: f64,
    },

    #[error("{module}: {source}")]
    Core {
        module: &'static str,
        #[source]
        source: rbnlab_core::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl HarnessError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Tags core errors with the module that raised them.
pub(crate) trait InModule<T> {
    fn in_module(self, module: &'static str) -> Result<T>;
}

impl<T> InModule<T> for std::result::Result<T, rbnlab_core::Error> {
    fn in_module(self, module: &'static str) -> Result<T> {
        self.map_err(|source| HarnessError::Core { module, source })
    }
}
