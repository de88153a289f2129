use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: nlsep_core::Error,
    },
    #[error("{0}")]
    Invalid(String),
    /// A time evolution aborted; `last_time` is the last recorded snapshot.
    #[error("run `{run}` failed: {source} (last snapshot at t = {last_time})")]
    Evolution {
        run: String,
        last_time: f64,
        #[source]
        source: nlsep_core::Error,
    },
}

pub(crate) fn invalid<T>(message: impl Into<String>) -> Result<T> {
    Err(HarnessError::Invalid(message.into()))
}

pub(crate) trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for std::result::Result<T, nlsep_core::Error> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| HarnessError::Core {
            context: what(),
            source,
        })
    }
}
