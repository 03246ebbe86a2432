use osdgd::audio::AudioError;
use osdgd::corpus::CorpusError;
use osdgd::eval::EvalError;
use osdgd::features::FeatureError;
use osdgd::frames::FrameError;
use osdgd::gender::GenderError;
use osdgd::neural::NeuralError;
use osdgd::osd::OsdError;
use osdgd::pitch::PitchError;

/// Failures grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<NeuralError> for CliError {
    fn from(e: NeuralError) -> Self {
        match e {
            NeuralError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            NeuralError::BadConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<OsdError> for CliError {
    fn from(e: OsdError) -> Self {
        match e {
            OsdError::Neural(n) => n.into(),
            OsdError::BadConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<GenderError> for CliError {
    fn from(e: GenderError) -> Self {
        match e {
            GenderError::Neural(n) => n.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::BadConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PitchError> for CliError {
    fn from(e: PitchError) -> Self {
        match e {
            PitchError::BadConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

macro_rules! data_errors {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_errors!(AudioError, FeatureError, FrameError, EvalError, std::io::Error);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_kind() {
        let numeric: CliError = OsdError::Neural(NeuralError::NonFiniteLoss { epoch: 3 }).into();
        assert_eq!(numeric.exit_code(), 3);
        let usage: CliError = NeuralError::BadConfig("x".into()).into();
        assert_eq!(usage.exit_code(), 1);
        let data: CliError = NeuralError::BadMagic.into();
        assert_eq!(data.exit_code(), 2);
    }
}
