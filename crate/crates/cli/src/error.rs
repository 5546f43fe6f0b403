use std::fmt;

use sbn_core::evaluator::EvalError;
use sbn_core::model::ModelError;
use sbn_core::nn::NnError;
use sbn_core::trainer::TrainError;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Bad flags, bad configuration values or inconsistent requests.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn nn_numeric(e: &NnError) -> bool {
    matches!(e, NnError::Numeric(_))
}

fn model_numeric(e: &ModelError) -> bool {
    matches!(e, ModelError::Nn(n) if nn_numeric(n))
}

fn train_numeric(e: &TrainError) -> bool {
    match e {
        TrainError::Diverged { .. } => true,
        TrainError::Model(m) => model_numeric(m),
        _ => false,
    }
}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return EXIT_USAGE;
        }
        let numeric = cause.downcast_ref::<TrainError>().is_some_and(train_numeric)
            || cause.downcast_ref::<ModelError>().is_some_and(model_numeric)
            || cause.downcast_ref::<NnError>().is_some_and(nn_numeric)
            || cause.downcast_ref::<EvalError>().is_some_and(|e| match e {
                EvalError::Train(t) => train_numeric(t),
                EvalError::Model(m) => model_numeric(m),
                _ => false,
            });
        if numeric {
            return EXIT_NUMERIC;
        }
    }
    EXIT_DATA
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        assert_eq!(exit_code(&usage("bad flag")), EXIT_USAGE);
        let diverged = TrainError::Diverged {
            epoch: 1,
            batch: 2,
            loss: f64::NAN,
        };
        assert_eq!(exit_code(&anyhow::Error::new(diverged)), EXIT_NUMERIC);
        let nested = EvalError::Model(ModelError::Nn(NnError::Numeric("nan".into())));
        assert_eq!(exit_code(&anyhow::Error::new(nested)), EXIT_NUMERIC);
        assert_eq!(exit_code(&anyhow::anyhow!("file missing")), EXIT_DATA);
    }
}
