use std::fmt::Display;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INPUT: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl Failure {
    pub fn usage(msg: impl Display) -> Self {
        Self {
            code: EXIT_USAGE,
            msg: msg.to_string(),
        }
    }

    pub fn input(msg: impl Display) -> Self {
        Self {
            code: EXIT_INPUT,
            msg: msg.to_string(),
        }
    }

    pub fn numeric(msg: impl Display) -> Self {
        Self {
            code: EXIT_NUMERIC,
            msg: msg.to_string(),
        }
    }
}

impl From<chanprune::Error> for Failure {
    fn from(e: chanprune::Error) -> Self {
        if e.is_numeric() {
            Self::numeric(e)
        } else if matches!(e, chanprune::Error::Config(_)) {
            Self::usage(e)
        } else {
            Self::input(e)
        }
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;
