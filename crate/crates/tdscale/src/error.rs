use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("MODEL_MISMATCH: {0}")]
    ModelMismatch(String),
    #[error("UNSUPPORTED_AUTOMORPHISM: {0}")]
    UnsupportedAutomorphism(String),
    #[error("NOT_SUBGROUP: {0}")]
    NotSubgroup(String),
    #[error("INFINITE_INDEX")]
    InfiniteIndex,
    #[error("NOT_COMMENSURABLE")]
    NotCommensurable,
    #[error("NOT_REPRESENTABLE: {0}")]
    NotRepresentable(String),
    #[error("NO_STABILIZATION_CERTIFICATE: {0}")]
    NoStabilizationCertificate(String),
    #[error("HORIZON_INCONCLUSIVE")]
    HorizonInconclusive,
    #[error("IDENTITY_AUTOMORPHISM")]
    IdentityAutomorphism,
    #[error("FLATNESS_UNVERIFIED: {0}")]
    FlatnessUnverified(String),
    #[error("NO_SUCH_N")]
    NoSuchN,
    #[error("SCALE_ONE")]
    ScaleOne,
    #[error("ENUMERATION_TOO_LARGE: {0}")]
    EnumerationTooLarge(String),
    #[error("INVALID: {0}")]
    Invalid(String),
}

impl Error {
    /// Stable machine-readable code, as printed in reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ModelMismatch(_) => "MODEL_MISMATCH",
            Error::UnsupportedAutomorphism(_) => "UNSUPPORTED_AUTOMORPHISM",
            Error::NotSubgroup(_) => "NOT_SUBGROUP",
            Error::InfiniteIndex => "INFINITE_INDEX",
            Error::NotCommensurable => "NOT_COMMENSURABLE",
            Error::NotRepresentable(_) => "NOT_REPRESENTABLE",
            Error::NoStabilizationCertificate(_) => "NO_STABILIZATION_CERTIFICATE",
            Error::HorizonInconclusive => "HORIZON_INCONCLUSIVE",
            Error::IdentityAutomorphism => "IDENTITY_AUTOMORPHISM",
            Error::FlatnessUnverified(_) => "FLATNESS_UNVERIFIED",
            Error::NoSuchN => "NO_SUCH_N",
            Error::ScaleOne => "SCALE_ONE",
            Error::EnumerationTooLarge(_) => "ENUMERATION_TOO_LARGE",
            Error::Invalid(_) => "INVALID",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn unrepresentable(msg: impl Into<String>) -> Error {
    Error::NotRepresentable(msg.into())
}
