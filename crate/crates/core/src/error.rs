use thiserror::Error;

/// Errors raised by the geometric, photometric and reconstruction routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid conic: all coefficients are zero or non-finite")]
    InvalidConic,
    #[error("singular transform matrix")]
    SingularTransform,
    #[error("point maps to the line at infinity")]
    PointAtInfinity,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("kappa = {0} is outside (0, 1)")]
    KappaOutOfDomain(f64),
    #[error("empty isophote: isovalue is at or above the specular peak")]
    EmptyIsophote,
    #[error("isovalue {0} is not positive")]
    IsovalueOutOfDomain(f64),
    #[error("region of interest {0}")]
    InvalidRoi(String),
    #[error("no specularity: region of interest is flat")]
    NoSpecularity,
    #[error("no isophote polyline could be selected")]
    SelectionFailed,
    #[error("insufficient points for ellipse fit: {0} < 6")]
    InsufficientPoints(usize),
    #[error("degenerate point configuration for ellipse fit")]
    DegenerateConfiguration,
    #[error("conic is not an ellipse")]
    NotAnEllipse,
    #[error("conic eigenvalues are numerically degenerate")]
    NumericallyDegenerate,
    #[error("image size mismatch: {0}")]
    ImageSize(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("format: {0}")]
    Format(String),
}

impl Error {
    /// Short stable code used in CSV and JSON failure fields.
    pub fn reason(&self) -> &'static str {
        match self {
            Error::InvalidConic => "invalid-conic",
            Error::SingularTransform => "singular-transform",
            Error::PointAtInfinity => "point-at-infinity",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::DegenerateGeometry(_) => "degenerate-geometry",
            Error::KappaOutOfDomain(_) => "kappa-out-of-domain",
            Error::EmptyIsophote => "empty-isophote",
            Error::IsovalueOutOfDomain(_) => "isovalue-out-of-domain",
            Error::InvalidRoi(_) => "invalid-roi",
            Error::NoSpecularity => "no-specularity",
            Error::SelectionFailed => "selection-failed",
            Error::InsufficientPoints(_) => "insufficient-points",
            Error::DegenerateConfiguration => "degenerate-configuration",
            Error::NotAnEllipse => "not-an-ellipse",
            Error::NumericallyDegenerate => "numerically-degenerate",
            Error::ImageSize(_) => "image-size",
            Error::Io(_) => "io",
            Error::Format(_) => "format",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<image::ImageError> for Error {
    fn from(e: image::ImageError) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
