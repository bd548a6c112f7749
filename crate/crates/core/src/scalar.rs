use nalgebra::RealField;

/// Floating-point element type used by the kernel operator and the solvers.
///
/// Implemented for `f32` (memory-lean training path) and `f64` (oracles and
/// scoring).
pub trait Real: RealField + Copy + Send + Sync + Into<f64> + std::fmt::Debug + 'static {
    fn cast(x: f64) -> Self;

    fn from_count(x: usize) -> Self {
        Self::cast(x as f64)
    }

    /// Machine epsilon of the type.
    fn eps() -> Self;
}

impl Real for f32 {
    #[inline]
    fn cast(x: f64) -> Self {
        x as f32
    }

    fn eps() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    #[inline]
    fn cast(x: f64) -> Self {
        x
    }

    fn eps() -> Self {
        f64::EPSILON
    }
}

/// Runtime selection of the solver arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f32" | "single" => Ok(Precision::F32),
            "f64" | "double" => Ok(Precision::F64),
            other => Err(format!("unknown precision `{other}` (expected f32 or f64)")),
        }
    }
}
