//! Non-parametric smiles: polynomials in delta and cubic splines.

mod delta_poly;
mod lookup;
mod spline;

pub use delta_poly::{fit_delta_polynomial, DeltaPolynomial, VolTransform};
pub use lookup::{
    DeltaKind, DeltaLookup, FixedPointStep, FixedPointTrace, StrikeSolverMethod,
};
pub use spline::{
    fit_spline_smile, CubicSpline, CubicSplineSmile, CurvatureJump, Extrapolation, SplineAxis,
    SplineBoundary,
};

