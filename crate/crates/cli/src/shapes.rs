//! Shape names accepted on the command line.
//!
//! The closed set is: `monotone` (alias `increasing`), `decreasing`,
//! `convex`, `concave`, `supermodular`, `nonneg` (alias `nonnegative`),
//! plus `+`-joined combinations of the linear-constraint shapes
//! (e.g. `monotone+convex`). Curvature names map to second-difference
//! constraints on univariate grids and to the affine-minorant
//! representation on multivariate grids.

use shapetest_core::cones::{intersect, ConeSpec, MonotoneDir};

use crate::io::CliError;

pub fn parse(spec: &str, dims: usize) -> Result<ConeSpec, CliError> {
    let parts: Vec<&str> = spec.split('+').map(str::trim).collect();
    if parts.len() == 1 {
        return parse_single(parts[0], dims);
    }
    let members = parts
        .iter()
        .map(|part| parse_single(part, dims))
        .collect::<Result<Vec<_>, _>>()?;
    intersect(members).map_err(CliError::from_display)
}

fn parse_single(name: &str, dims: usize) -> Result<ConeSpec, CliError> {
    match name.to_ascii_lowercase().as_str() {
        "monotone" | "increasing" => Ok(ConeSpec::monotone_increasing(dims)),
        "decreasing" | "monotone-decreasing" => Ok(ConeSpec::Monotone(vec![
            Some(MonotoneDir::Decreasing);
            dims
        ])),
        "convex" => Ok(if dims == 1 {
            ConeSpec::Convex1D
        } else {
            ConeSpec::ConvexMultivariate
        }),
        "concave" => Ok(if dims == 1 {
            ConeSpec::Concave1D
        } else {
            ConeSpec::ConcaveMultivariate
        }),
        "supermodular" => Ok(ConeSpec::Supermodular),
        "nonneg" | "nonnegative" => Ok(ConeSpec::Nonnegative),
        "slutsky" | "slutsky-nsd" => Err(CliError::input(
            "the Slutsky restriction applies to matrix-valued estimates; \
             use `simulate --design slutsky` or the library API",
        )),
        other => Err(CliError::input(format!(
            "unknown shape `{other}`; expected monotone, decreasing, convex, \
             concave, supermodular, nonneg, or `+`-joined combinations"
        ))),
    }
}
