//! Published influence coefficients for the two-platform smartphone market
//! (2009–2017), with inputs ordered
//! `y1` platform-1 investment, `y2` platform-2 investment,
//! `y3` platform-1 price, `y4` platform-2 price.
//! Rows follow `A11, A12, A21, A22`.

use crate::influence::{ConstraintMode, ConstraintSpec, InfluenceMatrix};

pub const INPUT_NAMES: [&str; 4] = [
    "platform-1 investment",
    "platform-2 investment",
    "platform-1 price",
    "platform-2 price",
];

/// Coefficients learned from the observed market.
pub const OBSERVED_MARKET: [[f64; 4]; 4] = [
    [4.0, 0.0, -1.0, 0.0],
    [0.0, 3.0, 1.0, 3.0],
    [3.0, 0.0, 3.0, 1.0],
    [0.0, 4.0, 0.0, -1.0],
];

/// Coefficients learned when shares are frozen at their initial split.
pub const STATIC_MARKET: [[f64; 4]; 4] = [
    [4.0, 0.0, 2.0, 0.0],
    [0.0, 3.0, -3.0, 4.0],
    [3.0, 0.0, 4.0, -3.0],
    [0.0, 4.0, 0.0, 2.0],
];

/// Default two-product constraint spec for four inputs.
pub fn two_product_spec() -> ConstraintSpec {
    ConstraintSpec::two_product(ConstraintMode::FullSymmetry, 4).expect("four inputs pair up")
}

pub fn observed_market_alpha() -> InfluenceMatrix {
    InfluenceMatrix::from_rows(&OBSERVED_MARKET, &two_product_spec())
        .expect("reference coefficients satisfy the full constraint set")
}

pub fn static_market_alpha() -> InfluenceMatrix {
    InfluenceMatrix::from_rows(&STATIC_MARKET, &two_product_spec())
        .expect("reference coefficients satisfy the full constraint set")
}
