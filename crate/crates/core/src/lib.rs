// Negated float comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod numeric;
pub mod model;
pub mod qp;
pub mod theory;
pub mod oracle;
pub mod sampling;
pub mod estimators;
pub mod verify;
pub mod cli;
