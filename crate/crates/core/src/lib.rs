// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod dpsgd;
pub mod encoding;
pub mod fvrns;
pub mod metrics;
pub mod model;
pub mod polyapprox;
pub mod polyring;
