#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod dynamics;
pub mod env;
pub mod harness;
pub mod td3;
pub mod wind;
