//! Two-stage robust dispatch for active distribution networks under
//! distributional uncertainty of load and PV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ambiguity;
pub mod dispatch;
pub mod evaluate;
pub mod ingest;
pub mod milp;
pub mod netmodel;
pub mod robust;
pub mod uset;
