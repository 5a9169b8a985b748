//! Multi-level fault monitoring and diagnosis for large sensor arrays.
//!
//! Three levels on top of a connectivity model:
//! 1. [`monitor`] — statistical probe monitoring: per-probe histograms
//!    compared to a fault-free baseline archive with a chi-square test.
//! 2. [`structural`] — suspect reduction: components with all dependent
//!    probes OK are exonerated; the rest are ranked by BAD/total ratio and
//!    grouped into ambiguity classes of identical signatures.
//! 3. [`behavioral`] — evidential diagnosis: feature trends are mapped
//!    through relational algorithms into certainty factors and combined per
//!    (component, failure type) hypothesis.
//!
//! [`simulator`] provides a synthetic detector with fault injection and
//! ground-truth trial campaigns; [`report`] the structured output format.

// `!(x > 0.0)` is used deliberately throughout to reject NaN along with
// non-positive values in one comparison.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod behavioral;
pub mod model;
pub mod monitor;
pub mod report;
pub mod simulator;
pub mod structural;
