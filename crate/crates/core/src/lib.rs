//! Popularity-based power-law bipartite graphs and active fingerprinting
//! deanonymization attacks.

pub mod analytics;
pub mod attack;
pub mod bigraph;
pub mod bounds;
pub mod harness;
pub mod numerics;
