//! Growth-in-stress: two-level dynamic factor model, quantile regressions and
//! factor-space stress testing of GDP growth.

pub mod data;
pub mod linalg;
pub mod qr;
pub mod skewt;
pub mod stress;
pub mod state_space;
pub mod dfm;
pub mod report;
