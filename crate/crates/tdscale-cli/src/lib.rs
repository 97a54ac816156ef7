//! Scenario runner and example catalog for `tdscale`.

pub mod catalog;
pub mod run;
pub mod scenario;
