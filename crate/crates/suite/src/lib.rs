//! Holds the workspace acceptance suite in `tests/acceptance.rs`. It is a
//! separate member so that it runs after the unit and integration tests of
//! both library crates.
