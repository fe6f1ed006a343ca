//! Acceptance suite for the library and the command-line pipeline; see `tests/acceptance.rs`.
