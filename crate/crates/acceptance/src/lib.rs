//! Acceptance criteria for `ap-psystem` live in `tests/acceptance.rs`;
//! run them with `cargo test -p psystem-acceptance`.
