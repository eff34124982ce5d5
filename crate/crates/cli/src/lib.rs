//! Library side of the command-line driver: session parsing, bundled
//! examples and the reference-claim suite. The binary in `main.rs` is a
//! thin dispatcher over these.

pub mod bundled;
pub mod session;
pub mod verify;
