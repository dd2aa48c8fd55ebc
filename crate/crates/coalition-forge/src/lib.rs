//! Library surface of the `coalition-forge` CLI: the game-file format,
//! exposed separately so integration tests (and downstream tooling) can
//! load, validate, and canonicalize game descriptions without shelling
//! out to the binary.

pub mod gamefile;
