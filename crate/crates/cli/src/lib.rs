//! The `seamtrack` command-line tool and the simulator scenarios behind
//! `seamtrack bench`.

pub mod bench;
pub mod cli;
