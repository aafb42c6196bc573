//! Private set intersection for location-trail matching.
//!
//! [`encoding`] turns GPS samples into fixed-width digests, [`protocol`] runs
//! the PSI schemes as message-driven state machines over [`crypto`],
//! [`sketch`] holds the probabilistic set structures, [`cost`] evaluates the
//! analytic cost model and [`net`] serves it all over TCP.

pub mod cli;
pub mod cost;
pub mod crypto;
pub mod encoding;
pub mod net;
pub mod protocol;
pub mod sketch;
