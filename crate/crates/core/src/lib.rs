//! Rigorous upper bound on the site-percolation threshold of the honeycomb
//! lattice via the cluster decomposition of the non-percolation probability.
//!
//! The pipeline: enumerate finite clusters around the origin ([`census`]),
//! compute their external borders on the matching lattice ([`clusters`]),
//! bound border counts through the 12×12 way-connection matrix ([`connmat`])
//! and its Perron root ([`spectral`]), and turn that into probability and
//! threshold bounds ([`bounds`]). [`mc`] provides the stochastic cross-check.

pub mod bounds;
pub mod census;
pub mod clusters;
pub mod connmat;
pub mod field;
pub mod lattice;
pub mod mc;
pub mod rng;
pub mod spectral;

pub use clusters::{BorderCycle, Cluster, ProbabilityMode};
pub use field::{Configuration, Window};
pub use lattice::{Direction, Site};

/// Runs `f` with parallel work capped at `threads` workers (`None` keeps the
/// global pool). Results never depend on the cap.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().expect("thread pool");
        return pool.install(f);
    }
    let _ = threads;
    f()
}
