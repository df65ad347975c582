//! Joint power and bandwidth allocation across a sub-6 GHz MIMO interface and
//! a beamformed mmWave interface, with converter power that grows linearly in
//! sampled bandwidth.
//!
//! Rates are in nats per second throughout. The CLI converts to Mbps.
//!
//! ```
//! use bandalloc::channel::{MmWaveLink, Sub6Channel};
//! use bandalloc::linkmodel::SystemParams;
//! use bandalloc::sumrate::{solve, SolveMode};
//!
//! let ch = Sub6Channel::from_singular_values(1, 1, &[1.0]).unwrap();
//! let link = MmWaveLink::new(1.0).unwrap();
//! let params = SystemParams::new(2.0 * std::f64::consts::E, 1.0, 1, 1, 1.0, 1.0).unwrap();
//!
//! let report = solve(&ch, &link, &params, SolveMode::Auto);
//! assert!((report.allocation.w_m - 1.0).abs() < 1e-9);
//! assert!((report.eval.consumed_power - params.p_max).abs() < 1e-9);
//! ```

pub mod channel;
pub mod cli;
pub mod csit;
pub mod eesolver;
pub mod error;
mod interface;
pub mod linalg;
pub mod linkmodel;
pub mod oracle;
pub mod specialfn;
pub mod sumrate;

pub use error::{Error, Result};

/// The guide in `book/`, compiled so its examples stay in sync.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/sum-rate.md")]
    mod sum_rate {}
    #[doc = include_str!("../../../book/src/closed-forms.md")]
    mod closed_forms {}
    #[doc = include_str!("../../../book/src/energy-efficiency.md")]
    mod energy_efficiency {}
    #[doc = include_str!("../../../book/src/partial-csit.md")]
    mod partial_csit {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
