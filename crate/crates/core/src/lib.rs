//! Species sampling models.
//!
//! * exact algebra of compositions, putative PPFs and EPPF tables, with
//!   enumeration checks for balance, label symmetry and additivity
//!   ([`eppf`], [`validate`]);
//! * weight-sequence priors, size-biased permutations and the partially
//!   exchangeable partition probability ([`weights`]);
//! * a self-normalized Monte Carlo estimator of the PPF implied by any weight
//!   prior, plus sequence simulation ([`estimator`]);
//! * collapsed Gibbs samplers over partitions for conjugate normal and
//!   beta-binomial mixtures ([`mcmc`]);
//! * the `ssm` command line front end ([`cli`]).

pub mod cli;
pub mod composition;
pub mod eppf;
pub mod error;
pub mod estimator;
pub mod mcmc;
pub mod numeric;
pub mod ppf;
pub mod rng;
pub mod validate;
pub mod weights;

pub use composition::Composition;
pub use eppf::{dp_eppf, dp_log_eppf, eppf_from_ppf, ppf_from_eppf, EppfOrigin, EppfTable};
pub use error::{Error, Result};
pub use ppf::{dp_ppf, size_function_ppf, PpfFamily, PutativePpf};
pub use validate::{
    check_additivity, check_balance, check_label_symmetry, BalanceReport, Violation,
};
