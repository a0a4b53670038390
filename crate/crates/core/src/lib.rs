//! Physical-layer analysis toolkit for IEEE 1901 wavelet OFDM, the
//! ELT-based multicarrier modulation, with ASCET per-subcarrier
//! equalization, plus a windowed-OFDM baseline for comparison.
//!
//! The crate covers the full chain: PR prototype windows
//! ([`prototype`]), modulated banks and the time-domain signal path
//! ([`filterbank`]), statistical PLC channels and noise ([`channel`]),
//! closed-form interference kernels and SINR ([`kernel`], [`ascet`],
//! [`sinr`]), the windowed-OFDM reference ([`wofdm`]), SNR-gap rate
//! computation ([`rate`]), Monte Carlo cross-checks ([`validation`]) and
//! the experiment runner ([`sweep`]).

pub mod ascet;
pub mod channel;
pub mod error;
pub mod filterbank;
pub mod kernel;
pub mod prototype;
pub mod rate;
pub mod sinr;
pub mod sweep;
pub mod validation;
pub mod wofdm;

pub use ascet::EqualizerTaps;
pub use channel::{ChannelRealization, NoiseModel};
pub use error::{Error, Result};
pub use filterbank::{ModulatedBank, SymbolFrame, ToneMask};
pub use kernel::KernelTable;
pub use prototype::PrototypeFilter;
pub use rate::RateReport;
pub use sinr::SinrProfile;
pub use sweep::{ExperimentSpec, SweepResult};
pub use wofdm::{WofdmConfig, WofdmSinrProfile};
