//! Finite-length simulation: frame generation, decoders and campaigns.

pub mod campaign;
pub mod frame;
pub mod genie;
pub mod sic;

pub use campaign::{run_campaign, CampaignConfig, CampaignReport};
pub use frame::{generate_frame, Activation, BurstCode, BurstSpec, FrameGraph};
pub use genie::genie_decode;
pub use sic::{sic_decode, DecodeOutcome};
