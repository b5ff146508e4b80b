//! Two-endpoint execution of the protocols over a framed message transport.

pub mod session;
pub mod transport;
pub mod wire;

pub use session::{
    run_alice, run_bob, run_in_library, run_session, EndpointRun, PartyInput, SessionConfig, SessionFailure, SessionOutcome,
    SessionOutput, SessionProtocol, SessionSeeds, Verdict,
};
pub use transport::{apply_channel, ChannelLink, Link, TcpLink, Transport};
pub use wire::{decode_message, encode_message, read_transcript, write_transcript, Party, Payload, WireMessage};
