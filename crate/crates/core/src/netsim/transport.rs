//! Reliable in-order links between the two endpoints.
//!
//! Every message is framed and decoded on both transports, so they differ
//! only in how bytes travel. Channel loss is applied to quantum messages on
//! receipt; messages are never dropped.

use std::io::{BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, Sender};

use serde::{Deserialize, Serialize};

use super::wire::{decode_message, encode_message, read_frame, Payload, WireMessage};
use crate::error::{Error, Result};
use crate::optics::{check_transmissivity, scale_in_place};

pub trait Link: Send {
    fn send(&mut self, m: &WireMessage) -> Result<()>;

    /// Next message from the peer, after the channel has acted on it.
    fn recv(&mut self) -> Result<WireMessage>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    InProcess,
    /// Loopback session over TCP. Port 0 picks a free port.
    Socket { host: String, port: u16 },
}

impl Transport {
    pub fn loopback() -> Self {
        Transport::Socket {
            host: "127.0.0.1".into(),
            port: 0,
        }
    }

    /// Connected `(alice, bob)` link pair.
    pub fn pair(&self, eta: f64) -> Result<(Box<dyn Link>, Box<dyn Link>)> {
        check_transmissivity("eta", eta)?;
        match self {
            Transport::InProcess => {
                let (to_bob, from_alice) = channel();
                let (to_alice, from_bob) = channel();
                Ok((
                    Box::new(ChannelLink {
                        tx: to_bob,
                        rx: from_bob,
                        eta,
                    }),
                    Box::new(ChannelLink {
                        tx: to_alice,
                        rx: from_alice,
                        eta,
                    }),
                ))
            }
            Transport::Socket { host, port } => {
                let listener = TcpListener::bind((host.as_str(), *port)).map_err(io_err)?;
                let addr = listener.local_addr().map_err(io_err)?;
                // the connect completes against the listen backlog before accept runs
                let bob = TcpLink::new(TcpStream::connect(addr).map_err(io_err)?, eta)?;
                let (stream, _) = listener.accept().map_err(io_err)?;
                Ok((Box::new(TcpLink::new(stream, eta)?), Box::new(bob)))
            }
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Transport(e.to_string())
}

/// Applies the channel to a message in flight.
pub fn apply_channel(m: &mut WireMessage, eta: f64) {
    if let Payload::Quantum(modes) = &mut m.payload {
        scale_in_place(modes.as_mut_slice(), eta);
    }
}

pub struct ChannelLink {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    eta: f64,
}

impl Link for ChannelLink {
    fn send(&mut self, m: &WireMessage) -> Result<()> {
        self.tx
            .send(encode_message(m)?)
            .map_err(|_| Error::Transport("peer endpoint has gone away".into()))
    }

    fn recv(&mut self) -> Result<WireMessage> {
        let frame = self
            .rx
            .recv()
            .map_err(|_| Error::Transport("peer endpoint closed the link".into()))?;
        let mut m = decode_message(&frame)?;
        apply_channel(&mut m, self.eta);
        Ok(m)
    }
}

pub struct TcpLink {
    writer: TcpStream,
    reader: BufReader<TcpStream>,
    eta: f64,
}

impl TcpLink {
    pub fn new(stream: TcpStream, eta: f64) -> Result<Self> {
        check_transmissivity("eta", eta)?;
        stream.set_nodelay(true).map_err(io_err)?;
        let reader = BufReader::new(stream.try_clone().map_err(io_err)?);
        Ok(TcpLink {
            writer: stream,
            reader,
            eta,
        })
    }

    /// Waits for a single peer on `addr`.
    pub fn listen<A: ToSocketAddrs>(addr: A, eta: f64) -> Result<Self> {
        let listener = TcpListener::bind(addr).map_err(io_err)?;
        let (stream, _) = listener.accept().map_err(io_err)?;
        TcpLink::new(stream, eta)
    }

    pub fn connect<A: ToSocketAddrs>(addr: A, eta: f64) -> Result<Self> {
        TcpLink::new(TcpStream::connect(addr).map_err(io_err)?, eta)
    }
}

impl Link for TcpLink {
    fn send(&mut self, m: &WireMessage) -> Result<()> {
        self.writer.write_all(&encode_message(m)?).map_err(io_err)
    }

    fn recv(&mut self) -> Result<WireMessage> {
        let frame = read_frame(&mut self.reader)?;
        let mut m = decode_message(&frame)?;
        apply_channel(&mut m, self.eta);
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::wire::Party;
    use crate::optics::ModeAmplitudes;
    use num_complex::Complex64;

    fn msg(i: u64) -> WireMessage {
        WireMessage {
            session_id: 1,
            round_index: i,
            sender: Party::Alice,
            payload: Payload::Quantum(ModeAmplitudes::new(vec![Complex64::new(0.3 * i as f64 + 0.1, -0.7), Complex64::new(1e-3, 2.0)]).unwrap()),
        }
    }

    #[test]
    fn loss_scales_amplitudes_exactly() {
        let eta = 0.83;
        for t in [Transport::InProcess, Transport::loopback()] {
            let (mut a, mut b) = t.pair(eta).unwrap();
            for i in 0..5 {
                a.send(&msg(i)).unwrap();
            }
            for i in 0..5 {
                let got = b.recv().unwrap();
                let (Payload::Quantum(sent), Payload::Quantum(recv)) = (msg(i).payload, got.payload) else {
                    panic!("kind changed in flight");
                };
                for (s, r) in sent.as_slice().iter().zip(recv.as_slice()) {
                    assert_eq!(*r, *s * eta.sqrt());
                }
            }
        }
    }

    #[test]
    fn classical_messages_are_untouched_and_ordered() {
        let (mut a, mut b) = Transport::loopback().pair(0.5).unwrap();
        for i in 0..20 {
            b.send(&WireMessage {
                session_id: 9,
                round_index: i,
                sender: Party::Bob,
                payload: Payload::Classical(vec![i % 2 == 0, true]),
            })
            .unwrap();
        }
        for i in 0..20 {
            let m = a.recv().unwrap();
            assert_eq!(m.round_index, i);
            assert_eq!(m.payload, Payload::Classical(vec![i % 2 == 0, true]));
        }
    }

    #[test]
    fn closed_peer_is_a_transport_error() {
        let (mut a, b) = Transport::InProcess.pair(1.0).unwrap();
        drop(b);
        assert!(matches!(a.recv(), Err(Error::Transport(_))));
        let (mut a, b) = Transport::loopback().pair(1.0).unwrap();
        drop(b);
        assert!(matches!(a.recv(), Err(Error::Transport(_))));
    }
}
