//! Framed text encoding of protocol messages.
//!
//! A frame is a 4-byte big-endian length followed by a UTF-8 JSON object
//! with sorted keys. Floats are written with 17 significant digits, which
//! round-trips every finite `f64` exactly. Decoding rejects anything that
//! does not re-encode to the same bytes, so each message has exactly one
//! encoding.

use std::fmt::Write as _;
use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::optics::ModeAmplitudes;

/// Frames above this size are refused on decode.
pub const MAX_FRAME_LEN: usize = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    pub fn name(&self) -> &'static str {
        match self {
            Party::Alice => "alice",
            Party::Bob => "bob",
        }
    }

    pub fn peer(&self) -> Party {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Quantum(ModeAmplitudes),
    Classical(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireMessage {
    pub session_id: u64,
    pub round_index: u64,
    pub sender: Party,
    pub payload: Payload,
}

impl WireMessage {
    pub fn is_quantum(&self) -> bool {
        matches!(self.payload, Payload::Quantum(_))
    }
}

fn push_float(out: &mut String, x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::Encode(format!("non-finite amplitude {x}")));
    }
    write!(out, "{x:.16e}").expect("writing to a String cannot fail");
    Ok(())
}

/// Canonical payload text, without the length prefix.
pub fn encode_payload(m: &WireMessage) -> Result<String> {
    let mut s = String::with_capacity(96);
    s.push('{');
    match &m.payload {
        Payload::Classical(bits) => {
            s.push_str("\"bits\":\"");
            s.extend(bits.iter().map(|&b| if b { '1' } else { '0' }));
            s.push_str("\",\"kind\":\"classical\",");
        }
        Payload::Quantum(modes) => {
            s.push_str("\"kind\":\"quantum\",\"modes\":[");
            for (i, a) in modes.as_slice().iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                s.push('[');
                push_float(&mut s, a.re)?;
                s.push(',');
                push_float(&mut s, a.im)?;
                s.push(']');
            }
            s.push_str("],");
        }
    }
    write!(
        s,
        "\"round_index\":{},\"sender\":\"{}\",\"session_id\":{}}}",
        m.round_index,
        m.sender.name(),
        m.session_id
    )
    .expect("writing to a String cannot fail");
    Ok(s)
}

pub fn encode_message(m: &WireMessage) -> Result<Vec<u8>> {
    let payload = encode_payload(m)?;
    let len = u32::try_from(payload.len()).map_err(|_| Error::Encode("payload exceeds 4 GiB".into()))?;
    let mut frame = Vec::with_capacity(4 + payload.len());
    frame.extend_from_slice(&len.to_be_bytes());
    frame.extend_from_slice(payload.as_bytes());
    Ok(frame)
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| Error::Decode(format!("missing field `{key}`")))
}

fn as_u64(v: &Value, key: &str) -> Result<u64> {
    v.as_u64().ok_or_else(|| Error::Decode(format!("`{key}` is not an unsigned integer")))
}

fn as_str<'a>(v: &'a Value, key: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| Error::Decode(format!("`{key}` is not a string")))
}

pub fn decode_payload(text: &str) -> Result<WireMessage> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Decode(e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| Error::Decode("payload is not an object".into()))?;
    let sender = match as_str(field(obj, "sender")?, "sender")? {
        "alice" => Party::Alice,
        "bob" => Party::Bob,
        other => return Err(Error::Decode(format!("unknown sender {other:?}"))),
    };
    let payload = match as_str(field(obj, "kind")?, "kind")? {
        "classical" => {
            let bits = as_str(field(obj, "bits")?, "bits")?;
            Payload::Classical(
                bits.chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        _ => Err(Error::Decode(format!("bad bit {c:?}"))),
                    })
                    .collect::<Result<_>>()?,
            )
        }
        "quantum" => {
            let modes = field(obj, "modes")?
                .as_array()
                .ok_or_else(|| Error::Decode("`modes` is not an array".into()))?;
            let amps = modes
                .iter()
                .map(|pair| match pair.as_array().map(Vec::as_slice) {
                    Some([re, im]) => match (re.as_f64(), im.as_f64()) {
                        (Some(re), Some(im)) => Ok(Complex64::new(re, im)),
                        _ => Err(Error::Decode("mode components must be numbers".into())),
                    },
                    _ => Err(Error::Decode("a mode must be a [re, im] pair".into())),
                })
                .collect::<Result<Vec<_>>>()?;
            Payload::Quantum(ModeAmplitudes::new(amps).map_err(|e| Error::Decode(e.to_string()))?)
        }
        other => return Err(Error::Decode(format!("unknown kind {other:?}"))),
    };
    let m = WireMessage {
        session_id: as_u64(field(obj, "session_id")?, "session_id")?,
        round_index: as_u64(field(obj, "round_index")?, "round_index")?,
        sender,
        payload,
    };
    if encode_payload(&m)? != text {
        return Err(Error::Decode("payload is not in canonical form".into()));
    }
    Ok(m)
}

pub fn decode_message(frame: &[u8]) -> Result<WireMessage> {
    let (head, body) = frame
        .split_first_chunk::<4>()
        .ok_or_else(|| Error::Decode("frame shorter than its length prefix".into()))?;
    let len = u32::from_be_bytes(*head) as usize;
    if len != body.len() {
        return Err(Error::Decode(format!("length prefix {len} but {} payload bytes", body.len())));
    }
    decode_payload(std::str::from_utf8(body).map_err(|e| Error::Decode(e.to_string()))?)
}

/// Reads one frame from a byte stream.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Vec<u8>> {
    let mut head = [0u8; 4];
    r.read_exact(&mut head).map_err(|e| Error::Transport(e.to_string()))?;
    let len = u32::from_be_bytes(head) as usize;
    if len > MAX_FRAME_LEN {
        return Err(Error::Decode(format!("frame of {len} bytes exceeds the limit")));
    }
    let mut frame = vec![0u8; 4 + len];
    frame[..4].copy_from_slice(&head);
    r.read_exact(&mut frame[4..]).map_err(|e| Error::Transport(e.to_string()))?;
    Ok(frame)
}

/// Transcript dump: one message per line, the payload length as 8 hex
/// digits, a space, then the payload text.
pub fn write_transcript<W: Write>(messages: &[WireMessage], mut out: W) -> Result<()> {
    for m in messages {
        let text = encode_payload(m)?;
        writeln!(out, "{:08x} {text}", text.len()).map_err(|e| Error::Encode(e.to_string()))?;
    }
    Ok(())
}

pub fn read_transcript(text: &str) -> Result<Vec<WireMessage>> {
    text.lines()
        .map(|line| {
            let (len, payload) = line
                .split_once(' ')
                .ok_or_else(|| Error::Decode("transcript line without a length field".into()))?;
            let len = usize::from_str_radix(len, 16).map_err(|e| Error::Decode(e.to_string()))?;
            if len != payload.len() {
                return Err(Error::Decode(format!("line length {len} but {} payload bytes", payload.len())));
            }
            decode_payload(payload)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use proptest::prelude::*;
    use rand::Rng;

    fn quantum(modes: &[(f64, f64)]) -> WireMessage {
        WireMessage {
            session_id: 7,
            round_index: 3,
            sender: Party::Alice,
            payload: Payload::Quantum(ModeAmplitudes::new(modes.iter().map(|&(r, i)| Complex64::new(r, i)).collect()).unwrap()),
        }
    }

    #[test]
    fn empty_classical_frame_is_fixed() {
        let m = WireMessage {
            session_id: 0,
            round_index: 0,
            sender: Party::Bob,
            payload: Payload::Classical(vec![]),
        };
        let frame = encode_message(&m).unwrap();
        let text = r#"{"bits":"","kind":"classical","round_index":0,"sender":"bob","session_id":0}"#;
        assert_eq!(&frame[4..], text.as_bytes());
        assert_eq!(&frame[..4], &(text.len() as u32).to_be_bytes());
        assert_eq!(decode_message(&frame).unwrap(), m);
    }

    #[test]
    fn seventeen_digit_floats_round_trip() {
        let mut rng = StreamKey::new(2024).rng();
        let mut s = String::new();
        for _ in 0..1_000_000 {
            let x = f64::from_bits(rng.random::<u64>());
            if !x.is_finite() {
                continue;
            }
            s.clear();
            push_float(&mut s, x).unwrap();
            let back: f64 = serde_json::from_str::<Value>(&s).unwrap().as_f64().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn non_finite_amplitudes_are_refused() {
        let mut m = quantum(&[(1.0, 0.0)]);
        if let Payload::Quantum(ref mut a) = m.payload {
            a.as_mut_slice()[0] = Complex64::new(f64::NAN, 0.0);
        }
        assert!(matches!(encode_message(&m), Err(Error::Encode(_))));
    }

    #[test]
    fn malformed_frames_are_refused() {
        let good = encode_message(&quantum(&[(0.5, -0.25)])).unwrap();
        assert!(decode_message(&good[..good.len() - 1]).is_err());
        let loose = r#"{"kind":"quantum","modes":[[0.5,-0.25]],"round_index":3,"sender":"alice","session_id":7}"#;
        assert!(matches!(decode_payload(loose), Err(Error::Decode(_))));
        let empty = r#"{"kind":"quantum","modes":[],"round_index":3,"sender":"alice","session_id":7}"#;
        assert!(decode_payload(empty).is_err());
    }

    #[test]
    fn transcript_dump_round_trips() {
        let msgs = vec![quantum(&[(1.0, 0.0), (0.0, -2.5e-300)]), quantum(&[(-0.0, 3.0)])];
        let mut out = Vec::new();
        write_transcript(&msgs, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(read_transcript(&text).unwrap(), msgs);
    }

    fn finite() -> impl Strategy<Value = f64> {
        any::<f64>().prop_filter("finite", |x| x.is_finite())
    }

    proptest! {
        #[test]
        fn encode_decode_identity(
            session_id in any::<u64>(),
            round_index in any::<u64>(),
            alice in any::<bool>(),
            modes in prop::collection::vec((finite(), finite()), 1..6),
            bits in prop::collection::vec(any::<bool>(), 0..40),
            quantum in any::<bool>(),
        ) {
            let payload = if quantum {
                Payload::Quantum(ModeAmplitudes::new(modes.iter().map(|&(r, i)| Complex64::new(r, i)).collect()).unwrap())
            } else {
                Payload::Classical(bits)
            };
            let m = WireMessage { session_id, round_index, sender: if alice { Party::Alice } else { Party::Bob }, payload };
            let back = decode_message(&encode_message(&m).unwrap()).unwrap();
            prop_assert_eq!(encode_message(&back).unwrap(), encode_message(&m).unwrap());
            prop_assert_eq!(back, m);
        }
    }
}
