//! Fixed little-endian message layout.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "ILEA"
//! 4       1           version (high nibble) | kind (low nibble)
//! 5       4           sender, u32 LE
//! 9       8           round, u64 LE
//! 17      1           ndims
//! 18      4 * ndims   dims, u32 LE each
//! ..      8 * prod    payload, f64 LE, column-major
//! ```
//!
//! Encoded length is `18 + 4 * ndims + 8 * prod(dims)`.

use std::io::{self, Read};

use nalgebra::DMatrix;

use crate::error::{DecodeError, IleaError, Result};
use crate::manifold::Point;

pub const MAGIC: [u8; 4] = *b"ILEA";
pub const WIRE_VERSION: u8 = 1;
/// Bytes before the dimension list.
pub const HEADER_LEN: usize = 18;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageKind {
    Iterate = 1,
    Gradient = 2,
    Shutdown = 3,
}

impl MessageKind {
    fn from_nibble(n: u8) -> std::result::Result<Self, DecodeError> {
        match n {
            1 => Ok(Self::Iterate),
            2 => Ok(Self::Gradient),
            3 => Ok(Self::Shutdown),
            other => Err(DecodeError::BadKind(other)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Message {
    pub kind: MessageKind,
    pub round: u64,
    pub sender: u32,
    pub shape: Vec<u32>,
    pub payload: Vec<f64>,
}

/// Payload equality is bitwise, so NaN payloads compare equal to themselves.
impl PartialEq for Message {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.round == other.round
            && self.sender == other.sender
            && self.shape == other.shape
            && self.payload.len() == other.payload.len()
            && self
                .payload
                .iter()
                .zip(&other.payload)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Message {
    pub fn new(
        kind: MessageKind,
        round: u64,
        sender: u32,
        shape: Vec<u32>,
        payload: Vec<f64>,
    ) -> Result<Self> {
        if shape.is_empty() || shape.len() > u8::MAX as usize {
            return Err(IleaError::Protocol(format!(
                "message needs 1..=255 dims, got {}",
                shape.len()
            )));
        }
        let expected: usize = shape.iter().map(|&d| d as usize).product();
        if expected != payload.len() {
            return Err(IleaError::Protocol(format!(
                "shape {shape:?} holds {expected} values, payload has {}",
                payload.len()
            )));
        }
        Ok(Self {
            kind,
            round,
            sender,
            shape,
            payload,
        })
    }

    /// Matrix payload with `ndims = 1` for column vectors and 2 otherwise.
    pub fn from_matrix(kind: MessageKind, round: u64, sender: u32, m: &DMatrix<f64>) -> Self {
        let shape = if m.ncols() == 1 {
            vec![m.nrows() as u32]
        } else {
            vec![m.nrows() as u32, m.ncols() as u32]
        };
        Self {
            kind,
            round,
            sender,
            shape,
            payload: m.as_slice().to_vec(),
        }
    }

    pub fn iterate(point: &Point, round: u64, sender: u32) -> Self {
        Self::from_matrix(MessageKind::Iterate, round, sender, point.coords())
    }

    pub fn shutdown(round: u64, sender: u32) -> Self {
        Self {
            kind: MessageKind::Shutdown,
            round,
            sender,
            shape: vec![0],
            payload: Vec::new(),
        }
    }

    /// Payload as a matrix; one-dimensional payloads become a column.
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        let (rows, cols) = match self.shape.as_slice() {
            [n] => (*n as usize, 1),
            [r, c] => (*r as usize, *c as usize),
            other => {
                return Err(IleaError::Protocol(format!(
                    "cannot view shape {other:?} as a matrix"
                )))
            }
        };
        Ok(DMatrix::from_column_slice(rows, cols, &self.payload))
    }

    pub fn encoded_len(&self) -> usize {
        encoded_len(&self.shape)
    }
}

pub fn encoded_len(shape: &[u32]) -> usize {
    let count: usize = shape.iter().map(|&d| d as usize).product();
    HEADER_LEN + 4 * shape.len() + 8 * count
}

pub fn encode(msg: &Message) -> Vec<u8> {
    let mut out = Vec::with_capacity(msg.encoded_len());
    out.extend_from_slice(&MAGIC);
    out.push((WIRE_VERSION << 4) | (msg.kind as u8));
    out.extend_from_slice(&msg.sender.to_le_bytes());
    out.extend_from_slice(&msg.round.to_le_bytes());
    out.push(msg.shape.len() as u8);
    for d in &msg.shape {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in &msg.payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Header {
    kind: MessageKind,
    sender: u32,
    round: u64,
    ndims: usize,
}

fn parse_header(bytes: &[u8]) -> std::result::Result<Header, DecodeError> {
    if bytes.len() < HEADER_LEN {
        return Err(DecodeError::Truncated {
            needed: HEADER_LEN,
            have: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("length checked");
    if magic != MAGIC {
        return Err(DecodeError::BadMagic(magic));
    }
    let version = bytes[4] >> 4;
    if version != WIRE_VERSION {
        return Err(DecodeError::BadVersion(version));
    }
    let kind = MessageKind::from_nibble(bytes[4] & 0x0f)?;
    let sender = u32::from_le_bytes(bytes[5..9].try_into().expect("length checked"));
    let round = u64::from_le_bytes(bytes[9..17].try_into().expect("length checked"));
    Ok(Header {
        kind,
        sender,
        round,
        ndims: bytes[17] as usize,
    })
}

fn parse_dims(bytes: &[u8]) -> Vec<u32> {
    bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("chunk of 4")))
        .collect()
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Message, DecodeError> {
    let header = parse_header(bytes)?;
    let dims_end = HEADER_LEN + 4 * header.ndims;
    if bytes.len() < dims_end {
        return Err(DecodeError::Truncated {
            needed: dims_end,
            have: bytes.len(),
        });
    }
    let shape = parse_dims(&bytes[HEADER_LEN..dims_end]);
    let total = encoded_len(&shape);
    if bytes.len() < total {
        return Err(DecodeError::Truncated {
            needed: total,
            have: bytes.len(),
        });
    }
    if bytes.len() > total {
        return Err(DecodeError::Trailing(bytes.len() - total));
    }
    let payload = bytes[dims_end..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(Message {
        kind: header.kind,
        round: header.round,
        sender: header.sender,
        shape,
        payload,
    })
}

/// Reads one message from a byte stream. Returns `Ok(None)` on a clean end
/// of stream before the first byte.
pub fn read_message<R: Read>(reader: &mut R) -> Result<Option<(Message, usize)>> {
    let mut buf = vec![0u8; HEADER_LEN];
    match read_exact_or_eof(reader, &mut buf)? {
        0 => return Ok(None),
        n if n < HEADER_LEN => {
            return Err(DecodeError::Truncated {
                needed: HEADER_LEN,
                have: n,
            }
            .into())
        }
        _ => {}
    }
    let header = parse_header(&buf)?;
    let mut dims = vec![0u8; 4 * header.ndims];
    reader.read_exact(&mut dims)?;
    let shape = parse_dims(&dims);
    buf.extend_from_slice(&dims);
    let rest = encoded_len(&shape) - buf.len();
    let start = buf.len();
    buf.resize(start + rest, 0);
    reader.read_exact(&mut buf[start..])?;
    let len = buf.len();
    Ok(Some((decode(&buf)?, len)))
}

fn read_exact_or_eof<R: Read>(reader: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}
