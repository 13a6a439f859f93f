//! Mask-service wire format. All integers are big-endian.
//!
//! ```text
//! request:  "LSRV" 0x01 width:u32 height:u32 count:u8 frames[count][height][width]
//! response: "LSRV" 0x81 width:u32 height:u32 mask[height][width]   (0 or 255)
//! error:    "LSRV" 0xFF code:u16
//! ```

use std::io::{Read, Write};

use super::{Frame, Mask, PerceptionError};

pub const MAGIC: &[u8; 4] = b"LSRV";
pub const MSG_REQUEST: u8 = 0x01;
pub const MSG_RESPONSE: u8 = 0x81;
pub const MSG_ERROR: u8 = 0xFF;
pub const FRAME_COUNT: u8 = 3;

pub const ERR_BAD_MAGIC: u16 = 1;
pub const ERR_BAD_DIMENSIONS: u16 = 2;
pub const ERR_INTERNAL: u16 = 3;

/// Largest accepted image side, to bound allocations on bad input.
const MAX_SIDE: u32 = 16_384;

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_be_bytes(b))
}

fn check_dims(width: u32, height: u32) -> Result<(), PerceptionError> {
    if width == 0 || height == 0 || width > MAX_SIDE || height > MAX_SIDE {
        return Err(PerceptionError::DimensionMismatch(format!(
            "{width}x{height}"
        )));
    }
    Ok(())
}

/// Encodes a request carrying `frames`, oldest first.
pub fn encode_request(frames: &[Frame]) -> Result<Vec<u8>, PerceptionError> {
    let first = frames
        .first()
        .ok_or_else(|| PerceptionError::DimensionMismatch("no frames".into()))?;
    let (w, h) = (first.width, first.height);
    if frames.len() > u8::MAX as usize || frames.iter().any(|f| f.width != w || f.height != h) {
        return Err(PerceptionError::DimensionMismatch(
            "frames differ in size".into(),
        ));
    }
    let mut out = Vec::with_capacity(14 + frames.len() * first.data.len());
    out.extend_from_slice(MAGIC);
    out.push(MSG_REQUEST);
    out.extend_from_slice(&w.to_be_bytes());
    out.extend_from_slice(&h.to_be_bytes());
    out.push(frames.len() as u8);
    for f in frames {
        out.extend_from_slice(&f.data);
    }
    Ok(out)
}

/// Server side: reads one request. Errors carry the code to reply with.
pub fn read_request<R: Read>(r: &mut R) -> Result<Vec<Frame>, (u16, PerceptionError)> {
    let io = |e: std::io::Error| (ERR_INTERNAL, PerceptionError::Io(e));
    let mut head = [0u8; 5];
    r.read_exact(&mut head).map_err(io)?;
    if &head[..4] != MAGIC {
        return Err((ERR_BAD_MAGIC, PerceptionError::Protocol("bad magic".into())));
    }
    if head[4] != MSG_REQUEST {
        return Err((
            ERR_INTERNAL,
            PerceptionError::Protocol(format!("unexpected type {:#x}", head[4])),
        ));
    }
    let width = read_u32(r).map_err(io)?;
    let height = read_u32(r).map_err(io)?;
    let mut count = [0u8; 1];
    r.read_exact(&mut count).map_err(io)?;
    check_dims(width, height).map_err(|e| (ERR_BAD_DIMENSIONS, e))?;
    if count[0] != FRAME_COUNT {
        return Err((
            ERR_BAD_DIMENSIONS,
            PerceptionError::DimensionMismatch(format!("{} frames", count[0])),
        ));
    }
    let mut frames = Vec::with_capacity(count[0] as usize);
    for _ in 0..count[0] {
        let mut data = vec![0u8; width as usize * height as usize];
        r.read_exact(&mut data).map_err(io)?;
        frames.push(Frame {
            width,
            height,
            data,
        });
    }
    Ok(frames)
}

pub fn encode_response(mask: &Mask) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + mask.pixels().len());
    out.extend_from_slice(MAGIC);
    out.push(MSG_RESPONSE);
    out.extend_from_slice(&mask.width().to_be_bytes());
    out.extend_from_slice(&mask.height().to_be_bytes());
    out.extend(mask.pixels().iter().map(|&v| v * 255));
    out
}

pub fn encode_error(code: u16) -> Vec<u8> {
    let mut out = Vec::with_capacity(7);
    out.extend_from_slice(MAGIC);
    out.push(MSG_ERROR);
    out.extend_from_slice(&code.to_be_bytes());
    out
}

/// Client side: reads a response or an error reply.
pub fn read_response<R: Read>(r: &mut R) -> Result<Mask, PerceptionError> {
    let mut head = [0u8; 5];
    r.read_exact(&mut head)?;
    if &head[..4] != MAGIC {
        return Err(PerceptionError::Protocol("bad magic in reply".into()));
    }
    match head[4] {
        MSG_RESPONSE => {
            let width = read_u32(r)?;
            let height = read_u32(r)?;
            check_dims(width, height)?;
            let mut data = vec![0u8; width as usize * height as usize];
            r.read_exact(&mut data)?;
            if data.iter().any(|&b| b != 0 && b != 255) {
                return Err(PerceptionError::Protocol(
                    "mask bytes must be 0 or 255".into(),
                ));
            }
            Mask::from_bytes(width, height, &data)
        }
        MSG_ERROR => {
            let mut code = [0u8; 2];
            r.read_exact(&mut code)?;
            Err(PerceptionError::Remote(u16::from_be_bytes(code)))
        }
        other => Err(PerceptionError::Protocol(format!(
            "unexpected reply type {other:#x}"
        ))),
    }
}

/// Serves requests on one connection until the peer closes it, answering
/// each with `segment`.
pub fn serve_connection<S, F>(stream: &mut S, mut segment: F) -> std::io::Result<()>
where
    S: Read + Write,
    F: FnMut(&[Frame]) -> Result<Mask, u16>,
{
    loop {
        let reply = match read_request(stream) {
            Ok(frames) => match segment(&frames) {
                Ok(mask) => encode_response(&mask),
                Err(code) => encode_error(code),
            },
            Err((_, PerceptionError::Io(e))) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                return Ok(());
            }
            Err((code, _)) => {
                stream.write_all(&encode_error(code))?;
                stream.flush()?;
                // the stream position is unknown after a bad header
                return Ok(());
            }
        };
        stream.write_all(&reply)?;
        stream.flush()?;
    }
}
