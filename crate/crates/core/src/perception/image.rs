use std::io::{BufRead, Write};

use super::PerceptionError;

/// Binary image, row-major, values 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Mask {
    pub fn zeros(width: u32, height: u32) -> Self {
        Mask {
            width,
            height,
            pixels: vec![0; width as usize * height as usize],
        }
    }

    pub fn filled(width: u32, height: u32) -> Self {
        Mask {
            width,
            height,
            pixels: vec![1; width as usize * height as usize],
        }
    }

    /// Builds a mask from 0/1 values; anything else is rejected.
    pub fn from_pixels(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, PerceptionError> {
        if pixels.len() != width as usize * height as usize {
            return Err(PerceptionError::DimensionMismatch(format!(
                "{} values for a {width}x{height} mask",
                pixels.len()
            )));
        }
        if pixels.iter().any(|&v| v > 1) {
            return Err(PerceptionError::DimensionMismatch(
                "mask values must be 0 or 1".into(),
            ));
        }
        Ok(Mask {
            width,
            height,
            pixels,
        })
    }

    /// Any nonzero byte is set. Used for 0/255 masks on the wire and on disk.
    pub fn from_bytes(width: u32, height: u32, bytes: &[u8]) -> Result<Self, PerceptionError> {
        Mask::from_pixels(
            width,
            height,
            bytes.iter().map(|&b| (b != 0) as u8).collect(),
        )
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, u: u32, w: u32) -> bool {
        self.pixels[w as usize * self.width as usize + u as usize] != 0
    }

    #[inline]
    pub fn set(&mut self, u: u32, w: u32, value: bool) {
        self.pixels[w as usize * self.width as usize + u as usize] = value as u8;
    }

    pub fn count(&self) -> u64 {
        self.pixels.iter().map(|&v| v as u64).sum()
    }

    /// 0/255 grayscale copy.
    pub fn to_frame(&self) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            data: self.pixels.iter().map(|&v| v * 255).collect(),
        }
    }

    pub(crate) fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }
}

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl Frame {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, PerceptionError> {
        if data.len() != width as usize * height as usize {
            return Err(PerceptionError::DimensionMismatch(format!(
                "{} bytes for a {width}x{height} frame",
                data.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            data,
        })
    }

    pub fn black(width: u32, height: u32) -> Self {
        Frame {
            width,
            height,
            data: vec![0; width as usize * height as usize],
        }
    }
}

/// Writes a binary PGM (P5, maxval 255).
pub fn write_pgm<W: Write>(out: &mut W, frame: &Frame) -> std::io::Result<()> {
    write!(out, "P5\n{} {}\n255\n", frame.width, frame.height)?;
    out.write_all(&frame.data)
}

fn pgm_token<R: BufRead>(input: &mut R) -> Result<String, PerceptionError> {
    let mut token = String::new();
    let mut byte = [0u8; 1];
    loop {
        input.read_exact(&mut byte)?;
        let c = byte[0];
        if c == b'#' && token.is_empty() {
            let mut skip = Vec::new();
            input.read_until(b'\n', &mut skip)?;
            continue;
        }
        if c.is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            return Ok(token);
        }
        token.push(c as char);
    }
}

/// Reads a binary PGM with maxval 255.
pub fn read_pgm<R: BufRead>(input: &mut R) -> Result<Frame, PerceptionError> {
    let bad = |what: &str| PerceptionError::Protocol(format!("bad PGM header: {what}"));
    if pgm_token(input)? != "P5" {
        return Err(bad("magic"));
    }
    let width: u32 = pgm_token(input)?.parse().map_err(|_| bad("width"))?;
    let height: u32 = pgm_token(input)?.parse().map_err(|_| bad("height"))?;
    if pgm_token(input)? != "255" {
        return Err(bad("maxval"));
    }
    let mut data = vec![0u8; width as usize * height as usize];
    input.read_exact(&mut data)?;
    Frame::new(width, height, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let frame = Frame::new(3, 2, vec![0, 10, 20, 255, 128, 7]).unwrap();
        let mut buf = Vec::new();
        write_pgm(&mut buf, &frame).unwrap();
        assert_eq!(&buf[..11], b"P5\n3 2\n255\n");
        let back = read_pgm(&mut &buf[..]).unwrap();
        assert_eq!(back, frame);
    }

    #[test]
    fn pgm_reader_skips_comments() {
        let buf = b"P5\n# made by hand\n2 1\n255\n\x01\x02";
        let f = read_pgm(&mut &buf[..]).unwrap();
        assert_eq!(f.data, vec![1, 2]);
    }

    #[test]
    fn mask_rejects_non_binary_values() {
        assert!(Mask::from_pixels(2, 1, vec![0, 2]).is_err());
        assert!(Mask::from_pixels(2, 2, vec![0, 1]).is_err());
        let m = Mask::from_bytes(2, 1, &[0, 255]).unwrap();
        assert_eq!(m.pixels(), &[0, 1]);
        assert_eq!(m.to_frame().data, vec![0, 255]);
    }
}
