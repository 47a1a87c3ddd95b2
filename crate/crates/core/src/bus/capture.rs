//! Raw frame capture: a file of `u32` little-endian length prefixes, each
//! followed by that many frame bytes.

use std::io::{self, Read, Write};

use super::{BusError, BusFrame, ByteSink};

pub struct CaptureLog<W: Write> {
    out: W,
    frames: u64,
}

impl<W: Write> CaptureLog<W> {
    pub fn new(out: W) -> Self {
        Self { out, frames: 0 }
    }

    pub fn frames_written(&self) -> u64 {
        self.frames
    }

    pub fn into_inner(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> ByteSink for CaptureLog<W> {
    fn send(&mut self, frame: &BusFrame, _now_us: u64) -> Result<(), BusError> {
        let len = u32::try_from(frame.len())
            .map_err(|_| BusError::InvalidInput("frame too large to capture".into()))?;
        self.out.write_all(&len.to_le_bytes())?;
        self.out.write_all(frame.as_bytes())?;
        self.frames += 1;
        Ok(())
    }
}

pub fn read_capture<R: Read>(mut r: R) -> Result<Vec<BusFrame>, BusError> {
    let mut frames = Vec::new();
    loop {
        let mut len = [0u8; 4];
        match r.read_exact(&mut len) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let n = u32::from_le_bytes(len) as usize;
        let mut buf = vec![0u8; n];
        r.read_exact(&mut buf)
            .map_err(|_| BusError::Malformed("capture truncated inside a frame"))?;
        frames.push(BusFrame::from_raw(buf));
    }
    Ok(frames)
}
