use std::collections::VecDeque;
use std::io::{BufReader, BufWriter, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use super::protocol::{encode_request, read_response, FRAME_COUNT};
use super::{render_frame, render_mask, Frame, Mask, PerceptionConfig, PerceptionError};
use crate::plant::TipPose;
use crate::world::TubePhantom;

/// What the camera sees at one control step.
#[derive(Debug, Clone, Copy)]
pub struct View<'a> {
    pub phantom: &'a TubePhantom,
    pub pose: TipPose,
}

/// Source of lumen masks for the control loop. Implementations that work on
/// images keep their own history of the last three frames.
pub trait PerceptionBackend {
    fn segment(&mut self, view: &View<'_>) -> Result<Mask, PerceptionError>;

    /// Drops any frame history, e.g. between trials.
    fn reset(&mut self) {}
}

/// Ground-truth masks traced straight from the phantom geometry.
#[derive(Debug, Clone)]
pub struct GeometricBackend {
    cfg: PerceptionConfig,
}

impl GeometricBackend {
    pub fn new(cfg: PerceptionConfig) -> Self {
        GeometricBackend { cfg }
    }
}

impl PerceptionBackend for GeometricBackend {
    fn segment(&mut self, view: &View<'_>) -> Result<Mask, PerceptionError> {
        render_mask(
            view.phantom,
            &view.pose,
            &self.cfg.camera,
            self.cfg.lumen_depth,
            self.cfg.render,
        )
    }
}

/// Client of an external mask service. Each call renders a frame, appends
/// it to the history and sends the last three frames. Until three frames
/// exist the oldest one is repeated.
pub struct RemoteBackend {
    cfg: PerceptionConfig,
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    history: VecDeque<Frame>,
}

impl RemoteBackend {
    pub fn connect<A: ToSocketAddrs>(
        addr: A,
        cfg: PerceptionConfig,
    ) -> Result<Self, PerceptionError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(Duration::from_secs(60)))?;
        Ok(RemoteBackend {
            cfg,
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
            history: VecDeque::with_capacity(FRAME_COUNT as usize),
        })
    }

    /// One synchronous request/response exchange.
    pub fn segment_frames(&mut self, frames: &[Frame]) -> Result<Mask, PerceptionError> {
        let request = encode_request(frames)?;
        self.writer.write_all(&request)?;
        self.writer.flush()?;
        let mask = read_response(&mut self.reader)?;
        let first = &frames[0];
        if mask.width() != first.width || mask.height() != first.height {
            return Err(PerceptionError::DimensionMismatch(format!(
                "service returned {}x{} for {}x{} frames",
                mask.width(),
                mask.height(),
                first.width,
                first.height
            )));
        }
        Ok(mask)
    }
}

impl PerceptionBackend for RemoteBackend {
    fn segment(&mut self, view: &View<'_>) -> Result<Mask, PerceptionError> {
        let (frame, _) = render_frame(view.phantom, &view.pose, &self.cfg)?;
        if self.history.len() == FRAME_COUNT as usize {
            self.history.pop_front();
        }
        self.history.push_back(frame);
        while self.history.len() < FRAME_COUNT as usize {
            let oldest = self.history[0].clone();
            self.history.push_front(oldest);
        }
        let frames: Vec<Frame> = self.history.iter().cloned().collect();
        self.segment_frames(&frames)
    }

    fn reset(&mut self) {
        self.history.clear();
    }
}
