//! Actuator bus: stimulus intensities to servo goal positions, vendor-framed
//! bus packets, a capture log and a simulated seven-motor device.

mod capture;
mod crc;
mod frame;
mod sim;

use std::collections::HashSet;

use thiserror::Error;

use crate::model::{SiteId, StimulusDistribution};

pub use capture::{read_capture, CaptureLog};
pub use crc::{crc16, crc16_update};
pub use frame::{
    decode_goal_write, decode_packet, encode_goal_write, encode_packet, stuff, unstuff, BusFrame,
    GoalWrite, Packet, ADDR_GOAL_POSITION, BROADCAST_ID, HEADER, INST_PING, INST_READ, INST_WRITE,
    MAX_MOTOR_ID,
};
pub use sim::{sim_step, SimDevice, SimMotor, SimMotorState};

#[derive(Debug, Error)]
pub enum BusError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("motor id {0} out of range 0..=252")]
    InvalidId(u8),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("malformed frame: {0}")]
    Malformed(&'static str),
    #[error("frame rejected: crc mismatch (expected {expected:#06x}, got {got:#06x})")]
    BadCrc { expected: u16, got: u16 },
    #[error("unsupported frame: {0}")]
    Unsupported(&'static str),
    #[error("capture i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Destination for encoded frames: a serial port, a capture file or the
/// simulated device.
pub trait ByteSink {
    fn send(&mut self, frame: &BusFrame, now_us: u64) -> Result<(), BusError>;
}

impl<S: ByteSink + ?Sized> ByteSink for &mut S {
    fn send(&mut self, frame: &BusFrame, now_us: u64) -> Result<(), BusError> {
        (**self).send(frame, now_us)
    }
}

/// One winding motor. `rest_ticks` is the slack position, `span_ticks` the
/// (signed) travel at full intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelConfig {
    pub motor_id: u8,
    pub rest_ticks: i32,
    pub span_ticks: i32,
    pub max_ticks_per_s: u32,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), BusError> {
        if self.motor_id > MAX_MOTOR_ID {
            return Err(BusError::InvalidId(self.motor_id));
        }
        if self.span_ticks == 0 {
            return Err(BusError::Config(format!(
                "motor {}: span_ticks must be non-zero",
                self.motor_id
            )));
        }
        Ok(())
    }
}

/// Placeholder travel: motors 1..=7, half a turn of slack-to-taut winding.
/// No winding travel or tension figures are known for the real glove.
pub fn default_channels() -> [ChannelConfig; 7] {
    std::array::from_fn(|i| ChannelConfig {
        motor_id: (i + 1) as u8,
        rest_ticks: 2048,
        span_ticks: 512,
        max_ticks_per_s: 4096,
    })
}

/// `rest + round(intensity * span)`, rounding half away from zero.
///
/// The product is evaluated exactly from the binary representation of
/// `intensity`, so the result never depends on floating-point rounding.
pub fn intensity_to_goal(intensity: f64, ch: &ChannelConfig) -> Result<i32, BusError> {
    if !intensity.is_finite() || !(0.0..=1.0).contains(&intensity) {
        return Err(BusError::InvalidInput(format!(
            "intensity {intensity} outside [0, 1]"
        )));
    }
    let offset = exact_round_product(intensity, ch.span_ticks);
    i32::try_from(i64::from(ch.rest_ticks) + offset)
        .map_err(|_| BusError::InvalidInput("goal position overflows i32".into()))
}

fn exact_round_product(x: f64, span: i32) -> i64 {
    // x in [0, 1]: x = mantissa * 2^-shift
    if x == 0.0 || span == 0 {
        return 0;
    }
    let bits = x.to_bits();
    let exp_bits = ((bits >> 52) & 0x7FF) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mantissa, exp) = if exp_bits == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp_bits - 1075)
    };
    let magnitude = i128::from(mantissa) * i128::from(span.unsigned_abs());
    let rounded = if exp >= 0 {
        magnitude << exp
    } else {
        let shift = (-exp) as u32;
        if shift > 120 {
            // x < 2^-67, product far below one half
            0
        } else {
            let q = magnitude >> shift;
            let r = magnitude - (q << shift);
            if 2 * r >= (1i128 << shift) {
                q + 1
            } else {
                q
            }
        }
    };
    let signed = if span < 0 { -rounded } else { rounded };
    signed as i64
}

/// One goal-write frame per site, in [`SiteId`] order.
pub fn schedule(
    dist: &StimulusDistribution,
    channels: &[ChannelConfig],
) -> Result<[BusFrame; 7], BusError> {
    if channels.len() != SiteId::COUNT {
        return Err(BusError::Config(format!(
            "expected {} channels, got {}",
            SiteId::COUNT,
            channels.len()
        )));
    }
    let mut seen = HashSet::new();
    for ch in channels {
        ch.validate()?;
        if !seen.insert(ch.motor_id) {
            return Err(BusError::Config(format!(
                "duplicate motor id {}",
                ch.motor_id
            )));
        }
    }
    let mut frames = Vec::with_capacity(SiteId::COUNT);
    for (site, ch) in SiteId::ALL.iter().zip(channels) {
        let goal = intensity_to_goal(dist.get(*site), ch)?;
        frames.push(encode_goal_write(ch.motor_id, goal)?);
    }
    Ok(frames
        .try_into()
        .expect("exactly one frame per site"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(rest: i32, span: i32) -> ChannelConfig {
        ChannelConfig {
            motor_id: 1,
            rest_ticks: rest,
            span_ticks: span,
            max_ticks_per_s: 1000,
        }
    }

    #[test]
    fn goal_examples() {
        assert_eq!(intensity_to_goal(0.0, &ch(2048, 512)).unwrap(), 2048);
        assert_eq!(intensity_to_goal(1.0, &ch(2048, 512)).unwrap(), 2560);
        assert_eq!(intensity_to_goal(0.5, &ch(2048, 511)).unwrap(), 2304);
    }

    #[test]
    fn negative_span_rounds_away_from_zero() {
        assert_eq!(intensity_to_goal(0.5, &ch(2048, -511)).unwrap(), 2048 - 256);
        assert_eq!(intensity_to_goal(1.0, &ch(2048, -512)).unwrap(), 1536);
    }

    #[test]
    fn out_of_range_intensity() {
        for bad in [-0.01, 1.01, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                intensity_to_goal(bad, &ch(0, 10)),
                Err(BusError::InvalidInput(_))
            ));
        }
    }

    #[test]
    fn subnormal_intensity() {
        assert_eq!(intensity_to_goal(f64::MIN_POSITIVE / 4.0, &ch(7, i32::MAX)).unwrap(), 7);
    }

    #[test]
    fn schedule_zero_and_single_site() {
        let chans = default_channels();
        let frames = schedule(&StimulusDistribution::ZERO, &chans).unwrap();
        for (f, c) in frames.iter().zip(&chans) {
            let g = decode_goal_write(f).unwrap();
            assert_eq!(g.id, c.motor_id);
            assert_eq!(g.goal, c.rest_ticks);
        }
        let mut d = StimulusDistribution::ZERO;
        d.intensity[SiteId::PalmLateral.index()] = 1.0;
        let frames = schedule(&d, &chans).unwrap();
        let raised: Vec<_> = frames
            .iter()
            .zip(&chans)
            .filter(|(f, c)| decode_goal_write(f).unwrap().goal != c.rest_ticks)
            .map(|(f, c)| (decode_goal_write(f).unwrap(), *c))
            .collect();
        assert_eq!(raised.len(), 1);
        assert_eq!(raised[0].0.goal, raised[0].1.rest_ticks + raised[0].1.span_ticks);
        assert_eq!(raised[0].0.id, chans[SiteId::PalmLateral.index()].motor_id);
    }

    #[test]
    fn schedule_rejects_bad_channel_sets() {
        let mut chans = default_channels();
        chans[3].motor_id = chans[0].motor_id;
        assert!(matches!(
            schedule(&StimulusDistribution::ZERO, &chans),
            Err(BusError::Config(_))
        ));
        let chans = default_channels();
        assert!(schedule(&StimulusDistribution::ZERO, &chans[..6]).is_err());
        let mut chans = default_channels();
        chans[2].span_ticks = 0;
        assert!(schedule(&StimulusDistribution::ZERO, &chans).is_err());
    }
}
