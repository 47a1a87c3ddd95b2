//! Hardware-free stand-in for the seven winding motors.
//!
//! Each motor runs in position mode and slews toward its goal no faster than
//! its configured rate. The device is write-only: no status packets.

use super::{decode_goal_write, BusError, BusFrame, ByteSink, ChannelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimMotorState {
    pub position_ticks: i32,
    pub goal_ticks: i32,
    /// Time up to which motion has been integrated.
    pub t_last: u64,
}

#[derive(Debug, Clone)]
pub struct SimMotor {
    pub config: ChannelConfig,
    pub state: SimMotorState,
}

impl SimMotor {
    /// A motor resting at `config.rest_ticks` at time `t0`.
    pub fn new(config: ChannelConfig, t0: u64) -> Self {
        Self {
            config,
            state: SimMotorState {
                position_ticks: config.rest_ticks,
                goal_ticks: config.rest_ticks,
                t_last: t0,
            },
        }
    }

    /// Integrates motion up to `now` toward the current goal.
    ///
    /// The step is `floor(rate * dt)`. When that floor is zero while the
    /// motor is still short of its goal, `t_last` is left in place so the
    /// elapsed time keeps accumulating instead of being lost.
    pub fn advance(&mut self, now: u64) {
        let s = &mut self.state;
        if now <= s.t_last {
            return;
        }
        let dt = now - s.t_last;
        let budget = u64::from(self.config.max_ticks_per_s) as u128 * dt as u128 / 1_000_000;
        let gap = i64::from(s.goal_ticks) - i64::from(s.position_ticks);
        if gap == 0 {
            s.t_last = now;
            return;
        }
        if budget == 0 {
            return;
        }
        let step = (gap.unsigned_abs() as u128).min(budget) as i64;
        s.position_ticks = (i64::from(s.position_ticks) + step * gap.signum()) as i32;
        s.t_last = now;
    }

    /// Applies a goal-write frame at `now`. Frames for other ids are ignored.
    /// A frame that fails validation leaves the state untouched.
    pub fn step(&mut self, frame: &BusFrame, now: u64) -> Result<(), BusError> {
        let write = decode_goal_write(frame)?;
        if write.id != self.config.motor_id {
            return Ok(());
        }
        self.advance(now);
        self.state.goal_ticks = write.goal;
        Ok(())
    }
}

/// Functional form of [`SimMotor::step`].
pub fn sim_step(
    motor: &SimMotor,
    frame: &BusFrame,
    now: u64,
) -> Result<SimMotor, BusError> {
    let mut next = motor.clone();
    next.step(frame, now)?;
    next.advance(now);
    Ok(next)
}

/// Seven simulated motors addressed by id. Single owner: whoever schedules
/// frames steps the device.
#[derive(Debug, Clone)]
pub struct SimDevice {
    motors: Vec<SimMotor>,
    rejected: u64,
}

impl SimDevice {
    pub fn new(channels: &[ChannelConfig], t0: u64) -> Self {
        Self {
            motors: channels.iter().map(|c| SimMotor::new(*c, t0)).collect(),
            rejected: 0,
        }
    }

    pub fn motors(&self) -> &[SimMotor] {
        &self.motors
    }

    pub fn positions(&self) -> Vec<i32> {
        self.motors.iter().map(|m| m.state.position_ticks).collect()
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    pub fn advance(&mut self, now: u64) {
        for m in &mut self.motors {
            m.advance(now);
        }
    }
}

impl ByteSink for SimDevice {
    fn send(&mut self, frame: &BusFrame, now_us: u64) -> Result<(), BusError> {
        let write = match decode_goal_write(frame) {
            Ok(w) => w,
            Err(e) => {
                self.rejected += 1;
                return Err(e);
            }
        };
        self.advance(now_us);
        for m in self.motors.iter_mut().filter(|m| m.config.motor_id == write.id) {
            m.state.goal_ticks = write.goal;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bus::encode_goal_write;

    fn motor(rate: u32) -> SimMotor {
        SimMotor::new(
            ChannelConfig {
                motor_id: 4,
                rest_ticks: 0,
                span_ticks: 1000,
                max_ticks_per_s: rate,
            },
            0,
        )
    }

    #[test]
    fn goal_equal_position_is_fixed_point() {
        let m = motor(500);
        let f = encode_goal_write(4, 0).unwrap();
        let next = sim_step(&m, &f, 1_000_000).unwrap();
        assert_eq!(next.state.position_ticks, 0);
    }

    #[test]
    fn rate_limit_binds() {
        let m = motor(500);
        let f = encode_goal_write(4, 1000).unwrap();
        let after_goal = sim_step(&m, &f, 0).unwrap();
        let mut later = after_goal.clone();
        later.advance(1_000_000);
        assert_eq!(later.state.position_ticks, 500);
        later.advance(2_000_000);
        assert_eq!(later.state.position_ticks, 1000);
        later.advance(3_000_000);
        assert_eq!(later.state.position_ticks, 1000);
    }

    #[test]
    fn corrupted_frame_leaves_state() {
        let m = motor(500);
        let mut bytes = encode_goal_write(4, 900).unwrap().into_bytes();
        let n = bytes.len();
        bytes[n - 2] ^= 0xFF;
        let err = sim_step(&m, &BusFrame::from_raw(bytes), 10).unwrap_err();
        assert!(matches!(err, BusError::BadCrc { .. }));
        assert_eq!(m.state, motor(500).state);
    }

    #[test]
    fn small_ticks_accumulate() {
        // 50 ticks/s stepped every 1 ms: floor(0.05) = 0 each call,
        // but time accumulates until a whole tick is earned
        let mut m = motor(50);
        m.step(&encode_goal_write(4, 10).unwrap(), 0).unwrap();
        for ms in 1..=200u64 {
            m.advance(ms * 1000);
        }
        assert_eq!(m.state.position_ticks, 10);
    }

    #[test]
    fn other_ids_ignored() {
        let mut m = motor(500);
        m.step(&encode_goal_write(9, 700).unwrap(), 0).unwrap();
        assert_eq!(m.state.goal_ticks, 0);
    }

    #[test]
    fn device_routes_by_id() {
        let chans = crate::bus::default_channels();
        let mut dev = SimDevice::new(&chans, 0);
        dev.send(&encode_goal_write(3, 2100).unwrap(), 0).unwrap();
        dev.advance(1_000_000);
        let pos = dev.positions();
        assert_eq!(pos[2], 2100);
        assert_eq!(pos[0], 2048);
        let bad = BusFrame::from_raw(vec![0xFF; 12]);
        assert!(dev.send(&bad, 1_000_001).is_err());
        assert_eq!(dev.rejected(), 1);
    }
}
