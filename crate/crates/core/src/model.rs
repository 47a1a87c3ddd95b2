//! Domain types and the sensing-to-stimulus math.
//!
//! Grip is derived from two flexion angles (thumb first joint, middle finger
//! second joint); the remaining fingers are assumed to follow the middle
//! finger. During a clasp the finger-group sites are driven by one's own grip
//! and the palm-group sites by the opponent's grip.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
    #[error("invalid mapping parameters: {0}")]
    InvalidParams(String),
}

/// Flexion angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointAngles {
    /// Thumb first (interphalangeal) joint.
    pub thumb_ip_deg: f64,
    /// Middle finger second (proximal interphalangeal) joint.
    pub middle_pip_deg: f64,
}

impl JointAngles {
    pub fn new(thumb_ip_deg: f64, middle_pip_deg: f64) -> Self {
        Self {
            thumb_ip_deg,
            middle_pip_deg,
        }
    }
}

/// Per-joint open/closed angles plus the thumb/middle blend weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripCalibration {
    pub thumb_open_deg: f64,
    pub thumb_closed_deg: f64,
    pub middle_open_deg: f64,
    pub middle_closed_deg: f64,
    pub thumb_weight: f64,
}

impl Default for GripCalibration {
    fn default() -> Self {
        Self {
            thumb_open_deg: 0.0,
            thumb_closed_deg: 60.0,
            middle_open_deg: 0.0,
            middle_closed_deg: 90.0,
            thumb_weight: 0.5,
        }
    }
}

impl GripCalibration {
    pub fn validate(&self) -> Result<(), ModelError> {
        let all = [
            self.thumb_open_deg,
            self.thumb_closed_deg,
            self.middle_open_deg,
            self.middle_closed_deg,
            self.thumb_weight,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidCalibration(
                "non-finite calibration value".into(),
            ));
        }
        if self.thumb_open_deg == self.thumb_closed_deg {
            return Err(ModelError::InvalidCalibration(
                "thumb open and closed angles coincide".into(),
            ));
        }
        if self.middle_open_deg == self.middle_closed_deg {
            return Err(ModelError::InvalidCalibration(
                "middle open and closed angles coincide".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.thumb_weight) {
            return Err(ModelError::InvalidCalibration(format!(
                "thumb_weight {} outside [0, 1]",
                self.thumb_weight
            )));
        }
        Ok(())
    }

    /// Angles that produce `grip` when both joints share the same flexion.
    ///
    /// Used where only a grip value is available (console input) but a
    /// sensor sample must still carry joint angles.
    pub fn angles_for_grip(&self, grip: Grip) -> JointAngles {
        let f = grip.value();
        JointAngles {
            thumb_ip_deg: self.thumb_open_deg + f * (self.thumb_closed_deg - self.thumb_open_deg),
            middle_pip_deg: self.middle_open_deg
                + f * (self.middle_closed_deg - self.middle_open_deg),
        }
    }
}

/// Normalized grip, 0 = open hand, 1 = full flexion.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Grip(f64);

impl Grip {
    pub const ZERO: Grip = Grip(0.0);
    pub const FULL: Grip = Grip(1.0);

    pub fn new(value: f64) -> Result<Self, ModelError> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Grip(value))
        } else {
            Err(ModelError::InvalidInput(format!(
                "grip {value} outside [0, 1]"
            )))
        }
    }

    /// Clamps into [0, 1]; NaN maps to 0.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Grip(0.0)
        } else {
            Grip(value.clamp(0.0, 1.0))
        }
    }

    pub fn from_milli(milli: u16) -> Self {
        Grip(f64::from(milli.min(1000)) / 1000.0)
    }

    /// Rounded to the nearest thousandth, half away from zero.
    pub fn to_milli(self) -> u16 {
        (self.0 * 1000.0).round() as u16
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Converts joint angles into a normalized grip.
pub fn grip_from_angles(angles: JointAngles, calib: &GripCalibration) -> Result<Grip, ModelError> {
    calib.validate()?;
    if !angles.thumb_ip_deg.is_finite() || !angles.middle_pip_deg.is_finite() {
        return Err(ModelError::InvalidInput("non-finite joint angle".into()));
    }
    let flexion = |theta: f64, open: f64, closed: f64| ((theta - open) / (closed - open)).clamp(0.0, 1.0);
    let f_thumb = flexion(
        angles.thumb_ip_deg,
        calib.thumb_open_deg,
        calib.thumb_closed_deg,
    );
    let f_middle = flexion(
        angles.middle_pip_deg,
        calib.middle_open_deg,
        calib.middle_closed_deg,
    );
    let w = calib.thumb_weight;
    Ok(Grip::saturating(w * f_thumb + (1.0 - w) * f_middle))
}

/// The seven stimulation sites, in the fixed channel order used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SiteId {
    IndexMid,
    MiddleMid,
    RingMid,
    LittleMid,
    ThumbBase,
    PalmLateral,
    PalmCenter,
}

impl SiteId {
    pub const COUNT: usize = 7;

    pub const ALL: [SiteId; 7] = [
        SiteId::IndexMid,
        SiteId::MiddleMid,
        SiteId::RingMid,
        SiteId::LittleMid,
        SiteId::ThumbBase,
        SiteId::PalmLateral,
        SiteId::PalmCenter,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SiteId::IndexMid => "index_mid",
            SiteId::MiddleMid => "middle_mid",
            SiteId::RingMid => "ring_mid",
            SiteId::LittleMid => "little_mid",
            SiteId::ThumbBase => "thumb_base",
            SiteId::PalmLateral => "palm_lateral",
            SiteId::PalmCenter => "palm_center",
        }
    }

    /// Group membership under the given thumb-base assignment.
    pub fn group(self, thumb_base: SiteGroup) -> SiteGroup {
        match self {
            SiteId::IndexMid | SiteId::MiddleMid | SiteId::RingMid | SiteId::LittleMid => {
                SiteGroup::Finger
            }
            SiteId::ThumbBase => thumb_base,
            SiteId::PalmLateral | SiteId::PalmCenter => SiteGroup::Palm,
        }
    }
}

/// Finger sites follow one's own grip, palm sites follow the opponent's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SiteGroup {
    Finger,
    Palm,
}

impl fmt::Display for SiteGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SiteGroup::Finger => "finger",
            SiteGroup::Palm => "palm",
        })
    }
}

impl FromStr for SiteGroup {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "finger" => Ok(SiteGroup::Finger),
            "palm" => Ok(SiteGroup::Palm),
            other => Err(ModelError::InvalidParams(format!(
                "unknown site group {other:?}"
            ))),
        }
    }
}

/// Per-site intensities in [0, 1], indexed by [`SiteId`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StimulusDistribution {
    pub intensity: [f64; 7],
}

impl StimulusDistribution {
    pub const ZERO: StimulusDistribution = StimulusDistribution {
        intensity: [0.0; 7],
    };

    pub fn get(&self, site: SiteId) -> f64 {
        self.intensity[site.index()]
    }

    pub fn is_zero(&self) -> bool {
        self.intensity.iter().all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ContactPhase {
    #[default]
    Idle,
    Clasped,
    Released,
}

impl ContactPhase {
    pub fn as_u8(self) -> u8 {
        match self {
            ContactPhase::Idle => 0,
            ContactPhase::Clasped => 1,
            ContactPhase::Released => 2,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(ContactPhase::Idle),
            1 => Some(ContactPhase::Clasped),
            2 => Some(ContactPhase::Released),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ContactPhase::Idle => "idle",
            ContactPhase::Clasped => "clasped",
            ContactPhase::Released => "released",
        }
    }
}

impl fmt::Display for ContactPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ContactPhase {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "idle" => Ok(ContactPhase::Idle),
            "clasped" => Ok(ContactPhase::Clasped),
            "released" => Ok(ContactPhase::Released),
            other => Err(ModelError::InvalidInput(format!("unknown phase {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingParams {
    pub finger_gain: f64,
    pub palm_gain: f64,
    /// Clasp begins once both grips reach this value.
    pub contact_on: f64,
    /// Clasp ends once either grip falls to this value.
    pub contact_off: f64,
    /// Which group the thumb-base site belongs to.
    pub thumb_base_group: SiteGroup,
}

impl Default for MappingParams {
    fn default() -> Self {
        Self {
            finger_gain: 1.0,
            palm_gain: 1.0,
            contact_on: 0.2,
            contact_off: 0.1,
            thumb_base_group: SiteGroup::Finger,
        }
    }
}

impl MappingParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("finger_gain", self.finger_gain),
            ("palm_gain", self.palm_gain),
            ("contact_on", self.contact_on),
            ("contact_off", self.contact_off),
        ] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(ModelError::InvalidParams(format!(
                    "{name} = {v} outside [0, 1]"
                )));
            }
        }
        if self.contact_off >= self.contact_on {
            return Err(ModelError::InvalidParams(format!(
                "contact_off ({}) must be below contact_on ({})",
                self.contact_off, self.contact_on
            )));
        }
        Ok(())
    }
}

/// Advances the contact phase by one tick.
///
/// Idle -> Clasped once `min(own, opp) >= contact_on`; Clasped -> Released once
/// `min(own, opp) <= contact_off`; Released -> Idle once both grips are at or
/// below `contact_off`. Released therefore always lasts at least one tick and
/// no state is ever skipped.
pub fn update_phase(own: Grip, opp: Grip, prev: ContactPhase, p: &MappingParams) -> ContactPhase {
    let lo = own.value().min(opp.value());
    let hi = own.value().max(opp.value());
    match prev {
        ContactPhase::Idle if lo >= p.contact_on => ContactPhase::Clasped,
        ContactPhase::Clasped if lo <= p.contact_off => ContactPhase::Released,
        ContactPhase::Released if hi <= p.contact_off => ContactPhase::Idle,
        other => other,
    }
}

/// Maps both grips onto the seven sites. Zero outside the Clasped phase.
pub fn stimulus_distribution(
    own: Grip,
    opp: Grip,
    phase: ContactPhase,
    p: &MappingParams,
) -> StimulusDistribution {
    if phase != ContactPhase::Clasped {
        return StimulusDistribution::ZERO;
    }
    let finger = (p.finger_gain * own.value()).clamp(0.0, 1.0);
    let palm = (p.palm_gain * opp.value()).clamp(0.0, 1.0);
    let mut dist = StimulusDistribution::ZERO;
    for site in SiteId::ALL {
        dist.intensity[site.index()] = match site.group(p.thumb_base_group) {
            SiteGroup::Finger => finger,
            SiteGroup::Palm => palm,
        };
    }
    dist
}
