use serde::{Deserialize, Serialize};
use std::fmt;

/// Body parts that receive status words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyPart {
    BodyDirection,
    Head,
    LeftHand,
    RightHand,
}

impl BodyPart {
    pub const ALL: [BodyPart; 4] = [BodyPart::BodyDirection, BodyPart::Head, BodyPart::LeftHand, BodyPart::RightHand];

    pub fn name(self) -> &'static str {
        match self {
            BodyPart::BodyDirection => "body_direction",
            BodyPart::Head => "head",
            BodyPart::LeftHand => "left_hand",
            BodyPart::RightHand => "right_hand",
        }
    }

    pub fn vocabulary(self) -> &'static [StatusWord] {
        match self {
            BodyPart::BodyDirection => &COMPASS,
            BodyPart::Head => &HEAD,
            BodyPart::LeftHand | BodyPart::RightHand => &HAND,
        }
    }

    pub fn accepts(self, word: StatusWord) -> bool {
        self.vocabulary().contains(&word)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatusWord {
    // body direction
    East,
    North,
    West,
    South,
    // head
    Forward,
    Leftward,
    Rightward,
    Upward,
    Downward,
    UpLeft,
    UpRight,
    DownLeft,
    DownRight,
    // hands
    Front,
    FrontLeft,
    Left,
    BackLeft,
    Back,
    BackRight,
    Right,
    FrontRight,
    RaiseUp,
}

pub const COMPASS: [StatusWord; 4] = [StatusWord::East, StatusWord::North, StatusWord::West, StatusWord::South];

pub const HEAD: [StatusWord; 9] = [
    StatusWord::Forward,
    StatusWord::Leftward,
    StatusWord::Rightward,
    StatusWord::Upward,
    StatusWord::Downward,
    StatusWord::UpLeft,
    StatusWord::UpRight,
    StatusWord::DownLeft,
    StatusWord::DownRight,
];

pub const HAND: [StatusWord; 9] = [
    StatusWord::Front,
    StatusWord::FrontLeft,
    StatusWord::Left,
    StatusWord::BackLeft,
    StatusWord::Back,
    StatusWord::BackRight,
    StatusWord::Right,
    StatusWord::FrontRight,
    StatusWord::RaiseUp,
];

/// Horizontal hand sectors, clockwise from front in 45° steps.
pub const HAND_SECTORS: [StatusWord; 8] = [
    StatusWord::Front,
    StatusWord::FrontRight,
    StatusWord::Right,
    StatusWord::BackRight,
    StatusWord::Back,
    StatusWord::BackLeft,
    StatusWord::Left,
    StatusWord::FrontLeft,
];

impl StatusWord {
    pub fn as_str(self) -> &'static str {
        use StatusWord::*;
        match self {
            East => "east",
            North => "north",
            West => "west",
            South => "south",
            Forward => "forward",
            Leftward => "leftward",
            Rightward => "rightward",
            Upward => "upward",
            Downward => "downward",
            UpLeft => "up-left",
            UpRight => "up-right",
            DownLeft => "down-left",
            DownRight => "down-right",
            Front => "front",
            FrontLeft => "front-left",
            Left => "left",
            BackLeft => "back-left",
            Back => "back",
            BackRight => "back-right",
            Right => "right",
            FrontRight => "front-right",
            RaiseUp => "raise-up",
        }
    }

    /// Position within the owning part's vocabulary.
    pub fn index_in(self, part: BodyPart) -> Option<usize> {
        part.vocabulary().iter().position(|w| *w == self)
    }

    /// Compass heading (radians, 0 = +Z, π/2 = +X) at the centre of a body-direction sector.
    pub fn compass_azimuth(self) -> Option<f64> {
        use std::f64::consts::{FRAC_PI_2, PI};
        match self {
            StatusWord::North => Some(0.0),
            StatusWord::East => Some(FRAC_PI_2),
            StatusWord::South => Some(PI),
            StatusWord::West => Some(-FRAC_PI_2),
            _ => None,
        }
    }

    /// Body-frame azimuth at the centre of a horizontal hand sector.
    pub fn hand_azimuth(self) -> Option<f64> {
        HAND_SECTORS
            .iter()
            .position(|w| *w == self)
            .map(|i| i as f64 * std::f64::consts::FRAC_PI_4)
    }
}

impl fmt::Display for StatusWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_sizes() {
        assert_eq!(BodyPart::BodyDirection.vocabulary().len(), 4);
        assert_eq!(BodyPart::Head.vocabulary().len(), 9);
        assert_eq!(BodyPart::LeftHand.vocabulary().len(), 9);
    }

    #[test]
    fn serde_names_match_display() {
        for part in BodyPart::ALL {
            for w in part.vocabulary() {
                assert_eq!(serde_json::to_string(w).unwrap(), format!("\"{}\"", w.as_str()));
            }
        }
        assert_eq!(serde_json::to_string(&BodyPart::LeftHand).unwrap(), "\"left_hand\"");
    }
}
