//! Index layout of the 68-point facial landmark convention.

use std::ops::RangeInclusive;

#[derive(Debug, Clone)]
pub struct Polyline {
    pub name: &'static str,
    pub points: RangeInclusive<usize>,
    pub closed: bool,
}

impl Polyline {
    pub fn len(&self) -> usize {
        self.points.end() - self.points.start() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub const JAW: RangeInclusive<usize> = 0..=16;
pub const RIGHT_BROW: RangeInclusive<usize> = 17..=21;
pub const LEFT_BROW: RangeInclusive<usize> = 22..=26;
pub const NOSE_BRIDGE: RangeInclusive<usize> = 27..=30;
pub const NOSE_BASE: RangeInclusive<usize> = 31..=35;
pub const RIGHT_EYE: RangeInclusive<usize> = 36..=41;
pub const LEFT_EYE: RangeInclusive<usize> = 42..=47;
pub const OUTER_LIP: RangeInclusive<usize> = 48..=59;
pub const INNER_LIP: RangeInclusive<usize> = 60..=67;

pub fn polylines() -> [Polyline; 9] {
    let p = |name, points, closed| Polyline {
        name,
        points,
        closed,
    };
    [
        p("jaw", JAW, false),
        p("right_brow", RIGHT_BROW, false),
        p("left_brow", LEFT_BROW, false),
        p("nose_bridge", NOSE_BRIDGE, false),
        p("nose_base", NOSE_BASE, false),
        p("right_eye", RIGHT_EYE, true),
        p("left_eye", LEFT_EYE, true),
        p("outer_lip", OUTER_LIP, true),
        p("inner_lip", INNER_LIP, true),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polylines_partition_all_points() {
        let mut seen = [false; 68];
        for l in polylines() {
            for i in l.points {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn lip_point_count() {
        let lips: usize = polylines()
            .iter()
            .filter(|l| l.name.contains("lip"))
            .map(Polyline::len)
            .sum();
        assert_eq!(lips, 20);
    }
}
