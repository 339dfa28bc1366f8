use serde::{Deserialize, Serialize};

/// How the window moved to reach a position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shift {
    /// First position: the whole window is loaded.
    Start,
    /// Rightward step on the first row, before any reuse state exists.
    Front,
    Right,
    Left,
    /// Move down to the next row; the window keeps its columns.
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingStep {
    pub y: usize,
    pub x: usize,
    pub shift: Shift,
}

/// Serpentine traversal: row 0 left to right, then alternating directions.
pub fn schedule_ring(out_h: usize, out_w: usize) -> Vec<RingStep> {
    let mut steps = Vec::with_capacity(out_h * out_w);
    for y in 0..out_h {
        let rightward = y % 2 == 0;
        for i in 0..out_w {
            let x = if rightward { i } else { out_w - 1 - i };
            let shift = match (y, i) {
                (0, 0) => Shift::Start,
                (_, 0) => Shift::Up,
                (0, _) => Shift::Front,
                _ if rightward => Shift::Right,
                _ => Shift::Left,
            };
            steps.push(RingStep { y, x, shift });
        }
    }
    steps
}

/// Row-major order used by the 1x1 dataflow (no window to preserve).
pub fn schedule_raster(out_h: usize, out_w: usize) -> Vec<RingStep> {
    let mut steps = Vec::with_capacity(out_h * out_w);
    for y in 0..out_h {
        for x in 0..out_w {
            let shift = if y == 0 && x == 0 { Shift::Start } else { Shift::Front };
            steps.push(RingStep { y, x, shift });
        }
    }
    steps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coords(s: &[RingStep]) -> Vec<(usize, usize)> {
        s.iter().map(|r| (r.y, r.x)).collect()
    }

    #[test]
    fn three_by_three() {
        let s = schedule_ring(3, 3);
        assert_eq!(
            coords(&s),
            vec![(0, 0), (0, 1), (0, 2), (1, 2), (1, 1), (1, 0), (2, 0), (2, 1), (2, 2)]
        );
        let shifts: Vec<_> = s.iter().map(|r| r.shift).collect();
        use Shift::*;
        assert_eq!(shifts, vec![Start, Front, Front, Up, Left, Left, Up, Right, Right]);
    }

    #[test]
    fn small_cases() {
        assert_eq!(coords(&schedule_ring(1, 4)), vec![(0, 0), (0, 1), (0, 2), (0, 3)]);
        assert_eq!(coords(&schedule_ring(2, 2)), vec![(0, 0), (0, 1), (1, 1), (1, 0)]);
    }
}
