//! Per-column sliding window driven by the ring schedule.

use crate::sim::counters::SimCounters;
use crate::sim::reuse::ReuseModule;
use crate::sim::ring::{RingStep, Shift};

/// Storage behind a column: returns real pixels and counts the access.
pub(crate) trait PixelSource {
    fn fetch(&self, y: usize, x: usize, c: &mut SimCounters) -> i8;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct StepStats {
    /// Storage reads issued for this step.
    pub reads: u64,
    /// Left/right step whose entering pixels are all real.
    pub steady: bool,
}

pub(crate) struct WindowEngine {
    k: usize,
    s: usize,
    p: usize,
    in_h: usize,
    in_w: usize,
    window: Vec<i8>,
    y0: isize,
    x0: isize,
    reuse: Option<ReuseModule>,
}

impl WindowEngine {
    pub fn new(k: usize, s: usize, p: usize, in_h: usize, in_w: usize, reuse: Option<ReuseModule>) -> Self {
        WindowEngine {
            k,
            s,
            p,
            in_h,
            in_w,
            window: vec![0; k * k],
            y0: 0,
            x0: 0,
            reuse,
        }
    }

    pub fn window(&self) -> &[i8] {
        &self.window
    }

    fn real(&self, y: isize, x: isize) -> bool {
        y >= 0 && x >= 0 && (y as usize) < self.in_h && (x as usize) < self.in_w
    }

    fn load(&self, y: isize, x: isize, src: &dyn PixelSource, c: &mut SimCounters, st: &mut StepStats) -> i8 {
        if self.real(y, x) {
            st.reads += 1;
            src.fetch(y as usize, x as usize, c)
        } else {
            0
        }
    }

    /// Rows below this index of an entering column are served by the reuse
    /// registers on left/right steps.
    fn reused_rows(&self) -> usize {
        self.k - self.s.min(self.k)
    }

    /// Moves the window to `step` (global output coordinates).
    pub fn step(&mut self, step: RingStep, src: &dyn PixelSource, c: &mut SimCounters) -> StepStats {
        let (k, s) = (self.k, self.s);
        let mut st = StepStats::default();
        let ny = (step.y * s) as isize - self.p as isize;
        let nx = (step.x * s) as isize - self.p as isize;
        if k == 1 || step.shift == Shift::Start {
            self.y0 = ny;
            self.x0 = nx;
            for i in 0..k {
                for j in 0..k {
                    self.window[i * k + j] = self.load(ny + i as isize, nx + j as isize, src, c, &mut st);
                }
            }
            return st;
        }
        match step.shift {
            Shift::Up => {
                debug_assert_eq!(nx, self.x0);
                for i in 0..k - s.min(k) {
                    for j in 0..k {
                        self.window[i * k + j] = self.window[(i + s) * k + j];
                    }
                }
                self.y0 = ny;
                for i in k - s.min(k)..k {
                    for j in 0..k {
                        self.window[i * k + j] = self.load(ny + i as isize, nx + j as isize, src, c, &mut st);
                    }
                }
            }
            Shift::Front | Shift::Right | Shift::Left => {
                let rightward = step.shift != Shift::Left;
                debug_assert_eq!(nx, if rightward { self.x0 + s as isize } else { self.x0 - s as isize });
                // leaving columns feed the reuse registers for the next row
                let leaving: Vec<usize> = if rightward { (0..s).collect() } else { (k - s..k).collect() };
                if let Some(reuse) = self.reuse.as_mut() {
                    for &j in &leaving {
                        let x = self.x0 + j as isize;
                        for i in s..k {
                            let y = self.y0 + i as isize;
                            if y >= 0 && x >= 0 && (y as usize) < self.in_h && (x as usize) < self.in_w {
                                reuse.write(i - s, y as usize, x as usize, self.window[i * k + j], c);
                            }
                        }
                    }
                }
                let mut next = vec![0i8; k * k];
                for i in 0..k {
                    for j in 0..k {
                        let src_j = if rightward { j + s } else { j.wrapping_sub(s) };
                        if src_j < k {
                            next[i * k + j] = self.window[i * k + src_j];
                        }
                    }
                }
                self.x0 = nx;
                let entering: Vec<usize> = if rightward { (k - s..k).collect() } else { (0..s).collect() };
                let use_regs = step.shift != Shift::Front && self.reuse.is_some();
                let mut all_real = true;
                for &j in &entering {
                    let x = nx + j as isize;
                    for i in 0..k {
                        let y = ny + i as isize;
                        if !self.real(y, x) {
                            all_real = false;
                            next[i * k + j] = 0;
                            continue;
                        }
                        let hit = if use_regs && i < self.reused_rows() {
                            self.reuse.as_ref().and_then(|r| r.read(i, y as usize, x as usize, c))
                        } else {
                            None
                        };
                        next[i * k + j] = match hit {
                            Some(v) => v,
                            None => {
                                st.reads += 1;
                                src.fetch(y as usize, x as usize, c)
                            }
                        };
                    }
                }
                self.window = next;
                st.steady = step.shift != Shift::Front && all_real;
            }
            Shift::Start => unreachable!(),
        }
        st
    }
}
