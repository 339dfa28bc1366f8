use std::fmt;
use std::io::{self, Write};

/// One line of the event trace: `cycle,unit,op,location,bytes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub cycle: u64,
    pub unit: &'static str,
    pub op: &'static str,
    pub loc: String,
    pub bytes: u64,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{},{}", self.cycle, self.unit, self.op, self.loc, self.bytes)
    }
}

/// Event sink. Disabled traces drop events without formatting them.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    enabled: bool,
    events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new(enabled: bool) -> Self {
        Trace {
            enabled,
            events: Vec::new(),
        }
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    #[inline]
    pub fn emit(&mut self, cycle: u64, unit: &'static str, op: &'static str, loc: impl FnOnce() -> String, bytes: u64) {
        if self.enabled {
            self.events.push(TraceEvent {
                cycle,
                unit,
                op,
                loc: loc(),
                bytes,
            });
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn truncate(&mut self, len: usize) {
        self.events.truncate(len);
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.events {
            writeln!(w, "{e}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("trace is ascii")
    }
}

pub fn parse_line(line: &str) -> Option<(u64, String, String, String, u64)> {
    let mut parts = line.splitn(5, ',');
    let cycle = parts.next()?.parse().ok()?;
    let unit = parts.next()?.to_owned();
    let op = parts.next()?.to_owned();
    let rest = parts.next()?.to_owned();
    let bytes = parts.next()?.parse().ok()?;
    Some((cycle, unit, op, rest, bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disabled_trace_is_empty() {
        let mut t = Trace::new(false);
        t.emit(1, "dram", "rd", || "x".into(), 4);
        assert!(t.events().is_empty());
    }

    #[test]
    fn line_format_round_trips() {
        let mut t = Trace::new(true);
        t.emit(7, "fsram", "rd", || "bank3".into(), 1);
        let text = t.to_text();
        assert_eq!(text, "7,fsram,rd,bank3,1\n");
        assert_eq!(parse_line(text.trim()), Some((7, "fsram".into(), "rd".into(), "bank3".into(), 1)));
    }
}
