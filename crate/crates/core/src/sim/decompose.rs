use serde::{Deserialize, Serialize};

/// One (input channel, spatial segment) unit of work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Task {
    pub channel: usize,
    pub segment: usize,
}

/// Deals `n_channels x segments` tasks round-robin over `columns`.
/// Column loads differ by at most one task.
pub fn decompose_channels(n_channels: usize, segments: usize, columns: usize) -> Vec<Vec<Task>> {
    let columns = columns.max(1);
    let mut out = vec![Vec::new(); columns];
    let mut i = 0;
    for channel in 0..n_channels {
        for segment in 0..segments {
            out[i % columns].push(Task { channel, segment });
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loads(v: &[Vec<Task>]) -> Vec<usize> {
        v.iter().map(Vec::len).collect()
    }

    #[test]
    fn examples() {
        assert_eq!(loads(&decompose_channels(3, 16, 4)), vec![12; 4]);
        assert_eq!(loads(&decompose_channels(4, 1, 4)), vec![1; 4]);
        assert_eq!(loads(&decompose_channels(3, 1, 4)), vec![1, 1, 1, 0]);
    }
}
