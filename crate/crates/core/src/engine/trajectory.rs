use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::lattice::LatticeConfig;

/// One executed exchange: the bond `(i, i+1)` and the holding time that
/// preceded it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub bond: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub occupancy: Vec<u8>,
}

/// Timestamped snapshots from one run, optionally with the full event log.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub initial: LatticeConfig,
    pub t_start: f64,
    pub t_end: f64,
    pub snapshots: Vec<Snapshot>,
    /// Present when the run was event-resolved.
    pub events: Option<Vec<EventRecord>>,
    pub frozen: bool,
}

impl TrajectoryRecord {
    pub(crate) fn start(initial: LatticeConfig, t_start: f64, log_events: bool) -> Self {
        TrajectoryRecord {
            initial,
            t_start,
            t_end: t_start,
            snapshots: Vec::new(),
            events: log_events.then(Vec::new),
            frozen: false,
        }
    }

    pub(crate) fn push_snapshot(&mut self, time: f64, config: &LatticeConfig) {
        self.snapshots.push(Snapshot { time, occupancy: config.occupancy().to_vec() });
    }

    pub fn n_sites(&self) -> usize {
        self.initial.n_sites()
    }

    pub fn n_species(&self) -> usize {
        self.initial.n_species()
    }

    /// One row per snapshot: `time,label_0,...,label_{N-1}`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.n_sites();
        write!(out, "time")?;
        for i in 0..n {
            write!(out, ",s{i}")?;
        }
        writeln!(out)?;
        for snap in &self.snapshots {
            // `{:?}` prints the shortest representation that round-trips.
            write!(out, "{:?}", snap.time)?;
            for &label in &snap.occupancy {
                write!(out, ",{label}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Reads the snapshot rows written by [`write_csv`](Self::write_csv).
    pub fn read_csv_snapshots<R: BufRead>(input: R) -> Result<Vec<Snapshot>> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty trajectory file".into()))??;
        let n = header.split(',').count() - 1;
        let mut out = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let time = fields
                .next()
                .unwrap_or_default()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("time: {e}")))?;
            let occupancy = fields
                .map(|f| f.parse::<u8>().map_err(|e| Error::Parse(format!("label `{f}`: {e}"))))
                .collect::<Result<Vec<u8>>>()?;
            if occupancy.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: occupancy.len() });
            }
            out.push(Snapshot { time, occupancy });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let c = LatticeConfig::binary(&[1, 0, 0]).unwrap();
        let mut rec = TrajectoryRecord::start(c.clone(), 0.0, false);
        rec.push_snapshot(0.0, &c);
        rec.push_snapshot(0.1 + 0.2, &c);
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time,s0,s1,s2\n0.0,1,0,0\n"));
        let back = TrajectoryRecord::read_csv_snapshots(&buf[..]).unwrap();
        assert_eq!(back, rec.snapshots);
    }
}
