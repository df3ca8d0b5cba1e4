use std::io::{BufRead, Read, Write};

use crate::error::{contract, Error, Result};

/// One committed single-coordinate write.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WriteRecord {
    /// serialization index
    pub t: u64,
    pub coord: usize,
    pub delta: f64,
    /// estimated read delay, in writes
    pub staleness: u64,
    pub thread: usize,
}

/// Per-write trajectory record, ordered by serialization index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLog {
    pub records: Vec<WriteRecord>,
}

pub const LOG_HEADER: &str = "t,coord,delta,staleness,thread";

impl TrajectoryLog {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Merge per-thread buffers into one log sorted by `t`.
    pub fn merge(parts: Vec<Vec<WriteRecord>>) -> Self {
        let mut records: Vec<WriteRecord> = parts.into_iter().flatten().collect();
        records.sort_by_key(|r| r.t);
        TrajectoryLog { records }
    }

    /// Replay the deltas onto `x0`.
    pub fn replay(&self, x0: &[f64]) -> Vec<f64> {
        let mut x = x0.to_vec();
        for r in &self.records {
            x[r.coord] += r.delta;
        }
        x
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{LOG_HEADER}")?;
        for r in &self.records {
            // `{}` on f64 prints the shortest string that parses back exactly
            writeln!(
                out,
                "{},{},{},{},{}",
                r.t, r.coord, r.delta, r.staleness, r.thread
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut records = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if lineno == 0 {
                if line != LOG_HEADER {
                    return Err(Error::Parse {
                        line: 1,
                        msg: format!("expected header `{LOG_HEADER}`"),
                    });
                }
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad("expected 5 fields"));
            }
            records.push(WriteRecord {
                t: f[0].parse().map_err(|_| bad("bad t"))?,
                coord: f[1].parse().map_err(|_| bad("bad coord"))?,
                delta: f[2].parse().map_err(|_| bad("bad delta"))?,
                staleness: f[3].parse().map_err(|_| bad("bad staleness"))?,
                thread: f[4].parse().map_err(|_| bad("bad thread"))?,
            });
        }
        Ok(TrajectoryLog { records })
    }
}

/// Mean of the per-write staleness estimates: the plug-in estimate of the
/// worst-case expected delay.
pub fn measure_tau(log: &TrajectoryLog) -> Result<f64> {
    if log.is_empty() {
        return contract("cannot measure delay on an empty log");
    }
    let sum: f64 = log.records.iter().map(|r| r.staleness as f64).sum();
    Ok(sum / log.len() as f64)
}

/// Full iterate after `t` writes.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: u64,
    pub values: Vec<f64>,
}

/// Binary snapshot stream: per record `t: u64 LE`, `dim: u64 LE`, then
/// `dim` little-endian f64 values.
pub fn write_snapshots<W: Write>(snaps: &[Snapshot], mut out: W) -> Result<()> {
    for s in snaps {
        out.write_all(&s.t.to_le_bytes())?;
        out.write_all(&(s.values.len() as u64).to_le_bytes())?;
        for v in &s.values {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_snapshots<R: Read>(mut input: R) -> Result<Vec<Snapshot>> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    let mut pos = 0;
    let take8 = |pos: &mut usize| -> Result<[u8; 8]> {
        let end = *pos + 8;
        let chunk = buf
            .get(*pos..end)
            .ok_or_else(|| Error::Format("truncated snapshot stream".into()))?;
        *pos = end;
        Ok(chunk.try_into().expect("8 bytes"))
    };
    let mut out = Vec::new();
    while pos < buf.len() {
        let t = u64::from_le_bytes(take8(&mut pos)?);
        let dim = u64::from_le_bytes(take8(&mut pos)?) as usize;
        let mut values = Vec::with_capacity(dim.min(1 << 24));
        for _ in 0..dim {
            values.push(f64::from_le_bytes(take8(&mut pos)?));
        }
        out.push(Snapshot { t, values });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: u64, staleness: u64) -> WriteRecord {
        WriteRecord {
            t,
            coord: (t % 3) as usize,
            delta: 0.1 * t as f64 - 1.0 / 3.0,
            staleness,
            thread: 1,
        }
    }

    #[test]
    fn tau_examples() {
        let zero = TrajectoryLog {
            records: (0..5).map(|t| rec(t, 0)).collect(),
        };
        assert_eq!(measure_tau(&zero).unwrap(), 0.0);
        let log = TrajectoryLog {
            records: vec![rec(0, 0), rec(1, 2), rec(2, 4)],
        };
        assert_eq!(measure_tau(&log).unwrap(), 2.0);
        assert!(measure_tau(&TrajectoryLog::default()).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let log = TrajectoryLog {
            records: (0..50).map(|t| rec(t, t % 7)).collect(),
        };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let back = TrajectoryLog::read_csv(&buf[..]).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn csv_rejects_bad_rows() {
        let text = format!("{LOG_HEADER}\n0,1,0.5,0,0\n1,x,0.5,0,0\n");
        match TrajectoryLog::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let snaps = vec![
            Snapshot {
                t: 0,
                values: vec![1.0, -2.5],
            },
            Snapshot {
                t: 100,
                values: vec![f64::MIN_POSITIVE, 3.0],
            },
        ];
        let mut buf = Vec::new();
        write_snapshots(&snaps, &mut buf).unwrap();
        assert_eq!(read_snapshots(&buf[..]).unwrap(), snaps);
        assert!(read_snapshots(&buf[..buf.len() - 1]).is_err());
    }
}
