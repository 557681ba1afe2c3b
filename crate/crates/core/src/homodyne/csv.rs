//! Line-oriented session dumps: `index,kind,bit,raw,calibrated`.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a dump
//! read back reproduces every value bit for bit. Empty fields stand for an
//! absent bit (vacuum records) or a missing calibration.

use std::io::{self, BufRead, Write};

use super::{PulseKind, PulseRecord};
use crate::error::{Error, Result};

pub const SESSION_CSV_HEADER: &str = "index,kind,bit,raw,calibrated";

pub fn write_session_csv<W: Write>(records: &[PulseRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{SESSION_CSV_HEADER}")?;
    for r in records {
        let bit = match r.alice_bit {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        write!(out, "{},{},{},{:?},", r.index, r.kind.as_str(), bit, r.raw)?;
        match r.calibrated {
            Some(c) => writeln!(out, "{c:?}")?,
            None => writeln!(out)?,
        }
    }
    out.flush()
}

pub fn read_session_csv<R: BufRead>(input: R) -> Result<Vec<PulseRecord>> {
    let mut records = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        if n == 0 {
            if line.trim() != SESSION_CSV_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    reason: format!("expected header `{SESSION_CSV_HEADER}`"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_line(&line).map_err(|reason| Error::Parse {
            line: line_no,
            reason,
        })?);
    }
    Ok(records)
}

fn parse_line(line: &str) -> std::result::Result<PulseRecord, String> {
    let fields: Vec<&str> = line.trim_end().split(',').collect();
    let [index, kind, bit, raw, calibrated] = fields[..] else {
        return Err(format!("expected 5 fields, found {}", fields.len()));
    };
    let index = index
        .parse::<u64>()
        .map_err(|e| format!("index `{index}`: {e}"))?;
    let kind = match kind {
        "signal" => PulseKind::Signal,
        "vacuum" => PulseKind::Vacuum,
        other => return Err(format!("unknown kind `{other}`")),
    };
    let alice_bit = match (kind, bit) {
        (PulseKind::Signal, "1") => Some(true),
        (PulseKind::Signal, "0") => Some(false),
        (PulseKind::Vacuum, "") => None,
        (PulseKind::Signal, b) => return Err(format!("signal record needs bit 0/1, got `{b}`")),
        (PulseKind::Vacuum, b) => return Err(format!("vacuum record carries a bit `{b}`")),
    };
    let raw = raw.parse::<f64>().map_err(|e| format!("raw `{raw}`: {e}"))?;
    let calibrated = if calibrated.is_empty() {
        None
    } else {
        Some(
            calibrated
                .parse::<f64>()
                .map_err(|e| format!("calibrated `{calibrated}`: {e}"))?,
        )
    };
    Ok(PulseRecord {
        index,
        kind,
        alice_bit,
        raw,
        calibrated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record_strategy() -> impl Strategy<Value = PulseRecord> {
        (
            any::<u64>(),
            proptest::option::of(any::<bool>()),
            any::<f64>().prop_filter("finite", |x| x.is_finite()),
            proptest::option::of(any::<f64>().prop_filter("finite", |x| x.is_finite())),
        )
            .prop_map(|(index, bit, raw, calibrated)| PulseRecord {
                index,
                kind: if bit.is_some() { PulseKind::Signal } else { PulseKind::Vacuum },
                alice_bit: bit,
                raw,
                calibrated,
            })
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(records in proptest::collection::vec(record_strategy(), 0..50)) {
            let mut buf = Vec::new();
            write_session_csv(&records, &mut buf).unwrap();
            let back = read_session_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), records.len());
            for (a, b) in records.iter().zip(&back) {
                prop_assert_eq!(a.index, b.index);
                prop_assert_eq!(a.alice_bit, b.alice_bit);
                prop_assert_eq!(a.raw.to_bits(), b.raw.to_bits());
                prop_assert_eq!(a.calibrated.map(f64::to_bits), b.calibrated.map(f64::to_bits));
            }
        }
    }

    #[test]
    fn layout() {
        let recs = [
            PulseRecord::signal(0, true, 0.5),
            PulseRecord { calibrated: Some(-0.25), ..PulseRecord::vacuum(1, 0.1) },
        ];
        let mut buf = Vec::new();
        write_session_csv(&recs, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "index,kind,bit,raw,calibrated\n0,signal,1,0.5,\n1,vacuum,,0.1,-0.25\n"
        );
    }

    #[test]
    fn malformed_lines_report_position() {
        let bad = "index,kind,bit,raw,calibrated\n0,signal,1,0.5,\n1,vacuum,1,0.1,\n";
        match read_session_csv(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_session_csv("wrong header\n".as_bytes()).is_err());
        assert!(read_session_csv("index,kind,bit,raw,calibrated\n0,signal,1\n".as_bytes()).is_err());
    }
}
