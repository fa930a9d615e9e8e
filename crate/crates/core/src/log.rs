//! Per-step trajectory records and their CSV representation.
//!
//! One header line, one row per step, then `#`-prefixed `key = value`
//! trailer lines carrying the gains and the run summary. Numbers are written
//! with 17 significant digits so a parsed log reproduces the run exactly.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const COLUMNS: [&str; 24] = [
    "t", "x", "y", "psi", "v", "p", "q", "theta", "p_r", "q_r", "psi_r", "s", "e_p", "e_q", "xi", "y1", "y2", "u1",
    "u2", "u", "omega", "v_d", "V", "Vdot",
];

/// One logged instant. `vdot` is `dV/dt` in rescaled time (physical ÷ `v_d`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LogRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v: f64,
    pub p: f64,
    pub q: f64,
    pub theta: f64,
    pub p_r: f64,
    pub q_r: f64,
    pub psi_r: f64,
    pub s: f64,
    pub e_p: f64,
    pub e_q: f64,
    pub xi: f64,
    pub y1: f64,
    pub y2: f64,
    pub u1: f64,
    pub u2: f64,
    pub u: f64,
    pub omega: f64,
    pub v_d: f64,
    pub lyap: f64,
    pub vdot: f64,
}

impl LogRecord {
    pub fn to_array(&self) -> [f64; 24] {
        [
            self.t, self.x, self.y, self.psi, self.v, self.p, self.q, self.theta, self.p_r, self.q_r, self.psi_r,
            self.s, self.e_p, self.e_q, self.xi, self.y1, self.y2, self.u1, self.u2, self.u, self.omega, self.v_d,
            self.lyap, self.vdot,
        ]
    }

    pub fn from_array(a: &[f64; 24]) -> Self {
        LogRecord {
            t: a[0],
            x: a[1],
            y: a[2],
            psi: a[3],
            v: a[4],
            p: a[5],
            q: a[6],
            theta: a[7],
            p_r: a[8],
            q_r: a[9],
            psi_r: a[10],
            s: a[11],
            e_p: a[12],
            e_q: a[13],
            xi: a[14],
            y1: a[15],
            y2: a[16],
            u1: a[17],
            u2: a[18],
            u: a[19],
            omega: a[20],
            v_d: a[21],
            lyap: a[22],
            vdot: a[23],
        }
    }

    /// Euclidean norm of `(e_p, e_q, ξ)`.
    pub fn error_norm(&self) -> f64 {
        (self.e_p * self.e_p + self.e_q * self.e_q + self.xi * self.xi).sqrt()
    }
}

/// Uniform-step record of a run plus `key = value` metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub dt: f64,
    pub records: Vec<LogRecord>,
    pub meta: Vec<(String, String)>,
}

impl TrajectoryLog {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, f: impl Fn(&LogRecord) -> f64) -> Vec<f64> {
        self.records.iter().map(f).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::with_capacity(24 * 25);
        writeln!(out, "{}", COLUMNS.join(","))?;
        for r in &self.records {
            line.clear();
            for (i, v) in r.to_array().iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                write!(line, "{v:.16e}").expect("writing to a String cannot fail");
            }
            writeln!(out, "{line}")?;
        }
        for (k, v) in &self.meta {
            writeln!(out, "# {k} = {v}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    /// Parses a log written by [`TrajectoryLog::write_csv`]. The trailer must
    /// contain `dt` and end with an `end = true` line, so a file cut short
    /// anywhere is rejected.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::MalformedLog("empty file".into()))??;
        if header.trim_end() != COLUMNS.join(",") {
            return Err(Error::MalformedLog(format!("unexpected header: {header}")));
        }
        let mut records = Vec::new();
        let mut meta = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let lineno = lineno + 2;
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::MalformedLog(format!("line {lineno}: trailer line without '='")))?;
                meta.push((k.trim().to_string(), v.trim().to_string()));
                continue;
            }
            if !meta.is_empty() {
                return Err(Error::MalformedLog(format!("line {lineno}: data row after trailer")));
            }
            let mut vals = [0.0; 24];
            let mut n = 0;
            for field in line.split(',') {
                if n == 24 {
                    n += 1;
                    break;
                }
                vals[n] = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::MalformedLog(format!("line {lineno}: bad number '{field}'")))?;
                n += 1;
            }
            if n != 24 {
                return Err(Error::MalformedLog(format!("line {lineno}: expected 24 fields")));
            }
            records.push(LogRecord::from_array(&vals));
        }
        let log_meta =
            |k: &str| meta.iter().rev().find(|(key, _): &&(String, String)| key == k).map(|(_, v)| v.clone());
        if log_meta("end").as_deref() != Some("true") {
            return Err(Error::MalformedLog("missing end-of-log trailer (file truncated?)".into()));
        }
        let dt: f64 = log_meta("dt")
            .ok_or_else(|| Error::MalformedLog("trailer lacks dt".into()))?
            .parse()
            .map_err(|_| Error::MalformedLog("dt is not a number".into()))?;
        if dt.is_nan() || dt <= 0.0 {
            return Err(Error::MalformedLog("dt must be positive".into()));
        }
        for w in records.windows(2) {
            let step = w[1].t - w[0].t;
            if (step - dt).abs() > 1e-9 * dt.max(w[1].t.abs()) + 1e-12 {
                return Err(Error::MalformedLog(format!("non-uniform time grid near t={}", w[0].t)));
            }
        }
        Ok(TrajectoryLog { dt, records, meta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(n: usize) -> TrajectoryLog {
        let records = (0..n)
            .map(|i| {
                let mut a = [0.0; 24];
                for (j, v) in a.iter_mut().enumerate() {
                    *v = (i as f64 * 0.37 + j as f64).sin() / 3.0;
                }
                a[0] = i as f64 * 0.001;
                LogRecord::from_array(&a)
            })
            .collect();
        TrajectoryLog { dt: 0.001, records, meta: vec![("dt".into(), "0.001".into()), ("end".into(), "true".into())] }
    }

    #[test]
    fn header_has_every_column() {
        let csv = sample(3).to_csv_string();
        let header = csv.lines().next().unwrap();
        assert_eq!(header.split(',').count(), 24);
        assert!(header.starts_with("t,x,y,psi,v,"));
        assert!(header.ends_with(",v_d,V,Vdot"));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let csv = sample(20).to_csv_string();
        // cut mid-row
        let cut = &csv[..csv.len() / 2];
        assert!(matches!(TrajectoryLog::read_csv(cut.as_bytes()), Err(Error::MalformedLog(_))));
        // cut on a row boundary, trailer lost
        let rows: Vec<&str> = csv.lines().take(10).collect();
        let cut = rows.join("\n");
        assert!(matches!(TrajectoryLog::read_csv(cut.as_bytes()), Err(Error::MalformedLog(_))));
        assert!(TrajectoryLog::read_csv("".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(vals in proptest::collection::vec(-1e6f64..1e6, 24)) {
            let mut log = sample(2);
            let mut a = [0.0; 24];
            a.copy_from_slice(&vals);
            a[0] = log.records[1].t;
            log.records[1] = LogRecord::from_array(&a);
            let back = TrajectoryLog::read_csv(log.to_csv_string().as_bytes()).unwrap();
            prop_assert_eq!(back, log);
        }
    }
}
