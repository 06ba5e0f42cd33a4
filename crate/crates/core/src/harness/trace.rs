//! CSV trace rows. Reals are written with 17 significant digits so parsing
//! and re-serializing reproduces the bytes exactly.

use crate::error::{Error, Result};
use crate::meta::TrajectoryRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub a_hat: Vec<f64>,
    pub a_star: Vec<f64>,
    pub u: f64,
    pub cost: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub est_loss: f64,
    pub g_norm: f64,
    pub zeta_norm: Option<f64>,
}

pub fn header(p: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "x_0", "y_0", "theta_0"].iter().map(|s| s.to_string()).collect();
    h.extend((0..p).map(|i| format!("ahat_{i}")));
    h.extend((0..p).map(|i| format!("astar_{i}")));
    for s in ["u_0", "cost", "eps0", "eps1", "est_loss", "g_norm", "zeta_norm"] {
        h.push(s.to_string());
    }
    h
}

#[inline]
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn rows_from_record(record: &TrajectoryRecord, zeta: Option<&[f64]>) -> Vec<TraceRow> {
    record
        .steps
        .iter()
        .map(|s| TraceRow {
            t: s.t,
            x: s.x,
            y: s.y,
            theta: s.theta,
            a_hat: s.a_hat.clone(),
            a_star: s.a_star.clone(),
            u: s.u,
            cost: s.cost,
            eps0: s.eps0,
            eps1: s.eps1,
            est_loss: s.est_loss,
            g_norm: s.g_approx.abs(),
            zeta_norm: zeta.map(|z| z[s.t].abs()),
        })
        .collect()
}

impl TraceRow {
    fn fields(&self) -> Vec<String> {
        let mut f = vec![self.t.to_string(), fmt_real(self.x), fmt_real(self.y), fmt_real(self.theta)];
        f.extend(self.a_hat.iter().map(|v| fmt_real(*v)));
        f.extend(self.a_star.iter().map(|v| fmt_real(*v)));
        for v in [self.u, self.cost, self.eps0, self.eps1, self.est_loss, self.g_norm] {
            f.push(fmt_real(v));
        }
        f.push(self.zeta_norm.map(fmt_real).unwrap_or_default());
        f
    }
}

pub fn write_trace(rows: &[TraceRow], p: usize) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header(p))?;
    for r in rows {
        if r.a_hat.len() != p || r.a_star.len() != p {
            return Err(Error::RecordMismatch(format!("row {} has the wrong parameter dimension", r.t)));
        }
        w.write_record(r.fields())?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn parse_real(s: &str, col: &str, line: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::RecordMismatch(format!("line {line}, column {col}: cannot parse {s:?}")))
}

/// Parses a trace and returns its rows and parameter dimension.
pub fn parse_trace(bytes: &[u8]) -> Result<(Vec<TraceRow>, usize)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let head: Vec<String> = r.headers()?.iter().map(|s| s.to_string()).collect();
    if head.len() < 11 || !(head.len() - 11).is_multiple_of(2) {
        return Err(Error::RecordMismatch(format!("unexpected header with {} columns", head.len())));
    }
    let p = (head.len() - 11) / 2;
    if head != header(p) {
        return Err(Error::RecordMismatch("header does not match the trace schema".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let get = |c: usize| parse_real(&rec[c], &head[c], line);
        let t = rec[0]
            .parse::<usize>()
            .map_err(|_| Error::RecordMismatch(format!("line {line}: bad step index {:?}", &rec[0])))?;
        let a_hat = (0..p).map(|k| get(4 + k)).collect::<Result<Vec<_>>>()?;
        let a_star = (0..p).map(|k| get(4 + p + k)).collect::<Result<Vec<_>>>()?;
        let b = 4 + 2 * p;
        let zeta_field = &rec[b + 6];
        rows.push(TraceRow {
            t,
            x: get(1)?,
            y: get(2)?,
            theta: get(3)?,
            a_hat,
            a_star,
            u: get(b)?,
            cost: get(b + 1)?,
            eps0: get(b + 2)?,
            eps1: get(b + 3)?,
            est_loss: get(b + 4)?,
            g_norm: get(b + 5)?,
            zeta_norm: if zeta_field.is_empty() {
                None
            } else {
                Some(parse_real(zeta_field, "zeta_norm", line)?)
            },
        });
    }
    Ok((rows, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: usize, v: f64) -> TraceRow {
        TraceRow {
            t,
            x: v,
            y: -v / 3.0,
            theta: 0.1 + v,
            a_hat: vec![v * 1e-300, -0.0],
            a_star: vec![1.0, 2.0 / 7.0],
            u: f64::MIN_POSITIVE,
            cost: 1e300,
            eps0: 0.0,
            eps1: std::f64::consts::PI,
            est_loss: 5e-324,
            g_norm: 123456789.12345679,
            zeta_norm: if t.is_multiple_of(2) { None } else { Some(v.abs()) },
        }
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let rows: Vec<TraceRow> = (0..20).map(|t| row(t, (t as f64).sin() * 1.7e-3)).collect();
        let bytes = write_trace(&rows, 2).unwrap();
        let (parsed, p) = parse_trace(&bytes).unwrap();
        assert_eq!(p, 2);
        assert_eq!(parsed, rows);
        assert_eq!(write_trace(&parsed, 2).unwrap(), bytes);
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            header(1).join(","),
            "t,x_0,y_0,theta_0,ahat_0,astar_0,u_0,cost,eps0,eps1,est_loss,g_norm,zeta_norm"
        );
        let bytes = write_trace(&[], 1).unwrap();
        assert_eq!(parse_trace(&bytes).unwrap().0.len(), 0);
    }

    #[test]
    fn rejects_bad_rows() {
        let bytes = write_trace(&[row(0, 1.0)], 2).unwrap();
        let text = String::from_utf8(bytes).unwrap().replacen("1.0000000000000000e0", "one", 1);
        assert!(parse_trace(text.as_bytes()).is_err());
        assert!(parse_trace(b"a,b\n1,2\n").is_err());
    }
}
