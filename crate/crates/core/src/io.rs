//! CSV and JSON formats shared by the library and the command line.

use std::io::{Read, Write};

use crate::dynamics::{PlanarConfig, Strengths};
use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::reduction::ReducedCoordinates;

/// 17 significant digits; infinities as `+inf` / `-inf`.
pub fn fmt17(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn parse_f64(token: &str) -> Result<f64> {
    match token.trim() {
        "+inf" | "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t.parse().map_err(|_| Error::Parse(format!("not a number: {t:?}"))),
    }
}

/// A trajectory CSV as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl TrajectoryTable {
    pub fn configs(&self, strengths: &Strengths) -> Result<Vec<PlanarConfig>> {
        self.states.iter().map(|s| PlanarConfig::from_flat(s, strengths.clone())).collect()
    }
}

/// Reads `t,x1,y1,...,H,Jrot,Jtx,Jty`. The diagnostics columns are ignored.
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<TrajectoryTable> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.get(0) != Some("t") {
        return Err(Error::Parse("trajectory CSV must start with a t column".into()));
    }
    let coords: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| {
            let mut chars = h.chars();
            matches!(chars.next(), Some('x' | 'y')) && chars.as_str().parse::<usize>().is_ok()
        })
        .map(|(i, _)| i)
        .collect();
    if coords.is_empty() || !coords.len().is_multiple_of(2) {
        return Err(Error::Parse("trajectory CSV has no x/y column pairs".into()));
    }
    let mut table = TrajectoryTable { times: Vec::new(), states: Vec::new() };
    for record in reader.records() {
        let record = record?;
        table.times.push(parse_f64(&record[0])?);
        table.states.push(coords.iter().map(|&i| parse_f64(&record[i])).collect::<Result<_>>()?);
    }
    Ok(table)
}

/// Coordinate groups of the reduced CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoordinateSelection {
    pub w: bool,
    pub p: bool,
    pub q: bool,
    pub cyl: bool,
}

impl CoordinateSelection {
    pub const ALL: CoordinateSelection = CoordinateSelection { w: true, p: true, q: true, cyl: true };

    pub fn header(&self) -> Vec<&'static str> {
        let mut h = vec!["t"];
        if self.w {
            h.extend(["w1", "w2", "w3"]);
        }
        if self.p {
            h.extend(["p1", "p2", "p3"]);
        }
        if self.q {
            h.extend(["q1", "q2", "q3"]);
        }
        if self.cyl {
            h.extend(["h", "theta"]);
        }
        h.push("Hred");
        h
    }
}

/// Writes `t,w1,w2,w3,p1,p2,p3,q1,q2,q3,h,theta,Hred` (or the selected subset).
pub fn write_reduced_csv<W: Write>(out: W, rows: &[(f64, ReducedCoordinates)], sel: CoordinateSelection) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(sel.header())?;
    for (t, r) in rows {
        let mut rec = vec![fmt17(*t)];
        if sel.w {
            rec.extend(r.w.iter().map(|v| fmt17(*v)));
        }
        if sel.p {
            rec.extend([r.p.p1, r.p.p2, r.p.p3].map(fmt17));
        }
        if sel.q {
            rec.extend([r.q.q1, r.q.q2, r.q.q3].map(fmt17));
        }
        if sel.cyl {
            rec.push(r.cylinder.h.to_string());
            rec.push(fmt17(r.cylinder.theta));
        }
        rec.push(r.energy.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the portrait CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortraitRow {
    pub orbit_id: usize,
    pub t: f64,
    pub h: Extended,
    pub theta: f64,
    pub energy: f64,
    pub family: &'static str,
}

/// Writes `orbit_id,t,h,theta,H,family`.
pub fn write_portrait_csv<W: Write>(out: W, rows: impl IntoIterator<Item = PortraitRow>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["orbit_id", "t", "h", "theta", "H", "family"])?;
    for r in rows {
        w.write_record([
            r.orbit_id.to_string(),
            fmt17(r.t),
            r.h.to_string(),
            fmt17(r.theta),
            fmt17(r.energy),
            r.family.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, std::f64::consts::PI] {
            let s = fmt17(v);
            assert_eq!(parse_f64(&s).unwrap(), v);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
        assert_eq!(fmt17(f64::INFINITY), "+inf");
        assert_eq!(parse_f64("-inf").unwrap(), f64::NEG_INFINITY);
        assert!(parse_f64("abc").is_err());
    }

    #[test]
    fn reads_trajectory_columns() {
        let text = "t,x1,y1,x2,y2,H,Jrot,Jtx,Jty\n0,1,2,3,4,9,9,9,9\n0.5,5,6,7,8,9,9,9,9\n";
        let table = read_trajectory_csv(text.as_bytes()).unwrap();
        assert_eq!(table.times, vec![0.0, 0.5]);
        assert_eq!(table.states[1], vec![5.0, 6.0, 7.0, 8.0]);
        assert!(read_trajectory_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn selection_header() {
        let sel = CoordinateSelection { w: true, p: false, q: false, cyl: true };
        assert_eq!(sel.header(), vec!["t", "w1", "w2", "w3", "h", "theta", "Hred"]);
        assert_eq!(
            CoordinateSelection::ALL.header().join(","),
            "t,w1,w2,w3,p1,p2,p3,q1,q2,q3,h,theta,Hred"
        );
    }
}
