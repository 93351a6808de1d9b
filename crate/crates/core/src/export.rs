//! Output files. Every float is written with 17 significant digits so
//! that values survive a round trip and runs can be compared byte by byte.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::front::FrontSample;
use crate::simulate::ParticleSnapshot;

/// `x` in scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Pretty JSON with floats through [`fmt_f64`]; non-finite floats become `null`.
struct FullPrecision<'a>(PrettyFormatter<'a>);

impl Formatter for FullPrecision<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecision(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("JSON is UTF-8")
}

fn push_row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    let mut first = true;
    for c in cells {
        if !first {
            out.push(',');
        }
        out.push_str(&c);
        first = false;
    }
    out.push('\n');
}

fn numbered(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (1..=d).map(move |i| format!("{prefix}_{i}"))
}

/// Header `u_1..u_d,r_1..r_d,z_1..z_d`, one row per direction.
pub fn front_csv(sample: &FrontSample) -> String {
    let d = sample.dimension;
    let mut out = String::new();
    push_row(
        &mut out,
        numbered("u", d).chain(numbered("r", d)).chain(numbered("z", d)),
    );
    for rec in &sample.records {
        push_row(
            &mut out,
            rec.u.iter().chain(&rec.r).chain(&rec.z).map(|&v| fmt_f64(v)),
        );
    }
    out
}

/// Closed polyline through the front points of a planar sample, `y` up.
pub fn front_svg(sample: &FrontSample) -> Option<String> {
    if sample.dimension != 2 || sample.records.is_empty() {
        return None;
    }
    let pts: Vec<(f64, f64)> = sample.records.iter().map(|r| (r.z[0], -r.z[1])).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let pad_x = 0.05 * (x1 - x0).max(f64::MIN_POSITIVE);
    let pad_y = 0.05 * (y1 - y0).max(f64::MIN_POSITIVE);
    let view = [x0 - pad_x, y0 - pad_y, x1 - x0 + 2.0 * pad_x, y1 - y0 + 2.0 * pad_y];
    let points: Vec<String> = pts
        .iter()
        .map(|&(x, y)| format!("{},{}", fmt_f64(x), fmt_f64(y)))
        .collect();
    Some(format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{}\">\n<polygon fill=\"none\" stroke=\"black\" stroke-width=\"{}\" points=\"{}\"/>\n</svg>\n",
        view.map(fmt_f64).join(" "),
        fmt_f64(0.005 * view[2].max(view[3])),
        points.join(" "),
    ))
}

/// Header `replicate,t,particle_index,x_1..x_d`, one row per particle.
pub fn snapshots_csv<'a>(snapshots: impl IntoIterator<Item = (u64, &'a ParticleSnapshot)>) -> String {
    let mut out = String::new();
    let mut header_done = false;
    for (rep, snap) in snapshots {
        if !header_done {
            push_row(
                &mut out,
                ["replicate", "t", "particle_index"]
                    .map(String::from)
                    .into_iter()
                    .chain(numbered("x", snap.dimension)),
            );
            header_done = true;
        }
        for (i, x) in snap.positions().enumerate() {
            push_row(
                &mut out,
                [rep.to_string(), fmt_f64(snap.time), i.to_string()]
                    .into_iter()
                    .chain(x.iter().map(|c| c.to_string())),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::front::FrontRecord;

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(2.0f64.sqrt() - 1.0).parse::<f64>().unwrap(), 2.0f64.sqrt() - 1.0);
        let json = to_json(&serde_json::json!({"nu": 0.1, "n": 3, "bad": f64::NAN}));
        assert!(json.contains("\"nu\": 1.0000000000000001e-1"), "{json}");
        assert!(json.contains("\"n\": 3"));
        assert!(json.contains("\"bad\": null"));
        let back: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(back["nu"].as_f64(), Some(0.1));
    }

    fn square() -> FrontSample {
        let pts = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        FrontSample {
            dimension: 2,
            nu: 1.0,
            resolution: 4,
            records: pts
                .iter()
                .map(|&(x, y)| FrontRecord {
                    u: vec![x, y],
                    r: vec![x, y],
                    z: vec![x, y],
                })
                .collect(),
        }
    }

    #[test]
    fn front_csv_layout() {
        let csv = front_csv(&square());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "u_1,u_2,r_1,r_2,z_1,z_2");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1].split(',').count(), 6);
    }

    #[test]
    fn svg_pads_and_flips() {
        let svg = front_svg(&square()).unwrap();
        assert!(svg.contains("viewBox=\"-1.1000000000000001e0 -1.1000000000000001e0 2.2000000000000002e0 2.2000000000000002e0\""), "{svg}");
        assert!(svg.contains("<polygon"));
        assert!(svg.contains("0.0000000000000000e0,-1.0000000000000000e0"));
        let mut one_d = square();
        one_d.dimension = 1;
        assert!(front_svg(&one_d).is_none());
    }

    #[test]
    fn snapshot_rows_expand_counts() {
        let snap = ParticleSnapshot {
            time: 2.0,
            dimension: 2,
            counts: vec![(vec![-1, 0], 2), (vec![3, 4], 1)],
        };
        let csv = snapshots_csv([(7, &snap)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "replicate,t,particle_index,x_1,x_2");
        assert_eq!(lines[1], "7,2.0000000000000000e0,0,-1,0");
        assert_eq!(lines[3], "7,2.0000000000000000e0,2,3,4");
    }
}
