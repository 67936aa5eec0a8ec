//! Bit-stable emission: every float is written as `{:.16e}` (17 significant
//! digits), so identical inputs give identical bytes.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// Fixed scientific notation; non-finite values become `null`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

/// JSON formatter that pretty-prints and writes floats in fixed notation.
struct FixedFloat<F> {
    inner: F,
}

macro_rules! delegate {
    ($($name:ident),*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
            self.inner.$name(w)
        })*
    };
}

macro_rules! delegate_first {
    ($($name:ident),*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
            self.inner.$name(w, first)
        })*
    };
}

impl<F: Formatter> Formatter for FixedFloat<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    delegate!(
        begin_array,
        begin_object,
        end_array_value,
        begin_object_value,
        end_object_value
    );
    delegate_first!(begin_array_value, begin_object_key);

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
}

fn serialize<T: Serialize, F: Formatter>(value: &T, inner: F) -> serde_json::Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloat { inner });
    value.serialize(&mut ser)?;
    Ok(buf)
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut buf = serialize(value, PrettyFormatter::with_indent(b"  "))?;
    buf.push(b'\n');
    Ok(buf)
}

pub fn to_json_compact<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    serialize(value, serde_json::ser::CompactFormatter)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    fs::write(path, to_json_pretty(value).map_err(io::Error::other)?)
}

/// A CSV cell.
pub enum Cell<'a> {
    F(f64),
    I(i64),
    S(&'a str),
    B(bool),
}

impl Cell<'_> {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::I(i) => i.to_string(),
            Cell::S(s) => (*s).to_string(),
            Cell::B(b) => b.to_string(),
        }
    }
}

/// CSV with a leading `# ...` line documenting the columns, the header row,
/// then one row per record; every row ends with the config hash.
pub fn write_csv(
    path: &Path,
    description: &str,
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<Cell<'static>>>,
    config_hash: &str,
) -> io::Result<()> {
    let mut out = Vec::new();
    writeln!(out, "# {description}; config_hash = {config_hash}")?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let mut header: Vec<&str> = columns.to_vec();
        header.push("config_hash");
        w.write_record(&header)?;
        for row in rows {
            let mut rec: Vec<String> = row.iter().map(Cell::render).collect();
            rec.push(config_hash.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    fs::write(path, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Rec {
        a: f64,
        b: Vec<f64>,
        n: usize,
        s: &'static str,
        bad: f64,
    }

    #[test]
    fn fixed_float_json() {
        let r = Rec {
            a: 0.1,
            b: vec![1.0, -2.5e-300],
            n: 3,
            s: "x",
            bad: f64::NAN,
        };
        let text = String::from_utf8(to_json_compact(&r).unwrap()).unwrap();
        assert_eq!(
            text,
            r#"{"a":1.0000000000000001e-1,"b":[1.0000000000000000e0,-2.5000000000000000e-300],"n":3,"s":"x","bad":null}"#
        );
        let v: serde_json::Value = serde_json::from_slice(&to_json_pretty(&r).unwrap()).unwrap();
        assert_eq!(v["a"].as_f64(), Some(0.1));
    }

    #[test]
    fn round_trip_is_exact() {
        for x in [std::f64::consts::PI, 1e-17, 123456.789, -0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
