//! JSON and CSV number formatting.
//!
//! Every float leaves the crate with 17 significant digits so that reports
//! round-trip exactly and identical runs produce identical bytes.

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, Serializer};

/// Formats a float with 17 significant digits in scientific notation.
pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

struct Sig17;

impl Formatter for Sig17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.write_f64(writer, f64::from(value))
    }

    fn write_null<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        CompactFormatter.write_null(writer)
    }
}

/// Serializes `value` as compact JSON with round-trippable floats.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, Sig17);
    value
        .serialize(&mut ser)
        .expect("serialization into a Vec cannot fail");
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        let xs = vec![0.1_f64, 1.0 / 3.0, 2.0_f64.sqrt(), 1e-300, 0.0];
        let s = to_json_string(&xs);
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(xs, back);
        assert!(s.contains("1.0000000000000001e-1"));
    }

    #[test]
    fn non_finite_becomes_null() {
        assert_eq!(to_json_string(&[f64::INFINITY]), "[null]");
    }
}
