//! Container files: a text header of `key=value` lines followed by a flat
//! array of little-endian `f64`.
//!
//! ```text
//! spqn-container v1
//! kind=checkpoint
//! len=3
//! end_header
//! <24 bytes>
//! ```

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &str = "spqn-container v1";
const END: &str = "end_header";

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub header: Vec<(String, String)>,
    pub data: Vec<f64>,
}

impl Container {
    pub fn new(header: Vec<(String, String)>, data: Vec<f64>) -> Self {
        Self { header, data }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Parse a required header field.
    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::Format(format!("missing header field '{key}'")))?;
        raw.parse()
            .map_err(|_| Error::Format(format!("bad value '{raw}' for header field '{key}'")))
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{MAGIC}")?;
        for (k, v) in &self.header {
            if k.contains(['=', '\n']) || v.contains('\n') || k == "len" {
                return Err(Error::Format(format!("invalid header entry '{k}'")));
            }
            writeln!(w, "{k}={v}")?;
        }
        writeln!(w, "len={}", self.data.len())?;
        writeln!(w, "{END}")?;
        let mut bytes = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        r.read_line(&mut line)?;
        if line.trim_end() != MAGIC {
            return Err(Error::Format("not a container file".into()));
        }
        let mut header = Vec::new();
        let mut len = None;
        loop {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Format("header not terminated".into()));
            }
            let l = line.trim_end_matches('\n');
            if l == END {
                break;
            }
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad header line '{l}'")))?;
            if k == "len" {
                len = Some(v.parse::<usize>().map_err(|_| Error::Format("bad len".into()))?);
            } else {
                header.push((k.to_string(), v.to_string()));
            }
        }
        let len = len.ok_or_else(|| Error::Format("missing len".into()))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != len * 8 {
            return Err(Error::Format(format!(
                "expected {} data bytes, found {}",
                len * 8,
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Self { header, data })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let c = Container::new(
            vec![("kind".into(), "test".into()), ("width".into(), "5".into())],
            vec![0.1, -0.0, f64::MAX, f64::MIN_POSITIVE, 1.0 / 3.0],
        );
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        let back = Container::read_from(&buf[..]).unwrap();
        assert_eq!(back.header, c.header);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.data), bits(&c.data));
        assert_eq!(back.parse::<usize>("width").unwrap(), 5);
    }

    #[test]
    fn truncated_data_is_rejected() {
        let c = Container::new(vec![], vec![1.0, 2.0]);
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        buf.pop();
        assert!(Container::read_from(&buf[..]).is_err());
        assert!(Container::read_from(&b"garbage\n"[..]).is_err());
    }
}
