// SPDX-License-Identifier: MIT OR Apache-2.0

//! File formats: the `TCPD` binary container, CSV tables and key=value configs.
//!
//! Binary layout (little endian):
//!
//! ```text
//! "TCPD" | version u16 | order u16 | dims order x u32 | n u64 | n*p f64, row-major by time
//! ```
//!
//! CSV comes in two layouts, both with a header row:
//! long `t,idx1,...,idxK,value` (1-based indices, one row per entry) and
//! wide `t,v1,...,vp` for vectors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::screening::RidgeScale;
use crate::tensor::{Shape, TensorSeq};

pub const MAGIC: &[u8; 4] = b"TCPD";
pub const FORMAT_VERSION: u16 = 1;
/// Environment variable naming a default config file.
pub const CONFIG_ENV: &str = "TCPD_CONFIG";

pub fn write_tcpd<W: Write>(mut w: W, seq: &TensorSeq) -> Result<()> {
    let dims = seq.shape().dims();
    let order = u16::try_from(dims.len()).map_err(|_| Error::format("tensor order exceeds u16"))?;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&order.to_le_bytes())?;
    for &d in dims {
        let d = u32::try_from(d).map_err(|_| Error::format(format!("dimension {d} exceeds u32")))?;
        w.write_all(&d.to_le_bytes())?;
    }
    w.write_all(&(seq.n() as u64).to_le_bytes())?;
    for v in seq.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::format(format!("truncated file while reading {what}")),
        _ => Error::Io(e),
    })
}

pub fn read_tcpd<R: Read>(mut r: R) -> Result<TensorSeq> {
    let mut magic = [0u8; 4];
    if r.read_exact(&mut magic).is_err() || &magic != MAGIC {
        return Err(Error::format("not a TCPD file"));
    }
    let mut b2 = [0u8; 2];
    read_exact_or(&mut r, &mut b2, "version")?;
    let version = u16::from_le_bytes(b2);
    if version != FORMAT_VERSION {
        return Err(Error::format(format!("unsupported TCPD version {version}")));
    }
    read_exact_or(&mut r, &mut b2, "order")?;
    let order = u16::from_le_bytes(b2) as usize;
    let mut dims = Vec::with_capacity(order);
    let mut b4 = [0u8; 4];
    for _ in 0..order {
        read_exact_or(&mut r, &mut b4, "dimensions")?;
        dims.push(u32::from_le_bytes(b4) as usize);
    }
    let shape = Shape::new(dims)?;
    let mut b8 = [0u8; 8];
    read_exact_or(&mut r, &mut b8, "sample count")?;
    let n = u64::from_le_bytes(b8) as usize;
    let count = n
        .checked_mul(shape.len())
        .ok_or_else(|| Error::format("declared size overflows"))?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != count * 8 {
        return Err(Error::format(format!(
            "payload holds {} bytes but header declares n*p = {count} values ({} bytes)",
            payload.len(),
            count * 8
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    TensorSeq::new(shape, data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CsvLayout {
    Long,
    Wide,
}

fn csv_err(e: csv::Error) -> Error {
    Error::format(format!("csv: {e}"))
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::format(format!("line {line}: cannot parse {what} '{s}'")))
}

/// Reads either CSV layout, chosen from the header.
pub fn read_csv<R: Read>(r: R) -> Result<TensorSeq> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.is_empty() || !headers[0].eq_ignore_ascii_case("t") {
        return Err(Error::format("csv header must start with 't'"));
    }
    let long = headers.len() >= 3
        && headers[headers.len() - 1].eq_ignore_ascii_case("value")
        && headers.iter().skip(1).take(headers.len() - 2).all(|h| h.to_ascii_lowercase().starts_with("idx"));
    let rows: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>().map_err(csv_err)?;
    if long {
        read_long(&rows, headers.len() - 2)
    } else {
        read_wide(&rows, headers.len() - 1)
    }
}

fn read_wide(rows: &[csv::StringRecord], p: usize) -> Result<TensorSeq> {
    if p == 0 {
        return Err(Error::format("wide csv needs at least one value column"));
    }
    let mut data = Vec::with_capacity(rows.len() * p);
    for (i, row) in rows.iter().enumerate() {
        let line = i + 2;
        let t: usize = parse_num(&row[0], line, "time index")?;
        if t != i + 1 {
            return Err(Error::format(format!("line {line}: expected t = {}, found {t}", i + 1)));
        }
        if row.len() != p + 1 {
            return Err(Error::format(format!("line {line}: expected {} fields, found {}", p + 1, row.len())));
        }
        for field in row.iter().skip(1) {
            data.push(parse_num::<f64>(field, line, "value")?);
        }
    }
    TensorSeq::new(Shape::vector(p)?, data)
}

fn read_long(rows: &[csv::StringRecord], order: usize) -> Result<TensorSeq> {
    let mut parsed = Vec::with_capacity(rows.len());
    let mut dims = vec![0usize; order];
    let mut n = 0usize;
    for (i, row) in rows.iter().enumerate() {
        let line = i + 2;
        if row.len() != order + 2 {
            return Err(Error::format(format!("line {line}: expected {} fields, found {}", order + 2, row.len())));
        }
        let t: usize = parse_num(&row[0], line, "time index")?;
        if t == 0 {
            return Err(Error::format(format!("line {line}: time index is 1-based")));
        }
        let mut idx = Vec::with_capacity(order);
        for (l, d) in dims.iter_mut().enumerate() {
            let v: usize = parse_num(&row[l + 1], line, "index")?;
            if v == 0 {
                return Err(Error::format(format!("line {line}: indices are 1-based")));
            }
            *d = (*d).max(v);
            idx.push(v);
        }
        let value: f64 = parse_num(&row[order + 1], line, "value")?;
        n = n.max(t);
        parsed.push((t, idx, value, line));
    }
    let shape = Shape::new(dims)?;
    let p = shape.len();
    let mut data = vec![f64::NAN; n * p];
    let mut seen = vec![false; n * p];
    for (t, idx, value, line) in parsed {
        let j = shape.flatten_index(&idx)?;
        let at = (t - 1) * p + j;
        if seen[at] {
            return Err(Error::format(format!("line {line}: duplicate entry for t = {t}, index {idx:?}")));
        }
        seen[at] = true;
        data[at] = value;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        let multi = shape.unflatten_index(missing % p)?;
        return Err(Error::format(format!(
            "missing entry for t = {}, index {multi:?}",
            missing / p + 1
        )));
    }
    TensorSeq::new(shape, data)
}

pub fn write_csv<W: Write>(w: W, seq: &TensorSeq, layout: CsvLayout) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let shape = seq.shape();
    match layout {
        CsvLayout::Wide => {
            if shape.order() != 1 {
                return Err(Error::argument("wide csv is only defined for vectors"));
            }
            let mut header = vec!["t".to_string()];
            header.extend((1..=shape.len()).map(|j| format!("v{j}")));
            wtr.write_record(&header).map_err(csv_err)?;
            for t in 1..=seq.n() {
                let mut rec = vec![t.to_string()];
                rec.extend(seq.tensor(t).iter().map(|v| format!("{v:?}")));
                wtr.write_record(&rec).map_err(csv_err)?;
            }
        }
        CsvLayout::Long => {
            let mut header = vec!["t".to_string()];
            header.extend((1..=shape.order()).map(|l| format!("idx{l}")));
            header.push("value".into());
            wtr.write_record(&header).map_err(csv_err)?;
            for t in 1..=seq.n() {
                for (j, v) in seq.tensor(t).iter().enumerate() {
                    let mut rec = vec![t.to_string()];
                    rec.extend(shape.unflatten_index(j)?.iter().map(|i| i.to_string()));
                    rec.push(format!("{v:?}"));
                    wtr.write_record(&rec).map_err(csv_err)?;
                }
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a sequence, choosing CSV by extension and the binary format otherwise.
pub fn read_seq(path: &Path) -> Result<TensorSeq> {
    let file = BufReader::new(File::open(path)?);
    if is_csv(path) {
        read_csv(file)
    } else {
        read_tcpd(file)
    }
}

pub fn write_seq(path: &Path, seq: &TensorSeq) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    if is_csv(path) {
        let layout = if seq.shape().order() == 1 { CsvLayout::Wide } else { CsvLayout::Long };
        write_csv(file, seq, layout)
    } else {
        write_tcpd(file, seq)
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Contents of a key=value config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub detector: DetectorConfig,
    pub ci_level: Option<f64>,
    pub ci_paths: Option<usize>,
    pub seed: Option<u64>,
}

pub const CONFIG_KEYS: [&str; 12] = [
    "mode",
    "structural_mode",
    "alpha",
    "eps",
    "nu",
    "s",
    "s1",
    "tau",
    "ridge_scale",
    "ci.level",
    "ci.paths",
    "seed",
];

impl ConfigFile {
    /// Parses `key = value` lines; `#` starts a comment. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::config(format!("line {}: invalid {what} '{value}'", i + 1));
            let num = |what: &str| value.parse::<f64>().map_err(|_| bad(what));
            match key {
                "mode" => cfg.detector.mode = value.parse()?,
                "structural_mode" => cfg.detector.structural_mode = Some(value.parse().map_err(|_| bad(key))?),
                "alpha" if value.eq_ignore_ascii_case("auto") => cfg.detector.overrides.alpha = None,
                "alpha" => cfg.detector.overrides.alpha = Some(value.parse().map_err(|_| bad(key))?),
                "eps" => cfg.detector.overrides.eps = Some(num(key)?),
                "nu" => cfg.detector.overrides.nu = Some(num(key)?),
                "s" => cfg.detector.overrides.s = Some(num(key)?),
                "s1" => cfg.detector.overrides.s1 = Some(num(key)?),
                "tau" => cfg.detector.tau = Some(num(key)?),
                "ridge_scale" => cfg.detector.overrides.ridge_scale = Some(value.parse::<RidgeScale>()?),
                "ci.level" => cfg.ci_level = Some(num(key)?),
                "ci.paths" => cfg.ci_paths = Some(value.parse().map_err(|_| bad(key))?),
                "seed" => cfg.seed = Some(value.parse().map_err(|_| bad(key))?),
                other => {
                    return Err(Error::config(format!(
                        "line {}: unknown key '{other}' (known: {})",
                        i + 1,
                        CONFIG_KEYS.join(", ")
                    )))
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Serializes back to `key = value` text; unset values are written as `auto` or omitted.
    pub fn to_text(&self) -> String {
        let d = &self.detector;
        let o = &d.overrides;
        let mut out = format!("mode = {}\n", d.mode);
        if let Some(m) = d.structural_mode {
            out += &format!("structural_mode = {m}\n");
        }
        out += &match o.alpha {
            Some(a) => format!("alpha = {a}\n"),
            None => "alpha = auto\n".into(),
        };
        for (k, v) in [("eps", o.eps), ("nu", o.nu), ("s", o.s), ("s1", o.s1), ("tau", d.tau), ("ci.level", self.ci_level)] {
            if let Some(v) = v {
                out += &format!("{k} = {v:?}\n");
            }
        }
        if let Some(r) = o.ridge_scale {
            out += &format!("ridge_scale = {r}\n");
        }
        if let Some(p) = self.ci_paths {
            out += &format!("ci.paths = {p}\n");
        }
        if let Some(s) = self.seed {
            out += &format!("seed = {s}\n");
        }
        out
    }
}

/// The explicit path if given, else the one named by `TCPD_CONFIG`.
pub fn resolve_config_path(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}
