//! On-disk formats for sample batches plus atomic file writes.
//!
//! Text: a `# kac-sample v1 ...` header line, a `value` column header, then
//! one value per line in shortest round-trip notation.
//!
//! Binary (little endian): `b"KACS"`, `u32` version, `f64` t, `u64` seed,
//! `u64` count, `u32` law length, law bytes (UTF-8), `count × f64` values.
//!
//! Neither format stores wall-clock time, so equal seeds give equal bytes.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::simulate::SampleBatch;

pub const BINARY_MAGIC: &[u8; 4] = b"KACS";
pub const BINARY_VERSION: u32 = 1;
const TEXT_TAG: &str = "# kac-sample v1";

/// Writes via a sibling temporary file and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let name = path
        .file_name()
        .ok_or_else(|| Error::arg(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp: PathBuf = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn batch_to_csv(batch: &SampleBatch) -> String {
    let mut out = String::with_capacity(24 * batch.values.len() + 128);
    out.push_str(&format!(
        "{TEXT_TAG} t={} seed={} size={} law={}\nvalue\n",
        batch.t,
        batch.seed,
        batch.values.len(),
        batch.law
    ));
    for v in &batch.values {
        out.push_str(&format!("{v}\n"));
    }
    out
}

pub fn batch_from_csv(text: &str) -> Result<SampleBatch> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .and_then(|l| l.strip_prefix(TEXT_TAG))
        .ok_or_else(|| Error::Parse("missing kac-sample header".into()))?;
    let (mut t, mut seed, mut size, mut law) = (None, None, None, None);
    for field in header.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header field {field:?}")))?;
        let bad = |_| Error::Parse(format!("bad header value {field:?}"));
        match key {
            "t" => t = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "seed" => seed = Some(value.parse::<u64>().map_err(|e| bad(e.to_string()))?),
            "size" => size = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "law" => law = Some(value.to_string()),
            _ => return Err(Error::Parse(format!("unknown header field {key:?}"))),
        }
    }
    let missing = |k: &str| Error::Parse(format!("header lacks {k}"));
    let size = size.ok_or_else(|| missing("size"))?;
    if lines.next() != Some("value") {
        return Err(Error::Parse("missing value column header".into()));
    }
    let values = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("{l:?}: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != size {
        return Err(Error::Parse(format!(
            "header says {size} values, found {}",
            values.len()
        )));
    }
    Ok(SampleBatch {
        t: t.ok_or_else(|| missing("t"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
        law: law.ok_or_else(|| missing("law"))?,
        values,
        wall_clock_secs: 0.0,
    })
}

pub fn batch_to_binary(batch: &SampleBatch) -> Vec<u8> {
    let law = batch.law.as_bytes();
    let mut out = Vec::with_capacity(36 + law.len() + 8 * batch.values.len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    out.extend_from_slice(&batch.t.to_le_bytes());
    out.extend_from_slice(&batch.seed.to_le_bytes());
    out.extend_from_slice(&(batch.values.len() as u64).to_le_bytes());
    out.extend_from_slice(&(law.len() as u32).to_le_bytes());
    out.extend_from_slice(law);
    for v in &batch.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn batch_from_binary(mut bytes: &[u8]) -> Result<SampleBatch> {
    fn take<const N: usize>(r: &mut &[u8]) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        r.read_exact(&mut buf)
            .map_err(|_| Error::Parse("truncated binary sample file".into()))?;
        Ok(buf)
    }
    if &take::<4>(&mut bytes)? != BINARY_MAGIC {
        return Err(Error::Parse("not a kac binary sample file".into()));
    }
    let version = u32::from_le_bytes(take(&mut bytes)?);
    if version != BINARY_VERSION {
        return Err(Error::Parse(format!(
            "unsupported binary version {version}"
        )));
    }
    let t = f64::from_le_bytes(take(&mut bytes)?);
    let seed = u64::from_le_bytes(take(&mut bytes)?);
    let count = u64::from_le_bytes(take(&mut bytes)?) as usize;
    let law_len = u32::from_le_bytes(take(&mut bytes)?) as usize;
    if bytes.len() < law_len {
        return Err(Error::Parse("truncated binary sample file".into()));
    }
    let (law, rest) = bytes.split_at(law_len);
    let law = String::from_utf8(law.to_vec()).map_err(|e| Error::Parse(e.to_string()))?;
    if rest.len() != 8 * count {
        return Err(Error::Parse(format!(
            "expected {count} values, found {} bytes",
            rest.len()
        )));
    }
    let values = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(SampleBatch {
        t,
        seed,
        law,
        values,
        wall_clock_secs: 0.0,
    })
}

/// Reads either format, chosen by the leading magic bytes.
pub fn read_batch(path: impl AsRef<Path>) -> Result<SampleBatch> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        batch_from_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))?;
        batch_from_csv(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch() -> SampleBatch {
        SampleBatch {
            t: 1.5,
            seed: 42,
            law: "two-point:-1,3,0.25".into(),
            values: vec![0.1, -2.5e-300, 1.0 / 3.0, f64::MAX, -0.0],
            wall_clock_secs: 9.0,
        }
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let b = batch();
        let back = batch_from_csv(&batch_to_csv(&b)).unwrap();
        assert_eq!(back.values, b.values);
        assert_eq!(
            (back.t, back.seed, back.law.as_str()),
            (b.t, b.seed, b.law.as_str())
        );
    }

    #[test]
    fn binary_roundtrip_is_exact() {
        let b = batch();
        let bytes = batch_to_binary(&b);
        assert_eq!(&bytes[..4], b"KACS");
        let back = batch_from_binary(&bytes).unwrap();
        assert_eq!(back.values, b.values);
        assert_eq!(back.law, b.law);
        assert!(batch_from_binary(&bytes[..bytes.len() - 1]).is_err());
        assert!(batch_from_binary(b"nope").is_err());
    }

    #[test]
    fn malformed_csv() {
        assert!(batch_from_csv("value\n1\n").is_err());
        assert!(batch_from_csv("# kac-sample v1 t=1 seed=2 size=2 law=x\nvalue\n1\n").is_err());
        assert!(batch_from_csv("# kac-sample v1 t=1 seed=2 size=1 law=x\nvalue\nabc\n").is_err());
    }

    #[test]
    fn atomic_write_and_read_either_format() {
        let dir = tempfile::tempdir().unwrap();
        let b = batch();
        let p1 = dir.path().join("s.csv");
        let p2 = dir.path().join("s.bin");
        write_atomic(&p1, batch_to_csv(&b).as_bytes()).unwrap();
        write_atomic(&p2, &batch_to_binary(&b)).unwrap();
        assert_eq!(read_batch(&p1).unwrap().values, b.values);
        assert_eq!(read_batch(&p2).unwrap().values, b.values);
        let leftovers = fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(leftovers, 2);
    }
}
