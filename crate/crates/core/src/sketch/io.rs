//! Binary container for sketch sets.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic   b"SKCP"
//! version u32            (1)
//! mode    u8             (0 = asymmetric, 1 = symmetric)
//! n, b, B, master_seed   u64 each
//! B replicate records:
//!   hashes: count u32, then per hash
//!           independence u32, buckets u64, coefficients u64 x independence
//!   data:   b x (re f64, im f64)
//! ```
//!
//! Asymmetric records carry six hashes (three bucket hashes, then three sign
//! hashes); symmetric records carry two (bucket hash, sign hash).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{AsymReplicate, AsymTensorSketchSet, SymReplicate, SymTensorSketchSet};
use crate::error::{Error, Result};
use crate::hashing::{PolyHash, SignGenerator, SignMode};

const MAGIC: &[u8; 4] = b"SKCP";
const VERSION: u32 = 1;
const MAX_INDEPENDENCE: u32 = 8;

#[derive(Debug, Clone)]
pub enum SketchFile {
    Asym(AsymTensorSketchSet),
    Sym(SymTensorSketchSet),
}

impl SketchFile {
    pub fn dim(&self) -> usize {
        match self {
            SketchFile::Asym(s) => s.dim(),
            SketchFile::Sym(s) => s.dim(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SketchFile::Asym(s) => s.len(),
            SketchFile::Sym(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_replicates(&self) -> usize {
        match self {
            SketchFile::Asym(s) => s.num_replicates(),
            SketchFile::Sym(s) => s.num_replicates(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(self, SketchFile::Sym(_))
    }
}

fn put_u32(w: &mut impl Write, x: u32) -> Result<()> {
    Ok(w.write_all(&x.to_le_bytes())?)
}

fn put_u64(w: &mut impl Write, x: u64) -> Result<()> {
    Ok(w.write_all(&x.to_le_bytes())?)
}

fn put_hash(w: &mut impl Write, h: &PolyHash) -> Result<()> {
    put_u32(w, h.independence() as u32)?;
    put_u64(w, h.buckets() as u64)?;
    for &c in h.coeffs() {
        put_u64(w, c)?;
    }
    Ok(())
}

fn put_data(w: &mut impl Write, data: &[Complex64]) -> Result<()> {
    for z in data {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("sketch file is truncated".into())
    } else {
        Error::Io(e)
    }
}

fn get<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(truncated)?;
    Ok(buf)
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(get(r)?))
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(get(r)?))
}

fn get_usize(r: &mut impl Read, what: &str) -> Result<usize> {
    let x = get_u64(r)?;
    usize::try_from(x).map_err(|_| Error::Format(format!("{what} {x} does not fit in memory")))
}

fn get_hash(r: &mut impl Read) -> Result<PolyHash> {
    let q = get_u32(r)?;
    if !(1..=MAX_INDEPENDENCE).contains(&q) {
        return Err(Error::Format(format!("hash independence {q} out of range")));
    }
    let buckets = get_usize(r, "hash range")?;
    let coeffs = (0..q).map(|_| get_u64(r)).collect::<Result<Vec<_>>>()?;
    PolyHash::from_coeffs(coeffs, buckets).map_err(|e| Error::Format(e.to_string()))
}

fn get_hashes(r: &mut impl Read, expected: u32) -> Result<Vec<PolyHash>> {
    let count = get_u32(r)?;
    if count != expected {
        return Err(Error::Format(format!(
            "replicate has {count} hashes, expected {expected}"
        )));
    }
    (0..count).map(|_| get_hash(r)).collect()
}

fn get_data(r: &mut impl Read, b: usize) -> Result<Vec<Complex64>> {
    (0..b)
        .map(|_| {
            let re = f64::from_le_bytes(get(r)?);
            let im = f64::from_le_bytes(get(r)?);
            Ok(Complex64::new(re, im))
        })
        .collect()
}

fn sign(mode: SignMode, h: PolyHash) -> Result<SignGenerator> {
    SignGenerator::from_hash(mode, h).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_sketch(sketch: &SketchFile, out: impl Write) -> Result<()> {
    let mut w = BufWriter::new(out);
    w.write_all(MAGIC)?;
    put_u32(&mut w, VERSION)?;
    match sketch {
        SketchFile::Asym(s) => {
            w.write_all(&[0])?;
            for x in [s.dim(), s.len(), s.num_replicates()] {
                put_u64(&mut w, x as u64)?;
            }
            put_u64(&mut w, s.master_seed())?;
            for r in s.replicates() {
                put_u32(&mut w, 6)?;
                for h in r.hashes() {
                    put_hash(&mut w, h)?;
                }
                for g in r.signs() {
                    put_hash(&mut w, g.backing())?;
                }
                put_data(&mut w, r.data())?;
            }
        }
        SketchFile::Sym(s) => {
            w.write_all(&[1])?;
            for x in [s.dim(), s.len(), s.num_replicates()] {
                put_u64(&mut w, x as u64)?;
            }
            put_u64(&mut w, s.master_seed())?;
            for r in s.replicates() {
                put_u32(&mut w, 2)?;
                put_hash(&mut w, r.hash())?;
                put_hash(&mut w, r.sign_generator().backing())?;
                put_data(&mut w, r.data())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_sketch(input: impl Read) -> Result<SketchFile> {
    let mut r = BufReader::new(input);
    let magic: [u8; 4] = get(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a sketch file (bad magic)".into()));
    }
    let version = get_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported sketch version {version}")));
    }
    let [mode] = get::<1>(&mut r)?;
    let n = get_usize(&mut r, "dimension")?;
    let b = get_usize(&mut r, "sketch length")?;
    let reps = get_usize(&mut r, "replicate count")?;
    let seed = get_u64(&mut r)?;
    if n == 0 || reps == 0 || !b.is_power_of_two() || b < 2 {
        return Err(Error::Format(format!("bad header n={n} b={b} B={reps}")));
    }
    let fmt = |e: Error| match e {
        Error::Format(_) | Error::Io(_) => e,
        other => Error::Format(other.to_string()),
    };
    let file = match mode {
        0 => {
            let mut out = Vec::with_capacity(reps.min(1 << 16));
            for _ in 0..reps {
                let mut hs = get_hashes(&mut r, 6)?.into_iter();
                let mut next = || hs.next().expect("six hashes");
                let hashes = [next(), next(), next()];
                let signs = [
                    sign(SignMode::Rademacher, next())?,
                    sign(SignMode::Rademacher, next())?,
                    sign(SignMode::Rademacher, next())?,
                ];
                let data = get_data(&mut r, b)?;
                out.push(AsymReplicate::from_parts(n, b, hashes, signs, data).map_err(fmt)?);
            }
            SketchFile::Asym(AsymTensorSketchSet::from_replicates(n, b, seed, out)?)
        }
        1 => {
            let mut out = Vec::with_capacity(reps.min(1 << 16));
            for _ in 0..reps {
                let mut hs = get_hashes(&mut r, 2)?.into_iter();
                let hash = hs.next().expect("two hashes");
                let sg = sign(SignMode::Complex4, hs.next().expect("two hashes"))?;
                let data = get_data(&mut r, b)?;
                out.push(SymReplicate::from_parts(n, b, hash, sg, data).map_err(fmt)?);
            }
            SketchFile::Sym(SymTensorSketchSet::from_replicates(n, b, seed, out)?)
        }
        m => return Err(Error::Format(format!("unknown sketch mode {m}"))),
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after sketch data".into()));
    }
    Ok(file)
}

pub fn write_sketch_file(sketch: &SketchFile, path: impl AsRef<Path>) -> Result<()> {
    write_sketch(sketch, File::create(path)?)
}

pub fn read_sketch_file(path: impl AsRef<Path>) -> Result<SketchFile> {
    read_sketch(File::open(path)?)
}
