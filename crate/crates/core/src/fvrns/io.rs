//! Versioned binary containers for keys and ciphertexts.
//!
//! Layout: 4-byte magic, u16 version, u8 kind, 32-byte parameter digest,
//! then a kind-specific body of little-endian integers and polynomial
//! payloads in the ring serialization format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Ciphertext, EvaluationKeys, FvContext, FvError, OpCounters, PublicKey, SecretKey};
use crate::polyring::RnsPoly;

pub const MAGIC: [u8; 4] = *b"PMFV";
pub const VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
enum Kind {
    Secret = 1,
    Public = 2,
    Evaluation = 3,
    Ciphertexts = 4,
}

fn write_header<W: Write>(w: &mut W, ctx: &FvContext, kind: Kind) -> Result<(), FvError> {
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[kind as u8])?;
    w.write_all(&ctx.digest())?;
    Ok(())
}

fn read_header<R: Read>(r: &mut R, ctx: &FvContext, kind: Kind) -> Result<(), FvError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(FvError::Format("bad magic bytes".into()));
    }
    let mut v = [0u8; 2];
    r.read_exact(&mut v)?;
    if u16::from_le_bytes(v) != VERSION {
        return Err(FvError::Format(format!("unsupported version {}", u16::from_le_bytes(v))));
    }
    let mut k = [0u8; 1];
    r.read_exact(&mut k)?;
    if k[0] != kind as u8 {
        return Err(FvError::Format(format!("expected object kind {}, found {}", kind as u8, k[0])));
    }
    let mut digest = [0u8; 32];
    r.read_exact(&mut digest)?;
    if digest != ctx.digest() {
        return Err(FvError::ParamsMismatch);
    }
    Ok(())
}

fn put_u32<W: Write>(w: &mut W, x: u32) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn put_u64<W: Write>(w: &mut W, x: u64) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn get_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_instances<R: Read>(r: &mut R, ctx: &FvContext) -> Result<usize, FvError> {
    let found = get_u32(r)? as usize;
    if found != ctx.instance_count() {
        return Err(FvError::InstanceMismatch { expected: ctx.instance_count(), found });
    }
    Ok(found)
}

fn read_poly<R: Read>(r: &mut R, ctx: &FvContext, idx: usize) -> Result<RnsPoly, FvError> {
    Ok(RnsPoly::read_from(r, ctx.coeff_base(idx))?)
}

impl SecretKey {
    pub fn write_to<W: Write>(&self, w: &mut W, ctx: &FvContext) -> Result<(), FvError> {
        write_header(w, ctx, Kind::Secret)?;
        put_u32(w, self.s.len() as u32)?;
        for p in &self.s {
            p.write_to(w)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R, ctx: &FvContext) -> Result<Self, FvError> {
        read_header(r, ctx, Kind::Secret)?;
        let count = read_instances(r, ctx)?;
        let mut s = Vec::with_capacity(count);
        for idx in 0..count {
            let mut p = read_poly(r, ctx, idx)?;
            p.to_coefficient();
            s.push(p);
        }
        Ok(Self::new(s))
    }
}

impl PublicKey {
    pub fn write_to<W: Write>(&self, w: &mut W, ctx: &FvContext) -> Result<(), FvError> {
        write_header(w, ctx, Kind::Public)?;
        put_u32(w, self.keys.len() as u32)?;
        for (p0, p1) in &self.keys {
            p0.write_to(w)?;
            p1.write_to(w)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R, ctx: &FvContext) -> Result<Self, FvError> {
        read_header(r, ctx, Kind::Public)?;
        let count = read_instances(r, ctx)?;
        let mut keys = Vec::with_capacity(count);
        for idx in 0..count {
            let mut p0 = read_poly(r, ctx, idx)?;
            let mut p1 = read_poly(r, ctx, idx)?;
            p0.to_evaluation();
            p1.to_evaluation();
            keys.push((p0, p1));
        }
        Ok(Self { keys })
    }
}

impl EvaluationKeys {
    pub fn write_to<W: Write>(&self, w: &mut W, ctx: &FvContext) -> Result<(), FvError> {
        write_header(w, ctx, Kind::Evaluation)?;
        put_u32(w, self.keys.len() as u32)?;
        for pairs in &self.keys {
            put_u32(w, pairs.len() as u32)?;
            for (a, g) in pairs {
                a.write_to(w)?;
                g.write_to(w)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R, ctx: &FvContext) -> Result<Self, FvError> {
        read_header(r, ctx, Kind::Evaluation)?;
        let count = read_instances(r, ctx)?;
        let mut keys = Vec::with_capacity(count);
        for idx in 0..count {
            let digits = get_u32(r)? as usize;
            if digits != ctx.relin_digits(idx) {
                return Err(FvError::ParamsMismatch);
            }
            let mut pairs = Vec::with_capacity(digits);
            for _ in 0..digits {
                let mut a = read_poly(r, ctx, idx)?;
                let mut g = read_poly(r, ctx, idx)?;
                a.to_evaluation();
                g.to_evaluation();
                pairs.push((a, g));
            }
            keys.push(pairs);
        }
        Ok(Self { keys })
    }
}

/// Write a list of ciphertexts; each carries its scale exponent and counters.
pub fn write_ciphertexts<W: Write>(w: &mut W, ctx: &FvContext, cts: &[Ciphertext]) -> Result<(), FvError> {
    write_header(w, ctx, Kind::Ciphertexts)?;
    put_u32(w, cts.len() as u32)?;
    for ct in cts {
        put_u32(w, ct.scale)?;
        put_u64(w, ct.counters.ct_mults)?;
        put_u64(w, ct.counters.plain_mults)?;
        put_u64(w, ct.counters.additions)?;
        put_u32(w, ct.parts.len() as u32)?;
        for [c0, c1] in &ct.parts {
            c0.write_to(w)?;
            c1.write_to(w)?;
        }
    }
    Ok(())
}

pub fn read_ciphertexts<R: Read>(r: &mut R, ctx: &FvContext) -> Result<Vec<Ciphertext>, FvError> {
    read_header(r, ctx, Kind::Ciphertexts)?;
    let count = get_u32(r)? as usize;
    let mut cts = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let scale = get_u32(r)?;
        let counters = OpCounters {
            ct_mults: get_u64(r)?,
            plain_mults: get_u64(r)?,
            additions: get_u64(r)?,
        };
        let inst = read_instances(r, ctx)?;
        let mut parts = Vec::with_capacity(inst);
        for idx in 0..inst {
            let mut c0 = read_poly(r, ctx, idx)?;
            let mut c1 = read_poly(r, ctx, idx)?;
            c0.to_coefficient();
            c1.to_coefficient();
            parts.push([c0, c1]);
        }
        cts.push(Ciphertext { parts, scale, counters });
    }
    Ok(cts)
}

/// Write any of the container types to a file path.
pub fn save<P: AsRef<Path>>(
    path: P,
    f: impl FnOnce(&mut BufWriter<File>) -> Result<(), FvError>,
) -> Result<(), FvError> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Open a file for one of the container readers.
pub fn open<P: AsRef<Path>>(path: P) -> Result<BufReader<File>, FvError> {
    Ok(BufReader::new(File::open(path)?))
}
