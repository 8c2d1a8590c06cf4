//! Little-endian binary formats.
//!
//! All three files start with an 8-byte magic and a `u32` version.
//!
//! Sample sets (`BLSAMPLE`, v1): `u64` count, then per sample
//! `str instance, u64 depth, u64 action, u64 k, k×u64 candidates, state`.
//!
//! A state is `u64 n, u64 m, n·19×f64, m·5×f64, u64 e, e×(u32 con, u32 var,
//! f64 feat), n×u8 candidate mask`. Strings are `u32` length plus UTF-8.
//!
//! Checkpoints (`BLGATCKP`, v1): `u64 hidden, u64 heads, u64 var_feats,
//! u64 con_feats, u64 segments`, then per segment `str name, u64 len,
//! len×f64`. Segment names and lengths must match the architecture.
//!
//! Lifelong state (`BLLIFEST`, v1): `u64 capacity, u64 stream_count,
//! u64 entries`, per entry `u64 task, u64 action, u64 k, k×f64 logits,
//! state`; then `u64 snapshots`, per snapshot `u64 task, u64 len,
//! len×f64 theta, len×f64 omega`.

use std::path::Path;

use crate::bnb::BranchSample;
use crate::error::{Error, Result};
use crate::features::{BranchState, Edge, CON_FEATS, VAR_FEATS};
use crate::gat::{GatConfig, GatParams};
use crate::lifelong::{ReplayBuffer, ReplayEntry, TaskSnapshot};

pub const SAMPLE_MAGIC: &[u8; 8] = b"BLSAMPLE";
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"BLGATCKP";
pub const LIFELONG_MAGIC: &[u8; 8] = b"BLLIFEST";
pub const VERSION: u32 = 1;

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn header(magic: &[u8; 8]) -> Self {
        let mut w = Self::default();
        w.buf.extend_from_slice(magic);
        w.u32(VERSION);
        w
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
    fn state(&mut self, s: &BranchState) {
        self.usize(s.num_vars);
        self.usize(s.num_cons);
        self.f64s(&s.var_feats);
        self.f64s(&s.con_feats);
        self.usize(s.edges.len());
        for e in &s.edges {
            self.u32(e.con);
            self.u32(e.var);
            self.f64s(&[e.feat]);
        }
        self.buf.extend(s.candidate_mask.iter().map(|&c| u8::from(c)));
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn open(data: &'a [u8], path: &'a Path, magic: &[u8; 8]) -> Result<Self> {
        let mut r = Self { data, pos: 0, path };
        if r.take(8)? != magic {
            return Err(r.err("bad magic"));
        }
        let v = r.u32()?;
        if v != VERSION {
            return Err(r.err(&format!("unsupported version {v}")));
        }
        Ok(r)
    }
    fn err(&self, msg: &str) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            msg: format!("{msg} at byte {}", self.pos),
        }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| self.err("unexpected end of file"))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    /// Length field, sanity-checked against the remaining bytes.
    fn len(&mut self, elem_size: usize) -> Result<usize> {
        let n = self.u64()?;
        let remaining = (self.data.len() - self.pos) as u64;
        if n.saturating_mul(elem_size.max(1) as u64) > remaining {
            return Err(self.err("length exceeds file size"));
        }
        Ok(n as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| self.err("overflow"))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| self.err("invalid utf-8"))
    }
    fn state(&mut self) -> Result<BranchState> {
        let n = self.len(VAR_FEATS * 8)?;
        let m = self.len(0)?;
        let var_feats = self.f64s(n * VAR_FEATS)?;
        let con_feats = self.f64s(m.checked_mul(CON_FEATS).ok_or_else(|| self.err("overflow"))?)?;
        let ne = self.len(16)?;
        let mut edges = Vec::with_capacity(ne);
        for _ in 0..ne {
            let con = self.u32()?;
            let var = self.u32()?;
            let feat = self.f64()?;
            edges.push(Edge { con, var, feat });
        }
        let mask = self.take(n)?;
        let candidate_mask = mask
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(self.err("bad candidate flag")),
            })
            .collect::<Result<Vec<bool>>>()?;
        let s = BranchState {
            num_vars: n,
            num_cons: m,
            var_feats,
            con_feats,
            edges,
            candidate_mask,
        };
        s.check_shape().map_err(|e| self.err(&e.to_string()))?;
        Ok(s)
    }
    fn finish(&self) -> Result<()> {
        if self.pos == self.data.len() {
            Ok(())
        } else {
            Err(self.err("trailing bytes"))
        }
    }
}

pub fn encode_samples(samples: &[BranchSample]) -> Vec<u8> {
    let mut w = Writer::header(SAMPLE_MAGIC);
    w.usize(samples.len());
    for s in samples {
        w.str(&s.instance);
        w.usize(s.depth);
        w.usize(s.expert_action);
        w.usize(s.candidates.len());
        for &c in &s.candidates {
            w.usize(c);
        }
        w.state(&s.state);
    }
    w.buf
}

pub fn decode_samples(data: &[u8], path: &Path) -> Result<Vec<BranchSample>> {
    let mut r = Reader::open(data, path, SAMPLE_MAGIC)?;
    let n = r.len(1)?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let instance = r.str()?;
        let depth = r.u64()? as usize;
        let expert_action = r.u64()? as usize;
        let k = r.len(8)?;
        let candidates = (0..k).map(|_| r.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let state = r.state()?;
        if expert_action >= candidates.len() || candidates != state.candidates() {
            return Err(r.err("inconsistent sample"));
        }
        out.push(BranchSample {
            state,
            candidates,
            expert_action,
            instance,
            depth,
        });
    }
    r.finish()?;
    Ok(out)
}

pub fn write_samples(path: impl AsRef<Path>, samples: &[BranchSample]) -> Result<()> {
    std::fs::write(path, encode_samples(samples))?;
    Ok(())
}

pub fn read_samples(path: impl AsRef<Path>) -> Result<Vec<BranchSample>> {
    let path = path.as_ref();
    decode_samples(&std::fs::read(path)?, path)
}

pub fn encode_checkpoint(params: &GatParams) -> Vec<u8> {
    let mut w = Writer::header(CHECKPOINT_MAGIC);
    let c = params.config();
    for v in [c.hidden, c.heads, c.var_feats, c.con_feats] {
        w.usize(v);
    }
    w.usize(params.segments().len());
    for seg in params.segments() {
        w.str(&seg.name);
        w.usize(seg.range.len());
        w.f64s(&params.flatten()[seg.range.clone()]);
    }
    w.buf
}

pub fn decode_checkpoint(data: &[u8], path: &Path) -> Result<GatParams> {
    let mut r = Reader::open(data, path, CHECKPOINT_MAGIC)?;
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = r.u64()? as usize;
    }
    let config = GatConfig {
        hidden: dims[0],
        heads: dims[1],
        var_feats: dims[2],
        con_feats: dims[3],
    };
    if config.var_feats != VAR_FEATS || config.con_feats != CON_FEATS || config.hidden == 0 || config.heads == 0 {
        return Err(r.err("unsupported architecture"));
    }
    let mut params = GatParams::zeros(config);
    let nseg = r.len(1)?;
    if nseg != params.segments().len() {
        return Err(r.err("segment count mismatch"));
    }
    for k in 0..nseg {
        let name = r.str()?;
        let len = r.len(8)?;
        let seg = params.segments()[k].clone();
        if seg.name != name || seg.range.len() != len {
            return Err(r.err(&format!("unexpected segment `{name}`")));
        }
        let vals = r.f64s(len)?;
        params.flat_mut()[seg.range].copy_from_slice(&vals);
    }
    r.finish()?;
    Ok(params)
}

pub fn write_checkpoint(path: impl AsRef<Path>, params: &GatParams) -> Result<()> {
    std::fs::write(path, encode_checkpoint(params))?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<GatParams> {
    let path = path.as_ref();
    decode_checkpoint(&std::fs::read(path)?, path)
}

pub fn encode_lifelong(buffer: &ReplayBuffer, snapshots: &[TaskSnapshot]) -> Vec<u8> {
    let mut w = Writer::header(LIFELONG_MAGIC);
    w.usize(buffer.capacity);
    w.u64(buffer.stream_count);
    w.usize(buffer.entries.len());
    for e in &buffer.entries {
        w.usize(e.task);
        w.usize(e.action);
        w.usize(e.logits.len());
        w.f64s(&e.logits);
        w.state(&e.state);
    }
    w.usize(snapshots.len());
    for s in snapshots {
        w.usize(s.task);
        w.usize(s.theta.len());
        w.f64s(&s.theta);
        w.f64s(&s.omega);
    }
    w.buf
}

pub fn decode_lifelong(data: &[u8], path: &Path) -> Result<(ReplayBuffer, Vec<TaskSnapshot>)> {
    let mut r = Reader::open(data, path, LIFELONG_MAGIC)?;
    let capacity = r.u64()? as usize;
    let stream_count = r.u64()?;
    let ne = r.len(1)?;
    let mut entries = Vec::with_capacity(ne);
    for _ in 0..ne {
        let task = r.u64()? as usize;
        let action = r.u64()? as usize;
        let k = r.len(8)?;
        let logits = r.f64s(k)?;
        let state = r.state()?;
        if state.num_candidates() != k || action >= k {
            return Err(r.err("buffer entry does not match its state"));
        }
        entries.push(ReplayEntry {
            state,
            logits,
            action,
            task,
        });
    }
    if entries.len() > capacity {
        return Err(r.err("buffer exceeds capacity"));
    }
    let ns = r.len(1)?;
    let mut snapshots = Vec::with_capacity(ns);
    for _ in 0..ns {
        let task = r.u64()? as usize;
        let len = r.len(16)?;
        let theta = r.f64s(len)?;
        let omega = r.f64s(len)?;
        snapshots.push(TaskSnapshot { task, theta, omega });
    }
    r.finish()?;
    Ok((
        ReplayBuffer {
            capacity,
            entries,
            stream_count,
        },
        snapshots,
    ))
}

pub fn write_lifelong(path: impl AsRef<Path>, buffer: &ReplayBuffer, snapshots: &[TaskSnapshot]) -> Result<()> {
    std::fs::write(path, encode_lifelong(buffer, snapshots))?;
    Ok(())
}

pub fn read_lifelong(path: impl AsRef<Path>) -> Result<(ReplayBuffer, Vec<TaskSnapshot>)> {
    let path = path.as_ref();
    decode_lifelong(&std::fs::read(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::random_state;

    fn samples() -> Vec<BranchSample> {
        (0..4)
            .map(|k| {
                let state = random_state(5 + k, 3, 0.5, k as u64);
                let candidates = state.candidates();
                BranchSample {
                    expert_action: candidates.len() - 1,
                    candidates,
                    state,
                    instance: format!("inst_{k}"),
                    depth: k,
                }
            })
            .collect()
    }

    #[test]
    fn samples_round_trip() {
        let s = samples();
        let bytes = encode_samples(&s);
        assert_eq!(decode_samples(&bytes, Path::new("x")).unwrap(), s);
        assert_eq!(encode_samples(&s), bytes);
    }

    #[test]
    fn truncated_and_corrupt_files_are_rejected() {
        let bytes = encode_samples(&samples());
        for cut in [0, 5, 12, bytes.len() / 2, bytes.len() - 1] {
            assert!(decode_samples(&bytes[..cut], Path::new("x")).is_err());
        }
        let mut bad = bytes.clone();
        bad[8] = 9;
        let e = decode_samples(&bad, Path::new("x")).unwrap_err().to_string();
        assert!(e.contains("version"));
        let mut longer = bytes;
        longer.push(0);
        assert!(decode_samples(&longer, Path::new("x")).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = GatParams::init(GatConfig::with_hidden(6, 3), 7);
        let bytes = encode_checkpoint(&p);
        let q = decode_checkpoint(&bytes, Path::new("c")).unwrap();
        assert_eq!(p, q);
        assert!(q.flatten().iter().zip(p.flatten()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(decode_checkpoint(&bytes[..bytes.len() - 3], Path::new("c")).is_err());
    }

    #[test]
    fn lifelong_state_round_trip() {
        let mut buf = ReplayBuffer::new(3);
        for (k, s) in samples().into_iter().take(2).enumerate() {
            buf.entries.push(ReplayEntry {
                logits: vec![0.5; s.candidates.len()],
                action: 0,
                task: k,
                state: s.state,
            });
        }
        buf.stream_count = 9;
        let snaps = vec![TaskSnapshot {
            task: 0,
            theta: vec![1.0, 2.0],
            omega: vec![0.0, 3.5],
        }];
        let bytes = encode_lifelong(&buf, &snaps);
        let (b2, s2) = decode_lifelong(&bytes, Path::new("l")).unwrap();
        assert_eq!(b2, buf);
        assert_eq!(s2, snaps);
    }
}
