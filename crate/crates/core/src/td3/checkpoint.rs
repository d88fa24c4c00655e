//! Binary agent checkpoints. Layout, all integers and floats little-endian:
//!
//! ```text
//! "TD3C" | u32 version | u8 phase | u32 obs_dim | u32 act_dim
//! u32 network count, then per network: u8 output activation, u32 width count, u32 widths...
//! f32 parameters of every network, in manifest order
//! per optimizer (actor, critic 1, critic 2): u64 step count, f32 first moments, f32 second moments
//! u32 length + JSON config echo
//! u64 environment steps | u64 updates | 32-byte rng seed | u64 rng stream | u128 rng word position
//! u8 replay flag; if set: u64 cursor, u64 length, then the occupied slots
//! ```

use std::io::Write;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::agent::Td3Agent;
use super::mlp::{Dense, Mlp, OutputActivation};
use super::{Td3Config, Td3Error};
use crate::env::Phase;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"TD3C";

/// Everything before the parameter blob.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointHeader {
    pub version: u32,
    pub phase: Phase,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub networks: Vec<(OutputActivation, Vec<usize>)>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s<'a>(&mut self, vals: impl IntoIterator<Item = &'a f32>) {
        for v in vals {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    fn net(&mut self, net: &Mlp<f32>) {
        for l in net.layers() {
            self.f32s(l.params());
        }
    }
    fn moments(&mut self, layers: &[Dense<f32>]) {
        for l in layers {
            self.f32s(l.params());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], Td3Error> {
        if self.buf.len() - self.pos < n {
            return Err(Td3Error::Format(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, Td3Error> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, Td3Error> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, Td3Error> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn u128(&mut self) -> Result<u128, Td3Error> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }
    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, Td3Error> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Td3Error::Format("size overflow".into()))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn layers(&mut self, sizes: &[usize]) -> Result<Vec<Dense<f32>>, Td3Error> {
        sizes
            .windows(2)
            .map(|w| {
                let mut d = Dense::zeros(w[0], w[1]);
                let vals = self.f32s(d.param_count())?;
                d.params_mut().zip(vals).for_each(|(p, v)| *p = v);
                Ok(d)
            })
            .collect()
    }
}

fn activation_tag(a: OutputActivation) -> u8 {
    match a {
        OutputActivation::Identity => 0,
        OutputActivation::Tanh => 1,
    }
}

fn read_header(r: &mut Reader) -> Result<CheckpointHeader, Td3Error> {
    if r.take(4)? != MAGIC {
        return Err(Td3Error::Format("bad magic, not a TD3C checkpoint".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Td3Error::Format(format!("unsupported version {version}, expected {CHECKPOINT_VERSION}")));
    }
    let tag = r.u8()? as usize;
    let phase = *Phase::ALL
        .get(tag)
        .ok_or_else(|| Td3Error::Format(format!("unknown phase tag {tag}")))?;
    let obs_dim = r.u32()? as usize;
    let act_dim = r.u32()? as usize;
    let count = r.u32()?;
    if count != 6 {
        return Err(Td3Error::Format(format!("expected 6 networks, found {count}")));
    }
    let mut networks = Vec::new();
    for _ in 0..count {
        let act = match r.u8()? {
            0 => OutputActivation::Identity,
            1 => OutputActivation::Tanh,
            t => return Err(Td3Error::Format(format!("unknown activation tag {t}"))),
        };
        let n = r.u32()? as usize;
        if !(2..=64).contains(&n) {
            return Err(Td3Error::Format(format!("implausible layer count {n}")));
        }
        let sizes = (0..n).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?;
        networks.push((act, sizes));
    }
    Ok(CheckpointHeader {
        version,
        phase,
        obs_dim,
        act_dim,
        networks,
    })
}

pub fn read_checkpoint_header(path: &Path) -> Result<CheckpointHeader, Td3Error> {
    let buf = std::fs::read(path)?;
    read_header(&mut Reader { buf: &buf, pos: 0 })
}

impl Td3Agent {
    fn networks(&self) -> [&Mlp<f32>; 6] {
        [
            &self.actor,
            &self.critic1,
            &self.critic2,
            &self.actor_target,
            &self.critic1_target,
            &self.critic2_target,
        ]
    }

    pub fn to_bytes(&self, with_replay: bool) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.u8(self.phase.index() as u8);
        w.u32(self.obs_dim() as u32);
        w.u32(self.act_dim() as u32);
        let nets = self.networks();
        w.u32(nets.len() as u32);
        for n in nets {
            w.u8(activation_tag(n.output_activation()));
            let sizes = n.sizes();
            w.u32(sizes.len() as u32);
            sizes.iter().for_each(|&s| w.u32(s as u32));
        }
        for n in nets {
            w.net(n);
        }
        for opt in [&self.actor_opt, &self.critic1_opt, &self.critic2_opt] {
            w.u64(opt.steps());
            let (m, v) = opt.moments();
            w.moments(m);
            w.moments(v);
        }
        let json = serde_json::to_vec(&self.cfg).expect("config serializes");
        w.u32(json.len() as u32);
        w.0.extend_from_slice(&json);

        w.u64(self.env_steps);
        w.u64(self.updates);
        w.0.extend_from_slice(&self.rng.get_seed());
        w.u64(self.rng.get_stream());
        w.0.extend_from_slice(&self.rng.get_word_pos().to_le_bytes());

        w.u8(with_replay as u8);
        if with_replay {
            let b = &self.buffer;
            let (o, a, n) = (b.obs_dim, b.act_dim, b.len);
            w.u64(b.cursor as u64);
            w.u64(n as u64);
            w.f32s(&b.obs[..n * o]);
            w.f32s(&b.actions[..n * a]);
            w.f32s(&b.rewards[..n]);
            w.f32s(&b.next_obs[..n * o]);
            w.0.extend(b.done[..n].iter().map(|&d| d as u8));
        }
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, Td3Error> {
        let mut r = Reader { buf, pos: 0 };
        let h = read_header(&mut r)?;
        let mut nets = Vec::with_capacity(6);
        for (act, sizes) in &h.networks {
            let layers = r.layers(sizes)?;
            nets.push(Mlp::from_layers(layers, *act).map_err(Td3Error::Format)?);
        }
        let mut opts_raw = Vec::new();
        for net in &nets[..3] {
            let t = r.u64()?;
            let sizes = net.sizes();
            let m = r.layers(&sizes)?;
            let v = r.layers(&sizes)?;
            opts_raw.push((t, m, v));
        }
        let json_len = r.u32()? as usize;
        let cfg: Td3Config = serde_json::from_slice(r.take(json_len)?)
            .map_err(|e| Td3Error::Format(format!("config echo: {e}")))?;

        let mut agent = Td3Agent::new(h.phase, h.obs_dim, h.act_dim, cfg.clone(), 0)?;
        let expect = agent.networks().map(|n| (n.output_activation(), n.sizes()));
        if expect.as_slice() != h.networks.as_slice() {
            return Err(Td3Error::Shape("layer manifest disagrees with the config echo".into()));
        }
        let mut it = nets.into_iter();
        agent.actor = it.next().unwrap();
        agent.critic1 = it.next().unwrap();
        agent.critic2 = it.next().unwrap();
        agent.actor_target = it.next().unwrap();
        agent.critic1_target = it.next().unwrap();
        agent.critic2_target = it.next().unwrap();
        let mut opts = opts_raw.into_iter();
        for opt in [&mut agent.actor_opt, &mut agent.critic1_opt, &mut agent.critic2_opt] {
            let (t, m, v) = opts.next().unwrap();
            opt.set_state(t, m, v).map_err(Td3Error::Format)?;
        }

        agent.env_steps = r.u64()?;
        agent.updates = r.u64()?;
        let seed: [u8; 32] = r.take(32)?.try_into().unwrap();
        let stream = r.u64()?;
        let word_pos = r.u128()?;
        agent.rng = ChaCha8Rng::from_seed(seed);
        agent.rng.set_stream(stream);
        agent.rng.set_word_pos(word_pos);

        match r.u8()? {
            0 => {}
            1 => {
                let b = &mut agent.buffer;
                let (o, a) = (b.obs_dim, b.act_dim);
                let cursor = r.u64()? as usize;
                let n = r.u64()? as usize;
                if n > b.capacity || cursor >= b.capacity || (n < b.capacity && cursor != n) {
                    return Err(Td3Error::Format(format!("replay cursor {cursor} / length {n} invalid")));
                }
                b.obs[..n * o].copy_from_slice(&r.f32s(n * o)?);
                b.actions[..n * a].copy_from_slice(&r.f32s(n * a)?);
                b.rewards[..n].copy_from_slice(&r.f32s(n)?);
                b.next_obs[..n * o].copy_from_slice(&r.f32s(n * o)?);
                for (d, &byte) in b.done[..n].iter_mut().zip(r.take(n)?) {
                    *d = byte != 0;
                }
                b.cursor = cursor;
                b.len = n;
            }
            f => return Err(Td3Error::Format(format!("bad replay flag {f}"))),
        }
        if r.pos != buf.len() {
            return Err(Td3Error::Format(format!("{} trailing bytes", buf.len() - r.pos)));
        }
        Ok(agent)
    }

    /// Writes through a temporary file so a crash never leaves a torn checkpoint.
    pub fn save(&self, path: &Path, with_replay: bool) -> Result<(), Td3Error> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes(with_replay))?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, Td3Error> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
