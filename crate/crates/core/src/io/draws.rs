//! On-disk posterior draws.
//!
//! A draw directory holds three files:
//!
//! * `run.txt`: `key = value` lines (`format`, `n_iterations`, `burn_in`,
//!   `seed`, `state_thin`, `n_areas`, `n_times`, `n_states`, `n_chains`);
//! * `params.csv`: header `chain,iteration,<parameter names>`, one row per
//!   kept iteration, values in shortest round-trip decimal form;
//! * `states.bin`: the magic bytes `CMSNBST1`, then six little-endian `u32`
//!   header fields `N, T, K, thinning, draw count, chain count`, then per
//!   draw a `u32` chain index, a `u32` iteration and `N·T` state bytes
//!   (area-major).
//!
//! Every file is written to a temporary name and renamed into place.

use std::fs;
use std::path::Path;

use crate::inference::{ChainDraws, PosteriorDraws, StateDraw};
use crate::model::LatentStates;
use crate::num::{to_f64, Scalar};
use crate::{Error, Result};

use super::atomic_write;
use super::panel::finish;

pub const STATE_MAGIC: &[u8; 8] = b"CMSNBST1";
const FORMAT_VERSION: u32 = 1;

/// Writes `draws` into `dir`, creating it if needed.
pub fn persist_draws<F: Scalar>(draws: &PosteriorDraws<F>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let meta = format!(
        "format = {FORMAT_VERSION}\nn_iterations = {}\nburn_in = {}\nseed = {}\nstate_thin = {}\n\
         n_areas = {}\nn_times = {}\nn_states = {}\nn_chains = {}\n",
        draws.n_iterations,
        draws.burn_in,
        draws.seed,
        draws.state_thin,
        draws.n_areas,
        draws.n_times,
        draws.n_states,
        draws.n_chains()
    );
    atomic_write(&dir.join("run.txt"), meta.as_bytes())?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["chain".to_string(), "iteration".to_string()];
    header.extend(draws.names.iter().cloned());
    w.write_record(&header)?;
    for (c, ch) in draws.chains.iter().enumerate() {
        for (k, row) in ch.params.iter().enumerate() {
            let mut rec = vec![c.to_string(), (draws.burn_in + k + 1).to_string()];
            rec.extend(row.iter().map(|&v| to_f64(v).to_string()));
            w.write_record(&rec)?;
        }
    }
    atomic_write(&dir.join("params.csv"), &finish(w)?)?;

    let cells = draws.n_areas * draws.n_times;
    let count = draws.n_state_draws();
    let mut buf = Vec::with_capacity(32 + count * (8 + cells));
    buf.extend_from_slice(STATE_MAGIC);
    for v in [draws.n_areas, draws.n_times, draws.n_states, draws.state_thin, count, draws.n_chains()] {
        buf.extend_from_slice(&to_u32(v)?.to_le_bytes());
    }
    for (c, ch) in draws.chains.iter().enumerate() {
        for sd in &ch.states {
            buf.extend_from_slice(&to_u32(c)?.to_le_bytes());
            buf.extend_from_slice(&sd.iteration.to_le_bytes());
            for i in 0..draws.n_areas {
                buf.extend_from_slice(sd.states.area(i));
            }
        }
    }
    atomic_write(&dir.join("states.bin"), &buf)
}

fn to_u32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("value {v} does not fit the state file header")))
}

fn meta_value(text: &str, key: &str) -> Result<u64> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == key)
        .ok_or_else(|| Error::Format(format!("run.txt lacks '{key}'")))?
        .1
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("run.txt has an invalid '{key}'")))
}

/// Reads a directory written by [`persist_draws`].
pub fn load_draws<F: Scalar>(dir: &Path) -> Result<PosteriorDraws<F>> {
    let meta = super::read_text(&dir.join("run.txt"))?;
    let version = meta_value(&meta, "format")?;
    if version != FORMAT_VERSION as u64 {
        return Err(Error::Format(format!(
            "draw format version {version} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    let get = |k: &str| meta_value(&meta, k).map(|v| v as usize);
    let (n_iterations, burn_in, state_thin) = (get("n_iterations")?, get("burn_in")?, get("state_thin")?);
    let (n_areas, n_times, n_states, n_chains) = (get("n_areas")?, get("n_times")?, get("n_states")?, get("n_chains")?);
    let seed = meta_value(&meta, "seed")?;

    let params_path = dir.join("params.csv");
    let mut rdr = csv::Reader::from_path(&params_path)?;
    let header = rdr.headers()?.clone();
    if header.len() < 2 || &header[0] != "chain" || &header[1] != "iteration" {
        return Err(Error::Format("params.csv header must start with 'chain,iteration'".into()));
    }
    let names: Vec<String> = header.iter().skip(2).map(String::from).collect();
    let mut chains: Vec<ChainDraws<F>> = (0..n_chains)
        .map(|_| ChainDraws {
            params: Vec::new(),
            states: Vec::new(),
        })
        .collect();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |msg: &str| Error::Parse {
            path: params_path.display().to_string(),
            line,
            msg: msg.into(),
        };
        if rec.len() != header.len() {
            return Err(bad("wrong number of fields"));
        }
        let c: usize = rec[0].parse().map_err(|_| bad("invalid chain index"))?;
        let it: usize = rec[1].parse().map_err(|_| bad("invalid iteration"))?;
        let ch = chains.get_mut(c).ok_or_else(|| bad("chain index out of range"))?;
        if it != burn_in + ch.params.len() + 1 {
            return Err(bad("iterations are not consecutive"));
        }
        let row = rec
            .iter()
            .skip(2)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .and_then(F::from_f64)
                    .ok_or_else(|| bad("invalid parameter value"))
            })
            .collect::<Result<Vec<F>>>()?;
        ch.params.push(row);
    }

    let bytes = super::read_bytes(&dir.join("states.bin"))?;
    if bytes.len() < 32 || &bytes[..8] != STATE_MAGIC {
        return Err(Error::Format("states.bin has an unknown header".into()));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[8 + 4 * k..12 + 4 * k].try_into().expect("4 bytes")) as usize;
    let (n, t, k, thin, count, nc) = (word(0), word(1), word(2), word(3), word(4), word(5));
    if (n, t, k, thin, nc) != (n_areas, n_times, n_states, state_thin, n_chains) {
        return Err(Error::Format("states.bin header disagrees with run.txt".into()));
    }
    let cells = n * t;
    let expected = count
        .checked_mul(8 + cells)
        .and_then(|b| b.checked_add(32))
        .ok_or_else(|| Error::Format("states.bin header is corrupt".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "states.bin is truncated or padded ({} bytes, expected {expected})",
            bytes.len()
        )));
    }
    let mut pos = 32;
    for _ in 0..count {
        let c = u32::from_le_bytes(bytes[pos..pos + 4].try_into().expect("4 bytes")) as usize;
        let iteration = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().expect("4 bytes"));
        let s = bytes[pos + 8..pos + 8 + cells].to_vec();
        pos += 8 + cells;
        if s.iter().any(|&v| v as usize >= k) {
            return Err(Error::Format("state index out of range".into()));
        }
        let ch = chains
            .get_mut(c)
            .ok_or_else(|| Error::Format("state draw names an unknown chain".into()))?;
        ch.states.push(StateDraw {
            iteration,
            states: LatentStates::new(n, t, s)?,
        });
    }
    Ok(PosteriorDraws {
        names,
        n_iterations,
        burn_in,
        seed,
        state_thin,
        n_areas,
        n_times,
        n_states,
        chains,
    })
}
