//! Trace, jump-log, abstraction, and estimate file formats.
//!
//! All numeric fields are written with Rust's shortest round-trip decimal
//! formatting, so identical runs produce byte-identical files and every f64
//! survives a write/read cycle bit for bit. Traces and jump logs are CSV;
//! manifests and reports are JSON.

use crate::error::{Result, SimError};
use crate::swarm::{AbstractionTrace, AbstractionTrack, AgentTrack, JumpEvent, SwarmTrace};
use std::io::{Read, Write};

use crate::analysis::{FirstPassageEstimate, IntensityEstimate};

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| SimError::Parse(format!("bad {what} value: {field:?}")))
}

fn parse_usize(field: &str, what: &str) -> Result<usize> {
    field
        .parse()
        .map_err(|_| SimError::Parse(format!("bad {what} value: {field:?}")))
}

fn parse_u64(field: &str, what: &str) -> Result<u64> {
    field
        .parse()
        .map_err(|_| SimError::Parse(format!("bad {what} value: {field:?}")))
}

/// Write a grid trace as CSV: one row per (sample, agent), columns
/// `t,agent,q,z_*,z_tilde_*,beta_*,upsilon`.
pub fn write_trace_csv(trace: &SwarmTrace, out: impl Write) -> Result<()> {
    let d = trace.dim;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = vec!["t".into(), "agent".into(), "q".into()];
    for p in 0..d {
        header.push(format!("z_{p}"));
    }
    for p in 0..d {
        header.push(format!("z_tilde_{p}"));
    }
    for p in 0..d {
        header.push(format!("beta_{p}"));
    }
    header.push("upsilon".into());
    w.write_record(&header)?;

    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for (k, t) in trace.grid.iter().enumerate() {
        for a in &trace.agents {
            record.clear();
            record.push(format!("{t}"));
            record.push(format!("{}", a.id));
            record.push(format!("{}", a.modes[k]));
            for p in 0..d {
                record.push(format!("{}", a.z[k * d + p]));
            }
            for p in 0..d {
                record.push(format!("{}", a.z_eff[k * d + p]));
            }
            for p in 0..d {
                record.push(format!("{}", a.beta[k * d + p]));
            }
            record.push(format!("{}", a.clock[k]));
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a trace CSV back. The jump log lives in its own file, so the
/// returned trace has an empty `jumps` list.
pub fn read_trace_csv(input: impl Read) -> Result<SwarmTrace> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| SimError::Parse(e.to_string()))?;
    let d = header.iter().filter(|h| h.starts_with("z_tilde_")).count();
    let expected = 3 + 3 * d + 1;
    if d == 0 || header.len() != expected {
        return Err(SimError::Parse(format!(
            "trace header {header:?} does not match the t,agent,q,z,z_tilde,beta,upsilon layout"
        )));
    }

    let mut grid: Vec<f64> = Vec::new();
    let mut order: Vec<u64> = Vec::new();
    let mut tracks: std::collections::HashMap<u64, AgentTrack> = std::collections::HashMap::new();
    for row in r.records() {
        let row = row.map_err(|e| SimError::Parse(e.to_string()))?;
        if row.len() != expected {
            return Err(SimError::Parse(format!(
                "trace row has {} fields, expected {expected}",
                row.len()
            )));
        }
        let t = parse_f64(&row[0], "t")?;
        let id = parse_u64(&row[1], "agent")?;
        let track = tracks.entry(id).or_insert_with(|| {
            order.push(id);
            AgentTrack {
                id,
                modes: Vec::new(),
                z: Vec::new(),
                z_eff: Vec::new(),
                beta: Vec::new(),
                clock: Vec::new(),
            }
        });
        if order.first() == Some(&id) {
            grid.push(t);
        }
        track.modes.push(parse_usize(&row[2], "q")?);
        for p in 0..d {
            track.z.push(parse_f64(&row[3 + p], "z")?);
        }
        for p in 0..d {
            track.z_eff.push(parse_f64(&row[3 + d + p], "z_tilde")?);
        }
        for p in 0..d {
            track.beta.push(parse_f64(&row[3 + 2 * d + p], "beta")?);
        }
        track.clock.push(parse_f64(&row[3 + 3 * d], "upsilon")?);
    }

    let agents: Vec<AgentTrack> = order
        .iter()
        .map(|id| tracks.remove(id).expect("track recorded for id"))
        .collect();
    for a in &agents {
        if a.clock.len() != grid.len() {
            return Err(SimError::Parse(format!(
                "agent {} has {} samples, grid has {}",
                a.id,
                a.clock.len(),
                grid.len()
            )));
        }
    }
    Ok(SwarmTrace {
        dim: d,
        grid,
        agents,
        jumps: Vec::new(),
    })
}

/// Write the jump log as CSV: columns `t,agent,component,pre_mode,pre_z_*,
/// pre_z_tilde_*,pre_barrier_*,post_mode,post_z_*,post_guard_*,recipients`.
/// Recipients are semicolon-joined ids inside one field.
pub fn write_jumps_csv(dim: usize, jumps: &[JumpEvent], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = vec![
        "t".into(),
        "agent".into(),
        "component".into(),
        "pre_mode".into(),
    ];
    for p in 0..dim {
        header.push(format!("pre_z_{p}"));
    }
    for p in 0..dim {
        header.push(format!("pre_z_tilde_{p}"));
    }
    for p in 0..dim {
        header.push(format!("pre_barrier_{p}"));
    }
    header.push("post_mode".into());
    for p in 0..dim {
        header.push(format!("post_z_{p}"));
    }
    for p in 0..dim {
        header.push(format!("post_guard_{p}"));
    }
    header.push("recipients".into());
    w.write_record(&header)?;

    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for j in jumps {
        record.clear();
        record.push(format!("{}", j.time));
        record.push(format!("{}", j.agent));
        record.push(format!("{}", j.component));
        record.push(format!("{}", j.pre_mode));
        for p in 0..dim {
            record.push(format!("{}", j.pre_z[p]));
        }
        for p in 0..dim {
            record.push(format!("{}", j.pre_z_eff[p]));
        }
        for p in 0..dim {
            record.push(format!("{}", j.pre_barrier[p]));
        }
        record.push(format!("{}", j.post_mode));
        for p in 0..dim {
            record.push(format!("{}", j.post_z[p]));
        }
        for p in 0..dim {
            record.push(format!("{}", j.post_guard[p]));
        }
        record.push(
            j.recipients
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(";"),
        );
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a jump-log CSV written by [`write_jumps_csv`].
pub fn read_jumps_csv(input: impl Read) -> Result<Vec<JumpEvent>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| SimError::Parse(e.to_string()))?;
    let d = header.iter().filter(|h| h.starts_with("pre_z_tilde_")).count();
    let expected = 4 + 3 * d + 1 + 2 * d + 1;
    if d == 0 || header.len() != expected {
        return Err(SimError::Parse(format!(
            "jump-log header {header:?} does not match the fixed layout"
        )));
    }
    let mut jumps = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| SimError::Parse(e.to_string()))?;
        if row.len() != expected {
            return Err(SimError::Parse(format!(
                "jump row has {} fields, expected {expected}",
                row.len()
            )));
        }
        let mut col = 0usize;
        let mut take = || {
            let v = row[col].to_string();
            col += 1;
            v
        };
        let time = parse_f64(&take(), "t")?;
        let agent = parse_u64(&take(), "agent")?;
        let component = parse_usize(&take(), "component")?;
        let pre_mode = parse_usize(&take(), "pre_mode")?;
        let mut pre_z = Vec::with_capacity(d);
        for _ in 0..d {
            pre_z.push(parse_f64(&take(), "pre_z")?);
        }
        let mut pre_z_eff = Vec::with_capacity(d);
        for _ in 0..d {
            pre_z_eff.push(parse_f64(&take(), "pre_z_tilde")?);
        }
        let mut pre_barrier = Vec::with_capacity(d);
        for _ in 0..d {
            pre_barrier.push(parse_f64(&take(), "pre_barrier")?);
        }
        let post_mode = parse_usize(&take(), "post_mode")?;
        let mut post_z = Vec::with_capacity(d);
        for _ in 0..d {
            post_z.push(parse_f64(&take(), "post_z")?);
        }
        let mut post_guard = Vec::with_capacity(d);
        for _ in 0..d {
            post_guard.push(parse_f64(&take(), "post_guard")?);
        }
        let recipients_field = take();
        let recipients = if recipients_field.is_empty() {
            Vec::new()
        } else {
            recipients_field
                .split(';')
                .map(|s| parse_u64(s, "recipient"))
                .collect::<Result<Vec<u64>>>()?
        };
        jumps.push(JumpEvent {
            time,
            agent,
            component,
            pre_mode,
            post_mode,
            pre_z,
            pre_z_eff,
            pre_barrier,
            post_z,
            post_guard,
            recipients,
        });
    }
    Ok(jumps)
}

/// Write an abstraction trace as CSV: `t,agent,beta_*,upsilon`.
pub fn write_abstraction_csv(trace: &AbstractionTrace, out: impl Write) -> Result<()> {
    let d = trace.dim;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = vec!["t".into(), "agent".into()];
    for p in 0..d {
        header.push(format!("beta_{p}"));
    }
    header.push("upsilon".into());
    w.write_record(&header)?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for (k, t) in trace.grid.iter().enumerate() {
        for a in &trace.agents {
            record.clear();
            record.push(format!("{t}"));
            record.push(format!("{}", a.id));
            for p in 0..d {
                record.push(format!("{}", a.beta[k * d + p]));
            }
            record.push(format!("{}", a.clock[k]));
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read an abstraction CSV. Exact jump times are not part of the sampled
/// projection, so the returned tracks carry empty `jump_times`; grid-based
/// reconstruction works on the result.
pub fn read_abstraction_csv(input: impl Read) -> Result<AbstractionTrace> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| SimError::Parse(e.to_string()))?;
    let d = header.iter().filter(|h| h.starts_with("beta_")).count();
    let expected = 2 + d + 1;
    if d == 0 || header.len() != expected {
        return Err(SimError::Parse(format!(
            "abstraction header {header:?} does not match the t,agent,beta,upsilon layout"
        )));
    }
    let mut grid: Vec<f64> = Vec::new();
    let mut order: Vec<u64> = Vec::new();
    let mut tracks: std::collections::HashMap<u64, AbstractionTrack> =
        std::collections::HashMap::new();
    for row in r.records() {
        let row = row.map_err(|e| SimError::Parse(e.to_string()))?;
        if row.len() != expected {
            return Err(SimError::Parse(format!(
                "abstraction row has {} fields, expected {expected}",
                row.len()
            )));
        }
        let t = parse_f64(&row[0], "t")?;
        let id = parse_u64(&row[1], "agent")?;
        let track = tracks.entry(id).or_insert_with(|| {
            order.push(id);
            AbstractionTrack {
                id,
                beta: Vec::new(),
                clock: Vec::new(),
                jump_times: Vec::new(),
            }
        });
        if order.first() == Some(&id) {
            grid.push(t);
        }
        for p in 0..d {
            track.beta.push(parse_f64(&row[2 + p], "beta")?);
        }
        track.clock.push(parse_f64(&row[2 + d], "upsilon")?);
    }
    let agents: Vec<AbstractionTrack> = order
        .iter()
        .map(|id| tracks.remove(id).expect("track recorded for id"))
        .collect();
    for a in &agents {
        if a.clock.len() != grid.len() {
            return Err(SimError::Parse(format!(
                "agent {} has {} samples, grid has {}",
                a.id,
                a.clock.len(),
                grid.len()
            )));
        }
    }
    Ok(AbstractionTrace {
        dim: d,
        grid,
        agents,
    })
}

/// Write a first-passage histogram as CSV:
/// `bin_lo,bin_hi,count,density,cdf_hi`.
pub fn write_first_passage_csv(est: &FirstPassageEstimate, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_lo", "bin_hi", "count", "density", "cdf_hi"])?;
    let width = est.bin_width();
    for (k, count) in est.counts.iter().enumerate() {
        let lo = est.edges[k];
        let hi = est.edges[k + 1];
        let density = *count as f64 / (est.n_reps as f64 * width);
        w.write_record([
            format!("{lo}"),
            format!("{hi}"),
            format!("{count}"),
            format!("{density}"),
            format!("{}", est.cdf_at(hi)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write an intensity estimate as CSV: `t,j_hat,j_se,r_hat,r_se`.
pub fn write_intensity_csv(est: &IntensityEstimate, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "j_hat", "j_se", "r_hat", "r_se"])?;
    for k in 0..est.grid.len() {
        w.write_record([
            format!("{}", est.grid[k]),
            format!("{}", est.j_hat[k]),
            format!("{}", est.j_se[k]),
            format!("{}", est.r_hat[k]),
            format!("{}", est.r_se[k]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Serialize any report as pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(value: &T, mut out: impl Write) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| SimError::Parse(e.to_string()))?;
    text.push('\n');
    out.write_all(text.as_bytes())?;
    Ok(())
}

/// Parse a JSON value written by [`write_json`].
pub fn read_json<T: serde::de::DeserializeOwned>(mut input: impl Read) -> Result<T> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    serde_json::from_str(&text).map_err(|e| SimError::Parse(e.to_string()))
}
