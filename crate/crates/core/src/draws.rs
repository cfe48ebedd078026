//! Persisted posterior-draw files.
//!
//! Line-delimited text, append-safe and diffable. The first line is a header
//! carrying the model family, rotation, concentration, seed, and a format
//! version; every further line is one retained draw:
//!
//! ```text
//! #rgpu-draws v1 model=negbinc rotated=0 m=1.0000000000000000e0 seed=42
//! iteration,theta,weight,y1,y2[,weight,y1,y2...]
//! ```
//!
//! Numeric fields are written with 17 significant digits, so a write/read
//! round trip reproduces every draw bit-exactly.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use crate::data::fmt_f64;
use crate::error::{Error, Result};
use crate::partition::GeneratingFamily;
use crate::sampler::PosteriorDraw;

pub const FORMAT_VERSION: &str = "v1";

/// The fit identity carried in a draw-file header: everything evaluation
/// needs to interpret the draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitMeta {
    pub family: GeneratingFamily,
    pub rotated: bool,
    pub concentration: f64,
    pub seed: u64,
}

impl FitMeta {
    /// User-facing model name: `negbinc` for the negative-binomial variant,
    /// `bernsteincbp` for the binomial (Bernstein) variant.
    pub fn model_name(&self) -> &'static str {
        model_name(self.family)
    }
}

pub fn model_name(family: GeneratingFamily) -> &'static str {
    match family {
        GeneratingFamily::NegBinomial => "negbinc",
        GeneratingFamily::Binomial => "bernsteincbp",
    }
}

pub fn family_from_model(name: &str) -> Result<GeneratingFamily> {
    match name.to_ascii_lowercase().as_str() {
        "negbinc" => Ok(GeneratingFamily::NegBinomial),
        "bernsteincbp" => Ok(GeneratingFamily::Binomial),
        other => Err(Error::validation(format!(
            "unknown model `{other}`; expected negbinc or bernsteincbp"
        ))),
    }
}

/// Write a draw file. `extras` are informational header tokens (iterations,
/// priors, ...) that readers ignore.
pub fn write_draws(
    path: &Path,
    meta: &FitMeta,
    extras: &[(String, String)],
    draws: &[PosteriorDraw],
) -> Result<()> {
    if draws.is_empty() {
        return Err(Error::validation("refusing to write an empty draw file"));
    }
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write!(
        w,
        "#rgpu-draws {FORMAT_VERSION} model={} rotated={} m={} seed={}",
        meta.model_name(),
        if meta.rotated { 1 } else { 0 },
        fmt_f64(meta.concentration),
        meta.seed
    )?;
    for (k, v) in extras {
        write!(w, " {k}={v}")?;
    }
    writeln!(w)?;
    for d in draws {
        write!(w, "{},{}", d.iteration, fmt_f64(d.theta))?;
        for (&weight, &(y1, y2)) in d.weights.iter().zip(&d.atoms) {
            write!(w, ",{},{},{}", fmt_f64(weight), fmt_f64(y1), fmt_f64(y2))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a draw file back, validating the header and every draw.
pub fn read_draws(path: &Path) -> Result<(FitMeta, Vec<PosteriorDraw>)> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::data(format!("{}: empty draw file", path.display())))??;
    let meta = parse_header(path, &header)?;
    let mut draws = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 2;
        draws.push(parse_draw_line(path, lineno, line)?);
    }
    if draws.is_empty() {
        return Err(Error::data(format!("{}: draw file holds no draws", path.display())));
    }
    Ok((meta, draws))
}

fn parse_header(path: &Path, header: &str) -> Result<FitMeta> {
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some("#rgpu-draws") {
        return Err(Error::data(format!(
            "{}: not a draw file (missing #rgpu-draws header)",
            path.display()
        )));
    }
    let version = tokens.next().unwrap_or("");
    if version != FORMAT_VERSION {
        return Err(Error::data(format!(
            "{}: unsupported draw-file version `{version}`",
            path.display()
        )));
    }
    let mut family = None;
    let mut rotated = None;
    let mut concentration = None;
    let mut seed = None;
    for tok in tokens {
        let Some((k, v)) = tok.split_once('=') else { continue };
        match k {
            "model" => family = Some(family_from_model(v)?),
            "rotated" => {
                rotated = Some(match v {
                    "1" | "true" => true,
                    "0" | "false" => false,
                    _ => {
                        return Err(Error::data(format!(
                            "{}: bad rotated flag `{v}`",
                            path.display()
                        )))
                    }
                })
            }
            "m" => {
                concentration = Some(v.parse::<f64>().map_err(|_| {
                    Error::data(format!("{}: bad concentration `{v}`", path.display()))
                })?)
            }
            "seed" => {
                seed = Some(v.parse::<u64>().map_err(|_| {
                    Error::data(format!("{}: bad seed `{v}`", path.display()))
                })?)
            }
            _ => {} // informational extras
        }
    }
    match (family, rotated, concentration, seed) {
        (Some(family), Some(rotated), Some(concentration), Some(seed)) => {
            Ok(FitMeta { family, rotated, concentration, seed })
        }
        _ => Err(Error::data(format!(
            "{}: header must carry model, rotated, m, and seed",
            path.display()
        ))),
    }
}

fn parse_draw_line(path: &Path, lineno: usize, line: &str) -> Result<PosteriorDraw> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() < 5 || !(fields.len() - 2).is_multiple_of(3) {
        return Err(Error::data(format!(
            "{}: line {lineno}: expected iteration,theta plus weight,y1,y2 triples",
            path.display()
        )));
    }
    let bad = |what: &str, s: &str| {
        Error::data(format!("{}: line {lineno}: cannot parse {what} `{s}`", path.display()))
    };
    let iteration = fields[0].parse::<u64>().map_err(|_| bad("iteration", fields[0]))?;
    let theta = fields[1].parse::<f64>().map_err(|_| bad("theta", fields[1]))?;
    let mut weights = Vec::with_capacity((fields.len() - 2) / 3);
    let mut atoms = Vec::with_capacity(weights.capacity());
    for triple in fields[2..].chunks_exact(3) {
        let w = triple[0].parse::<f64>().map_err(|_| bad("weight", triple[0]))?;
        let y1 = triple[1].parse::<f64>().map_err(|_| bad("atom", triple[1]))?;
        let y2 = triple[2].parse::<f64>().map_err(|_| bad("atom", triple[2]))?;
        weights.push(w);
        atoms.push((y1, y2));
    }
    let draw = PosteriorDraw { iteration, theta, weights, atoms };
    draw.validate().map_err(|e| {
        Error::data(format!("{}: line {lineno}: {e}", path.display()))
    })?;
    Ok(draw)
}
