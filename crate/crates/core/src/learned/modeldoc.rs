//! Plain-text model documents. Decimal serialization with 17 significant
//! digits, so reading a document reproduces the exact trained weights.

use super::nets::{BaselineNet, DualEncoderNet, Net, NetKind, SpatioTemporalNet};
use super::LearnedError;
use crate::neuralnet::Tensor;
use crate::planning::CorruptionSpec;
use std::io::{BufRead, Write};
use std::path::Path;

const HEADER: &str = "recognizer-model v1";

/// Provenance the evaluator needs alongside the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMeta {
    pub trained_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub seed: u64,
    /// Names of the maps the training stream drew from; experiments refuse
    /// test sets that overlap these.
    pub train_maps: Vec<String>,
    /// Corruption of the cost model the training features were extracted
    /// under, when the recognizer was deliberately taught a wrong belief.
    /// Evaluation should corrupt its cost model the same way.
    pub belief: Option<CorruptionSpec>,
}

impl ModelMeta {
    pub fn untrained(seed: u64) -> Self {
        ModelMeta {
            trained_epochs: 0,
            learning_rate: 0.001,
            batch_size: 32,
            dropout: 0.1,
            seed,
            train_maps: Vec::new(),
            belief: None,
        }
    }
}

fn bad(msg: impl Into<String>) -> LearnedError {
    LearnedError::ModelFormat(msg.into())
}

pub fn write_model<W: Write>(w: &mut W, net: &Net, meta: &ModelMeta) -> Result<(), LearnedError> {
    for name in &meta.train_maps {
        if name.is_empty() || name.contains(|c: char| c.is_whitespace() || c == ',') {
            return Err(bad(format!("map name {name:?} cannot be serialized")));
        }
    }

    writeln!(w, "{HEADER}")?;
    writeln!(w, "kind {}", net.kind().id())?;
    writeln!(w, "goals {}", net.goal_count())?;
    match net {
        Net::DualEncoder(n) => writeln!(w, "hidden {}", n.hidden())?,
        Net::Baseline(n) => writeln!(w, "hidden {}", n.hidden())?,
        Net::SpatioTemporal(n) => {
            let (h, wd) = n.spatial();
            let ch = n.channels();
            writeln!(w, "spatial {h} {wd}")?;
            writeln!(w, "channels {} {} {}", ch[0], ch[1], ch[2])?;
            writeln!(w, "hidden {}", n.hidden())?;
        }
    }
    writeln!(w, "epochs {}", meta.trained_epochs)?;
    writeln!(w, "learning_rate {:?}", meta.learning_rate)?;
    writeln!(w, "batch_size {}", meta.batch_size)?;
    writeln!(w, "dropout {:?}", meta.dropout)?;
    writeln!(w, "seed {}", meta.seed)?;
    if meta.train_maps.is_empty() {
        writeln!(w, "train_maps -")?;
    } else {
        writeln!(w, "train_maps {}", meta.train_maps.join(","))?;
    }
    if let Some(b) = meta.belief {
        writeln!(w, "belief {:?} {:?} {}", b.eps_prime, b.delta_max, b.seed)?;
    }

    let params = net.params();
    writeln!(w, "params {}", params.len())?;
    for (name, tensor) in params.iter() {
        write!(w, "param {name}")?;
        for d in tensor.shape() {
            write!(w, " {d}")?;
        }
        writeln!(w)?;
        let mut first = true;
        for v in tensor.iter() {
            if first {
                write!(w, "{v:.16e}")?;
                first = false;
            } else {
                write!(w, " {v:.16e}")?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

struct Lines<R> {
    reader: R,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String, LearnedError> {
        let mut buf = String::new();
        self.line += 1;
        if self.reader.read_line(&mut buf)? == 0 {
            return Err(bad(format!("unexpected end of document at line {}", self.line)));
        }
        Ok(buf.trim_end_matches(['\n', '\r']).to_string())
    }

    fn field(&mut self, key: &str) -> Result<String, LearnedError> {
        let line = self.next()?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| bad(format!("line {}: expected `{key} ...`, got {line:?}", self.line)))
    }

    fn numeric<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, LearnedError> {
        let raw = self.field(key)?;
        raw.parse().map_err(|_| bad(format!("line {}: bad {key} value {raw:?}", self.line)))
    }
}

pub fn read_model<R: BufRead>(r: R) -> Result<(Net, ModelMeta), LearnedError> {
    let mut lines = Lines { reader: r, line: 0 };
    if lines.next()? != HEADER {
        return Err(bad("missing document header"));
    }
    let kind_raw = lines.field("kind")?;
    let kind = NetKind::parse(&kind_raw).ok_or_else(|| bad(format!("unknown kind {kind_raw:?}")))?;
    let goals: usize = lines.numeric("goals")?;

    let mut net = match kind {
        NetKind::GcNet | NetKind::SdNet => {
            let hidden: usize = lines.numeric("hidden")?;
            Net::DualEncoder(DualEncoderNet::with_hidden(kind, goals, hidden, 0))
        }
        NetKind::LstmObs => {
            let hidden: usize = lines.numeric("hidden")?;
            Net::Baseline(BaselineNet::with_hidden(goals, hidden, 0))
        }
        NetKind::Stdnn => {
            let spatial = lines.field("spatial")?;
            let dims: Vec<usize> = spatial
                .split(' ')
                .map(|p| p.parse().map_err(|_| bad(format!("bad spatial {spatial:?}"))))
                .collect::<Result<_, _>>()?;
            let ch_raw = lines.field("channels")?;
            let ch: Vec<usize> = ch_raw
                .split(' ')
                .map(|p| p.parse().map_err(|_| bad(format!("bad channels {ch_raw:?}"))))
                .collect::<Result<_, _>>()?;
            let hidden: usize = lines.numeric("hidden")?;
            if dims.len() != 2 || ch.len() != 3 {
                return Err(bad("spatial header needs 2 dims and 3 channel counts"));
            }
            Net::SpatioTemporal(SpatioTemporalNet::with_dims(
                goals,
                dims[0],
                dims[1],
                [ch[0], ch[1], ch[2]],
                hidden,
                0,
            )?)
        }
    };

    let mut meta = ModelMeta {
        trained_epochs: lines.numeric("epochs")?,
        learning_rate: lines.numeric("learning_rate")?,
        batch_size: lines.numeric("batch_size")?,
        dropout: lines.numeric("dropout")?,
        seed: lines.numeric("seed")?,
        train_maps: match lines.field("train_maps")?.as_str() {
            "-" => Vec::new(),
            joined => joined.split(',').map(str::to_string).collect(),
        },
        belief: None,
    };

    // The belief line is optional; whichever line follows it (or stands in
    // its place) must be the parameter count.
    let after_maps = lines.next()?;
    let params_line = if let Some(rest) = after_maps.strip_prefix("belief ") {
        let parts: Vec<&str> = rest.split(' ').collect();
        if parts.len() != 3 {
            return Err(bad(format!("belief line needs 3 values, got {rest:?}")));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad belief value {s:?}")));
        meta.belief = Some(CorruptionSpec {
            eps_prime: parse(parts[0])?,
            delta_max: parse(parts[1])?,
            seed: parts[2].parse().map_err(|_| bad(format!("bad belief seed {:?}", parts[2])))?,
        });
        lines.next()?
    } else {
        after_maps
    };
    let count: usize = params_line
        .strip_prefix("params ")
        .and_then(|rest| rest.parse().ok())
        .ok_or_else(|| bad(format!("expected `params ...`, got {params_line:?}")))?;
    if count != net.params().len() {
        return Err(bad(format!(
            "document lists {count} parameters, architecture has {}",
            net.params().len()
        )));
    }
    for _ in 0..count {
        let header = lines.field("param")?;
        let mut parts = header.split(' ');
        let name = parts.next().filter(|s| !s.is_empty()).ok_or_else(|| bad("empty param name"))?;
        let shape: Vec<usize> = parts
            .map(|p| p.parse().map_err(|_| bad(format!("bad shape in param {name}"))))
            .collect::<Result<_, _>>()?;
        if !net.params().contains(name) {
            return Err(bad(format!("unknown parameter {name:?} for this architecture")));
        }
        if net.params().get(name).shape() != shape.as_slice() {
            return Err(bad(format!(
                "parameter {name} has shape {:?}, document says {shape:?}",
                net.params().get(name).shape()
            )));
        }
        let raw = lines.next()?;
        let values: Vec<f64> = raw
            .split(' ')
            .map(|p| p.parse().map_err(|_| bad(format!("bad value in param {name}"))))
            .collect::<Result<_, _>>()?;
        if values.len() != net.params().get(name).len() {
            return Err(bad(format!(
                "parameter {name} expects {} values, document has {}",
                net.params().get(name).len(),
                values.len()
            )));
        }
        *net.params_mut().get_mut(name) = Tensor::from_vec(&shape, values);
    }
    Ok((net, meta))
}

pub fn save_model(path: &Path, net: &Net, meta: &ModelMeta) -> Result<(), LearnedError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_model(&mut out, net, meta)
}

pub fn load_model(path: &Path) -> Result<(Net, ModelMeta), LearnedError> {
    read_model(std::io::BufReader::new(std::fs::File::open(path)?))
}
