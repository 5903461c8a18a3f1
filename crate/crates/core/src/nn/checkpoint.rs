//! Plain-text network checkpoints.
//!
//! ```text
//! # poropinn network v1
//! inputs 2
//! width 100
//! depth 4
//! outputs 1
//! fourier none            (or: fourier <count> <scale>)
//! seed 7
//! params 30701
//! <one value per line, 17 significant digits>
//! ```

use std::io::{BufRead, Write};

use super::{Activation, FourierSpec, NetworkConfig, ParameterVector};
use crate::Error;

const MAGIC: &str = "# poropinn network v1";

pub fn write_checkpoint<W: Write>(mut w: W, config: &NetworkConfig, params: &ParameterVector) -> std::io::Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "inputs {}", config.inputs)?;
    writeln!(w, "width {}", config.width)?;
    writeln!(w, "depth {}", config.depth)?;
    writeln!(w, "outputs {}", config.outputs)?;
    match config.fourier {
        None => writeln!(w, "fourier none")?,
        Some(f) => writeln!(w, "fourier {} {}", f.count, crate::fmt17(f.scale))?,
    }
    writeln!(w, "seed {}", config.seed)?;
    writeln!(w, "params {}", params.len())?;
    for v in &params.values {
        writeln!(w, "{}", crate::fmt17(*v))?;
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(r: R) -> Result<(NetworkConfig, ParameterVector), Error> {
    let bad = |m: &str| Error::Format(format!("checkpoint: {m}"));
    let mut lines = r.lines();
    let mut next = || -> Result<String, Error> {
        lines
            .next()
            .ok_or_else(|| bad("truncated"))?
            .map_err(|e| Error::Format(e.to_string()))
    };
    if next()? != MAGIC {
        return Err(bad("missing header"));
    }
    let mut field = |key: &str| -> Result<Vec<String>, Error> {
        let l = next()?;
        let mut it = l.split_whitespace();
        if it.next() != Some(key) {
            return Err(bad(&format!("expected '{key}'")));
        }
        Ok(it.map(str::to_string).collect())
    };
    let num = |v: &[String]| -> Result<usize, Error> {
        v.first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad integer"))
    };
    let inputs = num(&field("inputs")?)?;
    let width = num(&field("width")?)?;
    let depth = num(&field("depth")?)?;
    let outputs = num(&field("outputs")?)?;
    let f = field("fourier")?;
    let fourier = match f.as_slice() {
        [s] if s == "none" => None,
        [c, s] => Some(FourierSpec {
            count: c.parse().map_err(|_| bad("fourier count"))?,
            scale: s.parse().map_err(|_| bad("fourier scale"))?,
        }),
        _ => return Err(bad("fourier")),
    };
    let seed = field("seed")?
        .first()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("seed"))?;
    let count = num(&field("params")?)?;
    let config = NetworkConfig {
        inputs,
        width,
        depth,
        outputs,
        activation: Activation::Tanh,
        fourier,
        seed,
    };
    config.validate()?;
    let mut p = ParameterVector::zeros(&config);
    if p.len() != count {
        return Err(bad("parameter count does not match architecture"));
    }
    for v in p.values.iter_mut() {
        *v = next()?.trim().parse().map_err(|_| bad("bad value"))?;
    }
    Ok((config, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_network;

    #[test]
    fn round_trip_is_lossless_and_byte_stable() {
        let c = NetworkConfig::new(3, 5, 2, 77).with_fourier(4, 1.0);
        let p = init_network(&c);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &c, &p).unwrap();
        let (c2, p2) = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(c, c2);
        assert_eq!(p.to_bytes(), p2.to_bytes());
        let mut buf2 = Vec::new();
        write_checkpoint(&mut buf2, &c2, &p2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn rejects_mismatched_count() {
        let text = "# poropinn network v1\ninputs 1\nwidth 1\ndepth 1\noutputs 1\nfourier none\nseed 0\nparams 3\n0\n0\n0\n";
        assert!(read_checkpoint(text.as_bytes()).is_err());
    }
}
