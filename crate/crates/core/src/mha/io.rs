use super::{Chain, MhaError};
use std::io::{BufRead, Write};

impl Chain {
    /// CSV with a `# burn_in=<N> n_mat=<M>` comment line and the header
    /// `step,accepted,log_post,<names>`. Values are written in shortest
    /// round-trip form, so reading back gives the identical chain.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# burn_in={} n_mat={}", self.burn_in, self.n_mat)?;
        write!(w, "step,accepted,log_post")?;
        for n in &self.names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for (i, s) in self.states.iter().enumerate() {
            write!(w, "{i},{},{}", u8::from(self.accepted[i]), self.log_post[i])?;
            for v in s {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Chain, MhaError> {
        let mut burn_in = 0;
        let mut n_mat = None;
        let mut names: Option<Vec<String>> = None;
        let mut chain_states = Vec::new();
        let mut log_post = Vec::new();
        let mut accepted = Vec::new();
        for (k, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = k + 1;
            let err = |message: String| MhaError::Parse { line: lineno, message };
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(meta) = t.strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    if let Some((key, v)) = kv.split_once('=') {
                        let v: usize = v.parse().map_err(|_| err(format!("bad value in `{kv}`")))?;
                        match key {
                            "burn_in" => burn_in = v,
                            "n_mat" => n_mat = Some(v),
                            _ => {}
                        }
                    }
                }
                continue;
            }
            let fields: Vec<&str> = t.split(',').map(str::trim).collect();
            let Some(names) = &names else {
                if fields.len() < 3 || fields[..3] != ["step", "accepted", "log_post"] {
                    return Err(err("expected header `step,accepted,log_post,...`".into()));
                }
                names = Some(fields[3..].iter().map(|s| s.to_string()).collect());
                continue;
            };
            if fields.len() != names.len() + 3 {
                return Err(err(format!("expected {} fields, found {}", names.len() + 3, fields.len())));
            }
            let step: usize = fields[0].parse().map_err(|_| err("bad step".into()))?;
            if step != chain_states.len() {
                return Err(err(format!("step {step} out of sequence")));
            }
            accepted.push(match fields[1] {
                "1" | "true" => true,
                "0" | "false" => false,
                other => return Err(err(format!("bad accepted flag `{other}`"))),
            });
            log_post.push(parse_f64(fields[2]).ok_or_else(|| err("bad log_post".into()))?);
            let state = fields[3..]
                .iter()
                .map(|f| parse_f64(f))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| err("bad parameter value".into()))?;
            chain_states.push(state);
        }
        let names = names.ok_or(MhaError::Parse {
            line: 0,
            message: "missing header".into(),
        })?;
        let n_mat = n_mat.unwrap_or(names.iter().take_while(|n| !n.starts_with('u')).count());
        if burn_in >= chain_states.len().max(1) {
            return Err(MhaError::Parse {
                line: 1,
                message: format!("burn_in {burn_in} not below chain length {}", chain_states.len()),
            });
        }
        Ok(Chain {
            names,
            n_mat,
            states: chain_states,
            log_post,
            accepted,
            burn_in,
        })
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "-inf" => Some(f64::NEG_INFINITY),
        "inf" => Some(f64::INFINITY),
        _ => s.parse().ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let c = Chain {
            names: vec!["G1".into(), "G2".into(), "ux0".into()],
            n_mat: 2,
            states: vec![vec![0.1, 1.0 / 3.0, -2e-17], vec![0.1, 1.0 / 3.0, -2e-17], vec![1.5, 4.25, 0.0]],
            log_post: vec![-1e5 / 7.0, -1e5 / 7.0, -3.0],
            accepted: vec![true, false, true],
            burn_in: 1,
        };
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).lines().nth(1).unwrap() == "step,accepted,log_post,G1,G2,ux0");
        assert_eq!(Chain::read_csv(buf.as_slice()).unwrap(), c);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "# burn_in=0 n_mat=1\nstep,accepted,log_post,G1\n0,1,-1.0,2.0\n1,1,-1.0,abc\n";
        match Chain::read_csv(text.as_bytes()) {
            Err(MhaError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(Chain::read_csv("0,1,2\n".as_bytes()).is_err());
    }
}
