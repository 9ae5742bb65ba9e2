use std::fs::File;
use std::path::Path;

use crate::error::{GmcError, Result};
use crate::mcmc::{ChainDraws, ChainSet, Diagnostics, ParamSummary};
use crate::regression::CurveSummary;
use crate::sim::{AggregateRow, CriteriaRecord, ReplicateFailure};

/// Round-trip decimal text with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(e: csv::Error) -> GmcError {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => GmcError::Io(e),
        other => GmcError::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

pub(crate) fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(io_err)
}

pub(crate) fn row<I, S>(w: &mut csv::Writer<File>, fields: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(fields).map_err(io_err)
}

pub(crate) fn done(mut w: csv::Writer<File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

/// Column label of a quantile probability: `q0.025`.
pub fn quantile_label(p: f64) -> String {
    format!("q{p}")
}

/// `run_id,chain,iteration,<parameters>,deviance`, one row per stored draw.
pub fn write_draws(path: &Path, run_id: &str, chains: &ChainSet) -> Result<()> {
    let mut w = writer(path)?;
    let mut head = vec!["run_id".to_string(), "chain".into(), "iteration".into()];
    head.extend(chains.names().iter().cloned());
    head.push("deviance".into());
    row(&mut w, &head)?;
    for c in 0..chains.n_chains() {
        let dev = &chains.chain(c).deviance;
        for i in 0..chains.n_stored() {
            let mut r = vec![run_id.to_string(), c.to_string(), i.to_string()];
            r.extend(chains.draw(c, i).iter().map(|&v| fmt_f64(v)));
            r.push(fmt_f64(dev[i]));
            row(&mut w, &r)?;
        }
    }
    done(w)
}

/// Reads a file written by [`write_draws`]; returns the run id and draws.
pub fn read_draws(path: &Path) -> Result<(String, ChainSet)> {
    let mut rdr = csv::Reader::from_path(path).map_err(io_err)?;
    let head: Vec<String> = rdr.headers().map_err(io_err)?.iter().map(str::to_string).collect();
    let k = head.len();
    if k < 4 || head[0] != "run_id" || head[1] != "chain" || head[2] != "iteration" || head[k - 1] != "deviance" {
        return Err(GmcError::ParseError {
            line: 1,
            column: String::new(),
            reason: "not a draws file".into(),
        });
    }
    let names = head[3..k - 1].to_vec();
    let p = names.len();
    let mut run_id = String::new();
    let mut chains: Vec<ChainDraws> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(io_err)?;
        let parse = |j: usize| -> Result<f64> {
            rec.get(j).unwrap_or("").parse().map_err(|_| GmcError::ParseError {
                line,
                column: head[j].clone(),
                reason: format!("cannot parse `{}`", rec.get(j).unwrap_or("")),
            })
        };
        if i == 0 {
            run_id = rec.get(0).unwrap_or("").to_string();
        }
        let c: usize = rec.get(1).unwrap_or("").parse().map_err(|_| GmcError::ParseError {
            line,
            column: "chain".into(),
            reason: "bad chain index".into(),
        })?;
        if c == chains.len() {
            chains.push(ChainDraws {
                draws: Vec::new(),
                deviance: Vec::new(),
                tuning: Vec::new(),
            });
        } else if c + 1 != chains.len() {
            return Err(GmcError::ParseError {
                line,
                column: "chain".into(),
                reason: "chains must appear in order".into(),
            });
        }
        let ch = chains.last_mut().expect("pushed above");
        for j in 0..p {
            ch.draws.push(parse(3 + j)?);
        }
        ch.deviance.push(parse(k - 1)?);
    }
    Ok((run_id, ChainSet::new(names, chains)?))
}

/// `run_id,parameter,mean,sd,q<p>...`.
pub fn write_summary(path: &Path, run_id: &str, rows: &[ParamSummary], probs: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    let mut head = vec!["run_id".to_string(), "parameter".into(), "mean".into(), "sd".into()];
    head.extend(probs.iter().map(|&p| quantile_label(p)));
    row(&mut w, &head)?;
    for s in rows {
        let mut r = vec![run_id.to_string(), s.name.clone(), fmt_f64(s.mean), fmt_f64(s.sd)];
        r.extend(s.quantiles.iter().map(|&q| fmt_f64(q)));
        row(&mut w, &r)?;
    }
    done(w)
}

/// `run_id,kind,name,rhat,ess,acceptance`: one row per parameter
/// (`parameter`) and per Metropolis block (`block`).
pub fn write_diagnostics(path: &Path, run_id: &str, d: &Diagnostics) -> Result<()> {
    let mut w = writer(path)?;
    row(&mut w, ["run_id", "kind", "name", "rhat", "ess", "acceptance"])?;
    for i in 0..d.names.len() {
        row(
            &mut w,
            [run_id, "parameter", &d.names[i], &fmt_f64(d.rhat[i]), &fmt_f64(d.ess[i]), ""],
        )?;
    }
    for (name, rate) in &d.accept_rates {
        row(&mut w, [run_id, "block", name, "", "", &fmt_f64(*rate)])?;
    }
    done(w)
}

/// `run_id,grid_t,mean,lower,upper`.
pub fn write_curve(path: &Path, run_id: &str, c: &CurveSummary) -> Result<()> {
    let mut w = writer(path)?;
    row(&mut w, ["run_id", "grid_t", "mean", "lower", "upper"])?;
    for i in 0..c.grid.len() {
        row(
            &mut w,
            [run_id.to_string(), fmt_f64(c.grid[i]), fmt_f64(c.mean[i]), fmt_f64(c.lower[i]), fmt_f64(c.upper[i])],
        )?;
    }
    done(w)
}

/// `run_id,replicate,seed,d,estimator,me,rmse,criw,cp`.
pub fn write_records(path: &Path, run_id: &str, records: &[CriteriaRecord]) -> Result<()> {
    let mut w = writer(path)?;
    row(&mut w, ["run_id", "replicate", "seed", "d", "estimator", "me", "rmse", "criw", "cp"])?;
    for r in records {
        row(
            &mut w,
            [
                run_id.to_string(),
                r.replicate.to_string(),
                r.seed.to_string(),
                fmt_f64(r.d),
                r.estimator.to_string(),
                fmt_f64(r.me),
                fmt_f64(r.rmse),
                fmt_f64(r.criw),
                fmt_f64(r.cp),
            ],
        )?;
    }
    done(w)
}

pub fn write_aggregate(path: &Path, run_id: &str, rows: &[AggregateRow]) -> Result<()> {
    let mut w = writer(path)?;
    row(
        &mut w,
        [
            "run_id", "d", "estimator", "replicates", "me", "me_se", "rmse", "rmse_se", "criw", "criw_se", "cp",
            "cp_se",
        ],
    )?;
    for a in rows {
        row(
            &mut w,
            [
                run_id.to_string(),
                fmt_f64(a.d),
                a.estimator.to_string(),
                a.replicates.to_string(),
                fmt_f64(a.me),
                fmt_f64(a.me_se),
                fmt_f64(a.rmse),
                fmt_f64(a.rmse_se),
                fmt_f64(a.criw),
                fmt_f64(a.criw_se),
                fmt_f64(a.cp),
                fmt_f64(a.cp_se),
            ],
        )?;
    }
    done(w)
}

pub fn write_failures(path: &Path, run_id: &str, failures: &[ReplicateFailure]) -> Result<()> {
    let mut w = writer(path)?;
    row(&mut w, ["run_id", "replicate", "seed", "d", "message"])?;
    for f in failures {
        row(
            &mut w,
            [run_id.to_string(), f.replicate.to_string(), f.seed.to_string(), fmt_f64(f.d), f.message.clone()],
        )?;
    }
    done(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1e300, std::f64::consts::PI, 5e-324] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn draws_round_trip() {
        let names = vec!["a".to_string(), "b[1]".to_string()];
        let chains = vec![
            ChainDraws {
                draws: vec![0.1, 0.2, 1.0 / 3.0, -7.25],
                deviance: vec![3.5, 4.25],
                tuning: Vec::new(),
            },
            ChainDraws {
                draws: vec![9.0, 1e-9, 2.0, 3.0],
                deviance: vec![1.0, 2.0],
                tuning: Vec::new(),
            },
        ];
        let set = ChainSet::new(names, chains).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("draws.csv");
        write_draws(&p, "abc", &set).unwrap();
        let (id, back) = read_draws(&p).unwrap();
        assert_eq!(id, "abc");
        assert_eq!(back.names(), set.names());
        assert_eq!(back.n_chains(), 2);
        for c in 0..2 {
            assert_eq!(back.chain(c).draws, set.chain(c).draws);
            assert_eq!(back.chain(c).deviance, set.chain(c).deviance);
        }
    }
}
