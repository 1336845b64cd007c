//! CSV emission. Floats use Rust's shortest round-trip formatting.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use num_complex::Complex64;
use photonfilter::ensemble::EnsembleSummary;
use photonfilter::homodyne::TrajectoryRecord;
use photonfilter::photocount::JumpRecord;
use photonfilter::{ComplexMatrix, DensityHierarchy};

pub struct Sink {
    inner: Box<dyn Write>,
    path: Option<PathBuf>,
}

impl Sink {
    pub fn open(path: Option<&Path>) -> anyhow::Result<Self> {
        let inner: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        Ok(Self { inner, path: path.map(Path::to_owned) })
    }

    pub fn finish(mut self) -> anyhow::Result<()> {
        let name = self.path.as_ref().map_or("stdout".into(), |p| p.display().to_string());
        self.inner.flush().with_context(|| format!("cannot write {name}"))
    }
}

impl Write for Sink {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.inner.write(buf)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// `out.csv` → `out.csv.meta`
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

pub fn master_header(w: &mut impl Write, labels: &[String]) -> io::Result<()> {
    write!(w, "t,pair_id_l,pair_id_r,re_tr,im_tr")?;
    for l in labels {
        write!(w, ",re_exp_{l},im_exp_{l}")?;
    }
    writeln!(w)
}

/// One row per canonical pair; pair ids are subset ranks (1 is the empty
/// subset, i.e. the physical state).
pub fn master_rows(
    w: &mut impl Write,
    t: f64,
    h: &DensityHierarchy,
    observables: &[(String, ComplexMatrix)],
) -> io::Result<()> {
    for (i, j) in h.pair_list() {
        let rho = h.component_at(i, j);
        let tr = rho.trace();
        write!(w, "{t},{},{},{},{}", i + 1, j + 1, tr.re, tr.im)?;
        for (_, x) in observables {
            let e: Complex64 = rho.hs_inner(x);
            write!(w, ",{},{}", e.re, e.im)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// `dY` on each row is the record increment accumulated since the previous
/// row (zero on the first).
pub fn trajectory(w: &mut impl Write, r: &TrajectoryRecord, labels: &[String], stride: usize) -> io::Result<()> {
    write!(w, "t,dY")?;
    for l in labels {
        write!(w, ",re_{l}")?;
    }
    writeln!(w, ",trace_drift")?;
    let last = r.times.len() - 1;
    let mut acc = 0.0;
    for (m, t) in r.times.iter().enumerate() {
        if m > 0 {
            acc += r.dy[m - 1];
        }
        if m % stride != 0 && m != last {
            continue;
        }
        write!(w, "{t},{acc}")?;
        for series in &r.conditional {
            write!(w, ",{}", series[m])?;
        }
        writeln!(w, ",{}", r.trace_drift[m])?;
        acc = 0.0;
    }
    Ok(())
}

pub fn jumps(w: &mut impl Write, r: &JumpRecord, labels: &[String], stride: usize) -> io::Result<()> {
    write!(w, "t,n_cum")?;
    for l in labels {
        write!(w, ",re_{l}")?;
    }
    writeln!(w)?;
    let last = r.times.len() - 1;
    for (m, t) in r.times.iter().enumerate() {
        if m % stride != 0 && m != last {
            continue;
        }
        write!(w, "{t},{}", r.counts[m])?;
        for series in &r.conditional {
            write!(w, ",{}", series[m])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn summary(w: &mut impl Write, s: &EnsembleSummary) -> io::Result<()> {
    write!(w, "t")?;
    for l in &s.labels {
        write!(w, ",mean_{l},stderr_{l},master_{l}")?;
    }
    writeln!(w)?;
    for (k, t) in s.times.iter().enumerate() {
        write!(w, "{t}")?;
        for o in 0..s.labels.len() {
            write!(w, ",{},{},{}", s.mean[o][k], s.stderr[o][k], s.master[o][k])?;
        }
        writeln!(w)?;
    }
    Ok(())
}
