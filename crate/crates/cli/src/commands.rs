use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ifs_core::connectivity::{classify, classify_with_witness, IntersectionWitness};
use ifs_core::geometry::{Point, Resolution};
use ifs_core::ifs::{attractor, AttractorApprox};
use ifs_core::io::{format_f64, write_attractor, write_matrix, write_vector};
use ifs_core::operators::{
    complement_flip_residual, defect_operator, flip_identity_residual, high_defect_contraction,
    low_defect_contraction, operator_norm, spectral_projection, symmetric_eigen,
    CertifiedContraction, Interval, OperatorMatrix,
};
use ifs_core::sw_family::{
    annihilation_witness, connectivity_witness, sweep, GridAxis, SweepParams, WGrid,
    DEFAULT_N_MAX, HIGH_DEFECT_TAG, LOW_DEFECT_TAG,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const DEFAULT_TARGET_R: f64 = 1e-3;
pub const DEFAULT_EPS: f64 = 0.5;
const RESIDUAL_LIMIT: f64 = 1e-10;

pub struct Context {
    pub cfg: RunConfig,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl Context {
    fn out_dir(&self) -> CliResult<&Path> {
        let dir = self
            .out
            .as_deref()
            .ok_or_else(|| CliError::Config("this command needs --out <dir>".into()))?;
        fs::create_dir_all(dir)?;
        Ok(dir)
    }

    fn create(&self, name: &str) -> CliResult<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.out_dir()?.join(name))?))
    }
}

/// Writes one block to stdout; a closed pipe becomes an error, not a panic.
fn emit(text: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}")?;
    out.flush()?;
    Ok(())
}

fn approximate(cfg: &RunConfig) -> CliResult<(ifs_core::ifs::IfsSystem, AttractorApprox)> {
    let sys = cfg.system()?;
    let target = cfg.positive("target_r")?.unwrap_or(DEFAULT_TARGET_R);
    let rho = cfg.positive("rho")?.map(Resolution::new).transpose()?;
    let approx = attractor(&sys, target, rho)?;
    Ok((sys, approx))
}

pub fn attractor_cmd(ctx: &Context) -> CliResult<()> {
    let (_, approx) = approximate(&ctx.cfg)?;
    let summary = format!(
        "radius={} iterations={} points={}",
        format_f64(approx.radius),
        approx.iterations,
        approx.cloud.len()
    );
    if ctx.out.is_some() {
        let mut f = ctx.create("attractor.csv")?;
        write_attractor(&mut f, &approx)?;
        f.flush()?;
        emit(&summary)?;
    } else {
        let mut out = BufWriter::new(std::io::stdout().lock());
        write_attractor(&mut out, &approx)?;
        out.flush()?;
        eprintln!("{summary}");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WitnessKind {
    Low,
    High,
}

impl WitnessKind {
    fn from_config(cfg: &RunConfig, key: &str) -> CliResult<Self> {
        match cfg.get(key).unwrap_or(LOW_DEFECT_TAG) {
            LOW_DEFECT_TAG => Ok(Self::Low),
            HIGH_DEFECT_TAG => Ok(Self::High),
            other => Err(CliError::Config(format!(
                "{key} must be {LOW_DEFECT_TAG} or {HIGH_DEFECT_TAG}, got {other:?}"
            ))),
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Self::Low => LOW_DEFECT_TAG,
            Self::High => HIGH_DEFECT_TAG,
        }
    }
}

/// Output of either witness construction in a common shape.
struct Built {
    contraction: CertifiedContraction,
    w: Point,
    e: Point,
    residual: f64,
    witness: IntersectionWitness,
}

fn build_witness(kind: WitnessKind, u: &OperatorMatrix, eps: f64, h: &Point) -> ifs_core::Result<Built> {
    Ok(match kind {
        WitnessKind::Low => {
            let wit = connectivity_witness(u, eps, h)?;
            let witness = wit.intersection_witness();
            Built {
                contraction: wit.contraction,
                w: wit.w,
                e: wit.e,
                residual: wit.residual,
                witness,
            }
        }
        WitnessKind::High => {
            let wit = annihilation_witness(u, eps, h)?;
            let witness = wit.intersection_witness();
            Built {
                contraction: wit.contraction,
                w: wit.w,
                e: wit.e,
                residual: wit.residual,
                witness,
            }
        }
    })
}

fn power(cfg: &RunConfig) -> CliResult<u32> {
    let m: u32 = cfg.parsed_or("m", 1)?;
    if m == 0 {
        return Err(CliError::Config("m must be at least 1".into()));
    }
    Ok(m)
}

fn max_deviation(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn classify_cmd(ctx: &Context, with_witness: bool) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let (sys, approx) = approximate(cfg)?;
    let verdict = if with_witness {
        let m = power(cfg)?;
        let kind = WitnessKind::from_config(cfg, "witness")?;
        let eps = cfg.required::<f64>("eps")?;
        let s = cfg.matrix("S")?;
        let built = build_witness(kind, &s.pow(m), eps, &cfg.vector("h")?)?;
        // the witness only speaks about the system it was built for
        let t = cfg.matrix("T")?;
        let w = cfg.vector("w")?;
        let dt = max_deviation(t.as_matrix().as_slice(), built.contraction.operator.as_matrix().as_slice());
        let dw = max_deviation(w.coords(), built.w.coords());
        if t.dim() != built.contraction.operator.dim() || dt.max(dw) > RESIDUAL_LIMIT {
            return Err(CliError::Numeric(format!(
                "configured T, w differ from the recomputed witness (deviation {:e})",
                dt.max(dw)
            )));
        }
        classify_with_witness(&sys, &approx, &built.witness, m)?
    } else {
        classify(&sys, &approx)?
    };
    emit(&verdict.to_string())?;
    Ok(())
}

pub fn witness_cmd(ctx: &Context) -> CliResult<()> {
    if ctx.cfg.has("batch") {
        return witness_batch(ctx);
    }
    let cfg = &ctx.cfg;
    let kind = WitnessKind::from_config(cfg, "witness")?;
    let eps = cfg.required::<f64>("eps")?;
    let m = power(cfg)?;
    let s = if cfg.has("S") { cfg.matrix("S")? } else { cfg.matrix("U")? };
    let u = s.pow(m);
    let h = cfg.vector("h")?;
    let built = build_witness(kind, &u, eps, &h)?;

    let report = [
        format!("witness={}", kind.tag()),
        format!("eps={}", format_f64(eps)),
        format!("m={m}"),
        format!("rank={}", built.contraction.rank()),
        format!("norm_T={}", format_f64(built.contraction.norm)),
        format!("bound={}", format_f64(built.contraction.bound)),
        format!("residual={}", format_f64(built.residual)),
    ]
    .join("\n");
    emit(&report)?;

    let dir = ctx.out_dir()?.to_path_buf();
    let mut f = ctx.create("residuals.txt")?;
    writeln!(f, "{report}")?;
    f.flush()?;
    write_file(&dir, "S.csv", |f| write_matrix(f, s.as_matrix()))?;
    write_file(&dir, "T.csv", |f| write_matrix(f, built.contraction.operator.as_matrix()))?;
    write_file(&dir, "w.csv", |f| write_vector(f, built.w.coords()))?;
    write_file(&dir, "e.csv", |f| write_vector(f, built.e.coords()))?;
    write_file(&dir, "h.csv", |f| write_vector(f, h.coords()))?;
    // ready-made config for `classify --witness`
    let mut f = ctx.create("system.cfg")?;
    writeln!(f, "S=S.csv\nT=T.csv\nw=w.csv\nh=h.csv")?;
    writeln!(f, "witness={}\neps={}\nm={m}", kind.tag(), format_f64(eps))?;
    if let Some(t) = cfg.get("target_r") {
        writeln!(f, "target_r={t}")?;
    }
    f.flush()?;
    if !(built.residual <= RESIDUAL_LIMIT) {
        return Err(CliError::Numeric(format!("residual {:e} exceeds {RESIDUAL_LIMIT:e}", built.residual)));
    }
    Ok(())
}

fn write_file(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> ifs_core::Result<()>,
) -> CliResult<()> {
    let mut f = BufWriter::new(File::create(dir.join(name))?);
    body(&mut f)?;
    f.flush()?;
    Ok(())
}

fn random_contraction(rng: &mut StdRng, d: usize, max_norm: f64) -> CliResult<OperatorMatrix> {
    loop {
        let entries: Vec<f64> = (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = OperatorMatrix::from_rows(d, &entries)?;
        let n = operator_norm(&m);
        if n > 1e-3 {
            return Ok(m.scaled(rng.gen_range(0.05..max_norm) / n));
        }
    }
}

/// Both constructions on `batch` random contractions; one table row each.
fn witness_batch(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let batch: usize = cfg.required("batch")?;
    let dim: usize = cfg.required("dim")?;
    if dim == 0 {
        return Err(CliError::Config("dim must be positive".into()));
    }
    let eps = cfg.parsed_or("eps", DEFAULT_EPS)?;
    let max_norm = cfg.parsed_or("norm", 0.95)?;
    if !(max_norm > 0.05 && max_norm < 1.0) {
        return Err(CliError::Config(format!("norm must lie in (0.05, 1), got {max_norm}")));
    }
    let mut rng = StdRng::seed_from_u64(ctx.seed);
    let mut rows = vec!["sample,witness,dim,norm_U,rank,norm_T,bound,residual,status".to_string()];
    let (mut ok, mut degenerate, mut failed) = (0, 0, 0);
    for sample in 0..batch {
        let u = random_contraction(&mut rng, dim, max_norm)?;
        let h: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = Point::new(h)?;
        for kind in [WitnessKind::Low, WitnessKind::High] {
            let norm_u = format_f64(operator_norm(&u));
            let row = match build_witness(kind, &u, eps, &h) {
                Ok(b) => {
                    ok += 1;
                    format!(
                        "{sample},{},{dim},{norm_u},{},{},{},{},ok",
                        kind.tag(),
                        b.contraction.rank(),
                        format_f64(b.contraction.norm),
                        format_f64(b.contraction.bound),
                        format_f64(b.residual)
                    )
                }
                Err(e @ (ifs_core::Error::TrivialProjection | ifs_core::Error::BoundaryEigenvalue { .. })) => {
                    degenerate += 1;
                    format!("{sample},{},{dim},{norm_u},,,,,degenerate: {e}", kind.tag())
                }
                Err(e) => {
                    failed += 1;
                    format!("{sample},{},{dim},{norm_u},,,,,FAIL: {e}", kind.tag())
                }
            };
            rows.push(row);
        }
    }
    let table = rows.join("\n");
    if ctx.out.is_some() {
        let mut f = ctx.create("batch.csv")?;
        writeln!(f, "{table}")?;
        f.flush()?;
    } else {
        emit(&table)?;
    }
    emit(&format!("certified={ok} degenerate={degenerate} failed={failed}"))?;
    if failed > 0 {
        return Err(CliError::Numeric(format!("{failed} witness constructions failed")));
    }
    Ok(())
}

fn grid_axis(cfg: &RunConfig, name: &str) -> CliResult<Option<GridAxis>> {
    let key = format!("grid.{name}");
    if !cfg.has(&key) {
        return Ok(None);
    }
    let range = cfg.numbers(&format!("{key}.range"))?;
    let [start, end] = range[..] else {
        return Err(CliError::Config(format!("{key}.range needs two numbers")));
    };
    Ok(Some(GridAxis {
        direction: cfg.numbers(&key)?,
        start,
        end,
        count: cfg.required(&format!("{key}.count"))?,
    }))
}

pub fn sweep_cmd(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let s = cfg.matrix("S")?;
    let t = cfg.matrix("T")?;
    let origin = if cfg.has("grid.origin") {
        cfg.numbers("grid.origin")?
    } else {
        vec![0.0; s.dim()]
    };
    let axes: Vec<GridAxis> = [grid_axis(cfg, "u")?, grid_axis(cfg, "v")?]
        .into_iter()
        .flatten()
        .collect();
    if axes.is_empty() {
        return Err(CliError::Config("sweep needs grid.u (and optionally grid.v)".into()));
    }
    let n_max = cfg.parsed_or("n_max", DEFAULT_N_MAX)?;
    let params = SweepParams {
        target_r: cfg.positive("target_r")?.unwrap_or(DEFAULT_TARGET_R),
        rho: cfg.positive("rho")?.map(Resolution::new).transpose()?,
        n_max,
    };
    let grid = WGrid { origin, axes };
    let report = sweep(&s, &t, &grid, &params)?;

    let mut f = ctx.create("sweep.csv")?;
    report.write_csv(&mut f)?;
    f.flush()?;
    if grid.axes.len() == 2 {
        let mut f = ctx.create("sweep.pgm")?;
        report.write_pgm(&mut f)?;
        f.flush()?;
    }
    let count = |kind: &str| {
        report
            .cells
            .iter()
            .filter(|c| c.outcome.as_ref().is_ok_and(|v| v.kind() == kind))
            .count()
    };
    let errors = report.cells.iter().filter(|c| c.outcome.is_err()).count();
    emit(&format!(
        "cells={} disconnected={} undecided={} connected={} errors={errors} n_max={n_max}",
        report.cells.len(),
        count("DISCONNECTED"),
        count("UNDECIDED"),
        count("CONNECTED"),
    ))?;
    Ok(())
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| format_f64(x)).collect::<Vec<_>>().join(",")
}

fn contraction_line(name: &str, result: ifs_core::Result<CertifiedContraction>) -> String {
    match result {
        Ok(c) => format!(
            "{name}: rank={} norm={} bound={} certified={}",
            c.rank(),
            format_f64(c.norm),
            format_f64(c.bound),
            c.norm <= c.bound + 1e-9
        ),
        Err(e) => format!("{name}: unavailable ({e})"),
    }
}

fn residual_line(name: &str, result: ifs_core::Result<f64>) -> String {
    match result {
        Ok(r) => format!("{name}={}", format_f64(r)),
        Err(e) => format!("{name}=unavailable ({e})"),
    }
}

pub fn operator_report_cmd(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let u = cfg.matrix("matrix")?;
    let eps = cfg.parsed_or("eps", DEFAULT_EPS)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CliError::Config(format!("eps must be positive, got {eps}")));
    }
    let spectrum = symmetric_eigen(&defect_operator(&u))?;
    let rank = |interval| {
        spectral_projection(&spectrum, interval)
            .map(|p| p.rank.to_string())
            .unwrap_or_else(|e| format!("unavailable ({e})"))
    };
    let lines = [
        format!("dim={}", u.dim()),
        format!("norm={}", format_f64(operator_norm(&u))),
        format!("defect_spectrum={}", join(&spectrum.eigenvalues)),
        format!("eps={}", format_f64(eps)),
        format!("low_projection_rank={}", rank(Interval::below(1.0 - eps))),
        format!("high_projection_rank={}", rank(Interval::above(1.0 + eps))),
        contraction_line("low_defect_contraction", low_defect_contraction(&u, eps)),
        contraction_line("high_defect_contraction", high_defect_contraction(&u, eps)),
        residual_line("flip_residual", flip_identity_residual(&u)),
        residual_line("complement_flip_residual", complement_flip_residual(&u)),
    ];
    let text = lines.join("\n");
    emit(&text)?;
    if ctx.out.is_some() {
        let mut f = ctx.create("report.txt")?;
        writeln!(f, "{text}")?;
        f.flush()?;
    }
    Ok(())
}
