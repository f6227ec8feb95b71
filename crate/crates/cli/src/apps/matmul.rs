use evfabric_core::trace::trace_csv_bytes;
use evfabric_matmul::{plan_tiling, run_matmul, Matrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::artifacts::Artifacts;
use crate::config::{read_input_bytes, Loaded};
use crate::error::{CliError, Result};

fn load_matrix(l: &Loaded, p: &std::path::Path, what: &str) -> Result<Matrix<i8>> {
    let bytes = read_input_bytes(&l.resolve(p))?;
    Matrix::from_bytes(&bytes).map_err(|e| CliError::Validation(format!("matmul.{what}: {e}")))
}

pub fn run(l: &Loaded, trace: bool) -> Result<(Artifacts, String)> {
    let s = l.config.matmul.as_ref().expect("checked at load");
    let cfg = l.machine()?;
    let model = l.cost_model()?;
    let mut rng = ChaCha8Rng::seed_from_u64(l.config.seed);
    let a = match &s.a {
        Some(p) => load_matrix(l, p, "a")?,
        None => Matrix::random(s.m, s.k, &mut rng),
    };
    let b = match &s.b {
        Some(p) => load_matrix(l, p, "b")?,
        None => Matrix::random(s.k, s.n, &mut rng),
    };
    if (a.rows, a.cols, b.rows, b.cols) != (s.m, s.k, s.k, s.n) {
        return Err(CliError::Validation(format!(
            "matmul: A is {}x{} and B is {}x{}, config says {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols, s.m, s.k, s.k, s.n
        )));
    }
    let [tm, tk, tn] = s.tile.unwrap_or([s.m, s.k, s.n]);
    let plan = plan_tiling(s.m, s.k, s.n, tm, tk, tn, s.workers).map_err(|e| CliError::Validation(format!("matmul: {e}")))?;
    let mut opts = s.options.clone();
    opts.trace |= trace;
    let run = run_matmul(&a, &b, &plan, &cfg, &opts, &model).map_err(|e| CliError::runtime("matmul", e))?;
    let report = run.report().map_err(|e| CliError::runtime("matmul", e))?;
    let mut out = Artifacts::default();
    out.add("a.bin", a.to_bytes());
    out.add("b.bin", b.to_bytes());
    out.add("c.bin", run.c.to_bytes());
    out.json("report.json", &report)?;
    if let Some(t) = &run.trace {
        out.add("trace.csv", trace_csv_bytes(t));
    }
    let summary = format!(
        "matmul: {}x{}x{} on {} workers, {} tasks, {} DMA bytes, energy {}",
        s.m, s.k, s.n, s.workers, report.tasks, report.dma_bytes, report.energy_total
    );
    Ok((out, summary))
}
