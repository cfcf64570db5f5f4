//! Browser bindings for the demo page in `www/`.

use wasm_bindgen::prelude::*;

use dlnac::coeffs::{DlnCoefficients, RefactorCoefficients, StepPair, Theta};
use dlnac::harness::problems::TravellingWave;
use dlnac::harness::{run_wave1d, ConfigFile, ExactSolution, ExperimentConfig, RunReport, Study};

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// `[alpha_0..2, beta_0..2, gamma_0..2, eps_n, k_hat, a1, a0, b, c2, c1, c0]`
#[wasm_bindgen]
pub fn coefficients(theta: f64, k_n: f64, k_prev: f64) -> Result<Vec<f64>, JsError> {
    let c = DlnCoefficients::new(Theta::new(theta).map_err(js_err)?, StepPair::new(k_n, k_prev).map_err(js_err)?)
        .map_err(js_err)?;
    let r = RefactorCoefficients::new(&c).map_err(js_err)?;
    let mut out = Vec::with_capacity(17);
    out.extend(c.alpha);
    out.extend(c.beta);
    out.extend(c.gamma);
    out.extend([c.eps_n, c.k_hat, r.a1, r.a0, r.b, r.c2, r.c1, r.c0]);
    Ok(out)
}

fn run(text: &str) -> Result<RunReport, JsError> {
    let file = ConfigFile::parse(text).map_err(js_err)?;
    let cfg = ExperimentConfig::resolve(&file, Study::Single).map_err(js_err)?;
    run_wave1d(&cfg).map_err(js_err)
}

/// Result of a travelling-wave run, flattened for JS.
#[wasm_bindgen]
pub struct WaveRun {
    x: Vec<f64>,
    snapshot_times: Vec<f64>,
    profiles: Vec<f64>,
    exact: Vec<f64>,
    times: Vec<f64>,
    energy: Vec<f64>,
    steps: Vec<f64>,
    records: Vec<f64>,
}

#[wasm_bindgen]
impl WaveRun {
    /// Node coordinates in increasing order.
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn snapshot_times(&self) -> Vec<f64> {
        self.snapshot_times.clone()
    }

    /// One row per snapshot, each of length `x.length`.
    #[wasm_bindgen(getter)]
    pub fn profiles(&self) -> Vec<f64> {
        self.profiles.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn exact(&self) -> Vec<f64> {
        self.exact.clone()
    }

    /// Times of the energy samples.
    #[wasm_bindgen(getter)]
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn energy(&self) -> Vec<f64> {
        self.energy.clone()
    }

    /// Accepted step sizes.
    #[wasm_bindgen(getter)]
    pub fn steps(&self) -> Vec<f64> {
        self.steps.clone()
    }

    /// Attempted steps as `[t, k, t_hat, accepted]` quadruples.
    #[wasm_bindgen(getter)]
    pub fn records(&self) -> Vec<f64> {
        self.records.clone()
    }
}

fn flatten(report: &RunReport, epsilon: f64) -> WaveRun {
    let coords = report.problem.space.dof_coords();
    let mut order: Vec<usize> = (0..coords.len()).collect();
    order.sort_by(|&a, &b| coords[a][0].total_cmp(&coords[b][0]));
    let wave = TravellingWave { epsilon };
    let mut out = WaveRun {
        x: order.iter().map(|&i| coords[i][0]).collect(),
        snapshot_times: vec![],
        profiles: vec![],
        exact: vec![],
        times: report.times[1..].iter().take(report.energy.len()).copied().collect(),
        energy: report.energy.clone(),
        steps: report.steps.clone(),
        records: vec![],
    };
    for s in &report.snapshots {
        out.snapshot_times.push(s.t);
        out.profiles.extend(order.iter().map(|&i| s.u[i]));
        out.exact.extend(order.iter().map(|&i| wave.value(coords[i], s.t)));
    }
    for r in &report.records {
        out.records.extend([r.t, r.k, r.t_hat, if r.accepted { 1.0 } else { 0.0 }]);
    }
    out
}

/// Constant-step travelling-wave run with profiles at `snapshots`.
#[wasm_bindgen]
pub fn wave_profiles(
    scheme: &str,
    theta: f64,
    epsilon: f64,
    mesh_n: usize,
    k: f64,
    t_final: f64,
    snapshots: Vec<f64>,
) -> Result<WaveRun, JsError> {
    let text = format!(
        "problem = \"wave1d\"\nscheme = \"{scheme}\"\ntheta = {theta:?}\nepsilon = {epsilon:?}\nmesh_n = {mesh_n}\n\
         k = {k:?}\nt_final = {t_final:?}\nsnapshot_times = {snapshots:?}\n"
    );
    Ok(flatten(&run(&text)?, epsilon))
}

/// Adaptive travelling-wave run; the interesting output is `records`.
#[wasm_bindgen]
pub fn adaptive_history(
    scheme: &str,
    theta: f64,
    epsilon: f64,
    mesh_n: usize,
    tol: f64,
    t_final: f64,
) -> Result<WaveRun, JsError> {
    let text = format!(
        "problem = \"wave1d\"\nscheme = \"{scheme}\"\ntheta = {theta:?}\nepsilon = {epsilon:?}\nmesh_n = {mesh_n}\n\
         policy = \"adaptive\"\nk = 1e-3\ntol = {tol:?}\nt_final = {t_final:?}\nsnapshot_times = [{t_final:?}]\n"
    );
    Ok(flatten(&run(&text)?, epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_layout() {
        let c = coefficients(1.0, 0.1, 0.1).unwrap();
        assert_eq!(c.len(), 17);
        assert_eq!(&c[0..3], &[0.0, -1.0, 1.0]);
        assert!((c[3..6].iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((c[10] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn wave_run_shapes() {
        let r = wave_profiles("modified", 2.0 / 3.0, 0.05, 60, 0.05, 1.0, vec![0.5, 1.0]).unwrap();
        let n = r.x().len();
        assert_eq!(n, 121);
        assert!(r.x().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(r.snapshot_times().len(), 2);
        assert_eq!(r.profiles().len(), 2 * n);
        assert_eq!(r.exact().len(), 2 * n);
        assert_eq!(r.times().len(), r.energy().len());
        let err = r.profiles().iter().zip(r.exact()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 0.05, "{err}");
    }

    #[test]
    fn adaptive_records() {
        let r = adaptive_history("sav", 1.0, 0.05, 60, 1e-4, 1.0).unwrap();
        let rec = r.records();
        assert_eq!(rec.len() % 4, 0);
        assert!(rec.chunks(4).any(|c| c[3] == 1.0));
        assert!((r.times().last().unwrap() - 1.0).abs() < 1e-9);
    }
}
