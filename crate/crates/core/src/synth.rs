//! Synthetic ensembles with known dynamics.
//!
//! Each particle gets a random rotation axis and initial orientation; the
//! mode then decides how the orientation evolves:
//!
//! * `periodic`: rotation about the axis by `2π·h·(i mod P)/P` at step `i`,
//!   evaluated directly (no incremental updates), so `x(i + P) == x(i)`
//!   bit for bit. `h` is the particle's integer harmonic (default 1).
//! * `quasi_periodic`: rotation angle `2π·φ_p·t/(P·dt₀)` with pairwise
//!   incommensurate factors `φ_p = sqrt(prime_p / 2)`.
//! * `noisy`: tangential Gaussian kick of amplitude σ per step, then
//!   renormalization (a random walk on the sphere).
//! * `switch`: periodic while `t < t*`, noisy afterwards.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`, seeded with
//! `seed_from_u64`). A uniform variate is `(next_u64() >> 11) · 2⁻⁵³`; a
//! normal variate is Box–Muller `sqrt(-2 ln(1 - u₁)) · cos(2π u₂)`, one per
//! pair of draws. Setup draws the axis and then the initial orientation of
//! particle 0, 1, …; noise draws follow in step-major, particle-minor order
//! (x, y, z per particle).

use std::f64::consts::TAU;
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{self, Ensemble, EnsembleError, Manifest, ParameterPoint, Run};
use crate::par::{self, Parallelism};

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("invalid generator spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("cannot write ensemble: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorMode {
    Periodic,
    QuasiPeriodic,
    Noisy,
    Switch,
}

/// Either a constant step or an explicit list of `steps - 1` increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeStep {
    Uniform(f64),
    Schedule(Vec<f64>),
}

impl TimeStep {
    fn times(&self, steps: usize) -> Vec<f64> {
        match self {
            TimeStep::Uniform(dt) => (0..steps).map(|i| i as f64 * dt).collect(),
            TimeStep::Schedule(deltas) => {
                let mut t = Vec::with_capacity(steps);
                t.push(0.0);
                for d in deltas {
                    t.push(t[t.len() - 1] + d);
                }
                t
            }
        }
    }

    fn first(&self) -> f64 {
        match self {
            TimeStep::Uniform(dt) => *dt,
            TimeStep::Schedule(d) => d[0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(default = "default_run_id")]
    pub id: String,
    pub mode: GeneratorMode,
    pub k: usize,
    pub steps: usize,
    pub dt: TimeStep,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_time: Option<f64>,
    /// Integer frequency multiplier per particle (periodic phases only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmonics: Option<Vec<u32>>,
    pub seed: u64,
    pub params: ParameterPoint,
}

fn default_run_id() -> String {
    "run".to_string()
}

impl GeneratorSpec {
    pub fn new(mode: GeneratorMode, k: usize, steps: usize, dt: f64, seed: u64) -> Self {
        Self {
            id: default_run_id(),
            mode,
            k,
            steps,
            dt: TimeStep::Uniform(dt),
            period_steps: None,
            noise_amplitude: None,
            switch_time: None,
            harmonics: None,
            seed,
            params: ParameterPoint::new(0.0, 0.0),
        }
    }

    pub fn periodic(k: usize, steps: usize, period: usize, seed: u64) -> Self {
        Self {
            period_steps: Some(period),
            ..Self::new(GeneratorMode::Periodic, k, steps, 1.0, seed)
        }
    }

    pub fn noisy(k: usize, steps: usize, sigma: f64, seed: u64) -> Self {
        Self {
            noise_amplitude: Some(sigma),
            ..Self::new(GeneratorMode::Noisy, k, steps, 1.0, seed)
        }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        let invalid = |m: &str| Err(GeneratorError::Invalid(format!("{}: {m}", self.id)));
        if self.k == 0 {
            return invalid("k must be positive");
        }
        if self.steps < 2 {
            return invalid("steps must be at least 2");
        }
        match &self.dt {
            TimeStep::Uniform(dt) if !(dt.is_finite() && *dt > 0.0) => return invalid("dt must be positive"),
            TimeStep::Schedule(d) if d.len() != self.steps - 1 => {
                return invalid("dt schedule must have steps - 1 entries")
            }
            TimeStep::Schedule(d) if d.iter().any(|x| !(x.is_finite() && *x > 0.0)) => {
                return invalid("dt schedule entries must be positive")
            }
            _ => {}
        }
        if !self.params.is_finite() {
            return invalid("parameters must be finite");
        }
        let needs_period = self.mode != GeneratorMode::Noisy;
        let needs_noise = matches!(self.mode, GeneratorMode::Noisy | GeneratorMode::Switch);
        if needs_period && !self.period_steps.is_some_and(|p| p >= 2) {
            return invalid("period_steps must be at least 2");
        }
        if needs_noise && !self.noise_amplitude.is_some_and(|s| s.is_finite() && s >= 0.0) {
            return invalid("noise_amplitude must be finite and non-negative");
        }
        if self.mode == GeneratorMode::Switch && !self.switch_time.is_some_and(f64::is_finite) {
            return invalid("switch mode needs a finite switch_time");
        }
        if let Some(h) = &self.harmonics {
            if h.len() != self.k || h.contains(&0) {
                return invalid("harmonics needs one positive entry per particle");
            }
        }
        Ok(())
    }
}

struct Rng(ChaCha8Rng);

impl Rng {
    fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (TAU * u2).cos()
    }

    fn unit_vector(&mut self) -> [f64; 3] {
        loop {
            let v = [self.normal(), self.normal(), self.normal()];
            let n = norm3(v);
            if n > 1e-6 {
                return v.map(|c| c / n);
            }
        }
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn normalized(v: [f64; 3]) -> [f64; 3] {
    let n = norm3(v);
    v.map(|c| c / n)
}

/// Rodrigues rotation of `v` about unit `axis` by `angle`.
fn rotate(v: [f64; 3], axis: [f64; 3], angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    let dot = axis[0] * v[0] + axis[1] * v[1] + axis[2] * v[2];
    let cross = [
        axis[1] * v[2] - axis[2] * v[1],
        axis[2] * v[0] - axis[0] * v[2],
        axis[0] * v[1] - axis[1] * v[0],
    ];
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = v[i] * c + cross[i] * s + axis[i] * dot * (1.0 - c);
    }
    out
}

fn noise_step(rng: &mut Rng, v: [f64; 3], sigma: f64) -> [f64; 3] {
    let xi = [rng.normal(), rng.normal(), rng.normal()];
    let dot = xi[0] * v[0] + xi[1] * v[1] + xi[2] * v[2];
    normalized([
        v[0] + sigma * (xi[0] - dot * v[0]),
        v[1] + sigma * (xi[1] - dot * v[1]),
        v[2] + sigma * (xi[2] - dot * v[2]),
    ])
}

const PRIMES: [f64; 16] = [
    2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0, 41.0, 43.0, 47.0, 53.0,
];

fn incommensurate_factor(p: usize) -> f64 {
    // beyond the table, shift by an irrational offset to stay distinct
    (PRIMES[p % PRIMES.len()] / 2.0).sqrt() + (p / PRIMES.len()) as f64 * std::f64::consts::SQRT_2
}

/// Generates one run according to `spec`.
pub fn generate_run(spec: &GeneratorSpec) -> Result<Run, GeneratorError> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    let k = spec.k;
    let setup: Vec<([f64; 3], [f64; 3])> = (0..k).map(|_| (rng.unit_vector(), rng.unit_vector())).collect();
    let times = spec.dt.times(spec.steps);
    let harmonic = |p: usize| spec.harmonics.as_ref().map_or(1.0, |h| f64::from(h[p]));
    let period = spec.period_steps.unwrap_or(2);
    let sigma = spec.noise_amplitude.unwrap_or(0.0);

    let periodic_at = |i: usize, p: usize| {
        let (axis, v0) = setup[p];
        let phase = (i % period) as f64 / period as f64;
        normalized(rotate(v0, axis, TAU * harmonic(p) * phase))
    };

    let mut features = Vec::with_capacity(spec.steps * 3 * k);
    let mut current: Vec<[f64; 3]> = setup.iter().map(|s| s.1).collect();
    for (i, &t) in times.iter().enumerate() {
        for p in 0..k {
            let v = match spec.mode {
                GeneratorMode::Periodic => periodic_at(i, p),
                GeneratorMode::QuasiPeriodic => {
                    let (axis, v0) = setup[p];
                    let omega = TAU / (period as f64 * spec.dt.first());
                    normalized(rotate(v0, axis, omega * incommensurate_factor(p) * t))
                }
                GeneratorMode::Noisy => {
                    if i > 0 {
                        current[p] = noise_step(&mut rng, current[p], sigma);
                    }
                    current[p]
                }
                GeneratorMode::Switch => {
                    if t < spec.switch_time.unwrap_or(f64::INFINITY) {
                        current[p] = periodic_at(i, p);
                    } else {
                        current[p] = noise_step(&mut rng, current[p], sigma);
                    }
                    current[p]
                }
            };
            features.extend_from_slice(&v);
        }
    }
    Ok(Run::new(spec.id.clone(), spec.params, times, features, 3 * k)?)
}

/// Chooses the generator mode for each grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModeRule {
    /// `d < periodic_below_d` → periodic; otherwise noisy with
    /// `σ = sigma_base + sigma_per_beta · |beta|`.
    Default {
        #[serde(default = "default_period")]
        period_steps: usize,
        #[serde(default = "default_threshold")]
        periodic_below_d: f64,
        #[serde(default = "default_sigma_base")]
        sigma_base: f64,
        #[serde(default = "default_sigma_per_beta")]
        sigma_per_beta: f64,
    },
    /// The same mode everywhere.
    Uniform {
        mode: GeneratorMode,
        #[serde(default)]
        period_steps: Option<usize>,
        #[serde(default)]
        noise_amplitude: Option<f64>,
        #[serde(default)]
        switch_time: Option<f64>,
    },
}

fn default_period() -> usize {
    50
}
fn default_threshold() -> f64 {
    2.0
}
fn default_sigma_base() -> f64 {
    0.05
}
fn default_sigma_per_beta() -> f64 {
    0.05
}

impl Default for ModeRule {
    fn default() -> Self {
        ModeRule::Default {
            period_steps: default_period(),
            periodic_below_d: default_threshold(),
            sigma_base: default_sigma_base(),
            sigma_per_beta: default_sigma_per_beta(),
        }
    }
}

/// File format of the CLI `gen` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    #[serde(default = "default_ensemble_id")]
    pub id: String,
    pub k: usize,
    pub steps: usize,
    pub dt: TimeStep,
    pub seed: u64,
    pub d: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(default)]
    pub rule: ModeRule,
}

fn default_ensemble_id() -> String {
    "synthetic".to_string()
}

impl EnsembleSpec {
    /// 5 × 6 grid with the default rule: two periodic `d` columns, three
    /// noisy ones.
    pub fn default_grid(seed: u64) -> Self {
        Self {
            id: default_ensemble_id(),
            k: 7,
            steps: 400,
            dt: TimeStep::Uniform(2.5),
            seed,
            d: vec![1.0, 1.5, 2.0, 2.5, 3.0],
            beta: vec![-4.5, -3.4, -2.7, -2.3, -1.0, 0.0],
            rule: ModeRule::default(),
        }
    }

    /// Run id for a grid point, e.g. `d1.5_beta-2.7`.
    pub fn run_id(p: ParameterPoint) -> String {
        format!("d{:?}_beta{:?}", p.d, p.beta)
    }

    /// Generator spec of the `index`-th grid point (d-major order).
    pub fn run_spec(&self, index: usize, p: ParameterPoint) -> GeneratorSpec {
        let mut spec = GeneratorSpec {
            id: Self::run_id(p),
            mode: GeneratorMode::Periodic,
            k: self.k,
            steps: self.steps,
            dt: self.dt.clone(),
            period_steps: None,
            noise_amplitude: None,
            switch_time: None,
            harmonics: None,
            seed: self.seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            params: p,
        };
        match &self.rule {
            ModeRule::Default {
                period_steps,
                periodic_below_d,
                sigma_base,
                sigma_per_beta,
            } => {
                if p.d < *periodic_below_d {
                    spec.period_steps = Some(*period_steps);
                } else {
                    spec.mode = GeneratorMode::Noisy;
                    spec.noise_amplitude = Some(sigma_base + sigma_per_beta * p.beta.abs());
                }
            }
            ModeRule::Uniform {
                mode,
                period_steps,
                noise_amplitude,
                switch_time,
            } => {
                spec.mode = *mode;
                spec.period_steps = *period_steps;
                spec.noise_amplitude = *noise_amplitude;
                spec.switch_time = *switch_time;
            }
        }
        spec
    }

    pub fn grid(&self) -> Vec<ParameterPoint> {
        self.d
            .iter()
            .flat_map(|&d| self.beta.iter().map(move |&beta| ParameterPoint::new(d, beta)))
            .collect()
    }
}

/// Generates every grid point of `spec` in memory.
pub fn generate_ensemble(spec: &EnsembleSpec) -> Result<Ensemble, GeneratorError> {
    if spec.d.is_empty() || spec.beta.is_empty() {
        return Err(GeneratorError::Invalid("parameter grid is empty".into()));
    }
    let grid = spec.grid();
    generate_ensemble_with(&spec.id, spec.k, &grid, |i, p| spec.run_spec(i, p))
}

/// Generates one run per grid point with a caller-supplied mode rule.
pub fn generate_ensemble_with<F>(
    id: &str,
    k: usize,
    grid: &[ParameterPoint],
    rule: F,
) -> Result<Ensemble, GeneratorError>
where
    F: Fn(usize, ParameterPoint) -> GeneratorSpec + Sync + Send,
{
    if grid.is_empty() {
        return Err(GeneratorError::Invalid("parameter grid is empty".into()));
    }
    let indexed: Vec<(usize, ParameterPoint)> = grid.iter().copied().enumerate().collect();
    let runs = par::map_slice(Parallelism::Parallel, &indexed, |&(i, p)| generate_run(&rule(i, p)));
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(Ensemble::new(id, k, runs)?)
}

/// Generates `spec` and writes the manifest and CSVs under `dir`.
pub fn generate_to_dir(spec: &EnsembleSpec, dir: &Path) -> Result<Manifest, GeneratorError> {
    let ensemble = generate_ensemble(spec)?;
    Ok(ensemble::write_ensemble(&ensemble, dir)?)
}
