//! Benchmark models: pure-birth chains, discretized transport, seeded
//! Lindblad controls and shift isometries, plus the textual model references
//! used by the CLI.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::deficiency::{IsometrySpec, Orientation, TauFModel};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat};
use crate::operator::{validate_model, Domain, ModelSpec, TruncatedSpace};
use crate::tolerance::Tolerances;

/// Birth rates `q_n`, `n = 0, 1, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "formula", rename_all = "snake_case")]
pub enum RateFormula {
    /// `q_n = n + 1`
    Linear,
    /// `q_n = (n + 1)²`
    Quadratic,
    Constant { value: f64 },
    /// `q_n = (n + 1)^p`
    Power { exponent: f64 },
    List { rates: Vec<f64> },
}

impl RateFormula {
    pub fn rates(&self, levels: usize) -> Result<Vec<f64>> {
        let q: Vec<f64> = match self {
            RateFormula::Linear => (0..levels).map(|n| n as f64 + 1.0).collect(),
            RateFormula::Quadratic => (0..levels).map(|n| (n as f64 + 1.0).powi(2)).collect(),
            RateFormula::Constant { value } => vec![*value; levels],
            RateFormula::Power { exponent } => (0..levels).map(|n| (n as f64 + 1.0).powf(*exponent)).collect(),
            RateFormula::List { rates } => {
                if rates.len() < levels {
                    return Err(Error::InvalidArgument(format!(
                        "{} rates listed, truncation needs {levels}",
                        rates.len()
                    )));
                }
                rates[..levels].to_vec()
            }
        };
        if let Some(bad) = q.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!("birth rates must be positive, found {bad}")));
        }
        Ok(q)
    }
}

/// Birth chain on levels `0..=N` with killing at the top level.
pub fn build_pure_birth(rates: &RateFormula, top: usize) -> Result<ModelSpec> {
    let q = rates.rates(top + 1)?;
    let dim = top + 1;
    let g = linalg::diag(&q.iter().map(|v| 0.5 * v).collect::<Vec<_>>());
    let mut l = CMat::zeros(dim, dim);
    for n in 0..top {
        l[(n + 1, n)] = c64(q[n].sqrt(), 0.0);
    }
    let labels = (0..dim).map(|n| format!("n={n}")).collect();
    Ok(ModelSpec {
        name: format!("pure_birth(N={top})"),
        space: TruncatedSpace::with_labels(dim, labels)?,
        g,
        kraus_ops: vec![l],
        domain: Domain::Indices((0..top).collect()),
        discretized: false,
    })
}

/// Multiplicative noise profile `ℓ(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum NoiseProfile {
    /// `ℓ(s) = 1 / (1 + s)`
    InverseLinear,
    Constant { value: f64 },
}

impl NoiseProfile {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            NoiseProfile::InverseLinear => 1.0 / (1.0 + s),
            NoiseProfile::Constant { value } => *value,
        }
    }
}

/// Skew-symmetric central discretization of `f d/dx + f'/2` on a uniform
/// grid with zero values outside it.
pub fn transport_skew(model: &TauFModel) -> Result<CMat> {
    let h = model
        .uniform_spacing()
        .ok_or_else(|| Error::Construction("transport discretization needs a uniform grid".into()))?;
    let f = model.f_values();
    let n = f.len();
    let mut a = CMat::zeros(n, n);
    for j in 0..n - 1 {
        let w = (f[j] + f[j + 1]) / (4.0 * h);
        a[(j, j + 1)] = c64(w, 0.0);
        a[(j + 1, j)] = c64(-w, 0.0);
    }
    Ok(a)
}

/// Transport model on the grid of `model`, oriented by `model.orientation`.
///
/// Forward: `−G = A − (f_0/2h) e_0e_0*`, transport toward `x = 0` with outflow
/// there; `D` excludes the boundary node and the last node. Adjoint:
/// `−G = −A`, unitary, `D` is everything. Noise adds `½ diag|ℓ|²` to `G` and
/// the Kraus operator `diag ℓ(x_j)`.
pub fn build_tau_f_transport(model: &TauFModel, noise: Option<&NoiseProfile>) -> Result<ModelSpec> {
    model.validate()?;
    let a = transport_skew(model)?;
    let n = a.nrows();
    let h = model.uniform_spacing().expect("checked by transport_skew");
    let f0 = model.f_values()[0];
    let (mut g, domain, tag) = match model.orientation {
        Orientation::Forward => {
            let mut g = -a;
            g[(0, 0)] += c64(f0 / (2.0 * h), 0.0);
            (g, Domain::Indices((1..n - 1).collect()), "forward")
        }
        Orientation::Adjoint => (a, Domain::full(n), "adjoint"),
    };
    let mut kraus = Vec::new();
    if let Some(profile) = noise {
        let ell: Vec<f64> = model.grid.iter().map(|&x| profile.eval(x)).collect();
        if let Some(bad) = ell.iter().find(|v| !v.is_finite()) {
            return Err(Error::Construction(format!("noise profile is unbounded on the grid ({bad})")));
        }
        for (j, v) in ell.iter().enumerate() {
            g[(j, j)] += c64(0.5 * v * v, 0.0);
        }
        kraus.push(linalg::diag(&ell));
    }
    let labels = model.grid.iter().map(|x| format!("x={x}")).collect();
    let spec = ModelSpec {
        name: format!("tau_f_{tag}{}(M={})", if noise.is_some() { "_noise" } else { "" }, n - 1),
        space: TruncatedSpace::with_labels(n, labels)?,
        g,
        kraus_ops: kraus,
        domain,
        discretized: true,
    };
    let report = validate_model(&spec, &Tolerances::default())?;
    if report.dissipativity_residual > report.validation_eps {
        return Err(Error::Construction(format!(
            "discretization is not dissipative (residual {:.3e})",
            report.dissipativity_residual
        )));
    }
    Ok(spec)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
    CMat::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c64(scale * re, scale * im)
    })
}

/// Seeded GKS–Lindblad model `G = ½ Σ L_k*L_k − iH`, `D` = everything.
pub fn build_bounded_lindblad(dim: usize, seed: u64, kraus_count: usize) -> Result<ModelSpec> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (dim as f64).sqrt();
    let raw = gaussian_matrix(&mut rng, dim, scale);
    let h = linalg::hermitian_part(&raw);
    let kraus: Vec<CMat> = (0..kraus_count).map(|_| gaussian_matrix(&mut rng, dim, scale)).collect();
    let mut g = &h * c64(0.0, -1.0);
    for l in &kraus {
        g += l.adjoint() * l * c64(0.5, 0.0);
    }
    let kind = if kraus_count == 0 { "unitary" } else { "bounded_lindblad" };
    Ok(ModelSpec {
        name: format!("{kind}(dim={dim},seed={seed})"),
        space: TruncatedSpace::new(dim)?,
        g,
        kraus_ops: kraus,
        domain: Domain::full(dim),
        discretized: false,
    })
}

pub fn build_unitary(dim: usize, seed: u64) -> Result<ModelSpec> {
    build_bounded_lindblad(dim, seed, 0)
}

pub fn build_shift_isometry(m: usize, dim: usize) -> Result<IsometrySpec> {
    if m == 0 {
        return Err(Error::InvalidArgument("shift offset must be at least 1".into()));
    }
    IsometrySpec::shift(m, dim)
}

pub const DEFAULT_KRAUS_COUNT: usize = 2;

/// A catalog model with every parameter resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CatalogEntry {
    PureBirth {
        rates: RateFormula,
        /// Top level `N`; the truncation has `N + 1` states.
        top: usize,
    },
    TauFTransport { model: TauFModel },
    TauFAdjoint { model: TauFModel },
    TauFWithNoise { model: TauFModel, noise: NoiseProfile },
    BoundedLindblad { dim: usize, seed: u64, kraus: usize },
    ShiftIsometry { m: usize, dim: usize },
}

/// What a catalog entry builds into.
#[derive(Debug, Clone, PartialEq)]
pub enum Built {
    Model(ModelSpec),
    Isometry(IsometrySpec),
}

impl CatalogEntry {
    pub fn kind(&self) -> &'static str {
        match self {
            CatalogEntry::PureBirth { .. } => "pure_birth",
            CatalogEntry::TauFTransport { .. } => "tau_f_transport",
            CatalogEntry::TauFAdjoint { .. } => "tau_f_adjoint",
            CatalogEntry::TauFWithNoise { .. } => "tau_f_with_noise",
            CatalogEntry::BoundedLindblad { .. } => "bounded_lindblad",
            CatalogEntry::ShiftIsometry { .. } => "shift_isometry",
        }
    }

    /// The size parameter swept by truncation ladders: `N` for birth chains,
    /// grid intervals for transport, the dimension otherwise.
    pub fn size(&self) -> usize {
        match self {
            CatalogEntry::PureBirth { top, .. } => *top,
            CatalogEntry::TauFTransport { model }
            | CatalogEntry::TauFAdjoint { model }
            | CatalogEntry::TauFWithNoise { model, .. } => model.intervals(),
            CatalogEntry::BoundedLindblad { dim, .. } | CatalogEntry::ShiftIsometry { dim, .. } => *dim,
        }
    }

    /// Same family at a different size parameter.
    pub fn with_size(&self, size: usize) -> Result<CatalogEntry> {
        Ok(match self {
            CatalogEntry::PureBirth { rates, .. } => CatalogEntry::PureBirth { rates: rates.clone(), top: size },
            CatalogEntry::TauFTransport { model } => CatalogEntry::TauFTransport { model: model.regridded(size)? },
            CatalogEntry::TauFAdjoint { model } => CatalogEntry::TauFAdjoint { model: model.regridded(size)? },
            CatalogEntry::TauFWithNoise { model, noise } => {
                CatalogEntry::TauFWithNoise { model: model.regridded(size)?, noise: noise.clone() }
            }
            CatalogEntry::BoundedLindblad { seed, kraus, .. } => {
                CatalogEntry::BoundedLindblad { dim: size, seed: *seed, kraus: *kraus }
            }
            CatalogEntry::ShiftIsometry { m, .. } => CatalogEntry::ShiftIsometry { m: *m, dim: size },
        })
    }

    pub fn build(&self) -> Result<Built> {
        Ok(match self {
            CatalogEntry::PureBirth { rates, top } => Built::Model(build_pure_birth(rates, *top)?),
            CatalogEntry::TauFTransport { model } => {
                Built::Model(build_tau_f_transport(&model.clone().with_orientation(Orientation::Forward), None)?)
            }
            CatalogEntry::TauFAdjoint { model } => {
                Built::Model(build_tau_f_transport(&model.clone().with_orientation(Orientation::Adjoint), None)?)
            }
            CatalogEntry::TauFWithNoise { model, noise } => Built::Model(build_tau_f_transport(
                &model.clone().with_orientation(Orientation::Forward),
                Some(noise),
            )?),
            CatalogEntry::BoundedLindblad { dim, seed, kraus } => {
                Built::Model(build_bounded_lindblad(*dim, *seed, *kraus)?)
            }
            CatalogEntry::ShiftIsometry { m, dim } => Built::Isometry(build_shift_isometry(*m, *dim)?),
        })
    }

    pub fn build_model(&self) -> Result<ModelSpec> {
        match self.build()? {
            Built::Model(spec) => Ok(spec),
            Built::Isometry(_) => Err(Error::InvalidArgument(format!("{} is an isometry, not a generator", self.kind()))),
        }
    }

    /// The transport model behind a `tau_f_*` entry.
    pub fn tau_f_model(&self) -> Option<TauFModel> {
        match self {
            CatalogEntry::TauFTransport { model } | CatalogEntry::TauFWithNoise { model, .. } => {
                Some(model.clone().with_orientation(Orientation::Forward))
            }
            CatalogEntry::TauFAdjoint { model } => Some(model.clone().with_orientation(Orientation::Adjoint)),
            _ => None,
        }
    }
}

/// Small instances of every generator kind, used by consistency checks
/// that must run over the whole catalog.
pub fn standard_catalog() -> Vec<CatalogEntry> {
    let grid = |alpha: f64| TauFModel::power(alpha, 4.0, 16, 1.0).expect("valid catalog grid");
    vec![
        CatalogEntry::PureBirth { rates: RateFormula::Linear, top: 8 },
        CatalogEntry::PureBirth { rates: RateFormula::Quadratic, top: 8 },
        CatalogEntry::TauFTransport { model: grid(0.0) },
        CatalogEntry::TauFAdjoint { model: grid(0.0) },
        CatalogEntry::TauFWithNoise { model: grid(0.5), noise: NoiseProfile::InverseLinear },
        CatalogEntry::BoundedLindblad { dim: 4, seed: 7, kraus: DEFAULT_KRAUS_COUNT },
        CatalogEntry::BoundedLindblad { dim: 4, seed: 7, kraus: 0 },
    ]
}

/// Options a textual model reference may leave open.
#[derive(Debug, Clone, Default)]
pub struct RefOverrides {
    /// Size parameter (`N` for birth chains, dimension otherwise).
    pub dim: Option<usize>,
    /// `(start, end, intervals)`; the start must be 0.
    pub grid: Option<(f64, f64, usize)>,
    pub c1: Option<f64>,
}

const DEFAULT_BIRTH_TOP: usize = 64;
const DEFAULT_GRID: (f64, f64, usize) = (0.0, 20.0, 400);

fn parse_kv(body: &str) -> Result<Vec<(String, String)>> {
    body.split([',', ';'])
        .filter(|s| !s.trim().is_empty())
        .map(|part| {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, found '{part}'")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Parse(format!("bad value '{value}' for '{key}'")))
}

fn parse_rates(body: &str) -> Result<RateFormula> {
    let body = body.trim();
    match body {
        "" | "quadratic" => return Ok(RateFormula::Quadratic),
        "linear" => return Ok(RateFormula::Linear),
        _ => {}
    }
    let (key, value) = body
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("unknown rate formula '{body}'")))?;
    match key.trim() {
        "constant" => Ok(RateFormula::Constant { value: num(key, value)? }),
        "power" => Ok(RateFormula::Power { exponent: num(key, value)? }),
        "q" => {
            let rates = value.split([';', ' ']).filter(|s| !s.is_empty()).map(|s| num(key, s)).collect::<Result<_>>()?;
            Ok(RateFormula::List { rates })
        }
        other => Err(Error::Parse(format!("unknown rate formula '{other}'"))),
    }
}

fn tau_f_from(body: &str, ov: &RefOverrides) -> Result<(TauFModel, Option<NoiseProfile>)> {
    let mut alpha = 0.0;
    let mut noise = None;
    for (k, v) in parse_kv(body)? {
        match k.as_str() {
            "alpha" => alpha = num(&k, &v)?,
            "noise" => {
                noise = Some(match v.as_str() {
                    "inverse_linear" | "1/(1+s)" => NoiseProfile::InverseLinear,
                    other => NoiseProfile::Constant { value: num(&k, other)? },
                })
            }
            other => return Err(Error::Parse(format!("unknown tau-f parameter '{other}'"))),
        }
    }
    let (start, end, mut intervals) = ov.grid.unwrap_or(DEFAULT_GRID);
    if start != 0.0 {
        return Err(Error::Parse(format!("grid must start at 0, got {start}")));
    }
    if ov.grid.is_none() {
        if let Some(d) = ov.dim {
            intervals = d;
        }
    }
    let model = TauFModel::power(alpha, end, intervals, ov.c1.unwrap_or(1.0))?;
    Ok((model, noise))
}

/// Parse `kind[:params]`, e.g. `pure-birth:quadratic`,
/// `bounded-lindblad:seed=7,dim=4`, `tau-f:alpha=0.5`, `shift:m=2`.
pub fn parse_model_ref(reference: &str, ov: &RefOverrides) -> Result<CatalogEntry> {
    let (kind, body) = reference.split_once(':').unwrap_or((reference, ""));
    match kind.trim() {
        "pure-birth" | "pure_birth" => {
            Ok(CatalogEntry::PureBirth { rates: parse_rates(body)?, top: ov.dim.unwrap_or(DEFAULT_BIRTH_TOP) })
        }
        "tau-f" | "tau_f" | "tau-f-transport" => {
            let (model, noise) = tau_f_from(body, ov)?;
            Ok(match noise {
                Some(noise) => CatalogEntry::TauFWithNoise { model, noise },
                None => CatalogEntry::TauFTransport { model },
            })
        }
        "tau-f-adjoint" | "tau_f_adjoint" => {
            let (model, noise) = tau_f_from(body, ov)?;
            if noise.is_some() {
                return Err(Error::Parse("noise is only defined for the forward orientation".into()));
            }
            Ok(CatalogEntry::TauFAdjoint { model })
        }
        "tau-f-noise" | "tau_f_with_noise" => {
            let (model, noise) = tau_f_from(body, ov)?;
            Ok(CatalogEntry::TauFWithNoise { model, noise: noise.unwrap_or(NoiseProfile::InverseLinear) })
        }
        "bounded-lindblad" | "bounded_lindblad" | "unitary" => {
            let mut seed = 7u64;
            let mut dim = ov.dim.unwrap_or(4);
            let mut kraus = if kind.trim() == "unitary" { 0 } else { DEFAULT_KRAUS_COUNT };
            for (k, v) in parse_kv(body)? {
                match k.as_str() {
                    "seed" => seed = num(&k, &v)?,
                    "dim" => dim = num(&k, &v)?,
                    "kraus" => kraus = num(&k, &v)?,
                    other => return Err(Error::Parse(format!("unknown lindblad parameter '{other}'"))),
                }
            }
            if let Some(d) = ov.dim {
                dim = d;
            }
            Ok(CatalogEntry::BoundedLindblad { dim, seed, kraus })
        }
        "shift" | "shift-isometry" | "shift_isometry" => {
            let mut m = 1usize;
            let mut dim = ov.dim.unwrap_or(32);
            for (k, v) in parse_kv(body)? {
                match k.as_str() {
                    "m" => m = num(&k, &v)?,
                    "dim" => dim = num(&k, &v)?,
                    other => return Err(Error::Parse(format!("unknown shift parameter '{other}'"))),
                }
            }
            if let Some(d) = ov.dim {
                dim = d;
            }
            Ok(CatalogEntry::ShiftIsometry { m, dim })
        }
        other => Err(Error::Parse(format!("unknown model kind '{other}'"))),
    }
}

/// One row of `list-models`.
#[derive(Debug, Clone, Serialize)]
pub struct ModelSchema {
    pub kind: &'static str,
    pub reference: &'static str,
    pub parameters: &'static str,
    pub size_flag: &'static str,
}

pub fn model_schemas() -> Vec<ModelSchema> {
    vec![
        ModelSchema {
            kind: "pure_birth",
            reference: "pure-birth:quadratic",
            parameters: "linear | quadratic | constant=c | power=p | q=q0;q1;...",
            size_flag: "--dim N (top level, N+1 states; default 64)",
        },
        ModelSchema {
            kind: "tau_f_transport",
            reference: "tau-f:alpha=0",
            parameters: "alpha in [0,1]; f(x) = (1+x)^alpha",
            size_flag: "--grid 0:L:M (default 0:20:400) or --dim M",
        },
        ModelSchema {
            kind: "tau_f_adjoint",
            reference: "tau-f-adjoint:alpha=0",
            parameters: "alpha in [0,1]",
            size_flag: "--grid 0:L:M or --dim M",
        },
        ModelSchema {
            kind: "tau_f_with_noise",
            reference: "tau-f-noise:alpha=0.5,noise=inverse_linear",
            parameters: "alpha in [0,1]; noise = inverse_linear | constant value",
            size_flag: "--grid 0:L:M or --dim M",
        },
        ModelSchema {
            kind: "bounded_lindblad",
            reference: "bounded-lindblad:seed=7,dim=4",
            parameters: "seed, dim, kraus (default 2); unitary:... sets kraus=0",
            size_flag: "--dim",
        },
        ModelSchema {
            kind: "shift_isometry",
            reference: "shift:m=1",
            parameters: "m >= 1, dim > 2m",
            size_flag: "--dim (default 32)",
        },
    ]
}
