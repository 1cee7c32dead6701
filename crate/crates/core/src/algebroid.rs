//! Lie algebroids in local coordinates.
//!
//! A model stores the anchor `ρⁱ_α(x)` and the structure functions
//! `C^γ_{αβ}(x)` with respect to base coordinates `x1..xn` and a local
//! basis of sections `e_1..e_r`. All indices are 0-based in the API.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::algebra::{AlgebraError, NamedAlgebra, StructureConstants};
use crate::exprlang::{EvalError, ExpressionTree, FieldError, ScalarField, VarLayout};

/// Step of the central differences used by [`certify`].
pub const CERTIFY_FD_STEP: f64 = 1e-5;
/// Tolerance at which every catalog model certifies.
pub const CATALOG_TOLERANCE: f64 = 1e-10;
/// Relative singular-value threshold for the orbit spanning-set rank.
pub const RANK_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebroidError {
    #[error("point has length {got}, model base dimension is {expected}")]
    PointDimension { expected: usize, got: usize },
    #[error("evaluation failed at x = {point:?}: {source}")]
    Eval {
        point: Vec<f64>,
        #[source]
        source: EvalError,
    },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("structure function expressions may only use x1..x{base_dim}, found `{name}`")]
    ForeignVariable { name: String, base_dim: usize },
    #[error("inconsistent dimensions: {0}")]
    Dimension(String),
    #[error("unknown algebroid kind `{0}`")]
    UnknownKind(String),
    #[error("missing parameter `{param}` for kind `{kind}`")]
    MissingParameter { kind: &'static str, param: &'static str },
    #[error("coadjoint model needs a non-zero xi")]
    ZeroXi,
    #[error("algebra fails certification (jacobi residual {0:e})")]
    NotALieAlgebra(f64),
}

#[derive(Debug, Clone, PartialEq)]
enum Anchor {
    Constant(DMatrix<f64>),
    // row-major n x r
    Fields(Vec<ScalarField>),
}

#[derive(Debug, Clone, PartialEq)]
enum Structure {
    Constant(StructureConstants),
    // (γ, α, β) with α < β
    Fields(Vec<((usize, usize, usize), ScalarField)>),
}

/// How a model was built; used for reporting and for locating a matrix
/// group realization.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    LieAlgebra(Option<NamedAlgebra>),
    Tangent,
    Trivial(NamedAlgebra),
    Coadjoint(NamedAlgebra),
    Custom,
}

impl ModelKind {
    /// The named algebra on the `𝔤` block, if any.
    pub fn algebra(&self) -> Option<NamedAlgebra> {
        match self {
            ModelKind::LieAlgebra(a) => *a,
            ModelKind::Trivial(a) | ModelKind::Coadjoint(a) => Some(*a),
            ModelKind::Tangent | ModelKind::Custom => None,
        }
    }
}

/// Orbit data carried by a coadjoint model.
#[derive(Debug, Clone, PartialEq)]
pub struct CoadjointData {
    pub xi: Vec<f64>,
    /// `ad*_{e_α} ξ` for each algebra basis element.
    pub spanning_set: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub numerical_rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgebroidModel {
    base_dim: usize,
    rank: usize,
    anchor: Anchor,
    structure: Structure,
    kind: ModelKind,
    labels: Vec<String>,
    casimirs: Vec<ScalarField>,
    // first fiber index of the 𝔤 block for trivial/coadjoint kinds
    algebra_offset: usize,
    coadjoint: Option<CoadjointData>,
}

fn check_base_only(field: &ScalarField, base_dim: usize) -> Result<(), AlgebroidError> {
    if let Some(name) = field
        .tree()
        .free_variables()
        .iter()
        .find(|v| !v.starts_with('x') || *v == "t")
    {
        return Err(AlgebroidError::ForeignVariable {
            name: name.clone(),
            base_dim,
        });
    }
    Ok(())
}

fn default_labels(rank: usize) -> Vec<String> {
    (1..=rank).map(|a| format!("e{a}")).collect()
}

impl AlgebroidModel {
    /// Lie algebra over a point (`n = 0`).
    pub fn lie_algebra(constants: StructureConstants) -> Self {
        let rank = constants.dim();
        AlgebroidModel {
            base_dim: 0,
            rank,
            anchor: Anchor::Constant(DMatrix::zeros(0, rank)),
            structure: Structure::Constant(constants),
            kind: ModelKind::LieAlgebra(None),
            labels: default_labels(rank),
            casimirs: Vec::new(),
            algebra_offset: 0,
            coadjoint: None,
        }
    }

    pub fn named_lie_algebra(algebra: NamedAlgebra) -> Self {
        let mut model = Self::lie_algebra(algebra.structure_constants());
        model.kind = ModelKind::LieAlgebra(Some(algebra));
        model.casimirs = casimir_fields(algebra, 0, model.layout());
        model
    }

    /// `TM` with the identity anchor and vanishing bracket on coordinate fields.
    pub fn tangent(n: usize) -> Self {
        AlgebroidModel {
            base_dim: n,
            rank: n,
            anchor: Anchor::Constant(DMatrix::identity(n, n)),
            structure: Structure::Constant(StructureConstants::zero(n)),
            kind: ModelKind::Tangent,
            labels: (1..=n).map(|i| format!("d/dx{i}")).collect(),
            casimirs: Vec::new(),
            algebra_offset: 0,
            coadjoint: None,
        }
    }

    /// `TM ⊕ (M × 𝔤)` in the basis of coordinate fields followed by constant
    /// sections: anchor `[I | 0]`, bracket constants on the `𝔤` block only.
    pub fn trivial(n: usize, algebra: NamedAlgebra) -> Self {
        let k = algebra.dim();
        let rank = n + k;
        let mut anchor = DMatrix::zeros(n, rank);
        for i in 0..n {
            anchor[(i, i)] = 1.0;
        }
        let mut labels: Vec<String> = (1..=n).map(|i| format!("d/dx{i}")).collect();
        labels.extend((1..=k).map(|a| format!("g{a}")));
        let mut model = AlgebroidModel {
            base_dim: n,
            rank,
            anchor: Anchor::Constant(anchor),
            structure: Structure::Constant(algebra.structure_constants().embedded(rank, n)),
            kind: ModelKind::Trivial(algebra),
            labels,
            casimirs: Vec::new(),
            algebra_offset: n,
            coadjoint: None,
        };
        model.casimirs = casimir_fields(algebra, n, model.layout());
        model
    }

    /// Model from expressions in `x1..xn`. `anchor` is `n` rows of `r`
    /// entries; `structure` lists `((γ, α, β), C^γ_{αβ}(x))`, antisymmetrized.
    pub fn custom(
        base_dim: usize,
        rank: usize,
        anchor: Vec<Vec<ExpressionTree>>,
        structure: Vec<((usize, usize, usize), ExpressionTree)>,
    ) -> Result<Self, AlgebroidError> {
        if rank == 0 {
            return Err(AlgebroidError::Dimension("rank must be positive".into()));
        }
        if anchor.len() != base_dim || anchor.iter().any(|row| row.len() != rank) {
            return Err(AlgebroidError::Dimension(format!(
                "anchor must have {base_dim} rows of {rank} expressions"
            )));
        }
        let layout = VarLayout::new(base_dim, 0, 0);
        let mut anchor_fields = Vec::with_capacity(base_dim * rank);
        for tree in anchor.into_iter().flatten() {
            let field = ScalarField::new(tree, layout)?;
            check_base_only(&field, base_dim)?;
            anchor_fields.push(field);
        }
        let mut entries: Vec<((usize, usize, usize), ScalarField)> = Vec::new();
        for ((g, a, b), tree) in structure {
            if g >= rank || a >= rank || b >= rank {
                return Err(AlgebraError::IndexOutOfRange {
                    gamma: g,
                    alpha: a,
                    beta: b,
                    dim: rank,
                }
                .into());
            }
            if a == b {
                return Err(AlgebroidError::Dimension(format!(
                    "structure entry ({}, {}, {}) has equal lower indices",
                    g + 1,
                    a + 1,
                    b + 1
                )));
            }
            let tree = if a < b {
                tree
            } else {
                ExpressionTree::unary(crate::exprlang::UnaryOp::Neg, tree)
            };
            let key = (g, a.min(b), a.max(b));
            let field = ScalarField::new(tree, layout)?;
            check_base_only(&field, base_dim)?;
            entries.retain(|(k, _)| *k != key);
            entries.push((key, field));
        }
        Ok(AlgebroidModel {
            base_dim,
            rank,
            anchor: Anchor::Fields(anchor_fields),
            structure: Structure::Fields(entries),
            kind: ModelKind::Custom,
            labels: default_labels(rank),
            casimirs: Vec::new(),
            algebra_offset: 0,
            coadjoint: None,
        })
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Fiber index where the `𝔤` block starts (0 unless trivial/coadjoint).
    pub fn algebra_offset(&self) -> usize {
        self.algebra_offset
    }

    /// Registered Casimir functions of the linear Poisson structure.
    pub fn casimirs(&self) -> &[ScalarField] {
        &self.casimirs
    }

    pub fn coadjoint_data(&self) -> Option<&CoadjointData> {
        self.coadjoint.as_ref()
    }

    /// Variable layout `(x, eta)` of the dual bundle, no controls.
    pub fn layout(&self) -> VarLayout {
        VarLayout::new(self.base_dim, self.rank, 0)
    }

    /// Constants when the structure functions do not depend on `x`.
    pub fn constant_structure(&self) -> Option<&StructureConstants> {
        match &self.structure {
            Structure::Constant(c) => Some(c),
            Structure::Fields(_) => None,
        }
    }

    pub fn constant_anchor(&self) -> Option<&DMatrix<f64>> {
        match &self.anchor {
            Anchor::Constant(a) => Some(a),
            Anchor::Fields(_) => None,
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<(), AlgebroidError> {
        if x.len() != self.base_dim {
            return Err(AlgebroidError::PointDimension {
                expected: self.base_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn base_state(&self, x: &[f64]) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.base_dim + 1);
        s.extend_from_slice(x);
        s.push(0.0);
        s
    }

    /// `ρⁱ_α(x)` as an `n × r` matrix.
    pub fn eval_anchor(&self, x: &[f64]) -> Result<DMatrix<f64>, AlgebroidError> {
        self.check_point(x)?;
        match &self.anchor {
            Anchor::Constant(a) => Ok(a.clone()),
            Anchor::Fields(fields) => {
                let state = self.base_state(x);
                let mut out = DMatrix::zeros(self.base_dim, self.rank);
                for (k, f) in fields.iter().enumerate() {
                    out[(k / self.rank, k % self.rank)] = f.value(&state).map_err(|source| AlgebroidError::Eval {
                        point: x.to_vec(),
                        source,
                    })?;
                }
                Ok(out)
            }
        }
    }

    /// `C^γ_{αβ}(x)`.
    pub fn eval_structure(&self, x: &[f64]) -> Result<StructureConstants, AlgebroidError> {
        self.check_point(x)?;
        match &self.structure {
            Structure::Constant(c) => Ok(c.clone()),
            Structure::Fields(entries) => {
                let state = self.base_state(x);
                let mut c = StructureConstants::zero(self.rank);
                for ((g, a, b), f) in entries {
                    let v = f.value(&state).map_err(|source| AlgebroidError::Eval {
                        point: x.to_vec(),
                        source,
                    })?;
                    c.set(*g, *a, *b, v)?;
                }
                Ok(c)
            }
        }
    }
}

fn casimir_fields(algebra: NamedAlgebra, offset: usize, layout: VarLayout) -> Vec<ScalarField> {
    algebra
        .casimirs()
        .iter()
        .map(|src| {
            let tree = crate::exprlang::parse(src)
                .expect("catalog casimir parses")
                .rename_variables(|name| {
                    let k: usize = name.trim_start_matches("eta").parse().expect("eta index");
                    format!("eta{}", k + offset)
                });
            ScalarField::new(tree, layout).expect("casimir fits layout")
        })
        .collect()
}

/// Parameters for [`catalog`].
#[derive(Debug, Clone, Default)]
pub struct CatalogParams {
    pub base_dim: Option<usize>,
    pub algebra: Option<NamedAlgebra>,
    pub constants: Option<StructureConstants>,
    pub xi: Option<Vec<f64>>,
}

/// Builds a standard model by kind name: `lie_algebra`, `tangent`,
/// `trivial` or `coadjoint`. Custom models go through
/// [`AlgebroidModel::custom`].
pub fn catalog(kind: &str, params: &CatalogParams) -> Result<AlgebroidModel, AlgebroidError> {
    match kind {
        "lie_algebra" => {
            if let Some(n) = params.base_dim.filter(|&n| n != 0) {
                return Err(AlgebroidError::Dimension(format!(
                    "lie_algebra lives over a point, got base_dim = {n}"
                )));
            }
            match (params.algebra, &params.constants) {
                (Some(a), _) => Ok(AlgebroidModel::named_lie_algebra(a)),
                (None, Some(c)) => Ok(AlgebroidModel::lie_algebra(c.clone())),
                (None, None) => Err(AlgebroidError::MissingParameter {
                    kind: "lie_algebra",
                    param: "algebra",
                }),
            }
        }
        "tangent" => {
            let n = params.base_dim.ok_or(AlgebroidError::MissingParameter {
                kind: "tangent",
                param: "base_dim",
            })?;
            if n == 0 {
                return Err(AlgebroidError::Dimension("tangent algebroid needs base_dim >= 1".into()));
            }
            Ok(AlgebroidModel::tangent(n))
        }
        "trivial" => {
            let n = params.base_dim.ok_or(AlgebroidError::MissingParameter {
                kind: "trivial",
                param: "base_dim",
            })?;
            let a = params.algebra.ok_or(AlgebroidError::MissingParameter {
                kind: "trivial",
                param: "algebra",
            })?;
            Ok(AlgebroidModel::trivial(n, a))
        }
        "coadjoint" => {
            let a = params.algebra.ok_or(AlgebroidError::MissingParameter {
                kind: "coadjoint",
                param: "algebra",
            })?;
            let xi = params.xi.as_ref().ok_or(AlgebroidError::MissingParameter {
                kind: "coadjoint",
                param: "xi",
            })?;
            coadjoint_model(a, xi, params.base_dim.unwrap_or(0))
        }
        other => Err(AlgebroidError::UnknownKind(other.to_string())),
    }
}

/// Coadjoint algebroid of the trivial groupoid over an `n`-dimensional
/// base: same anchor and structure functions as [`AlgebroidModel::trivial`],
/// plus the spanning set `{ad*_{e_α} ξ}` and its numerical rank.
///
/// `xi` lives in `𝔤*` (length `dim 𝔤`).
pub fn coadjoint_model(algebra: NamedAlgebra, xi: &[f64], base_dim: usize) -> Result<AlgebroidModel, AlgebroidError> {
    let k = algebra.dim();
    if xi.len() != k {
        return Err(AlgebroidError::Dimension(format!(
            "xi has length {}, algebra {algebra} has dimension {k}",
            xi.len()
        )));
    }
    if xi.iter().all(|&v| v == 0.0) {
        return Err(AlgebroidError::ZeroXi);
    }
    let constants = algebra.structure_constants();
    let jacobi = constants_jacobi_residual(&constants);
    if jacobi >= CATALOG_TOLERANCE {
        return Err(AlgebroidError::NotALieAlgebra(jacobi));
    }
    let spanning_set: Vec<Vec<f64>> = (0..k).map(|a| constants.ad_star_basis(a, xi)).collect();
    let (singular_values, numerical_rank) = numerical_rank(&spanning_set, k);
    let mut model = AlgebroidModel::trivial(base_dim, algebra);
    model.kind = ModelKind::Coadjoint(algebra);
    model.coadjoint = Some(CoadjointData {
        xi: xi.to_vec(),
        spanning_set,
        singular_values,
        numerical_rank,
    });
    Ok(model)
}

fn numerical_rank(vectors: &[Vec<f64>], dim: usize) -> (Vec<f64>, usize) {
    if vectors.is_empty() || dim == 0 {
        return (Vec::new(), 0);
    }
    let m = DMatrix::from_fn(dim, vectors.len(), |i, j| vectors[j][i]);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let largest = sv.first().copied().unwrap_or(0.0);
    let rank = if largest == 0.0 {
        0
    } else {
        sv.iter().filter(|&&s| s > RANK_THRESHOLD * largest).count()
    };
    (sv, rank)
}

fn constants_jacobi_residual(c: &StructureConstants) -> f64 {
    let d = c.dim();
    let mut worst = 0.0f64;
    for a in 0..d {
        for b in 0..d {
            for g in 0..d {
                for nu in 0..d {
                    let mut acc = 0.0;
                    for (x, y, z) in [(a, b, g), (b, g, a), (g, a, b)] {
                        for mu in 0..d {
                            acc += c.get(nu, x, mu) * c.get(mu, y, z);
                        }
                    }
                    worst = worst.max(acc.abs());
                }
            }
        }
    }
    worst
}

/// Numerical certification of the algebroid axioms at sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub tolerance: f64,
    pub samples: Vec<Vec<f64>>,
    pub antisymmetry_residual: f64,
    pub anchor_residual: f64,
    /// `(α, β, i)` of the worst anchor-compatibility residual.
    pub anchor_worst: Option<(usize, usize, usize)>,
    pub jacobi_residual: f64,
    /// `(α, β, γ, ν)` of the worst Jacobi residual.
    pub jacobi_worst: Option<(usize, usize, usize, usize)>,
    /// Sample index and message for points where evaluation failed.
    pub point_errors: Vec<(usize, String)>,
    /// Rank of `{ad*_{e_α} ξ}` and number of spanning vectors, for
    /// coadjoint models. A rank below the count means the spanning set is
    /// not a basis.
    pub orbit_rank: Option<(usize, usize)>,
    pub pass: bool,
}

impl AxiomReport {
    pub fn max_residual(&self) -> f64 {
        self.antisymmetry_residual
            .max(self.anchor_residual)
            .max(self.jacobi_residual)
    }
}

struct PointResiduals {
    antisymmetry: f64,
    anchor: (f64, Option<(usize, usize, usize)>),
    jacobi: (f64, Option<(usize, usize, usize, usize)>),
}

fn shifted(x: &[f64], j: usize, h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[j] += h;
    y
}

fn certify_point(model: &AlgebroidModel, x: &[f64]) -> Result<PointResiduals, AlgebroidError> {
    let n = model.base_dim;
    let r = model.rank;
    let h = CERTIFY_FD_STEP;
    let rho = model.eval_anchor(x)?;
    let c = model.eval_structure(x)?;

    // ∂_j ρ and ∂_j C by central differences
    let mut d_rho = Vec::with_capacity(n);
    let mut d_c = Vec::with_capacity(n);
    for j in 0..n {
        let plus = shifted(x, j, h);
        let minus = shifted(x, j, -h);
        d_rho.push((model.eval_anchor(&plus)? - model.eval_anchor(&minus)?) / (2.0 * h));
        let cp = model.eval_structure(&plus)?;
        let cm = model.eval_structure(&minus)?;
        d_c.push((cp, cm));
    }
    let dc = |j: usize, g: usize, a: usize, b: usize| (d_c[j].0.get(g, a, b) - d_c[j].1.get(g, a, b)) / (2.0 * h);

    let mut antisymmetry = 0.0f64;
    for g in 0..r {
        for a in 0..r {
            for b in 0..r {
                antisymmetry = antisymmetry.max((c.get(g, a, b) + c.get(g, b, a)).abs());
            }
        }
    }

    let mut anchor = (0.0f64, None);
    for a in 0..r {
        for b in 0..r {
            for i in 0..n {
                let mut lhs = 0.0;
                for j in 0..n {
                    lhs += rho[(j, a)] * d_rho[j][(i, b)] - rho[(j, b)] * d_rho[j][(i, a)];
                }
                let rhs: f64 = (0..r).map(|g| rho[(i, g)] * c.get(g, a, b)).sum();
                let res = (lhs - rhs).abs();
                if res > anchor.0 || anchor.1.is_none() {
                    anchor = (res.max(anchor.0), Some((a, b, i)));
                }
            }
        }
    }

    let mut jacobi = (0.0f64, None);
    for a in 0..r {
        for b in 0..r {
            for g in 0..r {
                for nu in 0..r {
                    let mut acc = 0.0;
                    for (p, q, s) in [(a, b, g), (b, g, a), (g, a, b)] {
                        for i in 0..n {
                            acc += rho[(i, p)] * dc(i, nu, q, s);
                        }
                        for mu in 0..r {
                            acc += c.get(nu, p, mu) * c.get(mu, q, s);
                        }
                    }
                    let res = acc.abs();
                    if res > jacobi.0 || jacobi.1.is_none() {
                        jacobi = (res.max(jacobi.0), Some((a, b, g, nu)));
                    }
                }
            }
        }
    }
    Ok(PointResiduals {
        antisymmetry,
        anchor,
        jacobi,
    })
}

/// Checks at each sample point: antisymmetry of `C`, compatibility of the
/// anchor with the bracket, and the Jacobi identity (spatial derivatives
/// by central differences with step [`CERTIFY_FD_STEP`]).
///
/// Points where evaluation fails are listed in the report and make it
/// fail; the remaining points are still checked.
pub fn certify(model: &AlgebroidModel, samples: &[Vec<f64>], tolerance: f64) -> AxiomReport {
    let mut report = AxiomReport {
        tolerance,
        samples: samples.to_vec(),
        antisymmetry_residual: 0.0,
        anchor_residual: 0.0,
        anchor_worst: None,
        jacobi_residual: 0.0,
        jacobi_worst: None,
        point_errors: Vec::new(),
        orbit_rank: model
            .coadjoint
            .as_ref()
            .map(|d| (d.numerical_rank, d.spanning_set.len())),
        pass: false,
    };
    for (k, x) in samples.iter().enumerate() {
        match certify_point(model, x) {
            Ok(res) => {
                report.antisymmetry_residual = report.antisymmetry_residual.max(res.antisymmetry);
                if report.anchor_worst.is_none() || res.anchor.0 > report.anchor_residual {
                    report.anchor_residual = res.anchor.0;
                    report.anchor_worst = res.anchor.1;
                }
                if report.jacobi_worst.is_none() || res.jacobi.0 > report.jacobi_residual {
                    report.jacobi_residual = res.jacobi.0;
                    report.jacobi_worst = res.jacobi.1;
                }
            }
            Err(e) => report.point_errors.push((k, e.to_string())),
        }
    }
    report.pass = !samples.is_empty()
        && report.point_errors.is_empty()
        && report.antisymmetry_residual < tolerance
        && report.anchor_residual < tolerance
        && report.jacobi_residual < tolerance;
    report
}
