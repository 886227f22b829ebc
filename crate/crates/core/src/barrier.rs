//! Log-barrier input optimization over a frozen surrogate.
//!
//! The finite-horizon control problem — minimize the sum of squared predicted
//! powers over the next T+1 steps subject to box bounds on controllable and
//! paired uncontrollable variables — is rewritten without constraints by
//! adding `−λ·[log(x − lower) + log(upper − x)]` barrier terms, and solved by
//! momentum gradient descent on the setpoint plan.
//!
//! Bounded measured quantities (zone temperatures) are eliminated from the
//! decision space by the propagation rule: the measurement at future step
//! τ is taken to equal the paired setpoint commanded at step τ−1. Their
//! bounds therefore act on shifted copies of the plan, which both the loss
//! and the gradient account for.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::float;
use crate::linalg::Mat;
use crate::schema::{Block, Bounds, FeatureSchema};

/// A frozen predictive model: maps a (T+1) × n window of scaled feature rows
/// to scaled power, and exposes the exact gradient of that prediction with
/// respect to every window entry.
pub trait SurrogateModel {
    fn predict(&self, window: &Mat) -> Result<f64>;
    /// Prediction together with ∂prediction/∂window.
    fn value_and_grad(&self, window: &Mat) -> Result<(f64, Mat)>;
}

/// Optimizer hyperparameters (Algorithm inputs plus feasibility plumbing).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptConfig {
    /// η: gradient step size.
    pub learning_rate: f64,
    /// γ: momentum coefficient in [0, 1).
    pub momentum: f64,
    /// N_iter: maximum optimization iterations.
    pub max_iters: usize,
    /// λ: barrier weight (≥ 0; 0 recovers the bare squared-power objective).
    pub lambda: f64,
    /// Step shrink factor used to restore strict feasibility.
    pub backtrack_shrink: f64,
    /// Stop after this many iterations without improving the best loss…
    pub stall_iters: usize,
    /// …by more than this amount.
    pub stall_tol: f64,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            learning_rate: 0.02,
            momentum: 0.9,
            max_iters: 200,
            lambda: 1e-3,
            backtrack_shrink: 0.5,
            stall_iters: 25,
            stall_tol: 1e-9,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig("momentum must be in [0, 1)".into()));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidConfig("lambda must be >= 0".into()));
        }
        if !(self.backtrack_shrink > 0.0 && self.backtrack_shrink < 1.0) {
            return Err(Error::InvalidConfig(
                "backtrack_shrink must be in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Affine map from a control's units into its paired measurement's units.
/// Identity when both features share one scaling; the closed loop builds it
/// from the per-feature normalization so the propagation rule stays exact
/// across differently scaled columns.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairMap {
    pub scale: f64,
    pub offset: f64,
}

impl Default for PairMap {
    fn default() -> Self {
        PairMap {
            scale: 1.0,
            offset: 0.0,
        }
    }
}

impl PairMap {
    #[inline]
    pub fn apply(&self, control_value: f64) -> f64 {
        self.scale * control_value + self.offset
    }

    #[inline]
    fn invert(&self, image_value: f64) -> f64 {
        (image_value - self.offset) / self.scale
    }
}

/// The object the optimizer works on: frozen surrogate, history window,
/// exogenous forecast, bounds, barrier weight, horizon.
pub struct BarrierProblem<'a> {
    model: &'a dyn SurrogateModel,
    /// T past profile rows X_{t−T}..X_{t−1} (scaled units).
    history: Mat,
    /// T+1 forecast rows for t..t+T; only physical and unpaired
    /// uncontrollable columns are consulted.
    exog: Mat,
    schema: &'a FeatureSchema,
    /// Per-feature bounds in scaled units; every controllable feature must
    /// be bounded, and every bounded uncontrollable must be paired.
    bounds: Vec<Option<Bounds>>,
    lambda: f64,
    horizon: usize,
    /// Schema indices of controllable features, in plan-column order.
    control_features: Vec<usize>,
    /// feature index → plan column for controllable features.
    plan_col: Vec<Option<usize>>,
    /// plan column → bounds of the paired uncontrollable feature, if any.
    image_bounds: Vec<Option<Bounds>>,
    /// plan column → unit map into the paired measurement's column.
    image_maps: Vec<PairMap>,
}

impl<'a> BarrierProblem<'a> {
    /// Build a problem with identity pair maps (control and measurement
    /// columns share one unit system).
    pub fn new(
        model: &'a dyn SurrogateModel,
        history: Mat,
        exog: Mat,
        schema: &'a FeatureSchema,
        bounds: Vec<Option<Bounds>>,
        lambda: f64,
        horizon: usize,
    ) -> Result<Self> {
        let maps = alloc::vec![None; schema.len()];
        Self::with_pair_maps(model, history, exog, schema, bounds, maps, lambda, horizon)
    }

    /// Full constructor: `pair_maps[f]`, when present for a paired
    /// uncontrollable feature f, converts its paired control's values into
    /// f's units.
    #[allow(clippy::too_many_arguments)]
    pub fn with_pair_maps(
        model: &'a dyn SurrogateModel,
        history: Mat,
        exog: Mat,
        schema: &'a FeatureSchema,
        bounds: Vec<Option<Bounds>>,
        pair_maps: Vec<Option<PairMap>>,
        lambda: f64,
        horizon: usize,
    ) -> Result<Self> {
        let n = schema.len();
        if history.rows() != horizon || (history.rows() > 0 && history.cols() != n) {
            return Err(Error::DimMismatch {
                what: "barrier history",
                expected: horizon,
                got: history.rows(),
            });
        }
        if exog.rows() != horizon + 1 || exog.cols() != n {
            return Err(Error::DimMismatch {
                what: "barrier exogenous forecast",
                expected: horizon + 1,
                got: exog.rows(),
            });
        }
        if bounds.len() != n || pair_maps.len() != n {
            return Err(Error::DimMismatch {
                what: "barrier bounds",
                expected: n,
                got: bounds.len().min(pair_maps.len()),
            });
        }
        for m in pair_maps.iter().flatten() {
            if !(m.scale.is_finite() && m.scale > 0.0 && m.offset.is_finite()) {
                return Err(Error::InvalidConfig("pair map scale must be positive".into()));
            }
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidConfig("lambda must be >= 0".into()));
        }
        if !history.is_finite() || !exog.is_finite() {
            return Err(Error::NonFinite("barrier problem data"));
        }

        let control_features = schema.indices_of(Block::Controllable);
        let mut plan_col = vec![None; n];
        for (k, &f) in control_features.iter().enumerate() {
            if bounds[f].is_none() {
                return Err(Error::InvalidConfig(alloc::format!(
                    "controllable feature `{}` needs bounds for the barrier",
                    schema.feature(f).name
                )));
            }
            plan_col[f] = Some(k);
        }
        let mut image_bounds = vec![None; control_features.len()];
        let mut image_maps = vec![PairMap::default(); control_features.len()];
        for f in 0..n {
            if schema.block(f) != Block::Uncontrollable {
                continue;
            }
            match (bounds[f], schema.pairing(f)) {
                (Some(b), Some(c)) => {
                    let k = plan_col[c].ok_or_else(|| {
                        Error::SchemaMismatch(alloc::format!(
                            "pairing of `{}` does not resolve to a control column",
                            schema.feature(f).name
                        ))
                    })?;
                    image_bounds[k] = Some(b);
                    image_maps[k] = pair_maps[f].unwrap_or_default();
                }
                (Some(_), None) => {
                    return Err(Error::MissingPairing(schema.feature(f).name.clone()));
                }
                (None, Some(c)) => {
                    if let Some(k) = plan_col[c] {
                        image_maps[k] = pair_maps[f].unwrap_or_default();
                    }
                }
                (None, None) => {}
            }
        }

        Ok(BarrierProblem {
            model,
            history,
            exog,
            schema,
            bounds,
            lambda,
            horizon,
            control_features,
            plan_col,
            image_bounds,
            image_maps,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_controls(&self) -> usize {
        self.control_features.len()
    }

    pub fn control_features(&self) -> &[usize] {
        &self.control_features
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The bound actually constraining plan cell (row τ, column k): the
    /// control's own box intersected with the preimage of the paired
    /// measurement's box when the control's propagated image lands inside
    /// the horizon (τ < T).
    pub fn effective_bounds(&self, row: usize, col: usize) -> Bounds {
        let own = self.bounds[self.control_features[col]].expect("controls are bounded");
        match self.image_bounds[col] {
            Some(img) if row < self.horizon => {
                let map = self.image_maps[col];
                Bounds {
                    lower: own.lower.max(map.invert(img.lower)),
                    upper: own.upper.min(map.invert(img.upper)),
                }
            }
            _ => own,
        }
    }

    /// Strictly-interior test for a candidate control matrix.
    pub fn is_interior(&self, controls: &Mat) -> bool {
        for row in 0..controls.rows() {
            for col in 0..controls.cols() {
                let x = controls.get(row, col);
                let own = self.bounds[self.control_features[col]].expect("controls are bounded");
                if !own.contains_strictly(x) {
                    return false;
                }
                if row < self.horizon {
                    if let Some(img) = self.image_bounds[col] {
                        if !img.contains_strictly(self.image_maps[col].apply(x)) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Plan with every row equal to `controls_row`, zero momentum.
    pub fn constant_plan(&self, controls_row: &[f64]) -> Result<ControlPlan> {
        if controls_row.len() != self.n_controls() {
            return Err(Error::DimMismatch {
                what: "plan row",
                expected: self.n_controls(),
                got: controls_row.len(),
            });
        }
        let rows = self.horizon + 1;
        let mut controls = Mat::zeros(rows, self.n_controls());
        for r in 0..rows {
            controls.row_mut(r).copy_from_slice(controls_row);
        }
        Ok(ControlPlan {
            momentum: Mat::zeros(rows, self.n_controls()),
            loss_trace: Vec::new(),
            controls,
        })
    }

    /// Clamp every plan variable into the closed sub-box
    /// [l + margin·(u−l), u − margin·(u−l)] of its effective bounds.
    pub fn project_interior(&self, plan: &mut ControlPlan, margin: f64) {
        for row in 0..plan.controls.rows() {
            for col in 0..plan.controls.cols() {
                let b = self.effective_bounds(row, col);
                let v = project_interior_value(plan.controls.get(row, col), b, margin);
                plan.controls.set(row, col, v);
            }
        }
    }
}

/// Clamp one value into [l + margin·(u−l), u − margin·(u−l)].
pub fn project_interior_value(x: f64, bounds: Bounds, margin: f64) -> f64 {
    let pad = margin * bounds.width();
    x.clamp(bounds.lower + pad, bounds.upper - pad)
}

/// Decision variables X_t^c..X_{t+T}^c plus iterate bookkeeping.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ControlPlan {
    /// (T+1) × n_c setpoint plan (scaled units).
    pub controls: Mat,
    /// Momentum buffer, same shape.
    pub momentum: Mat,
    /// Barrier loss per recorded iterate (index 0 is the initial plan).
    pub loss_trace: Vec<f64>,
}

impl ControlPlan {
    /// First plan row: the action to deploy this step.
    pub fn first_action(&self) -> &[f64] {
        self.controls.row(0)
    }
}

/// Serializable record of one solve: trace, iteration count, the returned
/// plan, and feasibility flags.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveReport {
    /// Completed optimizer iterations (the trace also records the start).
    pub iterations: usize,
    pub initial_loss: f64,
    pub best_loss: f64,
    /// The returned plan is strictly inside every effective bound.
    pub interior: bool,
    /// The solve aborted because backtracking could not restore feasibility.
    pub stalled: bool,
    pub loss_trace: Vec<f64>,
    /// Returned plan controls, (T+1) × n_c.
    pub controls: Mat,
}

impl SolveReport {
    pub fn from_plan(problem: &BarrierProblem<'_>, plan: &ControlPlan) -> Self {
        let best_loss = plan
            .loss_trace
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        SolveReport {
            iterations: plan.loss_trace.len().saturating_sub(1),
            initial_loss: plan.loss_trace.first().copied().unwrap_or(f64::INFINITY),
            best_loss,
            interior: problem.is_interior(&plan.controls),
            stalled: false,
            loss_trace: plan.loss_trace.clone(),
            controls: plan.controls.clone(),
        }
    }
}

/// Build the T+1 evaluation windows for a plan. Window τ stacks the scaled
/// profile rows for times t−T+τ..t+τ: past rows come from history, future
/// rows combine plan controls, propagated paired measurements, and the
/// exogenous forecast.
pub fn assemble_windows(problem: &BarrierProblem<'_>, plan: &ControlPlan) -> Result<Vec<Mat>> {
    let t = problem.horizon;
    let n = problem.schema.len();
    if plan.controls.rows() != t + 1 || plan.controls.cols() != problem.n_controls() {
        return Err(Error::DimMismatch {
            what: "plan controls",
            expected: t + 1,
            got: plan.controls.rows(),
        });
    }

    // Timeline rows −T..T; index i holds time t−T+i.
    let mut timeline = Mat::zeros(2 * t + 1, n);
    for i in 0..t {
        timeline.row_mut(i).copy_from_slice(problem.history.row(i));
    }
    for j in 0..=t {
        let dst = t + j;
        for f in 0..n {
            let v = match problem.schema.block(f) {
                Block::Controllable => {
                    let k = problem.plan_col[f].expect("control features have plan columns");
                    plan.controls.get(j, k)
                }
                Block::Uncontrollable => match problem.schema.pairing(f) {
                    Some(c) => {
                        // Propagation rule: measurement at t+j equals the
                        // paired command at t+j−1 (from the plan for j ≥ 1,
                        // from the last history row for j = 0), mapped into
                        // the measurement's units.
                        let k = problem.plan_col[c].expect("pairing targets a control");
                        let map = problem.image_maps[k];
                        if j >= 1 {
                            map.apply(plan.controls.get(j - 1, k))
                        } else if t >= 1 {
                            map.apply(problem.history.get(t - 1, c))
                        } else {
                            problem.exog.get(0, f)
                        }
                    }
                    None => problem.exog.get(j, f),
                },
                Block::Physical => problem.exog.get(j, f),
            };
            timeline.set(dst, f, v);
        }
    }

    let mut windows = Vec::with_capacity(t + 1);
    for tau in 0..=t {
        let mut w = Mat::zeros(t + 1, n);
        for r in 0..=t {
            w.row_mut(r).copy_from_slice(timeline.row(tau + r));
        }
        windows.push(w);
    }
    Ok(windows)
}

fn barrier_terms(problem: &BarrierProblem<'_>, controls: &Mat) -> f64 {
    let t = problem.horizon;
    let lambda = problem.lambda;
    let mut acc = 0.0;
    for row in 0..=t {
        for col in 0..problem.n_controls() {
            let x = controls.get(row, col);
            let own = problem.bounds[problem.control_features[col]].expect("bounded");
            acc -= lambda * (float::ln(x - own.lower) + float::ln(own.upper - x));
            // The propagated image of controls[row] sits at time row+1 and is
            // subject to the paired measurement's box while row+1 ≤ T.
            if row < t {
                if let Some(img) = problem.image_bounds[col] {
                    let v = problem.image_maps[col].apply(x);
                    acc -= lambda * (float::ln(v - img.lower) + float::ln(img.upper - v));
                }
            }
        }
    }
    acc
}

/// Barrier loss: Σ_τ f(window_τ)² plus log-barrier terms on every plan
/// variable and every propagated measurement image. Returns +∞ when the plan
/// is not strictly interior.
pub fn barrier_loss(problem: &BarrierProblem<'_>, plan: &ControlPlan) -> Result<f64> {
    if !problem.is_interior(&plan.controls) {
        return Ok(f64::INFINITY);
    }
    let windows = assemble_windows(problem, plan)?;
    let mut acc = 0.0;
    for w in &windows {
        let p = problem.model.predict(w)?;
        acc += p * p;
    }
    Ok(acc + barrier_terms(problem, &plan.controls))
}

/// Loss and its gradient with respect to every plan control. Chain rule over
/// every window that reads a control directly or through its propagated
/// image, plus the barrier derivatives −λ/(x−l) + λ/(u−x).
pub fn barrier_grad(problem: &BarrierProblem<'_>, plan: &ControlPlan) -> Result<(f64, Mat)> {
    if !problem.is_interior(&plan.controls) {
        return Err(Error::NonFinite("barrier gradient at or outside the boundary"));
    }
    let t = problem.horizon;
    let n = problem.schema.len();
    let windows = assemble_windows(problem, plan)?;
    let mut grad = Mat::zeros(t + 1, problem.n_controls());
    let mut loss = 0.0;

    for (tau, w) in windows.iter().enumerate() {
        let (value, wgrad) = problem.model.value_and_grad(w)?;
        loss += value * value;
        let coeff = 2.0 * value;
        for r in 0..=t {
            // Window row r of window τ is absolute offset j = τ − T + r.
            let j = tau as i64 - t as i64 + r as i64;
            if j < 0 {
                continue;
            }
            let j = j as usize;
            for f in 0..n {
                match problem.schema.block(f) {
                    Block::Controllable => {
                        let k = problem.plan_col[f].expect("control column");
                        grad.add_at(j, k, coeff * wgrad.get(r, f));
                    }
                    Block::Uncontrollable => {
                        if let Some(c) = problem.schema.pairing(f) {
                            if j >= 1 {
                                let k = problem.plan_col[c].expect("control column");
                                let chain = problem.image_maps[k].scale;
                                grad.add_at(j - 1, k, coeff * wgrad.get(r, f) * chain);
                            }
                        }
                    }
                    Block::Physical => {}
                }
            }
        }
    }

    let lambda = problem.lambda;
    for row in 0..=t {
        for col in 0..problem.n_controls() {
            let x = plan.controls.get(row, col);
            let own = problem.bounds[problem.control_features[col]].expect("bounded");
            grad.add_at(row, col, -lambda / (x - own.lower) + lambda / (own.upper - x));
            if row < t {
                if let Some(img) = problem.image_bounds[col] {
                    let map = problem.image_maps[col];
                    let v = map.apply(x);
                    grad.add_at(
                        row,
                        col,
                        (-lambda / (v - img.lower) + lambda / (img.upper - v)) * map.scale,
                    );
                }
            }
        }
    }
    loss += barrier_terms(problem, &plan.controls);

    if !grad.is_finite() || !loss.is_finite() {
        return Err(Error::NonFinite("barrier gradient"));
    }
    Ok((loss, grad))
}

/// Momentum update g ← γ·g + η·∇, x ← x − g, then feasibility backtracking:
/// while any variable (or propagated image) would leave the open interior,
/// shrink the whole step (momentum buffer included) and retry.
pub fn momentum_step(
    problem: &BarrierProblem<'_>,
    plan: &mut ControlPlan,
    grad: &Mat,
    cfg: &OptConfig,
) -> Result<()> {
    cfg.validate()?;
    let cells = plan.controls.data().len();
    if grad.data().len() != cells {
        return Err(Error::DimMismatch {
            what: "gradient",
            expected: cells,
            got: grad.data().len(),
        });
    }
    for i in 0..cells {
        let g = cfg.momentum * plan.momentum.data()[i] + cfg.learning_rate * grad.data()[i];
        plan.momentum.data_mut()[i] = g;
    }
    let mut candidate = plan.controls.clone();
    for attempt in 0..=MAX_BACKTRACKS {
        for i in 0..cells {
            candidate.data_mut()[i] = plan.controls.data()[i] - plan.momentum.data()[i];
        }
        if problem.is_interior(&candidate) {
            plan.controls = candidate;
            return Ok(());
        }
        if attempt == MAX_BACKTRACKS {
            break;
        }
        for g in plan.momentum.data_mut() {
            *g *= cfg.backtrack_shrink;
        }
    }
    Err(Error::Stall)
}

const MAX_BACKTRACKS: usize = 200;

/// Run momentum gradient descent from a strictly interior plan and return
/// the iterate with the lowest recorded barrier loss (its first row is the
/// deployable action).
pub fn optimize_inputs(
    problem: &BarrierProblem<'_>,
    init_plan: ControlPlan,
    cfg: &OptConfig,
) -> Result<ControlPlan> {
    cfg.validate()?;
    if !problem.is_interior(&init_plan.controls) {
        return Err(Error::NotInterior("initial plan"));
    }
    let mut plan = init_plan;
    plan.loss_trace.clear();

    let (mut loss, mut grad) = barrier_grad(problem, &plan)?;
    plan.loss_trace.push(loss);
    let mut best_loss = loss;
    let mut best_controls = plan.controls.clone();
    let mut last_progress = 0usize;

    for iter in 1..=cfg.max_iters {
        momentum_step(problem, &mut plan, &grad, cfg)?;
        if iter < cfg.max_iters {
            let (l, g) = barrier_grad(problem, &plan)?;
            loss = l;
            grad = g;
        } else {
            loss = barrier_loss(problem, &plan)?;
        }
        plan.loss_trace.push(loss);
        if loss < best_loss {
            if best_loss - loss > cfg.stall_tol {
                last_progress = iter;
            }
            best_loss = loss;
            best_controls = plan.controls.clone();
        }
        if cfg.stall_iters > 0 && iter - last_progress >= cfg.stall_iters {
            break;
        }
    }

    plan.controls = best_controls;
    Ok(plan)
}

/// Σ_τ f(window_τ)² without barrier terms: the model part of the objective.
pub fn model_objective(problem: &BarrierProblem<'_>, plan: &ControlPlan) -> Result<f64> {
    let windows = assemble_windows(problem, plan)?;
    let mut acc = 0.0;
    for w in &windows {
        let p = problem.model.predict(w)?;
        acc += p * p;
    }
    Ok(acc)
}
