use serde::{Deserialize, Serialize};

use super::{count_call, EvaluationOutcome, Evaluator, EvaluatorError};
use crate::embedding::FeatureTable;
use crate::symreg::{parse_expr, CompiledExpr, ConstantsPool, ExprTree};

/// Features the solver exposes to closure expressions, evaluated at cell
/// faces from the current iterate.
pub const CHANNEL_FEATURES: [&str; 2] = ["I1", "J1"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthExprs {
    pub g: String,
    pub alpha: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<String>,
}

impl Default for TruthExprs {
    fn default() -> Self {
        Self { g: "-0.1 - I1".into(), alpha: "0.945 - 2.108 * J1".into(), r: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profiles {
    pub u: Vec<f64>,
    pub t: Vec<f64>,
}

/// Two-wall channel with a velocity equation driven by forcing plus a
/// buoyancy-like temperature coupling, and a temperature equation set by
/// the wall values. Unknowns live at `n_cells` cell centers on y ∈ [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelCase {
    pub n_cells: usize,
    /// (y = 0, y = 1) wall velocities.
    pub wall_u: (f64, f64),
    /// (y = 0, y = 1) wall temperatures.
    pub wall_t: (f64, f64),
    pub forcing: f64,
    pub coupling: f64,
    /// Molecular diffusivities (ν, α).
    pub base_diffusivities: (f64, f64),
    /// Peak of the parabolic eddy viscosity ν_t(y) = nut_max·4y(1−y).
    pub nut_max: f64,
    /// Specific dissipation used to scale I1.
    pub omega: f64,
    /// Under-relaxation factor of the fixed-point update.
    pub relaxation: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub truth_exprs: TruthExprs,
    pub reference_profiles: Option<Profiles>,
}

impl Default for ChannelCase {
    fn default() -> Self {
        Self {
            n_cells: 64,
            wall_u: (0.0, 0.0),
            wall_t: (0.15, -0.15),
            forcing: 8.0,
            coupling: 20.0,
            base_diffusivities: (1.0, 1.0),
            nut_max: 2.0,
            omega: 10.0,
            relaxation: 0.8,
            max_iters: 500,
            tol: 1e-8,
            truth_exprs: TruthExprs::default(),
            reference_profiles: None,
        }
    }
}

impl ChannelCase {
    pub fn validate(&self) -> Result<(), EvaluatorError> {
        let bad = |m: &str| Err(EvaluatorError::Setup(m.into()));
        if self.n_cells < 8 {
            return bad("n_cells must be at least 8");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return bad("relaxation must lie in (0, 1]");
        }
        if !(self.omega > 0.0) {
            return bad("omega must be positive");
        }
        if let Some(p) = &self.reference_profiles {
            if p.u.len() != self.n_cells || p.t.len() != self.n_cells {
                return bad("reference profiles must have n_cells entries");
            }
        }
        Ok(())
    }

    fn h(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    pub fn cell_centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| (i as f64 + 0.5) * self.h()).collect()
    }

    fn nu_t_faces(&self) -> Vec<f64> {
        (0..=self.n_cells)
            .map(|f| {
                let y = f as f64 * self.h();
                self.nut_max * 4.0 * y * (1.0 - y)
            })
            .collect()
    }
}

/// Converged or failed result of one channel solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSolution {
    pub profiles: Option<Profiles>,
    pub iterations: usize,
}

/// Gradients at the n+1 faces; wall faces use the half-cell distance.
fn face_gradients(x: &[f64], walls: (f64, f64), h: f64) -> Vec<f64> {
    let n = x.len();
    let mut g = Vec::with_capacity(n + 1);
    g.push((x[0] - walls.0) / (0.5 * h));
    for f in 1..n {
        g.push((x[f] - x[f - 1]) / h);
    }
    g.push((walls.1 - x[n - 1]) / (0.5 * h));
    g
}

/// Solve d/dy(D dx/dy) + src = 0 with Dirichlet walls by the Thomas
/// algorithm. `d` holds face diffusivities.
fn solve_diffusion(d: &[f64], src: &[f64], walls: (f64, f64), h: f64) -> Vec<f64> {
    let n = src.len();
    let coef = |f: usize| {
        let dist = if f == 0 || f == n { 0.5 * h } else { h };
        d[f] / (dist * h)
    };
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let (w, e) = (coef(i), coef(i + 1));
        diag[i] = -(w + e);
        rhs[i] = -src[i];
        if i == 0 {
            rhs[i] -= w * walls.0;
        } else {
            lower[i] = w;
        }
        if i == n - 1 {
            rhs[i] -= e * walls.1;
        } else {
            upper[i] = e;
        }
    }
    for i in 1..n {
        let m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    let mut x = vec![0.0; n];
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
    }
    x
}

struct Closures {
    g: CompiledExpr,
    alpha: CompiledExpr,
    r: Option<CompiledExpr>,
}

impl Closures {
    fn compile(g: &ExprTree, alpha: &ExprTree, r: Option<&ExprTree>, pool: &ConstantsPool) -> Result<Self, EvaluatorError> {
        Ok(Self {
            g: g.compile(&CHANNEL_FEATURES, pool)?,
            alpha: alpha.compile(&CHANNEL_FEATURES, pool)?,
            r: r.map(|t| t.compile(&CHANNEL_FEATURES, pool)).transpose()?,
        })
    }
}

/// Face features (I1, J1) of an iterate.
fn face_features(case: &ChannelCase, u: &[f64], t: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let h = case.h();
    let om2 = case.omega * case.omega;
    let i1 = face_gradients(u, case.wall_u, h).iter().map(|g| g * g / om2).collect();
    let j1 = face_gradients(t, case.wall_t, h).iter().map(|g| g * g).collect();
    (i1, j1)
}

fn iterate(case: &ChannelCase, cl: &Closures, tol: f64) -> ChannelSolution {
    let n = case.n_cells;
    let h = case.h();
    let nut = case.nu_t_faces();
    let (nu, alpha_base) = case.base_diffusivities;
    let ys = case.cell_centers();
    let mut u = vec![0.0; n];
    let mut t: Vec<f64> = ys.iter().map(|y| case.wall_t.0 + (case.wall_t.1 - case.wall_t.0) * y).collect();
    let mut du = vec![0.0; n + 1];
    let mut dt = vec![0.0; n + 1];
    let fail = |iterations| ChannelSolution { profiles: None, iterations };
    for it in 1..=case.max_iters {
        let (i1, j1) = face_features(case, &u, &t);
        for f in 0..=n {
            let row = [i1[f], j1[f]];
            let scale = 1.0 + cl.r.as_ref().map_or(0.0, |r| r.eval(&row));
            let g = cl.g.eval(&row);
            let a = cl.alpha.eval(&row);
            du[f] = nu + g * nut[f] * scale;
            dt[f] = alpha_base + a * nut[f] * scale;
            if !(du[f] > 0.0 && dt[f] > 0.0) {
                return fail(it);
            }
        }
        let t_new = solve_diffusion(&dt, &vec![0.0; n], case.wall_t, h);
        let src: Vec<f64> = t_new.iter().map(|tv| case.coupling * tv + case.forcing).collect();
        let u_new = solve_diffusion(&du, &src, case.wall_u, h);
        let mut change: f64 = 0.0;
        for i in 0..n {
            let su = case.relaxation * (u_new[i] - u[i]);
            let st = case.relaxation * (t_new[i] - t[i]);
            u[i] += su;
            t[i] += st;
            change = change.max(su.abs()).max(st.abs());
        }
        if !change.is_finite() {
            return fail(it);
        }
        if change < tol {
            return ChannelSolution { profiles: Some(Profiles { u, t }), iterations: it };
        }
    }
    fail(case.max_iters)
}

fn rms(x: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = x.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    (s / n.max(1) as f64).sqrt()
}

/// Solve the case with the given closures and score the profiles against
/// the case reference by normalized RMS error, (u, T). Negative effective
/// diffusivity or failure to converge gives the sentinel outcome.
pub fn solve_channel(
    case: &ChannelCase,
    g_expr: &ExprTree,
    r_expr: Option<&ExprTree>,
    alpha_expr: &ExprTree,
    pool: &ConstantsPool,
) -> EvaluationOutcome {
    count_call();
    let Some(reference) = &case.reference_profiles else {
        return EvaluationOutcome::diverged(2);
    };
    let Ok(cl) = Closures::compile(g_expr, alpha_expr, r_expr, pool) else {
        return EvaluationOutcome::diverged(2);
    };
    match iterate(case, &cl, case.tol).profiles {
        Some(p) => EvaluationOutcome::from_objectives(score(&p, reference)),
        None => EvaluationOutcome::diverged(2),
    }
}

fn score(p: &Profiles, reference: &Profiles) -> Vec<f64> {
    let eu = rms(p.u.iter().zip(&reference.u).map(|(a, b)| a - b)) / rms(reference.u.iter().copied());
    let et = rms(p.t.iter().zip(&reference.t).map(|(a, b)| a - b)) / rms(reference.t.iter().copied());
    vec![eu, et]
}

/// Solve with explicit closures, returning the raw solution.
pub fn solve_profiles(
    case: &ChannelCase,
    g: &ExprTree,
    r: Option<&ExprTree>,
    alpha: &ExprTree,
    pool: &ConstantsPool,
    tol: f64,
) -> Result<ChannelSolution, EvaluatorError> {
    let cl = Closures::compile(g, alpha, r, pool)?;
    Ok(iterate(case, &cl, tol))
}

/// Fill the case reference by solving with its truth expressions at a
/// tenth of the tolerance.
pub fn make_reference(mut case: ChannelCase, pool: &ConstantsPool) -> Result<ChannelCase, EvaluatorError> {
    case.validate()?;
    let g = parse_expr(&case.truth_exprs.g)?;
    let a = parse_expr(&case.truth_exprs.alpha)?;
    let r = case.truth_exprs.r.as_deref().map(parse_expr).transpose()?;
    let sol = solve_profiles(&case, &g, r.as_ref(), &a, pool, case.tol / 10.0)?;
    let profiles = sol
        .profiles
        .ok_or_else(|| EvaluatorError::Setup("truth expressions diverge on this case".into()))?;
    case.reference_profiles = Some(profiles);
    Ok(case)
}

/// Channel evaluator bound to slot names `g`, `alpha` and optional `r`.
#[derive(Debug, Clone)]
pub struct ChannelEvaluator {
    pub case: ChannelCase,
    g_slot: usize,
    alpha_slot: usize,
    r_slot: Option<usize>,
    features: FeatureTable,
}

impl ChannelEvaluator {
    pub fn new(case: ChannelCase, slots: &[String], pool: &ConstantsPool) -> Result<Self, EvaluatorError> {
        let find = |name: &str| slots.iter().position(|s| s == name);
        let g_slot = find("g").ok_or_else(|| EvaluatorError::Setup("channel needs a slot named g".into()))?;
        let alpha_slot = find("alpha").ok_or_else(|| EvaluatorError::Setup("channel needs a slot named alpha".into()))?;
        let r_slot = find("r");
        if slots.len() != 2 + r_slot.is_some() as usize {
            return Err(EvaluatorError::Setup("channel slots are g, alpha and optionally r".into()));
        }
        let case = if case.reference_profiles.is_some() { case } else { make_reference(case, pool)? };
        case.validate()?;
        let features = baseline_features(&case, pool)?;
        Ok(Self { case, g_slot, alpha_slot, r_slot, features })
    }
}

/// Face features of the uncorrected model (g = 0, α-closure = 1).
pub fn baseline_features(case: &ChannelCase, pool: &ConstantsPool) -> Result<FeatureTable, EvaluatorError> {
    let zero = parse_expr("0")?;
    let one = parse_expr("1")?;
    let sol = solve_profiles(case, &zero, None, &one, pool, case.tol)?;
    let p = sol
        .profiles
        .ok_or_else(|| EvaluatorError::Setup("baseline model does not converge on this case".into()))?;
    let (i1, j1) = face_features(case, &p.u, &p.t);
    Ok(FeatureTable::new(CHANNEL_FEATURES.iter().map(|s| s.to_string()).collect(), vec![i1, j1])?)
}

impl Evaluator for ChannelEvaluator {
    fn objective_names(&self) -> Vec<String> {
        vec!["J_u".into(), "J_T".into()]
    }

    fn evaluate(&self, exprs: &[ExprTree], pool: &ConstantsPool) -> EvaluationOutcome {
        solve_channel(&self.case, &exprs[self.g_slot], self.r_slot.map(|k| &exprs[k]), &exprs[self.alpha_slot], pool)
    }

    fn baseline_features(&self) -> &FeatureTable {
        &self.features
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DIVERGED;

    fn pool() -> ConstantsPool {
        ConstantsPool::with_values(vec![0.5, -1.0])
    }

    fn e(s: &str) -> ExprTree {
        parse_expr(s).unwrap()
    }

    #[test]
    fn truth_reproduces_reference() {
        let case = make_reference(ChannelCase::default(), &pool()).unwrap();
        let o = solve_channel(&case, &e("-0.1 - I1"), None, &e("0.945 - 2.108 * J1"), &pool());
        assert!(o.converged);
        for v in o.objectives {
            assert!(v <= case.tol * 10.0, "{v}");
        }
    }

    #[test]
    fn negative_diffusivity_is_sentinel() {
        let case = make_reference(ChannelCase::default(), &pool()).unwrap();
        let o = solve_channel(&case, &e("-2"), None, &e("1"), &pool());
        assert_eq!(o.objectives, vec![DIVERGED, DIVERGED]);
        assert!(!o.converged);
    }

    #[test]
    fn linear_case_matches_analytic_profiles() {
        let case = ChannelCase {
            forcing: 0.0,
            coupling: 0.0,
            wall_u: (1.0, 3.0),
            wall_t: (0.0, 2.0),
            truth_exprs: TruthExprs { g: "0".into(), alpha: "0".into(), r: None },
            ..Default::default()
        };
        let case = make_reference(case, &pool()).unwrap();
        let p = case.reference_profiles.as_ref().unwrap();
        for (k, y) in case.cell_centers().iter().enumerate() {
            assert!((p.u[k] - (1.0 + 2.0 * y)).abs() < 1e-6);
            assert!((p.t[k] - 2.0 * y).abs() < 1e-6);
        }
    }

    #[test]
    fn flat_profiles_against_hand_reference() {
        // equal walls, no sources: the solution is flat at the wall value
        let mut case = ChannelCase {
            forcing: 0.0,
            coupling: 0.0,
            wall_u: (1.0, 1.0),
            wall_t: (2.0, 2.0),
            ..Default::default()
        };
        let ys = case.cell_centers();
        case.reference_profiles = Some(Profiles { u: ys.iter().map(|y| 1.0 + y).collect(), t: vec![1.0; 64] });
        let o = solve_channel(&case, &e("0"), None, &e("0"), &pool());
        let rms_ref_u = (ys.iter().map(|y| (1.0 + y).powi(2)).sum::<f64>() / 64.0).sqrt();
        let rms_diff_u = (ys.iter().map(|y| y * y).sum::<f64>() / 64.0).sqrt();
        assert!((o.objectives[0] - rms_diff_u / rms_ref_u).abs() < 1e-8);
        assert!((o.objectives[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn reference_is_deterministic() {
        let a = make_reference(ChannelCase::default(), &pool()).unwrap();
        let b = make_reference(ChannelCase::default(), &pool()).unwrap();
        assert_eq!(a.reference_profiles, b.reference_profiles);
    }

    #[test]
    fn grid_refinement_is_consistent() {
        let g = e("-0.05 - 0.5 * I1");
        let a = e("0.8 - 1.5 * J1");
        let coarse = make_reference(ChannelCase::default(), &pool()).unwrap();
        let fine = make_reference(ChannelCase { n_cells: 128, ..Default::default() }, &pool()).unwrap();
        let oc = solve_channel(&coarse, &g, None, &a, &pool());
        let of = solve_channel(&fine, &g, None, &a, &pool());
        assert!(oc.converged && of.converged);
        for k in 0..2 {
            let rel = (oc.objectives[k] - of.objectives[k]).abs() / of.objectives[k];
            assert!(rel <= 0.05, "objective {k}: {} vs {}", oc.objectives[k], of.objectives[k]);
        }
    }

    #[test]
    fn baseline_features_have_face_rows() {
        let case = ChannelCase::default();
        let t = baseline_features(&case, &pool()).unwrap();
        assert_eq!(t.n_rows(), 65);
        assert!(t.column("I1").unwrap().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn evaluator_maps_slots_by_name() {
        let slots = vec!["alpha".to_string(), "g".to_string()];
        let ev = ChannelEvaluator::new(ChannelCase::default(), &slots, &pool()).unwrap();
        let o = ev.evaluate(&[e("0.945 - 2.108 * J1"), e("-0.1 - I1")], &pool());
        assert!(o.objectives.iter().all(|v| *v < 1e-6));
        assert!(ChannelEvaluator::new(ChannelCase::default(), &["x".into()], &pool()).is_err());
    }
}
