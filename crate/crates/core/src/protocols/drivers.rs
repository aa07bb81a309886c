use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bellmat::{apply_hh, BellDensityMatrix, BellState, X_TOL};
use crate::error::{domain, EppError, Result};
use crate::protocols::steps::{
    branch_probabilities, dejmps_twirl, m2_step, m2h_branches, purify_target, x_step, x_step_probability, PurifyTarget, Sign,
    StepOutcome, DEGENERATE,
};
use crate::protocols::apply_g;
use crate::scalar::Real;

/// Rows of the M2H2 recursion are dropped once their weight falls below this.
pub const ROW_WEIGHT_FLOOR: f64 = 1e-15;
pub const MAX_ITER_LIMIT: usize = 256;
pub const MAX_ROWS_LIMIT: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProtocolKind {
    M2,
    M2X,
    M2H,
    M2H2,
    DEJMPS,
}

impl ProtocolKind {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::M2 => "m2",
            ProtocolKind::M2X => "m2x",
            ProtocolKind::M2H => "m2h",
            ProtocolKind::M2H2 => "m2h2",
            ProtocolKind::DEJMPS => "dejmps",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    PsiMinus,
    PsiPlus,
    PhiPlus,
    None,
}

impl Target {
    pub fn bell(self) -> Option<BellState> {
        match self {
            Target::PsiMinus => Some(BellState::PsiMinus),
            Target::PsiPlus => Some(BellState::PsiPlus),
            Target::PhiPlus => Some(BellState::PhiPlus),
            Target::None => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Purified,
    NotConverged,
    NotPurifiable,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryPoint<T: Real> {
    pub step: usize,
    pub probability: T,
    pub fidelity: T,
}

/// One complete path through a branching protocol. `probability` is the product of the
/// step probabilities on `trajectory`, or zero when the path does not purify.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchRecord<T: Real> {
    pub label: String,
    pub target: Target,
    pub status: Status,
    pub probability: T,
    pub trajectory: Vec<TrajectoryPoint<T>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Flags {
    /// The input satisfied both purifiability conditions.
    pub both_conditions: bool,
    /// M2H2 stopped at `max_k` rows before the row weight underflowed.
    pub row_truncation: bool,
    /// Branches converged to different Bell states.
    pub mixed_targets: bool,
    /// A preparatory M₋ step was applied to a non-X input.
    pub prepared: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PurificationResult<T: Real> {
    pub protocol: ProtocolKind,
    pub target: Target,
    pub status: Status,
    pub overall_probability: T,
    pub iterations: usize,
    /// Path of the dominant branch.
    pub trajectory: Vec<TrajectoryPoint<T>>,
    pub branches: Vec<BranchRecord<T>>,
    /// Weight of M2H2 rows dropped by truncation.
    pub discarded_weight: T,
    pub flags: Flags,
}

impl<T: Real> PurificationResult<T> {
    pub fn purified(&self) -> bool {
        self.status == Status::Purified
    }

    /// Result file layout.
    pub fn to_json(&self) -> serde_json::Value {
        let traj: Vec<_> = self
            .trajectory
            .iter()
            .map(|p| json!({"step": p.step, "probability": p.probability.as_f64(), "fidelity": p.fidelity.as_f64()}))
            .collect();
        let branches: Vec<_> = self
            .branches
            .iter()
            .map(|b| {
                json!({"label": b.label, "target": b.target, "status": b.status, "probability": b.probability.as_f64(), "steps": b.trajectory.len()})
            })
            .collect();
        json!({
            "protocol": self.protocol.name(),
            "target": self.target,
            "status": self.status,
            "overall_probability": self.overall_probability.as_f64(),
            "iterations": self.iterations,
            "trajectory": traj,
            "branches": branches,
            "discarded_weight": self.discarded_weight.as_f64(),
            "flags": {
                "both_conditions": self.flags.both_conditions,
                "row_truncation": self.flags.row_truncation,
                "mixed_targets": self.flags.mixed_targets,
                "prepared": self.flags.prepared,
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Options<T: Real> {
    /// Stop once the fidelity to the target reaches 1 − tol.
    pub tol: T,
    pub max_iter: usize,
    /// Row limit of the M2H2 recursion.
    pub max_k: usize,
}

impl<T: Real> Default for Options<T> {
    fn default() -> Self {
        Self { tol: T::tolerance(1e-12), max_iter: 128, max_k: MAX_ROWS_LIMIT }
    }
}

impl<T: Real> Options<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero() && self.tol <= T::lit(1e-3)) {
            return Err(domain("tol", self.tol.as_f64(), "(0, 1e-3]"));
        }
        if self.max_iter > MAX_ITER_LIMIT {
            return Err(domain("max_iter", self.max_iter as f64, "[0, 256]"));
        }
        if self.max_k == 0 || self.max_k > MAX_ROWS_LIMIT {
            return Err(domain("max_k", self.max_k as f64, "[1, 64]"));
        }
        Ok(())
    }
}

/// Steps taken so far on one path: probability and post-step state.
#[derive(Clone, Default)]
struct Path<T: Real> {
    steps: Vec<(T, BellDensityMatrix<T>)>,
}

impl<T: Real> Path<T> {
    fn push(&mut self, o: StepOutcome<T>) {
        self.steps.push((o.probability, o.state));
    }

    fn product(&self) -> T {
        self.steps.iter().fold(T::one(), |acc, (p, _)| acc * *p)
    }

    fn trajectory(&self, target: Target) -> Vec<TrajectoryPoint<T>> {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, (p, s))| TrajectoryPoint { step: i + 1, probability: *p, fidelity: fidelity_to(s, target) })
            .collect()
    }
}

fn fidelity_to<T: Real>(s: &BellDensityMatrix<T>, target: Target) -> T {
    match target.bell() {
        Some(b) => s.fidelity(b),
        None => s.fidelities().iter().fold(T::zero(), |m, &f| m.max(f)),
    }
}

/// Target singled out by the conditions on an X-state (where they are mutually exclusive).
fn chain_target<T: Real>(rho: &BellDensityMatrix<T>) -> Target {
    match purify_target(rho) {
        PurifyTarget::PsiMinus => Target::PsiMinus,
        PurifyTarget::PsiPlus => Target::PsiPlus,
        PurifyTarget::Both => {
            if rho.fidelity(BellState::PsiMinus) >= rho.fidelity(BellState::PsiPlus) {
                Target::PsiMinus
            } else {
                Target::PsiPlus
            }
        }
        PurifyTarget::None => Target::None,
    }
}

struct ChainEnd {
    target: Target,
    status: Status,
}

/// Iterates x_step from `path`'s last state (or `start`) until the target fidelity reaches
/// 1 − tol, the state stops being purifiable, or `budget` more steps have been taken.
fn run_chain<T: Real>(start: &BellDensityMatrix<T>, path: &mut Path<T>, tol: T, budget: usize, fail: Status) -> ChainEnd {
    let mut rho = *start;
    let mut taken = 0;
    loop {
        let target = chain_target(&rho);
        if target == Target::None {
            return ChainEnd { target, status: fail };
        }
        if fidelity_to(&rho, target) >= T::one() - tol {
            return ChainEnd { target, status: Status::Purified };
        }
        if taken == budget {
            return ChainEnd { target: Target::None, status: Status::NotConverged };
        }
        match x_step(&rho) {
            Ok(o) => {
                rho = o.state;
                path.push(o);
                taken += 1;
            }
            Err(_) => return ChainEnd { target: Target::None, status: Status::NotConverged },
        }
    }
}

fn finish_branch<T: Real>(label: String, path: Path<T>, end: ChainEnd) -> BranchRecord<T> {
    let probability = if end.status == Status::Purified { path.product() } else { T::zero() };
    BranchRecord { label, target: end.target, status: end.status, probability, trajectory: path.trajectory(end.target) }
}

fn assemble<T: Real>(
    protocol: ProtocolKind,
    branches: Vec<BranchRecord<T>>,
    fail: Status,
    discarded_weight: T,
    flags: Flags,
) -> PurificationResult<T> {
    let overall = branches.iter().fold(T::zero(), |acc, b| acc + b.probability);
    let iterations = branches.iter().map(|b| b.trajectory.len()).max().unwrap_or(0);
    let purified: Vec<&BranchRecord<T>> = branches.iter().filter(|b| b.status == Status::Purified).collect();
    let dominant = purified
        .iter()
        .copied()
        .max_by(|a, b| a.probability.partial_cmp(&b.probability).unwrap_or(std::cmp::Ordering::Equal))
        .or_else(|| branches.first());
    let mut flags = flags;
    flags.mixed_targets = purified.windows(2).any(|w| w[0].target != w[1].target);
    let (target, status) = match purified.is_empty() {
        true => (Target::None, fail),
        false => (dominant.map(|b| b.target).unwrap_or(Target::None), Status::Purified),
    };
    let trajectory = dominant.map(|b| b.trajectory.clone()).unwrap_or_default();
    PurificationResult { protocol, target, status, overall_probability: overall, iterations, trajectory, branches, discarded_weight, flags }
}

fn not_started<T: Real>(protocol: ProtocolKind, rho: &BellDensityMatrix<T>, tol: T, fail: Status, flags: Flags) -> PurificationResult<T> {
    let best = BellState::ALL
        .into_iter()
        .find(|&b| rho.fidelity(b) >= T::one() - tol)
        .and_then(|b| match b {
            BellState::PsiMinus => Some(Target::PsiMinus),
            BellState::PsiPlus => Some(Target::PsiPlus),
            BellState::PhiPlus => Some(Target::PhiPlus),
            BellState::PhiMinus => None,
        });
    let (target, status, p) = match best {
        Some(t) => (t, Status::Purified, T::one()),
        None => (Target::None, fail, T::zero()),
    };
    let branch = BranchRecord { label: "input".into(), target, status, probability: p, trajectory: vec![] };
    assemble(protocol, vec![branch], fail, T::zero(), flags)
}

/// First step (M₋, or the X map when the input is already an X-state) followed by an X chain.
pub fn run_m2<T: Real>(rho: &BellDensityMatrix<T>, opts: &Options<T>) -> Result<PurificationResult<T>> {
    opts.validate()?;
    let flags = Flags { both_conditions: purify_target(rho) == PurifyTarget::Both, ..Flags::default() };
    let x = rho.is_x_state(T::tolerance(X_TOL));
    let kind = if x { ProtocolKind::M2X } else { ProtocolKind::M2 };
    if opts.max_iter == 0 {
        return Ok(not_started(kind, rho, opts.tol, Status::NotConverged, flags));
    }
    let first = if x { x_step(rho) } else { m2_step(rho, Sign::Minus) };
    x_path(kind, first, opts, Status::NotConverged, flags)
}

fn x_path<T: Real>(
    kind: ProtocolKind,
    first: Result<StepOutcome<T>>,
    opts: &Options<T>,
    fail: Status,
    flags: Flags,
) -> Result<PurificationResult<T>> {
    let mut path = Path::default();
    let end = match first {
        Ok(o) => {
            path.push(o);
            run_chain(&o.state, &mut path, opts.tol, opts.max_iter - 1, fail)
        }
        Err(EppError::DegenerateBranch(_)) => ChainEnd { target: Target::None, status: fail },
        Err(e) => return Err(e),
    };
    Ok(assemble(kind, vec![finish_branch("main".into(), path, end)], fail, T::zero(), flags))
}

/// Twirls to Bell-diagonal form and iterates the diagonal map.
pub fn run_dejmps<T: Real>(rho: &BellDensityMatrix<T>, opts: &Options<T>) -> Result<PurificationResult<T>> {
    opts.validate()?;
    let twirled = dejmps_twirl(rho);
    let flags = Flags::default();
    let max = twirled.fidelities().iter().fold(T::zero(), |m, &f| m.max(f));
    if !(max > T::lit(0.5)) {
        let branch = BranchRecord { label: "main".into(), target: Target::None, status: Status::NotPurifiable, probability: T::zero(), trajectory: vec![] };
        return Ok(assemble(ProtocolKind::DEJMPS, vec![branch], Status::NotPurifiable, T::zero(), flags));
    }
    if opts.max_iter == 0 {
        return Ok(not_started(ProtocolKind::DEJMPS, &twirled, opts.tol, Status::NotConverged, flags));
    }
    x_path(ProtocolKind::DEJMPS, x_step(&twirled), opts, Status::NotPurifiable, flags)
}

/// Preparatory M₋ step for non-X inputs. Returns the X-state and the path so far.
fn prepare<T: Real>(rho: &BellDensityMatrix<T>) -> Result<Option<(BellDensityMatrix<T>, Path<T>)>> {
    let mut path = Path::default();
    if rho.is_x_state(T::tolerance(X_TOL)) {
        return Ok(Some((*rho, path)));
    }
    match m2_step(rho, Sign::Minus) {
        Ok(o) => {
            path.push(o);
            Ok(Some((o.state, path)))
        }
        Err(EppError::DegenerateBranch(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn failed<T: Real>(kind: ProtocolKind, flags: Flags) -> PurificationResult<T> {
    let branch = BranchRecord { label: "main".into(), target: Target::None, status: Status::NotConverged, probability: T::zero(), trajectory: vec![] };
    assemble(kind, vec![branch], Status::NotConverged, T::zero(), flags)
}

/// HH followed by both matched events, each continued by an X chain. The plus branch state
/// is not an X-state; its next step accepts either matched event (probability q₋ + q₊).
pub fn run_m2h<T: Real>(rho: &BellDensityMatrix<T>, opts: &Options<T>) -> Result<PurificationResult<T>> {
    opts.validate()?;
    let mut flags = Flags { both_conditions: purify_target(rho) == PurifyTarget::Both, ..Flags::default() };
    if opts.max_iter == 0 {
        return Ok(not_started(ProtocolKind::M2H, rho, opts.tol, Status::NotConverged, flags));
    }
    let Some((rx, prefix)) = prepare(rho)? else {
        return Ok(failed(ProtocolKind::M2H, flags));
    };
    flags.prepared = !prefix.steps.is_empty();
    let (minus, plus) = m2h_branches(&rx)?;
    let budget = opts.max_iter.saturating_sub(prefix.steps.len() + 1);
    let mut branches = Vec::new();
    if let Ok(o) = minus {
        let mut path = prefix.clone();
        path.push(o);
        let end = run_chain(&o.state, &mut path, opts.tol, budget, Status::NotConverged);
        branches.push(finish_branch("minus".into(), path, end));
    }
    if let Ok(o) = plus {
        let mut path = prefix.clone();
        path.push(o);
        let p = x_step_probability(&o.state);
        let end = match m2_step(&o.state, Sign::Minus) {
            Ok(next) if budget > 0 && p > T::lit(DEGENERATE) => {
                path.push(StepOutcome { state: next.state, probability: p });
                run_chain(&next.state, &mut path, opts.tol, budget - 1, Status::NotConverged)
            }
            _ => ChainEnd { target: Target::None, status: Status::NotConverged },
        };
        branches.push(finish_branch("plus".into(), path, end));
    }
    if branches.is_empty() {
        return Ok(failed(ProtocolKind::M2H, flags));
    }
    Ok(assemble(ProtocolKind::M2H, branches, Status::NotConverged, T::zero(), flags))
}

/// Double recursion: each row's M₋ event starts an X chain, its M₊ event is mapped back to an
/// X-state by G and HH and becomes the next row.
pub fn run_m2h2<T: Real>(rho_x: &BellDensityMatrix<T>, opts: &Options<T>) -> Result<PurificationResult<T>> {
    opts.validate()?;
    let defect = rho_x.x_defect();
    if defect > T::tolerance(X_TOL) {
        return Err(EppError::NotXState(defect.as_f64()));
    }
    let flags = Flags { both_conditions: purify_target(rho_x) == PurifyTarget::Both, ..Flags::default() };
    m2h2_rows(rho_x, Path::default(), opts, flags)
}

fn m2h2_rows<T: Real>(rho_x: &BellDensityMatrix<T>, prefix: Path<T>, opts: &Options<T>, mut flags: Flags) -> Result<PurificationResult<T>> {
    if opts.max_iter == 0 {
        return Ok(not_started(ProtocolKind::M2H2, rho_x, opts.tol, Status::NotConverged, flags));
    }
    let deg = T::lit(DEGENERATE);
    let mut v = apply_hh(rho_x);
    let prefix_weight = prefix.product();
    let mut row_path = prefix;
    let mut row_weight = T::one();
    let mut branches = Vec::new();
    let mut discarded = T::zero();
    let mut exhausted = false;
    for k in 0..opts.max_k {
        let bp = branch_probabilities(&v);
        let budget = opts.max_iter - 1;
        if bp.q_minus > deg {
            let o = m2_step(&v, Sign::Minus)?;
            let mut path = row_path.clone();
            path.push(o);
            let end = run_chain(&o.state, &mut path, opts.tol, budget, Status::NotConverged);
            branches.push(finish_branch(format!("row {k}"), path, end));
        }
        if bp.q_plus <= deg {
            exhausted = true;
            break;
        }
        let o = m2_step(&v, Sign::Plus)?;
        row_weight = row_weight * o.probability;
        if row_weight < T::lit(ROW_WEIGHT_FLOOR) {
            discarded = prefix_weight * row_weight;
            exhausted = true;
            break;
        }
        v = apply_hh(&apply_g(&o.state));
        row_path.push(StepOutcome { state: v, probability: o.probability });
    }
    if !exhausted {
        flags.row_truncation = true;
        discarded = prefix_weight * row_weight;
    }
    if branches.is_empty() {
        return Ok(failed(ProtocolKind::M2H2, flags));
    }
    Ok(assemble(ProtocolKind::M2H2, branches, Status::NotConverged, discarded, flags))
}

/// Runs any protocol on any valid state. M2H2 inputs that are not X-states first receive one
/// M₋ step, whose probability multiplies the result.
pub fn run<T: Real>(kind: ProtocolKind, rho: &BellDensityMatrix<T>, opts: &Options<T>) -> Result<PurificationResult<T>> {
    match kind {
        ProtocolKind::M2 | ProtocolKind::M2X => run_m2(rho, opts),
        ProtocolKind::M2H => run_m2h(rho, opts),
        ProtocolKind::DEJMPS => run_dejmps(rho, opts),
        ProtocolKind::M2H2 => {
            opts.validate()?;
            let flags = Flags { both_conditions: purify_target(rho) == PurifyTarget::Both, ..Flags::default() };
            match prepare(rho)? {
                Some((rx, prefix)) => {
                    let flags = Flags { prepared: !prefix.steps.is_empty(), ..flags };
                    m2h2_rows(&rx, prefix, opts, flags)
                }
                None => Ok(failed(ProtocolKind::M2H2, flags)),
            }
        }
    }
}
