//! Synchronous network iterations for every member of the algorithm family.
//!
//! Each step reads `W = w_{i-1}` (one row per agent), evaluates the local
//! gradients, and then performs the combination products. Combination is a
//! neighbor-weighted sum over rows with a fixed agent order, so results do not
//! depend on how the per-agent work is scheduled.

use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::analysis::fixed_point_residuals;
use crate::costs::SmoothCostSet;
use crate::error::{Error, Result};
use crate::linalg::combine;
use crate::netgraph::{table1_matrices, AlgorithmId, CombinationMatrix, ConsensusTriple};
use crate::prox::{apply_per_agent, ProxOperator};
use crate::scalar::Scalar;

/// Stacked per-agent state. Which buffers are live depends on the family.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockIterate<T> {
    /// `w_{i-1}`, the latest iterate
    pub w: Array2<T>,
    /// `w_{i-2}`
    pub w_prev: Array2<T>,
    /// dual surrogate `s = B y`
    pub s: Array2<T>,
    /// primal-dual auxiliary `z`
    pub z: Array2<T>,
    /// combination / tracking buffer
    pub x: Array2<T>,
    /// `ψ_{i-1}` of the agent listings
    pub psi_prev: Array2<T>,
    /// `∇J(w_{i-2})`
    pub grad_prev: Array2<T>,
    /// Lagrangian dual of the penalty-based methods
    pub y: Array2<T>,
    /// completed iterations
    pub iter: usize,
}

impl<T: Scalar> BlockIterate<T> {
    /// Starts from `w_{-1} = w0` with every other buffer zero.
    pub fn new(w0: Array2<T>) -> Self {
        let zeros = Array2::zeros(w0.raw_dim());
        BlockIterate {
            w_prev: zeros.clone(),
            s: zeros.clone(),
            z: zeros.clone(),
            x: zeros.clone(),
            psi_prev: zeros.clone(),
            grad_prev: zeros.clone(),
            y: zeros,
            w: w0,
            iter: 0,
        }
    }

    pub fn zeros(k: usize, m: usize) -> Self {
        Self::new(Array2::zeros((k, m)))
    }

    pub fn k(&self) -> usize {
        self.w.nrows()
    }

    pub fn dim(&self) -> usize {
        self.w.ncols()
    }

    /// Network average of the agents' iterates.
    pub fn mean(&self) -> Array1<T> {
        self.w.mean_axis(ndarray::Axis(0)).expect("at least one agent")
    }

    /// `max_k ‖w_k − w̄‖`
    pub fn disagreement(&self) -> T {
        let mean = self.mean();
        self.w
            .rows()
            .into_iter()
            .map(|r| (&r - &mean).mapv(|v| v * v).sum().sqrt())
            .fold(T::zero(), T::max)
    }
}

/// Standard normal start; every agent shares one draw when `consensus` is set.
pub fn random_init<T: Scalar>(k: usize, m: usize, seed: u64, consensus: bool) -> Array2<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || T::lit(StandardNormal.sample(&mut rng));
    if consensus {
        let row: Array1<T> = (0..m).map(|_| draw()).collect();
        let mut w = Array2::zeros((k, m));
        w.rows_mut().into_iter().for_each(|mut r| r.assign(&row));
        w
    } else {
        Array2::from_shape_simple_fn((k, m), draw)
    }
}

/// Agent-level listings of the proximal ATC members.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentVariant {
    ProxEd,
    ProxAtc1,
    ProxAtc2,
}

/// Single-variable two-step recursions for the smooth case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EliminatedForm {
    /// `Ā(2w − w' − μΔ∇)`; also NIDS with its own `Ā`
    ExactDiffusion,
    /// `A(2w − Aw' − μAΔ∇)`
    AugDgm,
    /// `A(2w − Aw' − μΔ∇)`
    AtcTracking,
    /// `(2I − C − B²)w − (I − C)w' − μΔ∇`
    NonAtc,
    /// `2Aw − A²w' − μΔ∇`
    Diging,
    /// `½(I + A)(2w − w') − μΔ∇`
    Extra,
    /// `(I − cμL)(2w − w') − μΔ∇`
    Dlm,
}

/// Gradient-tracking and penalty forms carrying a second variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoVariableForm {
    AugDgm,
    AtcTracking,
    Diging,
    Dlm,
}

/// Methods with one regularizer per agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparateVariant {
    PgExtra,
    DlAdmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Puda,
    Agent(AgentVariant),
    Eliminated(EliminatedForm),
    TwoVariable(TwoVariableForm),
    Separate(SeparateVariant),
}

/// Shared regularizer or one operator per agent.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxChoice<T> {
    Common(ProxOperator<T>),
    PerAgent(Vec<ProxOperator<T>>),
}

/// Everything needed to iterate one algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSpec<T> {
    pub label: String,
    pub family: Family,
    /// Consensus triple; for agent listings this is the equivalent triple
    /// used only to track the primal-dual variables for diagnostics.
    pub triple: Option<ConsensusTriple<T>>,
    pub combination: Option<CombinationMatrix<T>>,
    /// `(c, L)` for the penalty-based methods
    pub penalty: Option<(T, Array2<T>)>,
    pub mu: T,
    pub prox: ProxChoice<T>,
    pub comm_rounds_per_iter: usize,
}

fn check_mu<T: Scalar>(mu: T) -> Result<()> {
    if mu > T::zero() && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("step-size must be positive, got {mu:e}")))
    }
}

fn source_of<T: Scalar>(t: &ConsensusTriple<T>) -> Result<CombinationMatrix<T>> {
    let a = t.source.clone().ok_or_else(|| Error::Unsupported("form needs the source combination matrix".into()))?;
    CombinationMatrix::new(a)
}

impl<T: Scalar> AlgorithmSpec<T> {
    /// General primal-dual recursion with a common regularizer.
    pub fn puda(triple: ConsensusTriple<T>, mu: T, prox: ProxOperator<T>) -> Result<Self> {
        check_mu(mu)?;
        Ok(AlgorithmSpec {
            label: triple.algorithm.map_or("PUDA".into(), |a| format!("PUDA-{a}")),
            family: Family::Puda,
            comm_rounds_per_iter: triple.comm_rounds_per_iter(),
            triple: Some(triple),
            combination: None,
            penalty: None,
            mu,
            prox: ProxChoice::Common(prox),
        })
    }

    /// Prox-ED (`Ā = (I + A)/2`), Prox-ATC I (`A², (I−A)², 0`) or
    /// Prox-ATC II (`A, (I−A)², I−A`).
    pub fn agent_form(variant: AgentVariant, a: &CombinationMatrix<T>, mu: T, prox: ProxOperator<T>) -> Result<Self> {
        check_mu(mu)?;
        let (id, label, rounds) = match variant {
            AgentVariant::ProxEd => (AlgorithmId::ExactDiffusion, "ProxED", 1),
            AgentVariant::ProxAtc1 => (AlgorithmId::AugDgm, "ProxATC1", 2),
            AgentVariant::ProxAtc2 => (AlgorithmId::AtcTracking, "ProxATC2", 2),
        };
        let triple = table1_matrices(id, a, T::one(), mu, None)?;
        Ok(AlgorithmSpec {
            label: label.into(),
            family: Family::Agent(variant),
            triple: Some(triple),
            combination: Some(a.clone()),
            penalty: None,
            mu,
            prox: ProxChoice::Common(prox),
            comm_rounds_per_iter: rounds,
        })
    }

    /// Smooth-case single-variable recursion. The triple must carry its
    /// source matrix for the forms written in terms of `A`.
    pub fn eliminated(form: EliminatedForm, triple: ConsensusTriple<T>, mu: T) -> Result<Self> {
        check_mu(mu)?;
        let combination = match form {
            EliminatedForm::ExactDiffusion | EliminatedForm::NonAtc | EliminatedForm::Dlm => None,
            _ => Some(source_of(&triple)?),
        };
        Ok(AlgorithmSpec {
            label: format!("{form:?}-eliminated"),
            family: Family::Eliminated(form),
            comm_rounds_per_iter: triple.comm_rounds_per_iter(),
            triple: Some(triple),
            combination,
            penalty: None,
            mu,
            prox: ProxChoice::Common(ProxOperator::Zero),
        })
    }

    /// Smooth-case tracking forms; DLM needs `(c, L)`.
    pub fn two_variable(
        form: TwoVariableForm,
        triple: ConsensusTriple<T>,
        mu: T,
        penalty: Option<(T, Array2<T>)>,
    ) -> Result<Self> {
        check_mu(mu)?;
        let combination = match form {
            TwoVariableForm::Dlm => {
                if penalty.is_none() {
                    return Err(Error::Domain("DLM needs the penalty c and Laplacian".into()));
                }
                None
            }
            _ => Some(source_of(&triple)?),
        };
        Ok(AlgorithmSpec {
            label: format!("{form:?}-two-variable"),
            family: Family::TwoVariable(form),
            comm_rounds_per_iter: triple.comm_rounds_per_iter(),
            triple: Some(triple),
            combination,
            penalty,
            mu,
            prox: ProxChoice::Common(ProxOperator::Zero),
        })
    }

    pub fn pg_extra(a: &CombinationMatrix<T>, mu: T, per_agent: Vec<ProxOperator<T>>) -> Result<Self> {
        check_mu(mu)?;
        if per_agent.len() != a.k() {
            return Err(Error::Shape(format!("{} prox operators for {} agents", per_agent.len(), a.k())));
        }
        Ok(AlgorithmSpec {
            label: "PGEXTRA".into(),
            family: Family::Separate(SeparateVariant::PgExtra),
            triple: None,
            combination: Some(a.clone()),
            penalty: None,
            mu,
            prox: ProxChoice::PerAgent(per_agent),
            comm_rounds_per_iter: 1,
        })
    }

    pub fn dl_admm(c: T, laplacian: Array2<T>, mu: T, per_agent: Vec<ProxOperator<T>>) -> Result<Self> {
        check_mu(mu)?;
        if c <= T::zero() {
            return Err(Error::Domain("DL-ADMM needs c > 0".into()));
        }
        if per_agent.len() != laplacian.nrows() {
            return Err(Error::Shape(format!("{} prox operators for {} agents", per_agent.len(), laplacian.nrows())));
        }
        Ok(AlgorithmSpec {
            label: "DLADMM".into(),
            family: Family::Separate(SeparateVariant::DlAdmm),
            triple: None,
            combination: None,
            penalty: Some((c, laplacian)),
            mu,
            prox: ProxChoice::PerAgent(per_agent),
            comm_rounds_per_iter: 1,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// The shared regularizer, if there is one.
    pub fn common_prox(&self) -> Option<&ProxOperator<T>> {
        match &self.prox {
            ProxChoice::Common(p) => Some(p),
            ProxChoice::PerAgent(_) => None,
        }
    }

    /// One synchronous iteration.
    pub fn step(&self, state: &mut BlockIterate<T>, costs: &SmoothCostSet<T>) -> Result<()> {
        let g = checked_grads(costs, state)?;
        let mu = self.mu;
        match self.family {
            Family::Puda => {
                let triple = self.triple.as_ref().expect("puda spec carries a triple");
                let prox = self.common_prox().expect("puda uses a common prox");
                puda_core(state, triple, prox, mu, &g);
            }
            Family::Agent(variant) => {
                let a = self.combination.as_ref().expect("agent form carries A");
                let prox = self.common_prox().expect("agent forms use a common prox");
                agent_core(variant, state, prox, a, self.triple.as_ref(), mu, &g);
            }
            Family::Eliminated(form) => {
                let triple = self.triple.as_ref().expect("eliminated form carries a triple");
                eliminated_core(form, state, triple, self.combination.as_ref(), mu, &g);
            }
            Family::TwoVariable(form) => {
                two_variable_core(form, state, self.combination.as_ref(), self.penalty.as_ref(), mu, &g);
            }
            Family::Separate(variant) => {
                let ProxChoice::PerAgent(ops) = &self.prox else {
                    unreachable!("separate-prox spec carries per-agent operators")
                };
                separate_core(variant, state, ops, self.combination.as_ref(), self.penalty.as_ref(), mu, &g);
            }
        }
        state.iter += 1;
        Ok(())
    }
}

fn checked_grads<T: Scalar>(costs: &SmoothCostSet<T>, state: &BlockIterate<T>) -> Result<Array2<T>> {
    if costs.k() != state.k() || costs.dim() != state.dim() {
        return Err(Error::Shape(format!(
            "state is {}x{} but costs are {}x{}",
            state.k(),
            state.dim(),
            costs.k(),
            costs.dim()
        )));
    }
    let g = costs.grads(state.w.view());
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { iter: state.iter, reason: "non-finite gradient".into() });
    }
    Ok(g)
}

fn prod<T: Scalar>(m: &Array2<T>, w: &Array2<T>) -> Array2<T> {
    combine(m.view(), w.view())
}

/// `Z ← (I − C)W − μ∇ − S`, `S ← S + B²Z`, returns `Ā Z`.
fn dual_surrogate_update<T: Scalar>(state: &mut BlockIterate<T>, triple: &ConsensusTriple<T>, mu: T, g: &Array2<T>) -> Array2<T> {
    let mut z = &state.w - &prod(&triple.c, &state.w);
    Zip::from(&mut z).and(g).and(&state.s).for_each(|z, &g, &s| *z = *z - mu * g - s);
    state.s += &prod(&triple.b_sq, &z);
    let combined = prod(&triple.a_bar, &z);
    state.z = z;
    combined
}

fn puda_core<T: Scalar>(state: &mut BlockIterate<T>, triple: &ConsensusTriple<T>, prox: &ProxOperator<T>, mu: T, g: &Array2<T>) {
    let combined = dual_surrogate_update(state, triple, mu, g);
    state.w_prev = std::mem::replace(&mut state.w, prox.apply_rows(combined.view(), mu));
}

/// One iteration of the unified primal-dual recursion in dual-surrogate form.
pub fn puda_step<T: Scalar>(
    state: &mut BlockIterate<T>,
    triple: &ConsensusTriple<T>,
    costs: &SmoothCostSet<T>,
    prox: &ProxOperator<T>,
    mu: T,
) -> Result<()> {
    let g = checked_grads(costs, state)?;
    puda_core(state, triple, prox, mu, &g);
    state.iter += 1;
    Ok(())
}

fn agent_core<T: Scalar>(
    variant: AgentVariant,
    state: &mut BlockIterate<T>,
    prox: &ProxOperator<T>,
    a: &CombinationMatrix<T>,
    shadow: Option<&ConsensusTriple<T>>,
    mu: T,
    g: &Array2<T>,
) {
    let am = a.matrix();
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let w_old = state.w.clone();
    let x_new = match variant {
        AgentVariant::ProxEd => {
            let psi = &state.w - &g.mapv(|v| v * mu);
            let z = &state.x + &psi - &state.psi_prev;
            // Ā z = (z + A z)/2
            let x = (&z + &prod(am, &z)).mapv(|v| v * half);
            state.psi_prev = psi;
            x
        }
        AgentVariant::ProxAtc1 => {
            let psi = &state.w - &g.mapv(|v| v * mu);
            let inner = &state.x - &psi + &state.psi_prev;
            let z = state.x.mapv(|v| v * two) - prod(am, &inner);
            state.psi_prev = psi;
            prod(am, &z)
        }
        AgentVariant::ProxAtc2 => {
            let psi = state.x.mapv(|v| v * two) - (g - &state.grad_prev).mapv(|v| v * mu);
            let inner = &state.x - &state.w + &state.w_prev;
            let z = &psi - &prod(am, &inner);
            state.psi_prev = psi;
            prod(am, &z)
        }
    };
    if let Some(triple) = shadow {
        // primal-dual variables of the equivalent recursion; local bookkeeping only
        dual_surrogate_update(state, triple, mu, g);
    }
    state.w = prox.apply_rows(x_new.view(), mu);
    state.x = x_new;
    state.w_prev = w_old;
    state.grad_prev = g.clone();
}

/// One iteration of the Prox-ED / Prox-ATC I / Prox-ATC II agent listings.
///
/// `shadow` optionally names the equivalent triple whose `Z` and `S` are kept
/// up to date for residual checks; it does not affect `W`.
pub fn agent_form_step<T: Scalar>(
    variant: AgentVariant,
    state: &mut BlockIterate<T>,
    costs: &SmoothCostSet<T>,
    prox: &ProxOperator<T>,
    a: &CombinationMatrix<T>,
    shadow: Option<&ConsensusTriple<T>>,
    mu: T,
) -> Result<()> {
    let g = checked_grads(costs, state)?;
    agent_core(variant, state, prox, a, shadow, mu, &g);
    state.iter += 1;
    Ok(())
}

fn eliminated_core<T: Scalar>(
    form: EliminatedForm,
    state: &mut BlockIterate<T>,
    triple: &ConsensusTriple<T>,
    a: Option<&CombinationMatrix<T>>,
    mu: T,
    g: &Array2<T>,
) {
    let next = if state.iter == 0 {
        // w_0 from the primal-dual form with y_{-1} = 0
        let mut z = &state.w - &prod(&triple.c, &state.w);
        z.zip_mut_with(g, |z, &g| *z = *z - mu * g);
        prod(&triple.a_bar, &z)
    } else {
        let two = T::lit(2.0);
        let dg = (g - &state.grad_prev).mapv(|v| v * mu);
        let w2 = state.w.mapv(|v| v * two);
        let am = || a.expect("form needs A").matrix();
        match form {
            EliminatedForm::ExactDiffusion => prod(&triple.a_bar, &(&w2 - &state.w_prev - &dg)),
            EliminatedForm::AugDgm => {
                let am = am();
                prod(am, &(&w2 - &prod(am, &state.w_prev) - &prod(am, &dg)))
            }
            EliminatedForm::AtcTracking => {
                let am = am();
                prod(am, &(&w2 - &prod(am, &state.w_prev) - &dg))
            }
            EliminatedForm::NonAtc => {
                let cw = prod(&triple.c, &state.w);
                let bw = prod(&triple.b_sq, &state.w);
                let cw_prev = prod(&triple.c, &state.w_prev);
                &w2 - &cw - &bw - &state.w_prev + &cw_prev - &dg
            }
            EliminatedForm::Diging => {
                let am = am();
                prod(am, &(&w2 - &prod(am, &state.w_prev))) - &dg
            }
            EliminatedForm::Extra => {
                let v = &w2 - &state.w_prev;
                (&v + &prod(am(), &v)).mapv(|x| x * T::lit(0.5)) - &dg
            }
            EliminatedForm::Dlm => {
                let v = &w2 - &state.w_prev;
                &v - &prod(&triple.b_sq, &v) - &dg
            }
        }
    };
    state.w_prev = std::mem::replace(&mut state.w, next);
    state.grad_prev = g.clone();
}

/// One iteration of a single-variable smooth recursion (`R = 0`). The first
/// call bootstraps `w_0` from the primal-dual form.
pub fn eliminated_step<T: Scalar>(
    form: EliminatedForm,
    state: &mut BlockIterate<T>,
    costs: &SmoothCostSet<T>,
    triple: &ConsensusTriple<T>,
    mu: T,
) -> Result<()> {
    let a = match form {
        EliminatedForm::ExactDiffusion | EliminatedForm::NonAtc | EliminatedForm::Dlm => None,
        _ => Some(source_of(triple)?),
    };
    let g = checked_grads(costs, state)?;
    eliminated_core(form, state, triple, a.as_ref(), mu, &g);
    state.iter += 1;
    Ok(())
}

fn two_variable_core<T: Scalar>(
    form: TwoVariableForm,
    state: &mut BlockIterate<T>,
    a: Option<&CombinationMatrix<T>>,
    penalty: Option<&(T, Array2<T>)>,
    mu: T,
    g: &Array2<T>,
) {
    let first = state.iter == 0;
    let dg = g - &state.grad_prev;
    let scaled = |m: Array2<T>| m.mapv(|v| v * mu);
    let next = match form {
        TwoVariableForm::AugDgm => {
            let am = a.expect("form needs A").matrix();
            state.x = if first {
                // virtual x_{-1} reproducing the primal-dual w_0
                (&state.w - &prod(am, &state.w)).mapv(|v| v / mu) + prod(am, g)
            } else {
                prod(am, &(&state.x + &dg))
            };
            prod(am, &(&state.w - &scaled(state.x.clone())))
        }
        TwoVariableForm::AtcTracking => {
            let am = a.expect("form needs A").matrix();
            state.x = if first {
                (&state.w - &prod(am, &state.w)).mapv(|v| v / mu) + g
            } else {
                prod(am, &state.x) + &dg
            };
            prod(am, &(&state.w - &scaled(state.x.clone())))
        }
        TwoVariableForm::Diging => {
            let am = a.expect("form needs A").matrix();
            state.x = if first {
                let aw = prod(am, &state.w);
                (&aw - &prod(am, &aw)).mapv(|v| v / mu) + g
            } else {
                prod(am, &state.x) + &dg
            };
            prod(am, &state.w) - scaled(state.x.clone())
        }
        TwoVariableForm::Dlm => {
            let (c, l) = penalty.expect("DLM needs (c, L)");
            let lw = prod(l, &state.w).mapv(|v| v * *c);
            let next = &state.w - &scaled(g + &lw + &state.y);
            state.y = &state.y + &prod(l, &next).mapv(|v| v * *c);
            next
        }
    };
    state.w_prev = std::mem::replace(&mut state.w, next);
    state.grad_prev = g.clone();
}

/// One iteration of a tracking / penalty two-variable form (`R = 0`).
pub fn two_variable_step<T: Scalar>(
    form: TwoVariableForm,
    state: &mut BlockIterate<T>,
    costs: &SmoothCostSet<T>,
    a: Option<&CombinationMatrix<T>>,
    penalty: Option<&(T, Array2<T>)>,
    mu: T,
) -> Result<()> {
    match form {
        TwoVariableForm::Dlm if penalty.is_none() => return Err(Error::Domain("DLM needs (c, L)".into())),
        TwoVariableForm::AugDgm | TwoVariableForm::AtcTracking | TwoVariableForm::Diging if a.is_none() => {
            return Err(Error::Domain("tracking forms need A".into()))
        }
        _ => {}
    }
    let g = checked_grads(costs, state)?;
    two_variable_core(form, state, a, penalty, mu, &g);
    state.iter += 1;
    Ok(())
}

fn separate_core<T: Scalar>(
    variant: SeparateVariant,
    state: &mut BlockIterate<T>,
    ops: &[ProxOperator<T>],
    a: Option<&CombinationMatrix<T>>,
    penalty: Option<&(T, Array2<T>)>,
    mu: T,
    g: &Array2<T>,
) {
    let scaled = |m: &Array2<T>| m.mapv(|v| v * mu);
    let next = match variant {
        SeparateVariant::PgExtra => {
            let am = a.expect("PG-EXTRA needs A").matrix();
            let aw = prod(am, &state.w);
            let x_half = if state.iter == 0 {
                aw - scaled(g)
            } else {
                // W̃ W_prev with W̃ = (I + A)/2
                let tilde = (&state.w_prev + &prod(am, &state.w_prev)).mapv(|v| v * T::lit(0.5));
                aw + &state.x - &tilde - &scaled(&(g - &state.grad_prev))
            };
            let next = apply_per_agent(ops, x_half.view(), mu);
            state.x = x_half;
            next
        }
        SeparateVariant::DlAdmm => {
            let (c, l) = penalty.expect("DL-ADMM needs (c, L)");
            let lw = prod(l, &state.w).mapv(|v| v * *c);
            let arg = &state.w - &scaled(&(g + &lw + &state.y));
            let next = apply_per_agent(ops, arg.view(), mu);
            state.y = &state.y + &prod(l, &next).mapv(|v| v * *c);
            next
        }
    };
    state.w_prev = std::mem::replace(&mut state.w, next);
    state.grad_prev = g.clone();
}

/// One iteration of PG-EXTRA or DL-ADMM with one regularizer per agent.
pub fn separate_prox_step<T: Scalar>(spec: &AlgorithmSpec<T>, state: &mut BlockIterate<T>, costs: &SmoothCostSet<T>) -> Result<()> {
    match spec.family {
        Family::Separate(_) => spec.step(state, costs),
        other => Err(Error::Unsupported(format!("{other:?} is not a separate-regularizer method"))),
    }
}

/// One recorded row of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordRow<T> {
    pub iter: usize,
    pub comm_rounds: usize,
    pub rel_sq_error: T,
    /// `(r_primal, r_dual, r_prox)` when a common-regularizer triple exists
    pub residuals: Option<(T, T, T)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    Diverged { iter: usize, reason: String },
}

/// Error trajectory of one run plus its final state.
#[derive(Debug, Clone)]
pub struct RunRecord<T> {
    pub algorithm: String,
    pub seed: Option<u64>,
    pub mu: T,
    pub comm_rounds_per_iter: usize,
    pub rows: Vec<RecordRow<T>>,
    pub status: RunStatus,
    pub final_state: BlockIterate<T>,
    pub wall_time: Duration,
}

impl<T: Scalar> RunRecord<T> {
    pub fn errors(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.rel_sq_error).collect()
    }

    pub fn final_error(&self) -> T {
        self.rows.last().map_or(T::nan(), |r| r.rel_sq_error)
    }

    pub fn diverged(&self) -> bool {
        matches!(self.status, RunStatus::Diverged { .. })
    }
}

/// `Σ_k ‖w_k − w⋆‖² / ‖w⋆‖²` (plain squared distance when `w⋆ = 0`).
pub fn rel_sq_error<T: Scalar>(w: ArrayView2<T>, w_star: ArrayView1<T>) -> T {
    let mut num = T::zero();
    for row in w.rows() {
        num += Zip::from(&row).and(&w_star).fold(T::zero(), |acc, &a, &b| acc + (a - b) * (a - b));
    }
    let den = w_star.dot(&w_star);
    if den > T::zero() {
        num / den
    } else {
        num
    }
}

/// Run options beyond the algorithm itself.
#[derive(Debug, Clone)]
pub struct RunOptions<T> {
    pub iters: usize,
    pub record_every: usize,
    pub init: Option<Array2<T>>,
    pub seed: Option<u64>,
    pub divergence_threshold: T,
    pub residuals: bool,
}

impl<T: Scalar> RunOptions<T> {
    pub fn new(iters: usize, record_every: usize) -> Self {
        RunOptions { iters, record_every, init: None, seed: None, divergence_threshold: T::lit(1e12), residuals: true }
    }
}

/// Iterates `spec` from `w_{-1}` (zero unless overridden), recording rows at
/// iterations `0, r, 2r, …`. Divergence ends the run early with a diagnostic
/// status instead of an error.
pub fn run<T: Scalar>(
    spec: &AlgorithmSpec<T>,
    costs: &SmoothCostSet<T>,
    w_star: ArrayView1<T>,
    opts: &RunOptions<T>,
) -> Result<RunRecord<T>> {
    if opts.iters == 0 || opts.record_every == 0 {
        return Err(Error::Domain("iters and record_every must be at least 1".into()));
    }
    if w_star.len() != costs.dim() {
        return Err(Error::Shape(format!("reference has length {}, expected {}", w_star.len(), costs.dim())));
    }
    let start = Instant::now();
    let init = opts.init.clone().unwrap_or_else(|| Array2::zeros((costs.k(), costs.dim())));
    let mut state = BlockIterate::new(init);
    let residual_inputs = match (&spec.triple, spec.common_prox(), spec.family) {
        (Some(t), Some(p), Family::Puda | Family::Agent(_)) if opts.residuals => Some((t, p)),
        _ => None,
    };
    let row = |state: &BlockIterate<T>, err: T| RecordRow {
        iter: state.iter,
        comm_rounds: state.iter * spec.comm_rounds_per_iter,
        rel_sq_error: err,
        residuals: residual_inputs.map(|(t, p)| fixed_point_residuals(state, costs, p, t, spec.mu)),
    };
    let mut rows = vec![row(&state, rel_sq_error(state.w.view(), w_star))];
    let mut status = RunStatus::Completed;
    for n in 1..=opts.iters {
        if let Err(e) = spec.step(&mut state, costs) {
            match e {
                Error::Divergence { iter, reason } => {
                    status = RunStatus::Diverged { iter, reason };
                    break;
                }
                other => return Err(other),
            }
        }
        let err = rel_sq_error(state.w.view(), w_star);
        if !err.is_finite() || err > opts.divergence_threshold {
            let last = row(&state, err);
            rows.push(RecordRow { residuals: None, ..last });
            status = RunStatus::Diverged { iter: n, reason: format!("relative error {err:e} above threshold") };
            break;
        }
        if n % opts.record_every == 0 {
            rows.push(row(&state, err));
        }
    }
    Ok(RunRecord {
        algorithm: spec.label.clone(),
        seed: opts.seed,
        mu: spec.mu,
        comm_rounds_per_iter: spec.comm_rounds_per_iter,
        rows,
        status,
        final_state: state,
        wall_time: start.elapsed(),
    })
}
