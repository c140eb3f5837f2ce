use serde::Serialize;

use crate::error::{Error, Result};

/// One evaluated grid point.
#[derive(Debug, Clone, Serialize)]
pub struct TuneCandidate<P> {
    pub params: P,
    /// Validation objective (lower is better); None if evaluation failed.
    pub objective: Option<f64>,
    pub error: Option<String>,
    pub chosen: bool,
}

/// Full tuning trace, serializable next to the fitted parameters.
#[derive(Debug, Clone, Serialize)]
pub struct TuneTrace<P> {
    pub objective_name: String,
    pub candidates: Vec<TuneCandidate<P>>,
    pub best_index: usize,
}

/// Exhaustively evaluate `candidates` in order and pick the lowest
/// objective. Ties keep the earliest candidate, so callers encode tie-break
/// preferences (smaller beta, then smaller rho) by generating grids in
/// ascending order. Per-candidate failures are isolated; if every candidate
/// fails the error carries all diagnostics.
pub fn tune_grid<P: Clone>(
    objective_name: &str,
    candidates: &[P],
    mut evaluate: impl FnMut(&P) -> Result<f64>,
) -> Result<(P, TuneTrace<P>)> {
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("empty tuning grid".into()));
    }
    let mut trace: Vec<TuneCandidate<P>> = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, f64)> = None;
    for (idx, params) in candidates.iter().enumerate() {
        match evaluate(params) {
            Ok(obj) if obj.is_finite() => {
                if best.map_or(true, |(_, b)| obj < b) {
                    best = Some((idx, obj));
                }
                trace.push(TuneCandidate {
                    params: params.clone(),
                    objective: Some(obj),
                    error: None,
                    chosen: false,
                });
            }
            Ok(obj) => trace.push(TuneCandidate {
                params: params.clone(),
                objective: None,
                error: Some(format!("non-finite objective {obj}")),
                chosen: false,
            }),
            Err(e) => trace.push(TuneCandidate {
                params: params.clone(),
                objective: None,
                error: Some(e.to_string()),
                chosen: false,
            }),
        }
    }
    let Some((best_index, _)) = best else {
        let diagnostics = trace
            .iter()
            .map(|c| c.error.clone().unwrap_or_default())
            .collect();
        return Err(Error::GridExhausted(diagnostics));
    };
    trace[best_index].chosen = true;
    Ok((
        candidates[best_index].clone(),
        TuneTrace {
            objective_name: objective_name.to_string(),
            candidates: trace,
            best_index,
        },
    ))
}
