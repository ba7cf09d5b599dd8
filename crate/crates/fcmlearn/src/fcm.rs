//! Map domain types and the forward dynamics.
//!
//! A map over `n` concept nodes is a weighted digraph stored as an `n x n`
//! matrix `W` with entries in `[-1, 1]`; entry `(j, i)` is the weight of the
//! edge from node `j` to node `i`, so column `i` collects the incoming
//! weights of node `i`. The state update is
//! `A_i(t+1) = f(sum_j A_j(t) * w_ji)` with `f` an [`ActivationSpec`].

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::activation::ActivationSpec;
use crate::error::{Error, Result};

/// Square matrix of edge weights, all entries in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    weights: Array2<f64>,
}

/// Serialized form: `n` plus the row-major weight grid.
#[derive(Serialize, Deserialize)]
struct WeightMatrixRepr {
    n: usize,
    weights: Vec<Vec<f64>>,
}

impl WeightMatrix {
    pub fn new(weights: Array2<f64>) -> Result<Self> {
        let (rows, cols) = weights.dim();
        if rows != cols || rows == 0 {
            return Err(Error::DimensionMismatch(format!(
                "weight matrix must be square and nonempty, got {rows}x{cols}"
            )));
        }
        for (idx, &w) in weights.indexed_iter() {
            if !w.is_finite() {
                return Err(Error::NonFinite(format!("weight at {idx:?}")));
            }
            if w.abs() > 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "weight at {idx:?} is {w}, outside [-1, 1]"
                )));
            }
        }
        Ok(Self { weights })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            weights: Array2::zeros((n, n)),
        }
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    /// Weight of the edge from node `j` to node `i`.
    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.weights[(j, i)]
    }

    /// Incoming weights of node `i` (the `i`-th column).
    pub fn column(&self, i: usize) -> Array1<f64> {
        self.weights.column(i).to_owned()
    }

    /// Replace column `i` with `col`. Values must lie in `[-1, 1]`.
    pub fn set_column(&mut self, i: usize, col: &Array1<f64>) -> Result<()> {
        if col.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "column length {} does not match node count {}",
                col.len(),
                self.n()
            )));
        }
        for &w in col {
            if !w.is_finite() || w.abs() > 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "column value {w} outside [-1, 1]"
                )));
            }
        }
        self.weights.column_mut(i).assign(col);
        Ok(())
    }
}

impl Serialize for WeightMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = WeightMatrixRepr {
            n: self.n(),
            weights: self
                .weights
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for WeightMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let repr = WeightMatrixRepr::deserialize(deserializer)?;
        if repr.weights.len() != repr.n || repr.weights.iter().any(|r| r.len() != repr.n) {
            return Err(D::Error::custom(format!(
                "weights grid does not match declared n = {}",
                repr.n
            )));
        }
        let flat: Vec<f64> = repr.weights.into_iter().flatten().collect();
        let arr = Array2::from_shape_vec((repr.n, repr.n), flat)
            .map_err(|e| D::Error::custom(e.to_string()))?;
        WeightMatrix::new(arr).map_err(|e| D::Error::custom(e.to_string()))
    }
}

/// Node states at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    values: Array1<f64>,
}

impl StateVector {
    pub fn new(values: Array1<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DimensionMismatch("empty state vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state vector".into()));
        }
        Ok(Self { values })
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        Self::new(Array1::from_vec(values))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }
}

/// Observed behavior of a system: `m` initial state vectors and, for each,
/// a `k x n` response matrix whose row `t` is the state observed at step
/// `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSet {
    initials: Vec<StateVector>,
    sequences: Vec<Array2<f64>>,
}

impl ResponseSet {
    pub fn new(initials: Vec<StateVector>, sequences: Vec<Array2<f64>>) -> Result<Self> {
        if initials.is_empty() || initials.len() != sequences.len() {
            return Err(Error::DimensionMismatch(format!(
                "need matching nonempty initials/sequences, got {} and {}",
                initials.len(),
                sequences.len()
            )));
        }
        let n = initials[0].len();
        let k = sequences[0].nrows();
        if k < 2 {
            return Err(Error::DimensionMismatch(format!(
                "sequences must have at least 2 steps, got {k}"
            )));
        }
        for (s, (init, seq)) in initials.iter().zip(&sequences).enumerate() {
            if init.len() != n || seq.ncols() != n || seq.nrows() != k {
                return Err(Error::DimensionMismatch(format!(
                    "sequence {s} has shape {}x{} with initial length {}, expected {k}x{n} and {n}",
                    seq.nrows(),
                    seq.ncols(),
                    init.len()
                )));
            }
            if seq.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("sequence {s}")));
            }
        }
        Ok(Self { initials, sequences })
    }

    /// Number of initial state vectors.
    pub fn m(&self) -> usize {
        self.initials.len()
    }

    /// Sequence length.
    pub fn k(&self) -> usize {
        self.sequences[0].nrows()
    }

    /// Node count.
    pub fn n(&self) -> usize {
        self.initials[0].len()
    }

    pub fn initials(&self) -> &[StateVector] {
        &self.initials
    }

    pub fn sequences(&self) -> &[Array2<f64>] {
        &self.sequences
    }

    /// New set with sequence `s` removed. Fails if fewer than two sequences
    /// would remain meaningful.
    pub fn without_sequence(&self, s: usize) -> Result<ResponseSet> {
        if s >= self.m() {
            return Err(Error::InvalidParameter(format!(
                "sequence index {s} out of range (m = {})",
                self.m()
            )));
        }
        if self.m() < 2 {
            return Err(Error::InvalidParameter(
                "cannot drop a sequence from a single-sequence set".into(),
            ));
        }
        let initials = self
            .initials
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != s)
            .map(|(_, v)| v.clone())
            .collect();
        let sequences = self
            .sequences
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != s)
            .map(|(_, v)| v.clone())
            .collect();
        ResponseSet::new(initials, sequences)
    }

    /// New set holding only sequence `s`.
    pub fn only_sequence(&self, s: usize) -> Result<ResponseSet> {
        if s >= self.m() {
            return Err(Error::InvalidParameter(format!(
                "sequence index {s} out of range (m = {})",
                self.m()
            )));
        }
        ResponseSet::new(
            vec![self.initials[s].clone()],
            vec![self.sequences[s].clone()],
        )
    }
}

/// One synchronous update of all node states.
pub fn step(state: &StateVector, w: &WeightMatrix, spec: &ActivationSpec) -> Result<StateVector> {
    if state.len() != w.n() {
        return Err(Error::DimensionMismatch(format!(
            "state length {} does not match node count {}",
            state.len(),
            w.n()
        )));
    }
    let weighted = state.values().dot(w.weights());
    StateVector::new(weighted.mapv(|x| spec.activate(x)))
}

/// Iterate [`step`] `k` times from `initial`; row `t` of the result is the
/// state after `t + 1` updates.
pub fn simulate(
    initial: &StateVector,
    w: &WeightMatrix,
    spec: &ActivationSpec,
    k: usize,
) -> Result<Array2<f64>> {
    if k == 0 {
        return Err(Error::InvalidParameter("simulation needs k >= 1".into()));
    }
    let n = w.n();
    let mut out = Array2::zeros((k, n));
    let mut current = step(initial, w, spec)?;
    out.row_mut(0).assign(current.values());
    for t in 1..k {
        current = step(&current, w, spec)?;
        out.row_mut(t).assign(current.values());
    }
    Ok(out)
}
