use super::{ProblemError, Result};
use crate::matlin::{fro_norm, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Both dimensions ≥ 2; routed to the matrix optimizer.
    Matrix,
    /// One dimension equal to 1; routed to AdamW.
    Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Mat,
    pub kind: ParamKind,
}

/// Ordered, uniquely named parameters of one model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    params: Vec<Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a parameter, classifying it by shape.
    pub fn push(&mut self, name: impl Into<String>, value: Mat) -> Result<()> {
        let kind = if value.rows() == 1 || value.cols() == 1 {
            ParamKind::Vector
        } else {
            ParamKind::Matrix
        };
        self.push_kind(name, value, kind)
    }

    pub fn push_kind(&mut self, name: impl Into<String>, value: Mat, kind: ParamKind) -> Result<()> {
        let name = name.into();
        if self.params.iter().any(|p| p.name == name) {
            return Err(ProblemError::DuplicateParam(name));
        }
        if kind == ParamKind::Vector && value.rows() != 1 && value.cols() != 1 {
            return Err(ProblemError::Invalid(format!("vector parameter `{name}` must have a unit dimension")));
        }
        self.params.push(Param { name, value, kind });
        Ok(())
    }

    pub fn with(mut self, name: impl Into<String>, value: Mat) -> Result<Self> {
        self.push(name, value)?;
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Result<&Mat> {
        self.params
            .iter()
            .find(|p| p.name == name)
            .map(|p| &p.value)
            .ok_or_else(|| ProblemError::MissingParam(name.to_string()))
    }

    /// Fetches `name` and checks its shape.
    pub fn expect(&self, name: &str, shape: (usize, usize)) -> Result<&Mat> {
        let m = self.get(name)?;
        if m.shape() != shape {
            return Err(ProblemError::ParamShape {
                name: name.to_string(),
                got: m.shape(),
                want: shape,
            });
        }
        Ok(m)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Frobenius norm of all parameters stacked together.
    pub fn fro_norm(&self) -> f64 {
        self.params.iter().map(|p| fro_norm(&p.value).powi(2)).sum::<f64>().sqrt()
    }

    pub fn num_entries(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.is_finite())
    }

    /// `a·self + b·other`, matching parameters by position and name.
    pub fn lin_comb(&self, a: f64, other: &ParamSet, b: f64) -> Result<ParamSet> {
        if self.len() != other.len() {
            return Err(ProblemError::Invalid("parameter sets differ in length".into()));
        }
        let params = self
            .params
            .iter()
            .zip(&other.params)
            .map(|(p, q)| {
                if p.name != q.name {
                    return Err(ProblemError::MissingParam(p.name.clone()));
                }
                Ok(Param {
                    name: p.name.clone(),
                    value: p.value.lin_comb(a, &q.value, b)?,
                    kind: p.kind,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ParamSet { params })
    }
}
