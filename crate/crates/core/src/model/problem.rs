use serde::{Deserialize, Serialize};

use super::expr::ScalarExpr;
use super::parse::{is_numeric_literal, parse_expr};
use super::ModelError;

pub const PROBLEM_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    #[default]
    #[serde(alias = "minimize")]
    Min,
    #[serde(alias = "maximize")]
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl Variable {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.lower).min(self.upper)
    }
}

/// `min f(x)` subject to `g_i(x) = 0`, `h_j(x) <= 0` and a finite box.
#[derive(Debug, Clone, PartialEq)]
pub struct NlpProblem {
    pub variables: Vec<Variable>,
    pub objective: ScalarExpr,
    pub equalities: Vec<ScalarExpr>,
    pub inequalities: Vec<ScalarExpr>,
    pub sense: Sense,
}

/// One problem found by [`NlpProblem::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Where the problem is, e.g. `variables[2] (x)` or `equalities[0]`.
    pub location: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl NlpProblem {
    /// Box-only minimization problem.
    pub fn box_constrained(variables: Vec<Variable>, objective: ScalarExpr) -> Self {
        Self {
            variables,
            objective,
            equalities: Vec::new(),
            inequalities: Vec::new(),
            sense: Sense::Min,
        }
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.lower).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.upper).collect()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.variables.iter().map(Variable::midpoint).collect()
    }

    pub fn is_box_only(&self) -> bool {
        self.equalities.is_empty() && self.inequalities.is_empty()
    }

    /// Componentwise projection onto the box.
    pub fn project(&self, x: &mut [f64]) {
        for (xi, v) in x.iter_mut().zip(&self.variables) {
            *xi = v.clamp(*xi);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.variables)
                .all(|(xi, v)| *xi >= v.lower && *xi <= v.upper)
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Objective value in the problem's own sense.
    pub fn objective_value(&self, x: &[f64]) -> Result<f64, ModelError> {
        self.objective.evaluate(x)
    }

    /// Checks bounds, names and variable references. Never aborts; an empty
    /// list means the problem is usable.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let n = self.dim();
        for (i, v) in self.variables.iter().enumerate() {
            let loc = format!("variables[{i}] ({})", v.name);
            if v.name.is_empty() || is_numeric_literal(&v.name) {
                out.push(Diagnostic {
                    location: loc.clone(),
                    message: "variable name must be non-empty and not a numeric literal".into(),
                });
            }
            if v.name.chars().any(|c| c.is_whitespace() || c == '(' || c == ')') {
                out.push(Diagnostic {
                    location: loc.clone(),
                    message: "variable name may not contain whitespace or parentheses".into(),
                });
            }
            if !v.lower.is_finite() || !v.upper.is_finite() {
                out.push(Diagnostic {
                    location: loc.clone(),
                    message: "finite box required".into(),
                });
            } else if v.lower > v.upper {
                out.push(Diagnostic {
                    location: loc,
                    message: format!("lower bound {} exceeds upper bound {}", v.lower, v.upper),
                });
            }
        }
        for (i, v) in self.variables.iter().enumerate() {
            if self.variables[..i].iter().any(|w| w.name == v.name) {
                out.push(Diagnostic {
                    location: format!("variables[{i}] ({})", v.name),
                    message: "duplicate variable name".into(),
                });
            }
        }
        let mut check = |loc: String, e: &ScalarExpr| {
            if let Some(&bad) = e.support().iter().find(|&&i| i >= n) {
                out.push(Diagnostic {
                    location: loc,
                    message: format!("references undeclared variable index {bad}"),
                });
            }
        };
        check("objective".into(), &self.objective);
        for (i, g) in self.equalities.iter().enumerate() {
            check(format!("equalities[{i}]"), g);
        }
        for (i, h) in self.inequalities.iter().enumerate() {
            check(format!("inequalities[{i}]"), h);
        }
        out
    }

    /// The same problem in minimization sense (`max f` becomes `min -f`).
    pub fn normalized(&self) -> NlpProblem {
        match self.sense {
            Sense::Min => self.clone(),
            Sense::Max => NlpProblem {
                objective: -self.objective.clone(),
                sense: Sense::Min,
                ..self.clone()
            },
        }
    }

    pub fn to_document(&self) -> ProblemDocument {
        let names: Vec<String> = self.variables.iter().map(|v| v.name.clone()).collect();
        let name = |i: usize| names[i].clone();
        ProblemDocument {
            format_version: PROBLEM_FORMAT_VERSION,
            sense: self.sense,
            variables: self
                .variables
                .iter()
                .map(|v| VariableDocument {
                    name: v.name.clone(),
                    lb: v.lower.is_finite().then_some(v.lower),
                    ub: v.upper.is_finite().then_some(v.upper),
                })
                .collect(),
            objective: self.objective.to_prefix_string(&name),
            equalities: self.equalities.iter().map(|e| e.to_prefix_string(&name)).collect(),
            inequalities: self.inequalities.iter().map(|e| e.to_prefix_string(&name)).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("problem document serializes")
    }

    pub fn from_json(src: &str) -> Result<NlpProblem, ModelError> {
        let doc: ProblemDocument = serde_json::from_str(src).map_err(|e| ModelError::Parse(e.to_string()))?;
        doc.into_problem()
    }
}

/// On-disk JSON form of an [`NlpProblem`].
///
/// ```json
/// {
///   "format_version": 1,
///   "sense": "min",
///   "variables": [{"name": "x", "lb": 0.0, "ub": 1.0}],
///   "objective": "(^ (+ x -0.3) 2)",
///   "equalities": [],
///   "inequalities": ["(+ x -0.8)"]
/// }
/// ```
///
/// A missing or `null` bound means unbounded, which validation rejects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub format_version: u32,
    #[serde(default)]
    pub sense: Sense,
    pub variables: Vec<VariableDocument>,
    pub objective: String,
    #[serde(default)]
    pub equalities: Vec<String>,
    #[serde(default)]
    pub inequalities: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDocument {
    pub name: String,
    #[serde(default)]
    pub lb: Option<f64>,
    #[serde(default)]
    pub ub: Option<f64>,
}

impl ProblemDocument {
    pub fn into_problem(self) -> Result<NlpProblem, ModelError> {
        if self.format_version != PROBLEM_FORMAT_VERSION {
            return Err(ModelError::Parse(format!(
                "unsupported format_version {} (expected {PROBLEM_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let variables: Vec<Variable> = self
            .variables
            .iter()
            .map(|v| Variable {
                name: v.name.clone(),
                lower: v.lb.unwrap_or(f64::NEG_INFINITY),
                upper: v.ub.unwrap_or(f64::INFINITY),
            })
            .collect();
        let lookup = |s: &str| variables.iter().position(|v| v.name == s);
        let objective = parse_expr(&self.objective, &lookup)?;
        let equalities = self
            .equalities
            .iter()
            .map(|s| parse_expr(s, &lookup))
            .collect::<Result<_, _>>()?;
        let inequalities = self
            .inequalities
            .iter()
            .map(|s| parse_expr(s, &lookup))
            .collect::<Result<_, _>>()?;
        Ok(NlpProblem {
            variables,
            objective,
            equalities,
            inequalities,
            sense: self.sense,
        })
    }
}
